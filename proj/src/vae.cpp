#include "pnidiff/vae.hpp"

#include <algorithm>
#include <cmath>

#include "pnidiff/optim.hpp"

namespace pnidiff {

Vae Vae::create(const VaeConfig& cfg, uint64_t seed) {
  Rng r(derive_seed(seed, "vae-init"));
  const int64_t F = cfg.base_channels;
  Vae v;
  v.cfg = cfg;
  v.enc0 = Conv3dLayer::create(F, cfg.in_channels, 3, {1, 1, 1}, {1, 1, 1}, r);
  v.enc1 = Conv3dLayer::create(2 * F, F, 3, {1, 1, 1}, {2, 2, 2}, r);
  v.enc2 = Conv3dLayer::create(2 * F, 2 * F, 3, {1, 1, 1}, {2, 2, 2}, r);
  v.mu_head = Conv3dLayer::create(cfg.latent_channels, 2 * F, 3, {1, 1, 1}, {1, 1, 1}, r);
  v.logvar_head = Conv3dLayer::create(cfg.latent_channels, 2 * F, 3, {1, 1, 1}, {1, 1, 1}, r);
  v.dec0 = Conv3dLayer::create(2 * F, cfg.latent_channels, 3, {1, 1, 1}, {1, 1, 1}, r);
  v.dec1 = Conv3dLayer::create(F, 2 * F, 3, {1, 1, 1}, {1, 1, 1}, r);
  v.dec2 = Conv3dLayer::create(F, F, 3, {1, 1, 1}, {1, 1, 1}, r);
  v.dec3 = Conv3dLayer::create(cfg.in_channels, F, 3, {1, 1, 1}, {1, 1, 1}, r);
  // start the logvar head at zero so early samples stay near the mean
  std::fill(v.logvar_head.w.value_mut().data.begin(), v.logvar_head.w.value_mut().data.end(), 0.0);
  return v;
}

namespace {

Var shared_trunk(const Vae& v, const Var& x) {
  const Shape& s = x.value().shape;
  if (s.size() != 4)
    throw std::invalid_argument("vae encode: input must be [C,D,H,W], got " + shape_to_string(s));
  if (s[0] != v.cfg.in_channels)
    throw std::invalid_argument("vae encode: expected " + std::to_string(v.cfg.in_channels) +
                                " channels, got " + std::to_string(s[0]));
  for (int i = 1; i < 4; ++i)
    if (s[static_cast<size_t>(i)] % 4 != 0)
      throw std::invalid_argument("vae encode: spatial extent " +
                                  std::to_string(s[static_cast<size_t>(i)]) + " on axis " +
                                  std::to_string(i) + " is not divisible by 4");
  Var h = relu(v.enc0(x));
  h = relu(v.enc1(h));
  return relu(v.enc2(h));
}

}  // namespace

std::pair<Var, Var> Vae::encode(const Var& x) const {
  Var h = shared_trunk(*this, x);
  return {mu_head(h), logvar_head(h)};
}

Var Vae::encode_mu(const Var& x) const { return mu_head(shared_trunk(*this, x)); }

Var Vae::decode(const Var& z) const {
  const Shape& s = z.value().shape;
  if (s.size() != 4 || s[0] != cfg.latent_channels)
    throw std::invalid_argument("vae decode: expected [" + std::to_string(cfg.latent_channels) +
                                ",d,h,w] latent, got " + shape_to_string(s));
  Var h = relu(dec0(z));
  h = upsample_nearest(h, {2 * s[1], 2 * s[2], 2 * s[3]});
  h = relu(dec1(h));
  h = upsample_nearest(h, {4 * s[1], 4 * s[2], 4 * s[3]});
  h = relu(dec2(h));
  return dec3(h);
}

std::vector<NamedParam> Vae::named_params() const {
  std::vector<NamedParam> out;
  enc0.collect("vae.enc0", out);
  enc1.collect("vae.enc1", out);
  enc2.collect("vae.enc2", out);
  mu_head.collect("vae.mu", out);
  logvar_head.collect("vae.logvar", out);
  dec0.collect("vae.dec0", out);
  dec1.collect("vae.dec1", out);
  dec2.collect("vae.dec2", out);
  dec3.collect("vae.dec3", out);
  return out;
}

Grid reparameterize(const Grid& mu, const Grid& logvar, Rng& rng) {
  if (!mu.same_shape(logvar))
    throw std::invalid_argument("reparameterize: mu/logvar shape mismatch");
  Grid z = mu;
  for (int64_t i = 0; i < z.numel(); ++i) {
    const double lv = logvar[i];
    const double scale = lv < -80.0 ? 0.0 : std::exp(0.5 * lv);
    z[i] += scale * rng.normal();
  }
  return z;
}

Var vae_loss(const Var& recon, const Var& target, const Var& mu, const Var& logvar,
             double kl_weight) {
  return add(l1_loss(recon, target), scale(kl_standard_normal(mu, logvar), kl_weight));
}

double vae_reconstruction_loss(const Vae& vae, const std::vector<Grid>& patches) {
  double total = 0.0;
  for (const auto& p : patches) {
    Var x = Var::constant(p);
    Var recon = vae.decode(vae.encode_mu(x));
    total += l1_loss(recon, x).value()[0];
  }
  return total / static_cast<double>(patches.size());
}

TrainHistory train_vae(Vae& vae, const std::vector<Grid>& patches, const VaeTrainConfig& cfg) {
  if (patches.empty()) throw std::invalid_argument("train_vae: empty training split");

  TrainHistory hist;
  hist.initial_eval = vae_reconstruction_loss(vae, patches);

  std::vector<Var> params = vae.params();
  for (auto& p : params) p.set_requires_grad(true);
  OptimState opt;
  opt.lr = cfg.lr;
  opt.weight_decay = cfg.weight_decay;

  Rng rng(derive_seed(cfg.seed, "vae-train"));
  double best_eval = hist.initial_eval;
  std::vector<Grid> best;
  for (const auto& p : params) best.push_back(p.value());

  for (int64_t step = 0; step < cfg.steps; ++step) {
    zero_grads(params);
    Var total;
    for (int64_t b = 0; b < cfg.batch; ++b) {
      const auto& patch = patches[rng.bounded(patches.size())];
      Var x = Var::constant(patch);
      auto [mu, logvar] = vae.encode(x);
      Var eps = Var::constant(random_normal(mu.value().shape, rng));
      Var z = add(mu, mul(vexp(scale(logvar, 0.5)), eps));
      Var loss = vae_loss(vae.decode(z), x, mu, logvar, cfg.kl_weight);
      total = total.defined() ? add(total, loss) : loss;
    }
    total = scale(total, 1.0 / static_cast<double>(cfg.batch));
    hist.losses.push_back(total.value()[0]);
    backward(total);
    adamw_step(params, opt);

    if ((step + 1) % cfg.eval_every == 0 || step + 1 == cfg.steps) {
      const double eval = vae_reconstruction_loss(vae, patches);
      if (eval < best_eval) {
        best_eval = eval;
        for (size_t i = 0; i < params.size(); ++i) best[i] = params[i].value();
      }
    }
  }

  for (size_t i = 0; i < params.size(); ++i) params[i].value_mut() = best[i];
  hist.final_eval = best_eval;
  return hist;
}

}  // namespace pnidiff
