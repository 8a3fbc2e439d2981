#pragma once

#include "pnidiff/layers.hpp"

namespace pnidiff {

struct VaeConfig {
  int64_t in_channels = 2;
  int64_t base_channels = 4;    // F; encoder widths F, 2F, 2F
  int64_t latent_channels = 4;  // C_z
};

// Small 3D convolutional VAE: two stride-2 stages down to a latent grid at
// 1/4 spatial resolution with mean and log-variance heads, mirrored by an
// upsample/conv decoder. relu activations, no normalization layers.
struct Vae {
  VaeConfig cfg;
  Conv3dLayer enc0, enc1, enc2;
  Conv3dLayer mu_head, logvar_head;
  Conv3dLayer dec0, dec1, dec2, dec3;

  static Vae create(const VaeConfig& cfg, uint64_t seed);

  // (mu, logvar) over [C_z, D/4, H/4, W/4]; input spatial extents must be
  // divisible by 4.
  std::pair<Var, Var> encode(const Var& x) const;
  Var encode_mu(const Var& x) const;  // skips the logvar head
  Var decode(const Var& z) const;     // back to [in_channels, D, H, W]

  std::vector<NamedParam> named_params() const;
  std::vector<Var> params() const { return values_of(named_params()); }
  void set_trainable(bool t) const { pnidiff::set_trainable(named_params(), t); }
  uint64_t checksum() const { return param_checksum(named_params()); }
};

// z = mu + exp(logvar/2) * eps with a deterministic-limit guard: the scale
// term is exactly 0 once logvar < -80.
Grid reparameterize(const Grid& mu, const Grid& logvar, Rng& rng);

// mean L1 reconstruction error plus kl_weight * mean KL against N(0, I)
Var vae_loss(const Var& recon, const Var& target, const Var& mu, const Var& logvar,
             double kl_weight = 1e-7);

struct VaeTrainConfig {
  int64_t steps = 6000;  // optimizer steps
  int64_t batch = 4;
  double lr = 1e-6;
  double kl_weight = 1e-7;
  double weight_decay = 0.0;
  uint64_t seed = 0;
  int64_t eval_every = 50;  // deterministic full-set checkpoint cadence
};

struct TrainHistory {
  std::vector<double> losses;  // one entry per optimizer step
  double initial_eval = 0.0;   // full-set metric before training
  double final_eval = 0.0;     // full-set metric of the returned parameters
};

// Deterministic-mean reconstruction L1 over a patch set (no sampling).
double vae_reconstruction_loss(const Vae& vae, const std::vector<Grid>& patches);

// Trains in place; returns the best checkpoint by the deterministic
// reconstruction metric, evaluated every eval_every steps.
TrainHistory train_vae(Vae& vae, const std::vector<Grid>& patches, const VaeTrainConfig& cfg);

}  // namespace pnidiff
