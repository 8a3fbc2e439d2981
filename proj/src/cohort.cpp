#include "pnidiff/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pnidiff {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Smooth deterministic texture: three sinusoids with random frequency and
// phase, normalized to roughly [-1, 1].
struct TextureField {
  double fx[3], fy[3], fz[3], phase[3];

  static TextureField draw(Rng& r) {
    TextureField t{};
    for (int j = 0; j < 3; ++j) {
      t.fx[j] = r.uniform(1.0, 3.0);
      t.fy[j] = r.uniform(1.0, 3.0);
      t.fz[j] = r.uniform(1.0, 3.0);
      t.phase[j] = r.uniform(0.0, kTwoPi);
    }
    return t;
  }

  double operator()(double ux, double uy, double uz) const {
    double s = 0.0;
    for (int j = 0; j < 3; ++j)
      s += std::sin(kTwoPi * (fx[j] * ux + fy[j] * uy + fz[j] * uz) + phase[j]);
    return s / 3.0;
  }
};

}  // namespace

int64_t Cohort::count(int pni) const {
  int64_t n = 0;
  for (const auto& c : cases) n += (c.pni == pni);
  return n;
}

Case generate_phantom(uint64_t seed, int pni, std::array<int64_t, 3> dims,
                      const PhantomConfig& config) {
  if (pni != 0 && pni != 1) throw std::invalid_argument("generate_phantom: pni must be 0 or 1");
  for (int64_t d : dims)
    if (d < 8) throw std::invalid_argument("generate_phantom: dims must be >= 8 per axis");

  Rng r(seed);
  const TextureField tex_body = TextureField::draw(r);
  const TextureField tex_tumor = TextureField::draw(r);

  double lc[3], la[3];
  for (int i = 0; i < 3; ++i) {
    const double d = static_cast<double>(dims[static_cast<size_t>(i)]);
    lc[i] = d * (0.5 + r.uniform(-0.08, 0.08));
    la[i] = d * r.uniform(0.27, 0.33);
    la[i] = std::min(la[i], std::min(lc[i] - 1.0, d - 2.0 - lc[i]));
    la[i] = std::max(la[i], 2.0);
  }

  // tumor ellipsoid fully inside the liver: offset magnitude plus the worst
  // semi-axis ratio must stay below 0.85 in normalized liver coordinates
  double ta[3], tc[3];
  double ratio[3];
  for (int i = 0; i < 3; ++i) ratio[i] = r.uniform(0.30, 0.45);
  double dir[3] = {r.normal(), r.normal(), r.normal()};
  const double dn = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
  for (double& d : dir) d /= (dn > 0 ? dn : 1.0);
  const double offset_mag = r.uniform(0.0, 0.35);

  double shrink = 1.0;
  bool placed = false;
  for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
    double max_ratio = 0.0;
    for (int i = 0; i < 3; ++i) {
      ta[i] = std::max(la[i] * ratio[i] * shrink, 1.2);
      max_ratio = std::max(max_ratio, ta[i] / la[i]);
    }
    if (offset_mag + max_ratio <= 0.85) {
      for (int i = 0; i < 3; ++i) tc[i] = lc[i] + offset_mag * dir[i] * la[i];
      placed = true;
    } else {
      shrink *= 0.9;
    }
  }
  if (!placed)
    throw std::runtime_error("generate_phantom: could not fit tumor inside liver after 100 attempts");

  // rim parameters are drawn for every case so positive and negative
  // phantoms with the same seed share identical geometry and texture
  double rim_dir[3] = {r.normal(), r.normal(), r.normal()};
  const double rn = std::sqrt(rim_dir[0] * rim_dir[0] + rim_dir[1] * rim_dir[1] +
                              rim_dir[2] * rim_dir[2]);
  for (double& d : rim_dir) d /= (rn > 0 ? rn : 1.0);
  const double cos_arc = r.uniform(-0.6, 0.2);

  Case out;
  out.id = "case";
  out.pni = pni;
  out.seed = seed;
  out.volume.grid = Grid({dims[0], dims[1], dims[2]});
  out.labels.grid = Grid({dims[0], dims[1], dims[2]});

  const double shell_hi = (1.0 + config.rim_thickness) * (1.0 + config.rim_thickness);
  auto fill = [&](double rim_lo_sq, double rim_hi_sq, bool use_arc) -> int64_t {
    int64_t rim_count = 0;
    for (int64_t x = 0; x < dims[0]; ++x)
      for (int64_t y = 0; y < dims[1]; ++y)
        for (int64_t z = 0; z < dims[2]; ++z) {
          const double px = static_cast<double>(x), py = static_cast<double>(y),
                       pz = static_cast<double>(z);
          const double lx = (px - lc[0]) / la[0], ly = (py - lc[1]) / la[1],
                       lz = (pz - lc[2]) / la[2];
          const double lsq = lx * lx + ly * ly + lz * lz;
          const double txn = (px - tc[0]) / ta[0], tyn = (py - tc[1]) / ta[1],
                       tzn = (pz - tc[2]) / ta[2];
          const double tsq = txn * txn + tyn * tyn + tzn * tzn;

          const double ux = px / static_cast<double>(dims[0]);
          const double uy = py / static_cast<double>(dims[1]);
          const double uz = pz / static_cast<double>(dims[2]);

          double intensity;
          double label;
          if (tsq <= 1.0) {
            label = 2.0;
            intensity = config.tumor_intensity + config.texture_amplitude * tex_tumor(ux, uy, uz);
          } else if (lsq <= 1.0) {
            label = 1.0;
            intensity = config.liver_intensity + config.texture_amplitude * tex_body(ux, uy, uz);
            if (pni == 1 && tsq > rim_lo_sq && tsq <= rim_hi_sq) {
              bool in_arc = true;
              if (use_arc) {
                const double ox = px - tc[0], oy = py - tc[1], oz = pz - tc[2];
                const double on = std::sqrt(ox * ox + oy * oy + oz * oz);
                in_arc = on > 0 && (ox * rim_dir[0] + oy * rim_dir[1] + oz * rim_dir[2]) / on >=
                                       cos_arc;
              }
              if (in_arc) {
                intensity += config.rim_delta;
                ++rim_count;
              }
            }
          } else {
            label = 0.0;
            intensity =
                config.background_intensity + 0.5 * config.texture_amplitude * tex_body(ux, uy, uz);
          }
          out.volume.grid.at(x, y, z) = intensity;
          out.labels.grid.at(x, y, z) = label;
        }
    return rim_count;
  };

  int64_t rim = fill(1.0, shell_hi, true);
  if (pni == 1 && rim == 0) {
    // degenerate arc placement; retry on the full shell, then a wider one
    rim = fill(1.0, shell_hi, false);
    if (rim == 0) fill(1.0, shell_hi * 2.0, false);
  }
  return out;
}

Cohort build_cohort(uint64_t seed, int n_pos, int n_neg, std::array<int64_t, 3> dims,
                    const PhantomConfig& config) {
  if (n_pos < 1 || n_neg < 1)
    throw std::invalid_argument("build_cohort: class counts must be >= 1");
  Cohort cohort;
  cohort.seed = seed;
  cohort.cases.reserve(static_cast<size_t>(n_pos + n_neg));
  const int total = n_pos + n_neg;
  char buf[16];
  for (int i = 0; i < total; ++i) {
    const int pni = i < n_pos ? 1 : 0;
    const uint64_t case_seed = derive_seed(seed, "phantom", static_cast<uint64_t>(i));
    Case c = generate_phantom(case_seed, pni, dims, config);
    std::snprintf(buf, sizeof(buf), "case_%03d", i);
    c.id = buf;
    cohort.cases.push_back(std::move(c));
  }
  return cohort;
}

double tumor_liver_fraction(const Case& c) {
  int64_t tumor = 0, organ = 0;
  for (double v : c.labels.grid.data) {
    if (v == 2.0) ++tumor;
    if (v == 1.0 || v == 2.0) ++organ;
  }
  if (organ == 0) return 0.0;
  return static_cast<double>(tumor) / static_cast<double>(organ);
}

Cohort filter_tumor_fraction(const Cohort& cohort, double max_fraction) {
  Cohort out;
  out.seed = cohort.seed;
  for (const auto& c : cohort.cases)
    if (tumor_liver_fraction(c) <= max_fraction) out.cases.push_back(c);
  return out;
}

std::vector<FoldSplit> stratified_kfold(const Cohort& cohort, int k, uint64_t seed) {
  if (k < 2) throw std::invalid_argument("stratified_kfold: k must be >= 2");

  std::vector<std::string> classes[2];
  for (const auto& c : cohort.cases) classes[c.pni == 1 ? 1 : 0].push_back(c.id);
  for (int cls = 0; cls < 2; ++cls)
    if (static_cast<int>(classes[cls].size()) < k)
      throw std::invalid_argument("stratified_kfold: class " + std::to_string(cls) + " has " +
                                  std::to_string(classes[cls].size()) + " members, need >= " +
                                  std::to_string(k));

  Rng r(derive_seed(seed, "kfold"));
  for (int cls = 1; cls >= 0; --cls) {  // positives shuffled first
    auto& ids = classes[cls];
    for (size_t i = ids.size(); i > 1; --i)
      std::swap(ids[i - 1], ids[static_cast<size_t>(r.bounded(i))]);
  }

  std::vector<FoldSplit> folds(static_cast<size_t>(k));
  for (int f = 0; f < k; ++f) folds[static_cast<size_t>(f)].fold_index = f + 1;

  // deal round-robin, class by class, with a continuing fold pointer so
  // validation sizes stay balanced across classes
  int pointer = 0;
  for (int cls = 1; cls >= 0; --cls)
    for (const auto& id : classes[cls]) {
      folds[static_cast<size_t>(pointer)].val_ids.push_back(id);
      pointer = (pointer + 1) % k;
    }

  for (auto& fold : folds) {
    std::vector<std::string> sorted_val = fold.val_ids;
    std::sort(sorted_val.begin(), sorted_val.end());
    for (const auto& c : cohort.cases)
      if (!std::binary_search(sorted_val.begin(), sorted_val.end(), c.id))
        fold.train_ids.push_back(c.id);
  }
  return folds;
}

int64_t synthetic_deficit(int64_t n_pos, int64_t n_neg, double ratio) {
  if (n_neg < n_pos)
    throw std::invalid_argument("synthetic_deficit: expected the positive class to be the minority");
  if (ratio < 0.0 || ratio > 1.0)
    throw std::invalid_argument("synthetic_deficit: ratio must be in [0, 1]");
  return std::llround(ratio * static_cast<double>(n_neg - n_pos));
}

std::vector<PatchPair> balance_fold(const std::vector<PatchPair>& train_patches, double ratio,
                                    const SyntheticGenerator& generate, uint64_t base_seed) {
  std::vector<const PatchPair*> donors;
  int64_t n_pos = 0, n_neg = 0;
  for (const auto& p : train_patches) {
    if (p.provenance != Provenance::Real)
      throw std::invalid_argument("balance_fold: training input already contains synthetic patches");
    if (p.pni == 1) {
      ++n_pos;
      donors.push_back(&p);
    } else {
      ++n_neg;
    }
  }

  const int64_t deficit = synthetic_deficit(n_pos, n_neg, ratio);
  std::vector<PatchPair> out = train_patches;
  if (deficit == 0) return out;
  if (donors.empty()) throw std::invalid_argument("balance_fold: no positive donors available");

  for (int64_t j = 0; j < deficit; ++j) {
    const PatchPair& donor = *donors[static_cast<size_t>(j % static_cast<int64_t>(donors.size()))];
    const int64_t replica = j / static_cast<int64_t>(donors.size());
    const uint64_t seed =
        derive_seed(base_seed, "synth", hash_str(donor.case_id), static_cast<uint64_t>(replica));
    const std::string synth_id = donor.case_id + "_s" + std::to_string(replica);
    PatchPair s = generate(donor, seed, synth_id);
    s.provenance = Provenance::Synthetic;
    s.donor_id = donor.case_id;
    s.case_id = synth_id;
    s.pni = donor.pni;  // class identity inherited from the donor mask
    s.check_invariants();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace pnidiff
