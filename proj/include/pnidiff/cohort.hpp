#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pnidiff/crop.hpp"

namespace pnidiff {

// Geometry and intensity levels for synthetic phantom cases. The class
// signal is a thin bright rim of amplitude rim_delta on an arc of the tumor
// boundary, present only for positive cases.
struct PhantomConfig {
  double background_intensity = 0.10;
  double liver_intensity = 0.45;
  double tumor_intensity = 0.78;
  double texture_amplitude = 0.04;
  double rim_delta = 0.40;
  double rim_thickness = 0.45;  // shell (1, 1+t] in normalized tumor radius
};

struct Case {
  std::string id;
  Volume volume;
  LabelMap labels;
  int pni = 0;
  Provenance provenance = Provenance::Real;
  std::string donor_id;  // synthetic only
  uint64_t seed = 0;
};

struct Cohort {
  std::vector<Case> cases;
  uint64_t seed = 0;

  int64_t count(int pni) const;
};

// Deterministic per seed. Ellipsoidal liver with an embedded ellipsoidal
// tumor and smooth textures; positive and negative cases consume identical
// random draws, so a same-seed pair differs only on the rim voxels.
Case generate_phantom(uint64_t seed, int pni, std::array<int64_t, 3> dims,
                      const PhantomConfig& config = {});

Cohort build_cohort(uint64_t seed, int n_pos, int n_neg, std::array<int64_t, 3> dims,
                    const PhantomConfig& config = {});

// Fraction of liver-or-tumor voxels occupied by tumor; the optional cohort
// exclusion filter compares this against a threshold.
double tumor_liver_fraction(const Case& c);
Cohort filter_tumor_fraction(const Cohort& cohort, double max_fraction);

struct FoldSplit {
  int fold_index = 1;  // 1-based
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
};

// Class-stratified shuffled partition into k folds. Cases are dealt
// round-robin class by class with a continuing fold pointer, so validation
// sizes differ by at most one and per-fold class ratios stay within one case
// of the global ratio.
std::vector<FoldSplit> stratified_kfold(const Cohort& cohort, int k, uint64_t seed);

// round(ratio * (n_neg - n_pos)); the ladder count for one training split.
int64_t synthetic_deficit(int64_t n_pos, int64_t n_neg, double ratio);

// Produces one synthetic patch from a donor's masks; supplied by the
// generative stage (or a stub in protocol tests).
using SyntheticGenerator =
    std::function<PatchPair(const PatchPair& donor, uint64_t seed, const std::string& synth_id)>;

// Appends synthetic positive patches to a training set until the class
// deficit is filled at the given ratio. Donors rotate round-robin through
// the training positives; per-patch seeds derive from (base_seed, donor,
// replica) so parallel and serial generation agree.
std::vector<PatchPair> balance_fold(const std::vector<PatchPair>& train_patches, double ratio,
                                    const SyntheticGenerator& generate, uint64_t base_seed);

}  // namespace pnidiff
