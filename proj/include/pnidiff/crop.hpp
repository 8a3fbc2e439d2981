#pragma once

#include <optional>
#include <string>

#include "pnidiff/nifti.hpp"

namespace pnidiff {

// Fixed crop extents; each must be >= 1 and even so the center splits evenly.
struct CropSpec {
  std::array<int64_t, 3> size{96, 96, 48};

  void validate() const;
};

enum class Provenance { Real, Synthetic };

// Dual-channel tumor-centered patch. Channel 1 holds intensities on the
// peritumoral region (liver or tumor), channel 2 on the tumor only; the label
// channels are the corresponding binary masks.
struct PatchPair {
  Grid image;   // [2, cx, cy, cz]
  Grid labels;  // [2, cx, cy, cz], values in {0,1}
  Provenance provenance = Provenance::Real;
  int pni = 0;
  std::string case_id;
  std::string donor_id;                    // synthetic only
  std::array<int64_t, 3> crop_start{0, 0, 0};

  void check_invariants() const;  // throws on violation
};

struct BoundingBox {
  std::array<int64_t, 3> lo;  // componentwise minimum
  std::array<int64_t, 3> hi;  // componentwise maximum + 1 (exclusive)
};

// Componentwise extent of label-2 voxels; nullopt when the map has none.
std::optional<BoundingBox> tumor_extent(const LabelMap& labels);

// start = max(center - C/2, 0), then shifted down so the window fits when it
// would overflow the upper edge; when dims < C the window covers [0, dims)
// and the deficit is zero-filled by the crop. end = start + C always.
struct CropWindow {
  std::array<int64_t, 3> start;
  std::array<int64_t, 3> end;
};
CropWindow crop_window(const std::array<int64_t, 3>& center, const CropSpec& spec,
                       const std::array<int64_t, 3>& dims);

// The full crop: tumor box -> floor-midpoint center -> clamped window ->
// masked dual-channel patch. An empty tumor yields all-zero image and label
// patches of the requested size (the pni label is preserved).
PatchPair tumor_localized_crop(const Volume& image, const LabelMap& labels, const CropSpec& spec,
                               int pni = 0, const std::string& case_id = "");

// Patch files: <stem>_t1 / <stem>_t2 (image channels, float32 NIfTI) and
// <stem>_t1_mask / <stem>_t2_mask (uint8 NIfTI), plus <stem>.json sidecar.
void write_patch(const PatchPair& p, const std::string& stem);
PatchPair read_patch(const std::string& stem);

}  // namespace pnidiff
