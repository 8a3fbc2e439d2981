#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>

#include "pnidiff/grid.hpp"

namespace pnidiff {

// Parse/format failures carry the byte offset where the problem was found.
class NiftiError : public std::runtime_error {
 public:
  NiftiError(const std::string& what, int64_t offset)
      : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  explicit NiftiError(const std::string& what) : std::runtime_error(what), offset_(-1) {}
  int64_t offset() const { return offset_; }

 private:
  int64_t offset_;
};

enum class NiftiDatatype : int16_t {
  Uint8 = 2,
  Int16 = 4,
  Float32 = 16,
};

// qform/sform fields we do not interpret; carried verbatim so a read-write
// cycle preserves them. Spatial reorientation is out of scope.
struct OrientationPassThrough {
  int16_t qform_code = 0;
  int16_t sform_code = 0;
  std::array<float, 6> quatern{};   // b, c, d, qoffset x/y/z
  std::array<float, 12> srow{};     // srow_x, srow_y, srow_z
};

struct Volume {
  Grid grid;                               // [nx, ny, nz] intensities
  std::array<double, 3> spacing{1, 1, 1};  // mm per axis, > 0
  std::array<double, 3> origin{0, 0, 0};   // mm offsets (qoffset)
  OrientationPassThrough orient;
};

// Integer labels over {0 background, 1 liver, 2 tumor}, aligned with a Volume.
struct LabelMap {
  Grid grid;  // values exactly 0, 1 or 2
  std::array<double, 3> spacing{1, 1, 1};
  std::array<double, 3> origin{0, 0, 0};
  OrientationPassThrough orient;

  int label_at(int64_t x, int64_t y, int64_t z) const {
    return static_cast<int>(grid.at(x, y, z));
  }
};

// Reads a 3D NIfTI-1 file (.nii or .nii.gz; "ni1" header/.img pairs too).
// Supported datatypes: uint8, int16, float32. scl_slope/scl_inter honored
// (identity when slope == 0). Little- and big-endian headers accepted.
Volume read_volume(const std::string& path);

// Reads integer data and applies a raw-value -> {0,1,2} mapping. A raw value
// missing from the mapping is an error naming the value.
LabelMap read_labels(const std::string& path,
                     const std::map<int, int>& mapping = {{0, 0}, {1, 1}, {2, 2}});

// float32 data written with slope 0 (verbatim); read_volume(write_volume(v))
// reproduces the stored buffer bit-exactly. ".gz" suffix selects gzip.
void write_volume(const Volume& v, const std::string& path,
                  NiftiDatatype dtype = NiftiDatatype::Float32);
void write_labels(const LabelMap& l, const std::string& path);  // uint8

// (v - min) / (max - min); a constant volume maps to all zeros.
Volume normalize_intensity(const Volume& v);

// Applies a label table to a raw integer grid.
Grid map_labels(const Grid& raw, const std::map<int, int>& mapping);

}  // namespace pnidiff
