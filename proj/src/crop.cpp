#include "pnidiff/crop.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"

namespace pnidiff {

void CropSpec::validate() const {
  for (int i = 0; i < 3; ++i) {
    if (size[static_cast<size_t>(i)] < 1)
      throw std::invalid_argument("CropSpec: extent of axis " + std::to_string(i) +
                                  " must be >= 1");
    if (size[static_cast<size_t>(i)] % 2 != 0)
      throw std::invalid_argument("CropSpec: extent of axis " + std::to_string(i) +
                                  " must be even, got " +
                                  std::to_string(size[static_cast<size_t>(i)]));
  }
}

void PatchPair::check_invariants() const {
  if (image.ndim() != 4 || image.shape[0] != 2)
    throw std::logic_error("PatchPair: image must be [2,cx,cy,cz], got " +
                           shape_to_string(image.shape));
  if (!labels.same_shape(image))
    throw std::logic_error("PatchPair: label shape " + shape_to_string(labels.shape) +
                           " differs from image shape " + shape_to_string(image.shape));
  const int64_t n = image.numel() / 2;
  for (int64_t i = 0; i < n; ++i) {
    const double l1 = labels[i];
    const double l2 = labels[n + i];
    if ((l1 != 0.0 && l1 != 1.0) || (l2 != 0.0 && l2 != 1.0))
      throw std::logic_error("PatchPair: label values must be binary");
    if (l2 > l1) throw std::logic_error("PatchPair: tumor channel not contained in peritumoral");
    if (l1 == 0.0 && image[i] != 0.0)
      throw std::logic_error("PatchPair: image channel 1 nonzero outside its mask");
    if (l2 == 0.0 && image[n + i] != 0.0)
      throw std::logic_error("PatchPair: image channel 2 nonzero outside its mask");
  }
  if (pni != 0 && pni != 1) throw std::logic_error("PatchPair: pni must be 0 or 1");
  if (provenance == Provenance::Synthetic && donor_id.empty())
    throw std::logic_error("PatchPair: synthetic patch missing donor id");
}

std::optional<BoundingBox> tumor_extent(const LabelMap& labels) {
  const Grid& g = labels.grid;
  BoundingBox box{{g.shape[0], g.shape[1], g.shape[2]}, {0, 0, 0}};
  bool found = false;
  for (int64_t x = 0; x < g.shape[0]; ++x)
    for (int64_t y = 0; y < g.shape[1]; ++y)
      for (int64_t z = 0; z < g.shape[2]; ++z)
        if (g.at(x, y, z) == 2.0) {
          found = true;
          box.lo[0] = std::min(box.lo[0], x);
          box.lo[1] = std::min(box.lo[1], y);
          box.lo[2] = std::min(box.lo[2], z);
          box.hi[0] = std::max(box.hi[0], x + 1);
          box.hi[1] = std::max(box.hi[1], y + 1);
          box.hi[2] = std::max(box.hi[2], z + 1);
        }
  if (!found) return std::nullopt;
  return box;
}

CropWindow crop_window(const std::array<int64_t, 3>& center, const CropSpec& spec,
                       const std::array<int64_t, 3>& dims) {
  spec.validate();
  CropWindow w{};
  for (size_t i = 0; i < 3; ++i) {
    if (dims[i] < 1) throw std::invalid_argument("crop_window: dims must be >= 1");
    const int64_t c = spec.size[i];
    int64_t start = std::max<int64_t>(center[i] - c / 2, 0);
    start = std::min(start, std::max<int64_t>(dims[i] - c, 0));
    w.start[i] = start;
    w.end[i] = start + c;
  }
  return w;
}

PatchPair tumor_localized_crop(const Volume& image, const LabelMap& labels, const CropSpec& spec,
                               int pni, const std::string& case_id) {
  spec.validate();
  if (!image.grid.same_shape(labels.grid))
    throw std::invalid_argument("tumor_localized_crop: image shape " +
                                shape_to_string(image.grid.shape) + " != label shape " +
                                shape_to_string(labels.grid.shape));

  const auto& c = spec.size;
  PatchPair p;
  p.image = Grid({2, c[0], c[1], c[2]});
  p.labels = Grid({2, c[0], c[1], c[2]});
  p.pni = pni;
  p.case_id = case_id;

  auto box = tumor_extent(labels);
  if (!box) return p;  // no tumor: zero patches

  std::array<int64_t, 3> center{};
  for (size_t i = 0; i < 3; ++i) center[i] = (box->lo[i] + box->hi[i]) / 2;  // floor midpoint

  const std::array<int64_t, 3> dims{labels.grid.shape[0], labels.grid.shape[1],
                                    labels.grid.shape[2]};
  const CropWindow w = crop_window(center, spec, dims);
  p.crop_start = w.start;

  for (int64_t x = 0; x < c[0]; ++x) {
    const int64_t sx = w.start[0] + x;
    if (sx >= dims[0]) break;
    for (int64_t y = 0; y < c[1]; ++y) {
      const int64_t sy = w.start[1] + y;
      if (sy >= dims[1]) break;
      for (int64_t z = 0; z < c[2]; ++z) {
        const int64_t sz = w.start[2] + z;
        if (sz >= dims[2]) break;
        const double lab = labels.grid.at(sx, sy, sz);
        const double val = image.grid.at(sx, sy, sz);
        if (lab == 1.0 || lab == 2.0) {
          p.labels.at(0, x, y, z) = 1.0;
          p.image.at(0, x, y, z) = val;
        }
        if (lab == 2.0) {
          p.labels.at(1, x, y, z) = 1.0;
          p.image.at(1, x, y, z) = val;
        }
      }
    }
  }
  return p;
}

namespace {

Grid channel_of(const Grid& g, int64_t c) {
  Grid out({g.shape[1], g.shape[2], g.shape[3]});
  const int64_t n = out.numel();
  std::copy(g.data.begin() + c * n, g.data.begin() + (c + 1) * n, out.data.begin());
  return out;
}

void set_channel(Grid& g, int64_t c, const Grid& ch) {
  const int64_t n = ch.numel();
  std::copy(ch.data.begin(), ch.data.end(), g.data.begin() + c * n);
}

}  // namespace

void write_patch(const PatchPair& p, const std::string& stem) {
  p.check_invariants();
  Volume v;
  v.grid = channel_of(p.image, 0);
  write_volume(v, stem + "_t1.nii");
  v.grid = channel_of(p.image, 1);
  write_volume(v, stem + "_t2.nii");
  LabelMap l;
  l.grid = channel_of(p.labels, 0);
  write_labels(l, stem + "_t1_mask.nii");
  l.grid = channel_of(p.labels, 1);
  write_labels(l, stem + "_t2_mask.nii");

  nlohmann::json meta;
  meta["case_id"] = p.case_id;
  meta["pni"] = p.pni;
  meta["provenance"] = p.provenance == Provenance::Real ? "real" : "synthetic";
  meta["crop_start"] = {p.crop_start[0], p.crop_start[1], p.crop_start[2]};
  if (!p.donor_id.empty()) meta["donor_id"] = p.donor_id;
  std::ofstream out(stem + ".json", std::ios::trunc);
  if (!out) throw std::runtime_error("write_patch: cannot open " + stem + ".json");
  out << meta.dump(2) << "\n";
}

PatchPair read_patch(const std::string& stem) {
  Volume t1 = read_volume(stem + "_t1.nii");
  Volume t2 = read_volume(stem + "_t2.nii");
  LabelMap m1 = read_labels(stem + "_t1_mask.nii", {{0, 0}, {1, 1}});
  LabelMap m2 = read_labels(stem + "_t2_mask.nii", {{0, 0}, {1, 1}});
  if (!t1.grid.same_shape(t2.grid) || !t1.grid.same_shape(m1.grid) ||
      !t1.grid.same_shape(m2.grid))
    throw std::runtime_error("read_patch: channel files disagree on shape for " + stem);

  PatchPair p;
  const auto& s = t1.grid.shape;
  p.image = Grid({2, s[0], s[1], s[2]});
  p.labels = Grid({2, s[0], s[1], s[2]});
  set_channel(p.image, 0, t1.grid);
  set_channel(p.image, 1, t2.grid);
  set_channel(p.labels, 0, m1.grid);
  set_channel(p.labels, 1, m2.grid);

  std::ifstream in(stem + ".json");
  if (!in) throw std::runtime_error("read_patch: missing sidecar " + stem + ".json");
  nlohmann::json meta = nlohmann::json::parse(in);
  p.case_id = meta.value("case_id", "");
  p.pni = meta.value("pni", 0);
  p.provenance = meta.value("provenance", "real") == "synthetic" ? Provenance::Synthetic
                                                                 : Provenance::Real;
  if (meta.contains("crop_start"))
    for (size_t i = 0; i < 3; ++i) p.crop_start[i] = meta["crop_start"][i].get<int64_t>();
  p.donor_id = meta.value("donor_id", "");
  p.check_invariants();
  return p;
}

}  // namespace pnidiff
