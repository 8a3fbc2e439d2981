#include "pnidiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace pnidiff {

GradCheckReport grad_check(const std::function<Var()>& build, const std::vector<Var>& leaves,
                           double h, double tolerance, int64_t max_coords_per_leaf,
                           uint64_t coord_seed) {
  GradCheckReport rep;

  zero_grads(leaves);
  Var root = build();
  if (root.value().numel() != 1) {
    rep.message = "graph root is not scalar";
    return rep;
  }
  if (!std::isfinite(root.value()[0])) {
    rep.nonfinite = true;
    rep.message = "non-finite value at graph root";
    return rep;
  }
  backward(root);

  // snapshot reverse-mode gradients before perturbing anything
  std::vector<Grid> analytic;
  analytic.reserve(leaves.size());
  for (const auto& l : leaves) analytic.push_back(l.grad());

  Rng pick(coord_seed);
  for (size_t li = 0; li < leaves.size(); ++li) {
    Grid& vals = const_cast<Var&>(leaves[li]).value_mut();
    const int64_t n = vals.numel();

    std::vector<int64_t> coords;
    if (max_coords_per_leaf > 0 && n > max_coords_per_leaf) {
      coords.resize(static_cast<size_t>(max_coords_per_leaf));
      for (auto& c : coords) c = static_cast<int64_t>(pick.bounded(static_cast<uint64_t>(n)));
      std::sort(coords.begin(), coords.end());
      coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    } else {
      coords.resize(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
    }

    for (int64_t c : coords) {
      const double saved = vals[c];
      vals[c] = saved + h;
      const double fp = build().value()[0];
      vals[c] = saved - h;
      const double fm = build().value()[0];
      vals[c] = saved;

      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        rep.nonfinite = true;
        rep.message = "non-finite finite-difference probe at leaf " + std::to_string(li) +
                      ", coord " + std::to_string(c);
        rep.pass = false;
        return rep;
      }
      const double fd = (fp - fm) / (2.0 * h);
      const double an = analytic[li][c];
      if (!std::isfinite(an)) {
        rep.nonfinite = true;
        rep.message =
            "non-finite gradient at leaf " + std::to_string(li) + ", coord " + std::to_string(c);
        rep.pass = false;
        return rep;
      }
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
      const double rel = std::abs(fd - an) / denom;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_location = "leaf " + std::to_string(li) + ", coord " + std::to_string(c);
      }
    }
  }

  rep.pass = rep.max_rel_err <= tolerance;
  return rep;
}

}  // namespace pnidiff
