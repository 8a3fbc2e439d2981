#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pnidiff/ops.hpp"

namespace pnidiff {

struct GradCheckReport {
  bool pass = false;
  double max_rel_err = 0.0;
  std::string worst_location;  // "leaf 2, coord 17"
  bool nonfinite = false;
  std::string message;
};

// Compares reverse-mode gradients against central finite differences.
// `build` must rebuild the scalar graph from the current leaf values.
// max_coords_per_leaf == 0 probes every coordinate; otherwise a seeded
// subset per leaf (for large composite graphs).
// Relative error uses max(|a|,|b|,1e-8) denominators.
GradCheckReport grad_check(const std::function<Var()>& build, const std::vector<Var>& leaves,
                           double h = 1e-5, double tolerance = 1e-4,
                           int64_t max_coords_per_leaf = 0, uint64_t coord_seed = 42);

}  // namespace pnidiff
