#pragma once

#include <vector>

#include "pnidiff/autodiff.hpp"

namespace pnidiff {

// Decoupled-weight-decay adaptive optimizer state. Accumulator shapes mirror
// the parameter list handed to the first step; the list must stay stable.
struct OptimState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  int64_t step_count = 0;
  std::vector<Grid> m;  // first moments
  std::vector<Grid> v;  // second moments
};

// One update from the parameters' accumulated gradients; bias-corrected,
// deterministic given inputs. Gradients are left untouched (caller zeroes).
void adamw_step(std::vector<Var>& params, OptimState& state);

}  // namespace pnidiff
