#include "pnidiff/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace pnidiff {

void adamw_step(std::vector<Var>& params, OptimState& state) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.value().shape);
      state.v.emplace_back(p.value().shape);
    }
  }
  if (state.m.size() != params.size())
    throw std::invalid_argument("adamw_step: parameter list changed size");

  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));

  for (size_t i = 0; i < params.size(); ++i) {
    Grid& p = params[i].value_mut();
    const Grid& g = params[i].grad();
    if (!p.same_shape(state.m[i]))
      throw std::invalid_argument("adamw_step: accumulator shape mismatch at parameter " +
                                  std::to_string(i));
    Grid& m = state.m[i];
    Grid& v = state.v[i];
    for (int64_t j = 0; j < p.numel(); ++j) {
      const double gj = g[j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= state.lr * (mhat / (std::sqrt(vhat) + state.eps) + state.weight_decay * p[j]);
    }
  }
}

}  // namespace pnidiff
