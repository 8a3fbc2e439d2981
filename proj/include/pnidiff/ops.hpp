#pragma once

#include <array>

#include "pnidiff/autodiff.hpp"

namespace pnidiff {

using Dims3 = std::array<int64_t, 3>;

enum class PoolMode { Avg, Max };

// ---- differentiable ops --------------------------------------------------
// All ops validate shapes up front and name the offending axis on mismatch.

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double k);
Var sum(const Var& a);   // -> shape [1]
Var mean(const Var& a);  // -> shape [1]

Var relu(const Var& x);
Var sigmoid(const Var& x);
Var vexp(const Var& x);

// Cross-correlation (no kernel flip), the usual deep-learning convention.
// x:[Cin,D,H,W]  w:[Cout,Cin,kd,kh,kw]  b:[Cout] -> [Cout,D',H',W']
// D' = floor((D + 2*pad - kd)/stride) + 1, likewise H', W'.
Var conv3d(const Var& x, const Var& w, const Var& b, Dims3 pad, Dims3 stride);

Var global_pool(const Var& x, PoolMode mode);   // [C,D,H,W] -> [C]
Var channel_pool(const Var& x, PoolMode mode);  // [C,D,H,W] -> [1,D,H,W]

// y = Wx + b;  x:[n]  W:[m,n]  b:[m] -> [m]
Var affine(const Var& x, const Var& w, const Var& b);

// Nearest-neighbour resize to a target spatial shape (channels preserved).
Var upsample_nearest(const Var& x, Dims3 target);

Var concat_channels(const Var& a, const Var& b);

// The two attention broadcast patterns, plus the additive one used for
// timestep embeddings. No general broadcasting engine.
Var mul_channel_vector(const Var& x, const Var& v);  // x:[C,D,H,W] * v:[C]
Var add_channel_vector(const Var& x, const Var& v);
Var mul_spatial_map(const Var& x, const Var& m);  // x:[C,D,H,W] * m:[1,D,H,W]

Var mse_loss(const Var& pred, const Var& target);
Var l1_loss(const Var& pred, const Var& target);
// mean over elements of 0.5*(mu^2 + e^logvar - 1 - logvar)
Var kl_standard_normal(const Var& mu, const Var& logvar);
// scalar logit vs binary label, numerically stable
Var bce_with_logits(const Var& logit, double label);

// ---- plain-grid kernels (shared by forward paths and tests) --------------
namespace kernels {
Grid conv3d_forward(const Grid& x, const Grid& w, const Grid* bias, Dims3 pad, Dims3 stride);
// Either output may be null to skip that gradient.
void conv3d_backward(const Grid& gout, const Grid& x, const Grid& w, Dims3 pad, Dims3 stride,
                     Grid* gx, Grid* gw, Grid* gb);
}  // namespace kernels

double sigmoid_scalar(double x);

}  // namespace pnidiff
