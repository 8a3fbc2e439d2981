#pragma once

#include <string>
#include <vector>

#include "pnidiff/ops.hpp"

namespace pnidiff {

// Named parameter handle for optimizers and checkpoints.
using NamedParam = std::pair<std::string, Var>;

struct Conv3dLayer {
  Var w;  // [Cout,Cin,k,k,k]
  Var b;  // [Cout]
  Dims3 pad{1, 1, 1};
  Dims3 stride{1, 1, 1};

  // He-style fan-in scaling
  static Conv3dLayer create(int64_t cout, int64_t cin, int64_t k, Dims3 pad, Dims3 stride,
                            Rng& rng);
  static Conv3dLayer zeros(int64_t cout, int64_t cin, int64_t k, Dims3 pad, Dims3 stride);

  Var operator()(const Var& x) const { return conv3d(x, w, b, pad, stride); }
  Conv3dLayer clone() const;  // fresh leaves with copied values
  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

struct AffineLayer {
  Var w;  // [m,n]
  Var b;  // [m]

  static AffineLayer create(int64_t m, int64_t n, Rng& rng);
  static AffineLayer zeros(int64_t m, int64_t n);

  Var operator()(const Var& x) const { return affine(x, w, b); }
  AffineLayer clone() const;
  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

std::vector<Var> values_of(const std::vector<NamedParam>& named);
void set_trainable(const std::vector<NamedParam>& named, bool trainable);

// FNV-1a over raw parameter bytes, for freeze-contract checks.
uint64_t param_checksum(const std::vector<NamedParam>& named);

}  // namespace pnidiff
