#include "pnidiff/layers.hpp"

#include <cmath>
#include <cstring>

namespace pnidiff {

Conv3dLayer Conv3dLayer::create(int64_t cout, int64_t cin, int64_t k, Dims3 pad, Dims3 stride,
                                Rng& rng) {
  Conv3dLayer l;
  const double scale = std::sqrt(2.0 / static_cast<double>(cin * k * k * k));
  l.w = Var::leaf(random_normal({cout, cin, k, k, k}, rng, scale));
  l.b = Var::leaf(Grid({cout}));
  l.pad = pad;
  l.stride = stride;
  return l;
}

Conv3dLayer Conv3dLayer::zeros(int64_t cout, int64_t cin, int64_t k, Dims3 pad, Dims3 stride) {
  Conv3dLayer l;
  l.w = Var::leaf(Grid({cout, cin, k, k, k}));
  l.b = Var::leaf(Grid({cout}));
  l.pad = pad;
  l.stride = stride;
  return l;
}

Conv3dLayer Conv3dLayer::clone() const {
  Conv3dLayer l;
  l.w = Var::leaf(w.value());
  l.b = Var::leaf(b.value());
  l.pad = pad;
  l.stride = stride;
  return l;
}

void Conv3dLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
  out.emplace_back(prefix + ".w", w);
  out.emplace_back(prefix + ".b", b);
}

AffineLayer AffineLayer::create(int64_t m, int64_t n, Rng& rng) {
  AffineLayer l;
  l.w = Var::leaf(random_normal({m, n}, rng, std::sqrt(2.0 / static_cast<double>(n))));
  l.b = Var::leaf(Grid({m}));
  return l;
}

AffineLayer AffineLayer::zeros(int64_t m, int64_t n) {
  AffineLayer l;
  l.w = Var::leaf(Grid({m, n}));
  l.b = Var::leaf(Grid({m}));
  return l;
}

AffineLayer AffineLayer::clone() const {
  AffineLayer l;
  l.w = Var::leaf(w.value());
  l.b = Var::leaf(b.value());
  return l;
}

void AffineLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
  out.emplace_back(prefix + ".w", w);
  out.emplace_back(prefix + ".b", b);
}

std::vector<Var> values_of(const std::vector<NamedParam>& named) {
  std::vector<Var> out;
  out.reserve(named.size());
  for (const auto& [name, v] : named) out.push_back(v);
  return out;
}

void set_trainable(const std::vector<NamedParam>& named, bool trainable) {
  for (const auto& [name, v] : named) const_cast<Var&>(v).set_requires_grad(trainable);
}

uint64_t param_checksum(const std::vector<NamedParam>& named) {
  uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* p, size_t n) {
    const unsigned char* c = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= c[i];
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& [name, v] : named) {
    mix(name.data(), name.size());
    mix(v.value().data.data(), v.value().data.size() * sizeof(double));
  }
  return h;
}

}  // namespace pnidiff
