#include "pnidiff/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace pnidiff {

std::string shape_to_string(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  out += "]";
  return out;
}

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t e : s) n *= e;
  return n;
}

Grid::Grid(Shape shp, double fill) : shape(std::move(shp)) {
  if (shape.empty()) throw std::invalid_argument("Grid: empty shape");
  for (size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] < 1)
      throw std::invalid_argument("Grid: extent of axis " + std::to_string(i) +
                                  " must be >= 1, got " + std::to_string(shape[i]));
  }
  data.assign(static_cast<size_t>(shape_numel(shape)), fill);
}

Grid random_uniform(const Shape& shp, Rng& rng, double lo, double hi) {
  Grid g(shp);
  for (auto& v : g.data) v = rng.uniform(lo, hi);
  return g;
}

Grid random_normal(const Shape& shp, Rng& rng, double stdev) {
  Grid g(shp);
  for (auto& v : g.data) v = stdev * rng.normal();
  return g;
}

void axpy(double a, const Grid& x, Grid& y) {
  if (!x.same_shape(y))
    throw std::invalid_argument("axpy: shape mismatch " + shape_to_string(x.shape) + " vs " +
                                shape_to_string(y.shape));
  for (size_t i = 0; i < x.data.size(); ++i) y.data[i] += a * x.data[i];
}

double min_value(const Grid& g) { return *std::min_element(g.data.begin(), g.data.end()); }
double max_value(const Grid& g) { return *std::max_element(g.data.begin(), g.data.end()); }

double sum_value(const Grid& g) {
  double s = 0.0;
  for (double v : g.data) s += v;
  return s;
}

bool all_finite(const Grid& g) {
  for (double v : g.data)
    if (!std::isfinite(v)) return false;
  return true;
}

bool bit_equal(const Grid& a, const Grid& b) {
  return a.shape == b.shape &&
         std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

}  // namespace pnidiff
