#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pnidiff/rng.hpp"

namespace pnidiff {

using Shape = std::vector<int64_t>;

std::string shape_to_string(const Shape& s);

// Dense row-major N-D grid of doubles. The unit of every numeric buffer in
// the project: volumes, patches, parameters, gradients.
struct Grid {
  Shape shape;
  std::vector<double> data;

  Grid() = default;
  explicit Grid(Shape shp, double fill = 0.0);

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int ndim() const { return static_cast<int>(shape.size()); }

  double& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  bool same_shape(const Grid& o) const { return shape == o.shape; }

  // index helpers for the common ranks
  double& at(int64_t i, int64_t j, int64_t k) {
    return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  double at(int64_t i, int64_t j, int64_t k) const {
    return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  double& at(int64_t c, int64_t i, int64_t j, int64_t k) {
    return data[static_cast<size_t>(((c * shape[1] + i) * shape[2] + j) * shape[3] + k)];
  }
  double at(int64_t c, int64_t i, int64_t j, int64_t k) const {
    return data[static_cast<size_t>(((c * shape[1] + i) * shape[2] + j) * shape[3] + k)];
  }

  static Grid zeros_like(const Grid& g) { return Grid(g.shape); }
  static Grid full(Shape shp, double v) { return Grid(std::move(shp), v); }
};

int64_t shape_numel(const Shape& s);

Grid random_uniform(const Shape& shp, Rng& rng, double lo = 0.0, double hi = 1.0);
Grid random_normal(const Shape& shp, Rng& rng, double stdev = 1.0);

// y += a*x, elementwise; shapes must match
void axpy(double a, const Grid& x, Grid& y);

double min_value(const Grid& g);
double max_value(const Grid& g);
double sum_value(const Grid& g);
bool all_finite(const Grid& g);
bool bit_equal(const Grid& a, const Grid& b);

}  // namespace pnidiff
