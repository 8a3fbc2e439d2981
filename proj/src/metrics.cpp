#include "pnidiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace pnidiff {

double dice(const Grid& a, const Grid& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("dice: shape mismatch " + shape_to_string(a.shape) + " vs " +
                                shape_to_string(b.shape));
  int64_t na = 0, nb = 0, inter = 0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    const bool ia = a[i] != 0.0;
    const bool ib = b[i] != 0.0;
    na += ia;
    nb += ib;
    inter += (ia && ib);
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

double psnr(const Grid& x, const Grid& y, double peak) {
  if (!x.same_shape(y))
    throw std::invalid_argument("psnr: shape mismatch " + shape_to_string(x.shape) + " vs " +
                                shape_to_string(y.shape));
  double mse = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) {
    const double d = x[i] - y[i];
    mse += d * d;
  }
  mse /= static_cast<double>(x.numel());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

namespace {

constexpr int kWin = 11;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::vector<double>& gaussian_window() {
  static const std::vector<double> w = [] {
    std::vector<double> v(kWin * kWin);
    const double sigma = 1.5;
    double total = 0.0;
    for (int i = 0; i < kWin; ++i)
      for (int j = 0; j < kWin; ++j) {
        const double di = i - (kWin - 1) / 2.0;
        const double dj = j - (kWin - 1) / 2.0;
        v[static_cast<size_t>(i * kWin + j)] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
        total += v[static_cast<size_t>(i * kWin + j)];
      }
    for (auto& x : v) x /= total;
    return v;
  }();
  return w;
}

double ssim_from_stats(double mx, double my, double vx, double vy, double cov) {
  return ((2 * mx * my + kC1) * (2 * cov + kC2)) /
         ((mx * mx + my * my + kC1) * (vx + vy + kC2));
}

double ssim_slice(const Grid& x, const Grid& y, int64_t slice) {
  const int64_t H = x.shape[1], W = x.shape[2];
  const double* xs = x.data.data() + slice * H * W;
  const double* ys = y.data.data() + slice * H * W;

  if (H < kWin || W < kWin) {
    // global statistics fallback for undersized slices
    const int64_t n = H * W;
    double mx = 0, my = 0;
    for (int64_t i = 0; i < n; ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double vx = 0, vy = 0, cov = 0;
    for (int64_t i = 0; i < n; ++i) {
      vx += (xs[i] - mx) * (xs[i] - mx);
      vy += (ys[i] - my) * (ys[i] - my);
      cov += (xs[i] - mx) * (ys[i] - my);
    }
    vx /= static_cast<double>(n);
    vy /= static_cast<double>(n);
    cov /= static_cast<double>(n);
    return ssim_from_stats(mx, my, vx, vy, cov);
  }

  const auto& w = gaussian_window();
  double acc = 0.0;
  int64_t count = 0;
  for (int64_t r = 0; r + kWin <= H; ++r)
    for (int64_t c = 0; c + kWin <= W; ++c) {
      double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
      for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
          const double wv = w[static_cast<size_t>(i * kWin + j)];
          const double xv = xs[(r + i) * W + (c + j)];
          const double yv = ys[(r + i) * W + (c + j)];
          mx += wv * xv;
          my += wv * yv;
          xx += wv * xv * xv;
          yy += wv * yv * yv;
          xy += wv * xv * yv;
        }
      acc += ssim_from_stats(mx, my, xx - mx * mx, yy - my * my, xy - mx * my);
      ++count;
    }
  return acc / static_cast<double>(count);
}

}  // namespace

double ssim(const Grid& x, const Grid& y) {
  if (!x.same_shape(y))
    throw std::invalid_argument("ssim: shape mismatch " + shape_to_string(x.shape) + " vs " +
                                shape_to_string(y.shape));
  if (x.ndim() != 3)
    throw std::invalid_argument("ssim: expected rank-3 volume, got " + shape_to_string(x.shape));
  double acc = 0.0;
  for (int64_t s = 0; s < x.shape[0]; ++s) acc += ssim_slice(x, y, s);
  return acc / static_cast<double>(x.shape[0]);
}

namespace {

void extract_slice(const Grid& v, View view, int64_t idx, std::vector<double>& out, int64_t& rows,
                   int64_t& cols) {
  const int64_t A = v.shape[0], B = v.shape[1], C = v.shape[2];
  switch (view) {
    case View::Axial:
      rows = B;
      cols = C;
      out.resize(static_cast<size_t>(rows * cols));
      for (int64_t b = 0; b < B; ++b)
        for (int64_t c = 0; c < C; ++c) out[static_cast<size_t>(b * C + c)] = v.at(idx, b, c);
      break;
    case View::Sagittal:
      rows = A;
      cols = C;
      out.resize(static_cast<size_t>(rows * cols));
      for (int64_t a = 0; a < A; ++a)
        for (int64_t c = 0; c < C; ++c) out[static_cast<size_t>(a * C + c)] = v.at(a, idx, c);
      break;
    case View::Coronal:
      rows = A;
      cols = B;
      out.resize(static_cast<size_t>(rows * cols));
      for (int64_t a = 0; a < A; ++a)
        for (int64_t b = 0; b < B; ++b) out[static_cast<size_t>(a * B + b)] = v.at(a, b, idx);
      break;
  }
}

std::vector<double> slice_descriptor(const std::vector<double>& s, int64_t rows, int64_t cols) {
  const int64_t n = rows * cols;
  std::vector<double> f(14, 0.0);

  const double mn = *std::min_element(s.begin(), s.end());
  const double mx = *std::max_element(s.begin(), s.end());

  double mean = 0.0;
  for (double v : s) mean += v;
  mean /= static_cast<double>(n);
  f[0] = mean;

  if (mn != mx) {
    double m2 = 0, m3 = 0, m4 = 0;
    for (double v : s) {
      const double d = v - mean;
      m2 += d * d;
      m3 += d * d * d;
      m4 += d * d * d * d;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);
    f[1] = std::sqrt(m2);
    if (m2 > 1e-24) {
      f[2] = m3 / std::pow(m2, 1.5);
      f[3] = m4 / (m2 * m2) - 3.0;  // excess kurtosis
    }
  }

  // central-difference gradient magnitude, one-sided at slice edges
  double gsum = 0.0, gsum2 = 0.0;
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j) {
      double gi = 0.0, gj = 0.0;
      if (rows > 1) {
        if (i == 0)
          gi = s[static_cast<size_t>((i + 1) * cols + j)] - s[static_cast<size_t>(i * cols + j)];
        else if (i == rows - 1)
          gi = s[static_cast<size_t>(i * cols + j)] - s[static_cast<size_t>((i - 1) * cols + j)];
        else
          gi = 0.5 * (s[static_cast<size_t>((i + 1) * cols + j)] -
                      s[static_cast<size_t>((i - 1) * cols + j)]);
      }
      if (cols > 1) {
        if (j == 0)
          gj = s[static_cast<size_t>(i * cols + j + 1)] - s[static_cast<size_t>(i * cols + j)];
        else if (j == cols - 1)
          gj = s[static_cast<size_t>(i * cols + j)] - s[static_cast<size_t>(i * cols + j - 1)];
        else
          gj = 0.5 * (s[static_cast<size_t>(i * cols + j + 1)] -
                      s[static_cast<size_t>(i * cols + j - 1)]);
      }
      const double gm = std::sqrt(gi * gi + gj * gj);
      gsum += gm;
      gsum2 += gm * gm;
    }
  const double gmean = gsum / static_cast<double>(n);
  f[4] = gmean;
  const double gvar = std::max(0.0, gsum2 / static_cast<double>(n) - gmean * gmean);
  f[5] = std::sqrt(gvar);

  // normalized 8-bin histogram over [0,1]
  for (double v : s) {
    const double cl = std::clamp(v, 0.0, 1.0);
    const int bin = std::min(7, static_cast<int>(cl * 8.0));
    f[static_cast<size_t>(6 + bin)] += 1.0;
  }
  for (int b = 0; b < 8; ++b) f[static_cast<size_t>(6 + b)] /= static_cast<double>(n);
  return f;
}

}  // namespace

std::vector<std::vector<double>> slice_features(const Grid& volume, View view) {
  if (volume.ndim() != 3)
    throw std::invalid_argument("slice_features: expected rank-3 volume, got " +
                                shape_to_string(volume.shape));
  const int64_t count = volume.shape[static_cast<size_t>(view)];
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<size_t>(count));
  std::vector<double> slice;
  for (int64_t i = 0; i < count; ++i) {
    int64_t rows = 0, cols = 0;
    extract_slice(volume, view, i, slice, rows, cols);
    out.push_back(slice_descriptor(slice, rows, cols));
  }
  return out;
}

GaussianSummary fit_gaussian(const std::vector<std::vector<double>>& rows) {
  if (rows.size() < 2) throw std::invalid_argument("fit_gaussian: need at least 2 samples");
  const int64_t n = static_cast<int64_t>(rows.size());
  const int64_t d = static_cast<int64_t>(rows[0].size());
  GaussianSummary g;
  g.mean.assign(static_cast<size_t>(d), 0.0);
  for (const auto& r : rows) {
    if (static_cast<int64_t>(r.size()) != d)
      throw std::invalid_argument("fit_gaussian: inconsistent feature dimension");
    for (int64_t j = 0; j < d; ++j) g.mean[static_cast<size_t>(j)] += r[static_cast<size_t>(j)];
  }
  for (auto& m : g.mean) m /= static_cast<double>(n);

  g.cov.assign(static_cast<size_t>(d * d), 0.0);
  for (const auto& r : rows)
    for (int64_t i = 0; i < d; ++i) {
      const double di = r[static_cast<size_t>(i)] - g.mean[static_cast<size_t>(i)];
      for (int64_t j = i; j < d; ++j)
        g.cov[static_cast<size_t>(i * d + j)] +=
            di * (r[static_cast<size_t>(j)] - g.mean[static_cast<size_t>(j)]);
    }
  for (int64_t i = 0; i < d; ++i)
    for (int64_t j = i; j < d; ++j) {
      g.cov[static_cast<size_t>(i * d + j)] /= static_cast<double>(n - 1);
      g.cov[static_cast<size_t>(j * d + i)] = g.cov[static_cast<size_t>(i * d + j)];
    }
  return g;
}

EigenDecomposition jacobi_eigen(const std::vector<double>& sym, int64_t d) {
  if (static_cast<int64_t>(sym.size()) != d * d)
    throw std::invalid_argument("jacobi_eigen: matrix size does not match dimension");
  std::vector<double> a = sym;
  std::vector<double> v(static_cast<size_t>(d * d), 0.0);
  for (int64_t i = 0; i < d; ++i) v[static_cast<size_t>(i * d + i)] = 1.0;

  auto at = [&](std::vector<double>& m, int64_t i, int64_t j) -> double& {
    return m[static_cast<size_t>(i * d + j)];
  };

  double scale = 0.0;
  for (double x : a) scale += x * x;
  scale = std::sqrt(scale);
  const double tol = 1e-12 * std::max(1.0, scale);

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int64_t i = 0; i < d; ++i)
      for (int64_t j = i + 1; j < d; ++j) off += 2.0 * at(a, i, j) * at(a, i, j);
    if (std::sqrt(off) < tol) break;

    for (int64_t p = 0; p < d - 1; ++p)
      for (int64_t q = p + 1; q < d; ++q) {
        const double apq = at(a, p, q);
        if (std::abs(apq) < tol / static_cast<double>(d * d)) continue;
        const double theta = (at(a, q, q) - at(a, p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (int64_t k = 0; k < d; ++k) {
          const double akp = at(a, k, p);
          const double akq = at(a, k, q);
          at(a, k, p) = c * akp - s * akq;
          at(a, k, q) = s * akp + c * akq;
        }
        for (int64_t k = 0; k < d; ++k) {
          const double apk = at(a, p, k);
          const double aqk = at(a, q, k);
          at(a, p, k) = c * apk - s * aqk;
          at(a, q, k) = s * apk + c * aqk;
        }
        for (int64_t k = 0; k < d; ++k) {
          const double vkp = at(v, k, p);
          const double vkq = at(v, k, q);
          at(v, k, p) = c * vkp - s * vkq;
          at(v, k, q) = s * vkp + c * vkq;
        }
      }
  }

  EigenDecomposition e;
  e.values.resize(static_cast<size_t>(d));
  for (int64_t i = 0; i < d; ++i) e.values[static_cast<size_t>(i)] = at(a, i, i);

  // sort ascending, permuting eigenvector columns to match
  std::vector<int64_t> order(static_cast<size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int64_t x, int64_t y) {
    return e.values[static_cast<size_t>(x)] < e.values[static_cast<size_t>(y)];
  });
  EigenDecomposition sorted;
  sorted.values.resize(static_cast<size_t>(d));
  sorted.vectors.assign(static_cast<size_t>(d * d), 0.0);
  for (int64_t j = 0; j < d; ++j) {
    sorted.values[static_cast<size_t>(j)] = e.values[static_cast<size_t>(order[static_cast<size_t>(j)])];
    for (int64_t i = 0; i < d; ++i)
      sorted.vectors[static_cast<size_t>(i * d + j)] =
          v[static_cast<size_t>(i * d + order[static_cast<size_t>(j)])];
  }
  return sorted;
}

namespace {

std::vector<double> eigen_rebuild(const EigenDecomposition& e, int64_t d, double (*f)(double)) {
  std::vector<double> out(static_cast<size_t>(d * d), 0.0);
  for (int64_t i = 0; i < d; ++i)
    for (int64_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (int64_t k = 0; k < d; ++k)
        s += e.vectors[static_cast<size_t>(i * d + k)] * f(e.values[static_cast<size_t>(k)]) *
             e.vectors[static_cast<size_t>(j * d + k)];
      out[static_cast<size_t>(i * d + j)] = s;
    }
  return out;
}

double clip_sqrt(double x) { return x > 0.0 ? std::sqrt(x) : 0.0; }

std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b, int64_t d) {
  std::vector<double> out(static_cast<size_t>(d * d), 0.0);
  for (int64_t i = 0; i < d; ++i)
    for (int64_t k = 0; k < d; ++k) {
      const double aik = a[static_cast<size_t>(i * d + k)];
      if (aik == 0.0) continue;
      for (int64_t j = 0; j < d; ++j)
        out[static_cast<size_t>(i * d + j)] += aik * b[static_cast<size_t>(k * d + j)];
    }
  return out;
}

}  // namespace

double frechet(const GaussianSummary& g1, const GaussianSummary& g2) {
  const int64_t d = g1.dim();
  if (d != g2.dim())
    throw std::invalid_argument("frechet: dimension mismatch " + std::to_string(d) + " vs " +
                                std::to_string(g2.dim()));

  double mean_term = 0.0;
  for (int64_t i = 0; i < d; ++i) {
    const double dm = g1.mean[static_cast<size_t>(i)] - g2.mean[static_cast<size_t>(i)];
    mean_term += dm * dm;
  }

  double tr1 = 0.0, tr2 = 0.0;
  for (int64_t i = 0; i < d; ++i) {
    tr1 += g1.cov[static_cast<size_t>(i * d + i)];
    tr2 += g2.cov[static_cast<size_t>(i * d + i)];
  }

  // sqrt(S1) via eigendecomposition, negatives clipped to zero
  EigenDecomposition e1 = jacobi_eigen(g1.cov, d);
  std::vector<double> s1h = eigen_rebuild(e1, d, clip_sqrt);

  // M = S1^{1/2} S2 S1^{1/2}, symmetrized against roundoff
  std::vector<double> m = matmul(matmul(s1h, g2.cov, d), s1h, d);
  for (int64_t i = 0; i < d; ++i)
    for (int64_t j = i + 1; j < d; ++j) {
      const double avg = 0.5 * (m[static_cast<size_t>(i * d + j)] + m[static_cast<size_t>(j * d + i)]);
      m[static_cast<size_t>(i * d + j)] = avg;
      m[static_cast<size_t>(j * d + i)] = avg;
    }

  EigenDecomposition em = jacobi_eigen(m, d);
  double tr_sqrt = 0.0;
  for (double lam : em.values) tr_sqrt += clip_sqrt(lam);

  return std::max(0.0, mean_term + tr1 + tr2 - 2.0 * tr_sqrt);
}

FidReport fid_by_view(const std::vector<Grid>& real_channel1,
                      const std::vector<Grid>& synth_channel1) {
  FidReport rep;
  double views[3] = {0, 0, 0};
  for (int v = 0; v < 3; ++v) {
    std::vector<std::vector<double>> rf, sf;
    for (const auto& g : real_channel1)
      for (auto& row : slice_features(g, static_cast<View>(v))) rf.push_back(std::move(row));
    for (const auto& g : synth_channel1)
      for (auto& row : slice_features(g, static_cast<View>(v))) sf.push_back(std::move(row));
    const size_t need = rf.empty() ? 15 : rf[0].size() + 1;
    if (rf.size() < need || sf.size() < need)
      throw std::invalid_argument(
          "fid_by_view: insufficient slices for a full-rank covariance (need >= " +
          std::to_string(need) + " per side per view, got " + std::to_string(rf.size()) + "/" +
          std::to_string(sf.size()) + ")");
    views[v] = frechet(fit_gaussian(rf), fit_gaussian(sf));
  }
  rep.axial = views[0];
  rep.sagittal = views[1];
  rep.coronal = views[2];
  rep.average = (views[0] + views[1] + views[2]) / 3.0;
  return rep;
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("roc_auc: scores and labels differ in length");
  const int64_t n = static_cast<int64_t>(scores.size());
  int64_t pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw std::invalid_argument("roc_auc: labels must be 0 or 1");
    pos += l;
  }
  const int64_t neg = n - pos;
  if (pos == 0 || neg == 0)
    throw std::invalid_argument("roc_auc: undefined with a single class present");

  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    return scores[static_cast<size_t>(a)] < scores[static_cast<size_t>(b)];
  });

  // average ranks over tie groups; rank sum of positives gives Mann-Whitney U
  double rank_sum_pos = 0.0;
  int64_t i = 0;
  while (i < n) {
    int64_t j = i;
    while (j < n &&
           scores[static_cast<size_t>(order[static_cast<size_t>(j)])] ==
               scores[static_cast<size_t>(order[static_cast<size_t>(i)])])
      ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (int64_t k = i; k < j; ++k)
      if (labels[static_cast<size_t>(order[static_cast<size_t>(k)])] == 1)
        rank_sum_pos += avg_rank;
    i = j;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1);
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

std::vector<std::pair<double, double>> roc_curve(const std::vector<double>& scores,
                                                 const std::vector<int>& labels) {
  const int64_t n = static_cast<int64_t>(scores.size());
  int64_t pos = 0;
  for (int l : labels) pos += l;
  const int64_t neg = n - pos;
  if (pos == 0 || neg == 0)
    throw std::invalid_argument("roc_curve: undefined with a single class present");

  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
  });

  std::vector<std::pair<double, double>> pts;
  pts.emplace_back(0.0, 0.0);
  int64_t tp = 0, fp = 0, i = 0;
  while (i < n) {
    int64_t j = i;
    while (j < n &&
           scores[static_cast<size_t>(order[static_cast<size_t>(j)])] ==
               scores[static_cast<size_t>(order[static_cast<size_t>(i)])])
      ++j;
    for (int64_t k = i; k < j; ++k) {
      if (labels[static_cast<size_t>(order[static_cast<size_t>(k)])] == 1)
        ++tp;
      else
        ++fp;
    }
    pts.emplace_back(static_cast<double>(fp) / static_cast<double>(neg),
                     static_cast<double>(tp) / static_cast<double>(pos));
    i = j;
  }
  return pts;
}

}  // namespace pnidiff
