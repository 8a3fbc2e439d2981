#include <cmath>

#include "doctest.h"
#include "pnidiff/metrics.hpp"

using namespace pnidiff;

TEST_CASE("dice: tabulated values and symmetry") {
  Grid a({2, 2, 2}), b({2, 2, 2});
  a.data = {1, 1, 1, 1, 0, 0, 0, 0};
  b.data = {0, 0, 1, 1, 1, 1, 0, 0};
  CHECK(dice(a, b) == doctest::Approx(0.5));  // |A|=4, |B|=4, overlap 2
  CHECK(dice(a, b) == dice(b, a));
  CHECK(dice(a, a) == 1.0);

  Grid e({2, 2, 2}), f({2, 2, 2});
  CHECK(dice(e, f) == 1.0);  // both empty
  f.data[0] = 1;
  CHECK(dice(e, f) == 0.0);  // disjoint

  Grid wrong({2, 2, 1});
  CHECK_THROWS_AS(dice(a, wrong), std::invalid_argument);
}

TEST_CASE("psnr: inf sentinel, 20 dB, 0 dB") {
  Grid x({4, 4, 1}, 0.5);
  CHECK(std::isinf(psnr(x, x)));

  Grid y = x;
  for (auto& v : y.data) v += 0.1;
  CHECK(psnr(x, y) == doctest::Approx(20.0));

  Grid z = x;
  for (auto& v : z.data) v += 1.0;
  CHECK(psnr(x, z) == doctest::Approx(0.0));
}

namespace {

// Windowed SSIM recomputed through the centered-moment route, independent of
// the E[xy] - mu*mu formulation used by the implementation.
double ssim_oracle_12x12(const Grid& x, const Grid& y) {
  const int W = 12, K = 11;
  const double sigma = 1.5, C1 = 1e-4, C2 = 9e-4;
  double w[K][K];
  double total = 0;
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) {
      const double di = i - 5.0, dj = j - 5.0;
      w[i][j] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
      total += w[i][j];
    }
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) w[i][j] /= total;

  double acc = 0;
  int cnt = 0;
  for (int r = 0; r + K <= W; ++r)
    for (int c = 0; c + K <= W; ++c) {
      double mx = 0, my = 0;
      for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) {
          mx += w[i][j] * x.at(0, r + i, c + j);
          my += w[i][j] * y.at(0, r + i, c + j);
        }
      double vx = 0, vy = 0, cov = 0;
      for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) {
          const double dx = x.at(0, r + i, c + j) - mx;
          const double dy = y.at(0, r + i, c + j) - my;
          vx += w[i][j] * dx * dx;
          vy += w[i][j] * dy * dy;
          cov += w[i][j] * dx * dy;
        }
      acc += ((2 * mx * my + C1) * (2 * cov + C2)) / ((mx * mx + my * my + C1) * (vx + vy + C2));
      ++cnt;
    }
  return acc / cnt;
}

}  // namespace

TEST_CASE("ssim: identity, inversion, and per-window oracle") {
  Rng r(41);
  Grid x({1, 12, 12});
  for (auto& v : x.data) v = r.uniform();
  CHECK(ssim(x, x) == doctest::Approx(1.0));

  Grid inv = x;
  for (auto& v : inv.data) v = 1.0 - v;
  CHECK(ssim(x, inv) < 1.0);

  Grid y({1, 12, 12});
  for (auto& v : y.data) v = r.uniform();
  CHECK(ssim(x, y) == doctest::Approx(ssim_oracle_12x12(x, y)).epsilon(1e-10));
}

TEST_CASE("ssim: undersized slices fall back to global statistics") {
  Rng r(42);
  Grid x({2, 6, 6}), y({2, 6, 6});
  for (auto& v : x.data) v = r.uniform();
  for (auto& v : y.data) v = r.uniform();
  CHECK(ssim(x, x) == doctest::Approx(1.0));
  const double v = ssim(x, y);
  CHECK(v <= 1.0);
  CHECK(v >= -1.0);
}

TEST_CASE("slice_features: counts, degenerate guard, moment oracle") {
  Grid v({4, 5, 6});
  Rng r(43);
  for (auto& x : v.data) x = r.uniform();

  CHECK(slice_features(v, View::Axial).size() == 4);
  CHECK(slice_features(v, View::Sagittal).size() == 5);
  CHECK(slice_features(v, View::Coronal).size() == 6);
  CHECK(slice_features(v, View::Axial)[0].size() == 14);

  Grid c({1, 4, 4}, 0.3);
  auto fc = slice_features(c, View::Axial)[0];
  CHECK(fc[0] == doctest::Approx(0.3));
  CHECK(fc[1] == 0.0);  // std
  CHECK(fc[2] == 0.0);  // skew guard
  CHECK(fc[3] == 0.0);  // kurtosis guard
  // histogram one-hot: 0.3*8 = 2.4 -> bin 2
  for (int b = 0; b < 8; ++b) CHECK(fc[static_cast<size_t>(6 + b)] == (b == 2 ? 1.0 : 0.0));

  // moments against direct summation
  auto f0 = slice_features(v, View::Axial)[0];
  std::vector<double> s;
  for (int64_t b = 0; b < 5; ++b)
    for (int64_t cc = 0; cc < 6; ++cc) s.push_back(v.at(0, b, cc));
  double mean = 0;
  for (double x : s) mean += x;
  mean /= s.size();
  double m2 = 0, m3 = 0, m4 = 0;
  for (double x : s) {
    m2 += (x - mean) * (x - mean);
    m3 += (x - mean) * (x - mean) * (x - mean);
    m4 += (x - mean) * (x - mean) * (x - mean) * (x - mean);
  }
  m2 /= s.size();
  m3 /= s.size();
  m4 /= s.size();
  CHECK(f0[0] == doctest::Approx(mean).epsilon(1e-10));
  CHECK(f0[1] == doctest::Approx(std::sqrt(m2)).epsilon(1e-10));
  CHECK(f0[2] == doctest::Approx(m3 / std::pow(m2, 1.5)).epsilon(1e-10));
  CHECK(f0[3] == doctest::Approx(m4 / (m2 * m2) - 3.0).epsilon(1e-10));
}

TEST_CASE("jacobi: hand cases match characteristic-polynomial roots") {
  // [[2,1],[1,2]] -> eigenvalues 1, 3
  auto e2 = jacobi_eigen({2, 1, 1, 2}, 2);
  CHECK(e2.values[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e2.values[1] == doctest::Approx(3.0).epsilon(1e-12));

  // [[2,0,0],[0,3,4],[0,4,9]] -> 2 and roots of l^2-12l+11: 1, 11
  auto e3 = jacobi_eigen({2, 0, 0, 0, 3, 4, 0, 4, 9}, 3);
  CHECK(e3.values[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e3.values[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(e3.values[2] == doctest::Approx(11.0).epsilon(1e-12));
}

TEST_CASE("jacobi reconstructs random SPD matrices") {
  Rng r(44);
  for (int trial = 0; trial < 50; ++trial) {
    const int64_t d = r.uniform_int(2, 14);
    // SPD via A^T A + small ridge
    std::vector<double> raw(static_cast<size_t>(d * d));
    for (auto& x : raw) x = r.normal();
    std::vector<double> spd(static_cast<size_t>(d * d), 0.0);
    for (int64_t i = 0; i < d; ++i)
      for (int64_t j = 0; j < d; ++j) {
        double s = 0;
        for (int64_t k = 0; k < d; ++k)
          s += raw[static_cast<size_t>(k * d + i)] * raw[static_cast<size_t>(k * d + j)];
        spd[static_cast<size_t>(i * d + j)] = s + (i == j ? 0.1 : 0.0);
      }
    auto e = jacobi_eigen(spd, d);
    // V diag(l) V^T == input within 1e-10
    for (int64_t i = 0; i < d; ++i)
      for (int64_t j = 0; j < d; ++j) {
        double s = 0;
        for (int64_t k = 0; k < d; ++k)
          s += e.vectors[static_cast<size_t>(i * d + k)] * e.values[static_cast<size_t>(k)] *
               e.vectors[static_cast<size_t>(j * d + k)];
        CHECK(s == doctest::Approx(spd[static_cast<size_t>(i * d + j)]).epsilon(1e-10));
      }
    for (double lam : e.values) CHECK(lam > 0.0);
  }
}

TEST_CASE("frechet: zero on identical summaries; closed forms; symmetry") {
  GaussianSummary g1;
  g1.mean = {0.0};
  g1.cov = {1.0};
  CHECK(frechet(g1, g1) == doctest::Approx(0.0).epsilon(1e-9));

  // 1-D: (mu1-mu2)^2 + (s1-s2)^2 with mu 0 vs 1, sigma 1 vs 2 -> 1 + 1 = 2
  GaussianSummary g2;
  g2.mean = {1.0};
  g2.cov = {4.0};
  CHECK(frechet(g1, g2) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(frechet(g2, g1) == doctest::Approx(frechet(g1, g2)).epsilon(1e-9));

  // diagonal covariances: sum of per-axis closed forms
  Rng r(45);
  const int64_t d = 5;
  GaussianSummary a, b;
  a.mean.resize(d);
  b.mean.resize(d);
  a.cov.assign(d * d, 0.0);
  b.cov.assign(d * d, 0.0);
  double want = 0.0;
  for (int64_t i = 0; i < d; ++i) {
    a.mean[static_cast<size_t>(i)] = r.uniform(-1, 1);
    b.mean[static_cast<size_t>(i)] = r.uniform(-1, 1);
    const double l1 = r.uniform(0.2, 2.0), l2 = r.uniform(0.2, 2.0);
    a.cov[static_cast<size_t>(i * d + i)] = l1;
    b.cov[static_cast<size_t>(i * d + i)] = l2;
    const double dm = a.mean[static_cast<size_t>(i)] - b.mean[static_cast<size_t>(i)];
    want += dm * dm + (std::sqrt(l1) - std::sqrt(l2)) * (std::sqrt(l1) - std::sqrt(l2));
  }
  CHECK(frechet(a, b) == doctest::Approx(want).epsilon(1e-9));

  GaussianSummary wrong;
  wrong.mean = {0, 0};
  wrong.cov = {1, 0, 0, 1};
  CHECK_THROWS_AS(frechet(g1, wrong), std::invalid_argument);
}

TEST_CASE("fid_by_view: zero on identical sets, mean-shift monotonicity") {
  Rng r(46);
  std::vector<Grid> real;
  for (int i = 0; i < 4; ++i) {
    Grid g({8, 8, 8});
    for (auto& v : g.data) v = r.uniform(0.2, 0.6);
    real.push_back(std::move(g));
  }
  FidReport same = fid_by_view(real, real);
  CHECK(same.axial == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(same.sagittal == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(same.coronal == doctest::Approx(0.0).epsilon(1e-9));

  std::vector<Grid> shifted = real;
  for (auto& g : shifted)
    for (auto& v : g.data) v += 0.2;
  FidReport shift = fid_by_view(real, shifted);
  CHECK(shift.axial > same.axial);
  CHECK(shift.sagittal > same.sagittal);
  CHECK(shift.coronal > same.coronal);
  CHECK(shift.average ==
        doctest::Approx((shift.axial + shift.sagittal + shift.coronal) / 3.0).epsilon(1e-15));
}

TEST_CASE("fid_by_view: rank guard") {
  Rng r(47);
  Grid g({4, 16, 16});
  for (auto& v : g.data) v = r.uniform();
  std::vector<Grid> tiny{g};  // only 4 axial slices < 15
  CHECK_THROWS_WITH_AS(fid_by_view(tiny, tiny), doctest::Contains("insufficient"),
                       std::invalid_argument);
}

TEST_CASE("roc_auc: tabulated cases") {
  CHECK(roc_auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(roc_auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == 1.0);
  CHECK(roc_auc({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == 0.5);
  CHECK_THROWS_AS(roc_auc({0.1, 0.2}, {1, 1}), std::invalid_argument);
}

TEST_CASE("roc_auc matches explicit pair counting with ties") {
  Rng r(48);
  for (int trial = 0; trial < 200; ++trial) {
    const int64_t n = r.uniform_int(4, 40);
    std::vector<double> scores(static_cast<size_t>(n));
    std::vector<int> labels(static_cast<size_t>(n));
    bool has0 = false, has1 = false;
    for (int64_t i = 0; i < n; ++i) {
      scores[static_cast<size_t>(i)] =
          std::round(r.uniform() * 8.0) / 8.0;  // coarse grid forces ties
      labels[static_cast<size_t>(i)] = static_cast<int>(r.bounded(2));
      (labels[static_cast<size_t>(i)] ? has1 : has0) = true;
    }
    if (!has0 || !has1) continue;

    double conc = 0, ties = 0;
    int64_t pairs = 0;
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < n; ++j) {
        if (labels[static_cast<size_t>(i)] != 1 || labels[static_cast<size_t>(j)] != 0) continue;
        ++pairs;
        if (scores[static_cast<size_t>(i)] > scores[static_cast<size_t>(j)])
          conc += 1;
        else if (scores[static_cast<size_t>(i)] == scores[static_cast<size_t>(j)])
          ties += 1;
      }
    const double want = (conc + 0.5 * ties) / static_cast<double>(pairs);
    CHECK(roc_auc(scores, labels) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("roc_auc invariances") {
  Rng r(49);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 30; ++i) {
    scores.push_back(r.normal());
    labels.push_back(static_cast<int>(r.bounded(2)));
  }
  labels[0] = 0;
  labels[1] = 1;

  // anti-symmetry for tie-free scores
  std::vector<double> neg = scores;
  for (auto& s : neg) s = -s;
  CHECK(roc_auc(scores, labels) + roc_auc(neg, labels) == doctest::Approx(1.0).epsilon(1e-12));

  // invariance under strictly monotone transforms
  std::vector<double> warped = scores;
  for (auto& s : warped) s = std::exp(0.5 * s) + 3.0 * s;
  CHECK(roc_auc(scores, labels) == doctest::Approx(roc_auc(warped, labels)).epsilon(1e-12));
}

TEST_CASE("roc_curve is a staircase from (0,0) to (1,1)") {
  auto pts = roc_curve({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1});
  CHECK(pts.front() == std::pair<double, double>{0.0, 0.0});
  CHECK(pts.back() == std::pair<double, double>{1.0, 1.0});
  for (size_t i = 1; i < pts.size(); ++i) {
    CHECK(pts[i].first >= pts[i - 1].first);
    CHECK(pts[i].second >= pts[i - 1].second);
  }
}
