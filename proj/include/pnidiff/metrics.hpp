#pragma once

#include <vector>

#include "pnidiff/grid.hpp"

namespace pnidiff {

// 2|A∩B| / (|A| + |B|); both-empty pairs score 1.0 by convention.
double dice(const Grid& a, const Grid& b);

// 10*log10(peak^2 / MSE); +inf for identical inputs.
double psnr(const Grid& x, const Grid& y, double peak = 1.0);

// Mean over axis-0 slices of windowed SSIM (11x11 Gaussian window, sigma 1.5,
// C1=0.01^2, C2=0.03^2, dynamic range 1). Slices smaller than the window fall
// back to global-statistics SSIM.
double ssim(const Grid& x, const Grid& y);

enum class View { Axial = 0, Sagittal = 1, Coronal = 2 };

// Per-slice 14-dim descriptor: mean, std, skewness, excess kurtosis,
// gradient-magnitude mean/std, and a normalized 8-bin histogram over [0,1].
// Zero-variance slices report 0 for skewness and kurtosis.
std::vector<std::vector<double>> slice_features(const Grid& volume, View view);

struct GaussianSummary {
  std::vector<double> mean;
  std::vector<double> cov;  // row-major d x d, symmetric
  int64_t dim() const { return static_cast<int64_t>(mean.size()); }
};

// Sample mean and (n-1)-normalized covariance, symmetrized.
GaussianSummary fit_gaussian(const std::vector<std::vector<double>>& rows);

// Cyclic Jacobi rotations on a symmetric matrix; terminates when the
// off-diagonal Frobenius norm drops below 1e-12 (relative to scale).
// Returns eigenvalues (ascending) and column eigenvectors.
struct EigenDecomposition {
  std::vector<double> values;
  std::vector<double> vectors;  // row-major d x d; column j pairs with values[j]
};
EigenDecomposition jacobi_eigen(const std::vector<double>& sym, int64_t d);

// Squared Fréchet (Wasserstein-2) distance between Gaussian summaries:
// ||mu1-mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}), computed via the symmetric
// form S1^{1/2} S2 S1^{1/2}. Negative eigenvalues above -1e-10 are clipped.
double frechet(const GaussianSummary& g1, const GaussianSummary& g2);

struct FidReport {
  double axial = 0.0;
  double sagittal = 0.0;
  double coronal = 0.0;
  double average = 0.0;
};

// Pooled slice features per view over channel-1 patch intensities; requires
// at least d+1 slices per side per view for a full-rank covariance fit.
FidReport fid_by_view(const std::vector<Grid>& real_channel1,
                      const std::vector<Grid>& synth_channel1);

// Mann-Whitney AUC with tie handling: (concordant + 0.5*ties) / (P*N).
// Throws when only one class is present.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Tie-aware ROC curve points (FPR, TPR) from (0,0) to (1,1).
std::vector<std::pair<double, double>> roc_curve(const std::vector<double>& scores,
                                                 const std::vector<int>& labels);

}  // namespace pnidiff
