#pragma once

#include <vector>

#include "emgnet/signal.hpp"
#include "emgnet/types.hpp"
#include "emgnet/wavelet.hpp"

namespace emgnet {

// Column-centered principal components of a sample covariance (divisor n-1).
// Components are orthonormal columns in descending eigenvalue order with a
// deterministic sign (first nonzero entry positive).
struct PcaModel {
  Vec mean;         // d
  Mat components;   // d x k
  Vec eigenvalues;  // k, descending, clamped at 0
  Index n_retained = 0;

  Index dimension() const { return mean.size(); }
  Index component_count() const { return components.cols(); }
};

// Eigendecomposition of the d x d covariance when d <= n, otherwise of the
// n x n Gram matrix (band matrices here reach d = 4096 with n = windows, so
// the Gram path carries the load). n_retained starts at the full component
// count.
PcaModel pca_fit(const Mat& matrix);

// Center, project onto the first n_retained components, back-project,
// un-center.
Mat pca_denoise(const Mat& matrix, const PcaModel& model);

struct RetentionRule {
  enum class Kind { Kaiser, Fraction };
  Kind kind = Kind::Kaiser;
  double fraction = 1.0;  // explained-variance fraction, (0, 1]

  static RetentionRule kaiser() { return {Kind::Kaiser, 1.0}; }
  static RetentionRule fraction_of_variance(double p) { return {Kind::Fraction, p}; }
};

// Kaiser: components with eigenvalue above the mean of the model's spectrum.
// Fraction(p): the smallest k whose cumulative eigenvalue sum reaches p of
// the total.
Index select_retained(const Vec& eigenvalues, const RetentionRule& rule);

struct MspcaConfig {
  WaveletFilter filter;
  int levels = kDecompositionLevels;
  RetentionRule retention;
};

// Wavelet-transform every window, run PCA per band across windows, keep the
// dominant components, reconstruct. Labels and window count pass through.
std::vector<Window> mspca_denoise(const std::vector<Window>& windows, const MspcaConfig& config);

}  // namespace emgnet
