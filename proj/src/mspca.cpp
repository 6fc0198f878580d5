#include "emgnet/mspca.hpp"

#include <Eigen/Dense>

#include <algorithm>

#include "emgnet/errors.hpp"

namespace emgnet {

namespace {

// Numerical-rank cutoff for the Gram path, where zero-eigenvalue directions
// carry no usable eigenvector.
constexpr double kRankTolerance = 1e-12;

void fix_sign(Mat& components) {
  for (Index c = 0; c < components.cols(); ++c) {
    for (Index r = 0; r < components.rows(); ++r) {
      const double v = components(r, c);
      if (std::abs(v) > 1e-12) {
        if (v < 0) components.col(c) = -components.col(c);
        break;
      }
    }
  }
}

}  // namespace

PcaModel pca_fit(const Mat& matrix) {
  const Index n = matrix.rows();
  const Index d = matrix.cols();
  if (n < 2) throw TooFewRows("pca_fit needs at least 2 rows");
  if (d < 1) throw BadInput("pca_fit needs at least 1 column");
  if (!matrix.allFinite()) throw BadInput("pca_fit input has non-finite entries");

  PcaModel model;
  model.mean = matrix.colwise().mean();
  Mat centered = matrix.rowwise() - model.mean.transpose();
  const double divisor = static_cast<double>(n - 1);

  if (d <= n) {
    Mat cov = (centered.transpose() * centered) / divisor;
    Eigen::SelfAdjointEigenSolver<Mat> solver(cov);
    // Eigen returns ascending order; flip to descending.
    model.eigenvalues = solver.eigenvalues().reverse().cwiseMax(0.0);
    model.components = solver.eigenvectors().rowwise().reverse();
  } else {
    Mat gram = (centered * centered.transpose()) / divisor;
    Eigen::SelfAdjointEigenSolver<Mat> solver(gram);
    Vec evals = solver.eigenvalues().reverse().cwiseMax(0.0);
    Mat evecs = solver.eigenvectors().rowwise().reverse();
    const double cutoff = evals.size() > 0 ? evals[0] * kRankTolerance : 0.0;
    Index k = 0;
    while (k < evals.size() && evals[k] > cutoff) ++k;
    model.eigenvalues = evals.head(k);
    model.components.resize(d, k);
    for (Index c = 0; c < k; ++c) {
      // Covariance eigenvector from the Gram eigenvector: v = X^T u / sqrt((n-1) lambda).
      model.components.col(c) =
          centered.transpose() * evecs.col(c) / std::sqrt(divisor * evals[c]);
    }
  }
  fix_sign(model.components);
  model.n_retained = model.component_count();
  return model;
}

Mat pca_denoise(const Mat& matrix, const PcaModel& model) {
  if (matrix.cols() != model.dimension())
    throw ShapeMismatch("pca_denoise column count differs from the fitted model");
  if (model.n_retained < 0 || model.n_retained > model.component_count())
    throw BadInput("n_retained out of range");
  Mat centered = matrix.rowwise() - model.mean.transpose();
  const auto basis = model.components.leftCols(model.n_retained);
  Mat reconstructed = (centered * basis) * basis.transpose();
  return reconstructed.rowwise() + model.mean.transpose();
}

Index select_retained(const Vec& eigenvalues, const RetentionRule& rule) {
  const Index k = eigenvalues.size();
  if (k == 0) return 0;
  if (rule.kind == RetentionRule::Kind::Kaiser) {
    const double mean = eigenvalues.mean();
    Index retained = 0;
    while (retained < k && eigenvalues[retained] > mean) ++retained;
    return retained;
  }
  if (!(rule.fraction > 0.0 && rule.fraction <= 1.0))
    throw BadInput("retention fraction must lie in (0, 1]");
  const double total = eigenvalues.sum();
  if (total <= 0.0) return 0;
  double cumulative = 0.0;
  for (Index i = 0; i < k; ++i) {
    cumulative += eigenvalues[i];
    if (cumulative >= rule.fraction * total) return i + 1;
  }
  return k;
}

std::vector<Window> mspca_denoise(const std::vector<Window>& windows, const MspcaConfig& config) {
  const Index n = static_cast<Index>(windows.size());
  if (n < 2) throw TooFewRows("mspca_denoise needs at least 2 windows");
  const Index len = windows.front().samples.size();
  for (const Window& w : windows)
    if (w.samples.size() != len) throw BadInput("windows have mixed lengths");

  std::vector<WaveletDecomposition> decomps;
  decomps.reserve(windows.size());
  for (const Window& w : windows)
    decomps.push_back(dwt_multilevel(w.samples, config.filter, config.levels));

  // One PCA per band, observations = windows, variables = coefficients.
  const int bands = config.levels + 1;
  for (int b = 0; b < bands; ++b) {
    auto band_of = [&](Index w) -> Vec& {
      return b < config.levels ? decomps[static_cast<std::size_t>(w)].details[static_cast<std::size_t>(b)]
                               : decomps[static_cast<std::size_t>(w)].approximation;
    };
    const Index d = band_of(0).size();
    Mat stacked(n, d);
    for (Index w = 0; w < n; ++w) stacked.row(w) = band_of(w).transpose();
    PcaModel model = pca_fit(stacked);
    model.n_retained = select_retained(model.eigenvalues, config.retention);
    Mat denoised = pca_denoise(stacked, model);
    for (Index w = 0; w < n; ++w) band_of(w) = denoised.row(w).transpose();
  }

  std::vector<Window> out;
  out.reserve(windows.size());
  for (Index w = 0; w < n; ++w) {
    out.push_back(Window{idwt_multilevel(decomps[static_cast<std::size_t>(w)]),
                         windows[static_cast<std::size_t>(w)].label});
  }
  return out;
}

}  // namespace emgnet
