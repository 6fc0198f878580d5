#include "emgnet/wavelet.hpp"

#include <cmath>
#include <ostream>

#include "emgnet/errors.hpp"

namespace emgnet {

namespace {

// Scaling taps, normalized to sum = sqrt(2). The Daubechies values were
// generated once by spectral factorization at 60-digit precision and rounded
// to the nearest double; the filter-algebra tests lock them in place.
const double kHaar[2] = {
    0.7071067811865476, 0.7071067811865476};

const double kDb2[4] = {
    0.48296291314453416, 0.8365163037378079,
    0.2241438680420134, -0.12940952255126037};

const double kDb4[8] = {
    0.2303778133088965,    0.7148465705529157,
    0.6308807679298589,    -0.027983769416859854,
    -0.18703481171909309,  0.030841381835560764,
    0.0328830116668852,    -0.010597401785069032};

WaveletFilter from_taps(const std::string& name, const double* taps, Index n) {
  WaveletFilter f;
  f.name = name;
  f.lowpass = Eigen::Map<const Vec>(taps, n);
  f.highpass.resize(n);
  for (Index k = 0; k < n; ++k) {
    double sign = (k % 2 == 0) ? 1.0 : -1.0;
    f.highpass[k] = sign * f.lowpass[n - 1 - k];
  }
  return f;
}

Index expected_band_length(Index original, int level) {
  Index len = original;
  for (int j = 0; j < level; ++j) len /= 2;
  return len;
}

}  // namespace

WaveletFilter make_filter(const std::string& name) {
  if (name == "haar" || name == "db1") return from_taps(name, kHaar, 2);
  if (name == "db2") return from_taps(name, kDb2, 4);
  if (name == "db4") return from_taps(name, kDb4, 8);
  throw UnknownFilter("unknown wavelet filter: " + name);
}

std::pair<Vec, Vec> dwt_single(const Vec& x, const WaveletFilter& filter) {
  const Index n = x.size();
  if (n < 2 || n % 2 != 0) throw BadLength("dwt_single needs even input length");
  const Index half = n / 2;
  const Index taps = filter.taps();
  Vec approx(half), detail(half);
  for (Index i = 0; i < half; ++i) {
    double a = 0.0, d = 0.0;
    for (Index j = 0; j < taps; ++j) {
      double v = x[(2 * i + j) % n];
      a += filter.lowpass[j] * v;
      d += filter.highpass[j] * v;
    }
    approx[i] = a;
    detail[i] = d;
  }
  return {std::move(approx), std::move(detail)};
}

Vec idwt_single(const Vec& approx, const Vec& detail, const WaveletFilter& filter) {
  if (approx.size() != detail.size())
    throw BadDecomposition("approximation/detail length mismatch");
  const Index half = approx.size();
  const Index n = 2 * half;
  const Index taps = filter.taps();
  Vec x = Vec::Zero(n);
  // Transpose of the analysis operator: scatter each coefficient back
  // through the same periodic index map.
  for (Index i = 0; i < half; ++i) {
    for (Index j = 0; j < taps; ++j) {
      x[(2 * i + j) % n] += filter.lowpass[j] * approx[i] + filter.highpass[j] * detail[i];
    }
  }
  return x;
}

WaveletDecomposition dwt_multilevel(const Vec& signal, const WaveletFilter& filter, int levels) {
  if (levels < 1) throw BadLevels("levels must be >= 1");
  const Index n = signal.size();
  Index div = 1;
  for (int j = 0; j < levels; ++j) div *= 2;
  if (n == 0 || n % div != 0)
    throw BadLength("signal length must be divisible by 2^levels");
  if (n < filter.taps())
    throw BadLength("signal shorter than the filter");

  WaveletDecomposition decomp;
  decomp.filter = filter;
  decomp.original_length = n;
  decomp.details.reserve(levels);
  Vec approx = signal;
  for (int j = 0; j < levels; ++j) {
    auto [a, d] = dwt_single(approx, filter);
    decomp.details.push_back(std::move(d));
    approx = std::move(a);
  }
  decomp.approximation = std::move(approx);
  return decomp;
}

Vec idwt_multilevel(const WaveletDecomposition& decomp) {
  const int levels = decomp.levels();
  if (levels < 1) throw BadDecomposition("decomposition has no detail bands");
  const Index n = decomp.original_length;
  if (n <= 0) throw BadDecomposition("bad original_length");
  for (int j = 1; j <= levels; ++j) {
    if (decomp.details[j - 1].size() != expected_band_length(n, j))
      throw BadDecomposition("detail band length inconsistent with original_length");
  }
  if (decomp.approximation.size() != expected_band_length(n, levels))
    throw BadDecomposition("approximation length inconsistent with original_length");

  Vec approx = decomp.approximation;
  for (int j = levels; j >= 1; --j) {
    approx = idwt_single(approx, decomp.details[j - 1], decomp.filter);
  }
  return approx;
}

void write_decomposition_csv(const WaveletDecomposition& decomp, std::ostream& out) {
  const auto old_precision = out.precision(17);
  auto write_band = [&out](const std::string& name, const Vec& band) {
    out << name;
    for (Index i = 0; i < band.size(); ++i) out << ',' << band[i];
    out << '\n';
  };
  for (int j = 0; j < decomp.levels(); ++j)
    write_band("D" + std::to_string(j + 1), decomp.details[j]);
  write_band("A" + std::to_string(decomp.levels()), decomp.approximation);
  out.precision(old_precision);
}

}  // namespace emgnet
