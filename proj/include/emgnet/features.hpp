#pragma once

#include <array>
#include <cmath>
#include <string>

#include "emgnet/errors.hpp"
#include "emgnet/types.hpp"
#include "emgnet/wavelet.hpp"

namespace emgnet {

// How neighboring-band ratios are formed. AbsoluteMean is the default:
// mean(|c_i|) / (mean(|c_j|) + 1e-12). SignedMean divides the raw means,
// with the denominator's magnitude floored at the same guard.
enum class RatioMode { AbsoluteMean, SignedMean };

inline constexpr double kRatioEpsilon = 1e-12;

template <class Derived>
double band_mean(const Eigen::DenseBase<Derived>& coeffs) {
  if (coeffs.size() == 0) throw EmptyBand("band_mean on empty band");
  return coeffs.derived().template cast<double>().mean();
}

template <class Derived>
double band_power(const Eigen::DenseBase<Derived>& coeffs) {
  if (coeffs.size() == 0) throw EmptyBand("band_power on empty band");
  const auto& c = coeffs.derived();
  return c.template cast<double>().array().square().sum() /
         static_cast<double>(c.size());
}

// Population standard deviation (divide by n).
template <class Derived>
double band_std(const Eigen::DenseBase<Derived>& coeffs) {
  if (coeffs.size() == 0) throw EmptyBand("band_std on empty band");
  const auto c = coeffs.derived().template cast<double>().array().eval();
  const double mu = c.mean();
  return std::sqrt((c - mu).square().sum() / static_cast<double>(c.size()));
}

template <class DerivedA, class DerivedB>
double band_ratio(const Eigen::DenseBase<DerivedA>& numerator,
                  const Eigen::DenseBase<DerivedB>& denominator,
                  RatioMode mode = RatioMode::AbsoluteMean) {
  if (numerator.size() == 0 || denominator.size() == 0)
    throw EmptyBand("band_ratio on empty band");
  if (mode == RatioMode::AbsoluteMean) {
    const double num = numerator.derived().template cast<double>().array().abs().mean();
    const double den = denominator.derived().template cast<double>().array().abs().mean();
    return num / (den + kRatioEpsilon);
  }
  const double num = band_mean(numerator);
  const double den = band_mean(denominator);
  const double guarded =
      std::abs(den) < kRatioEpsilon ? std::copysign(kRatioEpsilon, den == 0.0 ? 1.0 : den) : den;
  return num / guarded;
}

using FeatureValues = Eigen::Matrix<double, kFeatureCount, 1>;

// f01-f07 band means (D1..D6, A6), f08-f14 band average powers, f15-f21 band
// standard deviations, f22-f27 neighboring-band ratios (D1/D2 .. D6/A6).
struct FeatureVector {
  FeatureValues values;
  ClassLabel label;
};

// Requires a decomposition with exactly D1..D6 plus A6 (BadDecomposition).
FeatureValues extract_feature_values(const WaveletDecomposition& decomp,
                                     RatioMode mode = RatioMode::AbsoluteMean);
FeatureVector extract_features(const WaveletDecomposition& decomp, ClassLabel label,
                               RatioMode mode = RatioMode::AbsoluteMean);

// Dataset CSV column names "f01".."f27".
std::array<std::string, kFeatureCount> feature_names();

}  // namespace emgnet
