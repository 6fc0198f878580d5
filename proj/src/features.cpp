#include "emgnet/features.hpp"

#include <cstdio>

namespace emgnet {

FeatureValues extract_feature_values(const WaveletDecomposition& decomp, RatioMode mode) {
  if (decomp.levels() != kDecompositionLevels)
    throw BadDecomposition("feature extraction expects D1..D6 plus A6");

  // Band order contract: D1..D6 then A6.
  std::array<const Vec*, 7> bands{};
  for (int j = 0; j < kDecompositionLevels; ++j) bands[j] = &decomp.details[j];
  bands[6] = &decomp.approximation;

  FeatureValues out;
  for (int b = 0; b < 7; ++b) {
    out[b] = band_mean(*bands[b]);
    out[7 + b] = band_power(*bands[b]);
    out[14 + b] = band_std(*bands[b]);
  }
  for (int b = 0; b < 6; ++b) {
    out[21 + b] = band_ratio(*bands[b], *bands[b + 1], mode);
  }
  return out;
}

FeatureVector extract_features(const WaveletDecomposition& decomp, ClassLabel label,
                               RatioMode mode) {
  return FeatureVector{extract_feature_values(decomp, mode), label};
}

std::array<std::string, kFeatureCount> feature_names() {
  std::array<std::string, kFeatureCount> names;
  for (int i = 0; i < kFeatureCount; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "f%02d", i + 1);
    names[i] = buf;
  }
  return names;
}

}  // namespace emgnet
