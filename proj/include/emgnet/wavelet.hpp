#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "emgnet/types.hpp"

namespace emgnet {

// Orthogonal analysis filter pair. lowpass holds the scaling taps h with
// sum(h) = sqrt(2) and unit energy; highpass is the quadrature mirror
// g[k] = (-1)^k h[L-1-k].
struct WaveletFilter {
  std::string name;
  Vec lowpass;
  Vec highpass;

  Index taps() const { return lowpass.size(); }
};

// Known names: "haar", "db2", "db4". Throws UnknownFilter otherwise.
WaveletFilter make_filter(const std::string& name);

// Six detail bands plus the final approximation for the pipeline's level-6
// analysis; the API itself accepts any level count >= 1.
struct WaveletDecomposition {
  std::vector<Vec> details;  // D1 (finest) .. D_levels
  Vec approximation;         // A_levels
  WaveletFilter filter;
  Index original_length = 0;

  int levels() const { return static_cast<int>(details.size()); }
};

// One analysis step with periodic (circular) extension and phase fixed as
//
//   a[i] = sum_j h[j] x[(2i + j) mod N],   d[i] = sum_j g[j] x[(2i + j) mod N]
//
// for i in [0, N/2). This alignment is part of the public contract; the
// golden vectors in the tests pin it. Synthesis is the exact transpose, so
// round trips reconstruct bit-near-exactly for any even N.
std::pair<Vec, Vec> dwt_single(const Vec& x, const WaveletFilter& filter);
Vec idwt_single(const Vec& approx, const Vec& detail, const WaveletFilter& filter);

// Cascade of dwt_single on the running approximation. Requires the input
// length to be divisible by 2^levels (BadLength) and at least the tap count;
// levels must be >= 1 (BadLevels).
WaveletDecomposition dwt_multilevel(const Vec& signal, const WaveletFilter& filter, int levels);

// Exact inverse of dwt_multilevel. Throws BadDecomposition when the stored
// band lengths are inconsistent with original_length.
Vec idwt_multilevel(const WaveletDecomposition& decomp);

// Debug dump, one row per band: "band_name,c0,c1,...".
void write_decomposition_csv(const WaveletDecomposition& decomp, std::ostream& out);

}  // namespace emgnet
