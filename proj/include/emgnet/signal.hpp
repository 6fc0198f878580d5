#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "emgnet/types.hpp"

namespace emgnet {

struct Signal {
  Vec samples;                      // non-empty, finite
  double sample_rate_hz = 1.0;      // > 0
  std::optional<ClassLabel> label;  // may be attached later
  std::string source_id;
};

// A contiguous slice of a signal. The pipeline uses kWindowLength samples;
// tests run shorter windows through the same code paths. The label is
// optional at ingestion and becomes mandatory once the window enters a
// Dataset.
struct Window {
  Vec samples;
  std::optional<ClassLabel> label;
};

struct Dataset {
  Mat features;                    // n x 27
  std::vector<ClassLabel> labels;  // length n

  Index rows() const { return features.rows(); }
};

void validate(const Signal& signal);
void validate(const Dataset& dataset);

// floor((len - window_len) / stride) + 1 windows; trailing partial windows
// are dropped. Throws EmptySegmentation when the signal is shorter than
// window_len.
std::vector<Window> segment(const Signal& signal, Index window_len = kWindowLength,
                            Index stride = kWindowLength);

enum class SignalFormat { Csv, F64Binary };

// CSV: one amplitude per line, optional "amplitude" header.
// F64Binary: little-endian 64-bit floats, no header.
Signal load_signal(const std::filesystem::path& path, SignalFormat format);
void save_signal(const Signal& signal, const std::filesystem::path& path, SignalFormat format);

// Deterministic EMG-like windows for desk-scale runs: seven band-limited
// noise components with per-class RMS envelopes plus a class-specific spike
// train. Pure function of (cls, n_windows, seed).
std::vector<Window> synth_generate(ClassLabel cls, int n_windows, std::uint64_t seed,
                                   Index window_len = kWindowLength);

// Windows container (binary, magic "EMGWIN", version 1). encode_windows
// returns the exact file bytes; save_windows writes them.
std::string encode_windows(const std::vector<Window>& windows);
void save_windows(const std::vector<Window>& windows, const std::filesystem::path& path);
std::vector<Window> load_windows(const std::filesystem::path& path);

// Dataset CSV: columns f01..f27 plus "label" in {0,1,2}.
void save_dataset_csv(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset_csv(const std::filesystem::path& path);

}  // namespace emgnet
