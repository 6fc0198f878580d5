#include "emgnet/signal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "emgnet/errors.hpp"
#include "emgnet/rng.hpp"
#include "io_util.hpp"

namespace emgnet {

ClassLabel class_label_from_int(int value) {
  if (value < 0 || value >= kNumClasses)
    throw BadLabel("class label must be 0, 1 or 2; got " + std::to_string(value));
  return static_cast<ClassLabel>(value);
}

const char* class_label_name(ClassLabel label) {
  switch (label) {
    case ClassLabel::Normal: return "normal";
    case ClassLabel::Myopathy: return "myopathy";
    case ClassLabel::Als: return "als";
  }
  return "unknown";
}

void validate(const Signal& signal) {
  if (signal.samples.size() == 0) throw BadInput("signal has no samples");
  if (!(signal.sample_rate_hz > 0)) throw BadInput("sample_rate_hz must be positive");
  if (!signal.samples.allFinite()) throw BadInput("signal contains non-finite samples");
}

void validate(const Dataset& dataset) {
  if (dataset.features.cols() != kFeatureCount)
    throw BadInput("dataset must have 27 feature columns");
  if (static_cast<Index>(dataset.labels.size()) != dataset.features.rows())
    throw BadInput("dataset labels/rows mismatch");
  if (!dataset.features.allFinite()) throw BadInput("dataset contains non-finite entries");
}

std::vector<Window> segment(const Signal& signal, Index window_len, Index stride) {
  if (window_len < 1) throw std::invalid_argument("window_len must be >= 1");
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  const Index n = signal.samples.size();
  if (n < window_len)
    throw EmptySegmentation("signal of length " + std::to_string(n) +
                            " is shorter than the window length " +
                            std::to_string(window_len));
  const Index count = (n - window_len) / stride + 1;
  std::vector<Window> windows;
  windows.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    windows.push_back(Window{signal.samples.segment(i * stride, window_len), signal.label});
  }
  return windows;
}

// ---------------------------------------------------------------------------
// Signal file formats
// ---------------------------------------------------------------------------

namespace {

Signal load_signal_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<double> samples;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
      line.erase(0, 3);
    std::string token = detail::trim(line);
    if (token.empty()) continue;
    if (line_no == 1 && token == "amplitude") continue;
    double v;
    if (!detail::parse_double(token, v))
      throw ParseError("non-numeric token '" + token + "' in " + path.string(), line_no);
    samples.push_back(v);
  }
  if (samples.empty()) throw EmptyInput("no samples in " + path.string());
  Signal s;
  s.samples = Eigen::Map<const Vec>(samples.data(), static_cast<Index>(samples.size()));
  s.source_id = path.filename().string();
  return s;
}

Signal load_signal_binary(const std::filesystem::path& path) {
  std::string data = detail::read_file_bytes(path);
  if (data.empty()) throw EmptyInput("empty file " + path.string());
  if (data.size() % 8 != 0)
    throw ParseError("file size not a multiple of 8 bytes: " + path.string(),
                     static_cast<long>(data.size() / 8 + 1));
  detail::ByteReader reader(data, path.string());
  Signal s;
  s.samples.resize(static_cast<Index>(data.size() / 8));
  for (Index i = 0; i < s.samples.size(); ++i) s.samples[i] = reader.f64();
  s.source_id = path.filename().string();
  return s;
}

}  // namespace

Signal load_signal(const std::filesystem::path& path, SignalFormat format) {
  return format == SignalFormat::Csv ? load_signal_csv(path) : load_signal_binary(path);
}

void save_signal(const Signal& signal, const std::filesystem::path& path, SignalFormat format) {
  std::string data;
  if (format == SignalFormat::Csv) {
    data = "amplitude\n";
    for (Index i = 0; i < signal.samples.size(); ++i) {
      data += detail::format_double(signal.samples[i]);
      data += '\n';
    }
  } else {
    data.reserve(static_cast<std::size_t>(signal.samples.size()) * 8);
    for (Index i = 0; i < signal.samples.size(); ++i) detail::put_f64(data, signal.samples[i]);
  }
  detail::atomic_write_file(path, data);
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

namespace {

// Direct-form biquad; coefficients already normalized by a0.
struct Biquad {
  double b0, b1, b2, a1, a2;

  void apply(const Vec& x, Vec& y) const {
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (Index i = 0; i < x.size(); ++i) {
      double out = b0 * x[i] + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1; x1 = x[i];
      y2 = y1; y1 = out;
      y[i] = out;
    }
  }
};

// Constant-skirt bandpass centered at f0 (cycles/sample).
Biquad bandpass(double f0, double q) {
  const double w0 = 2.0 * 3.14159265358979323846 * f0;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  return Biquad{alpha / a0, 0.0, -alpha / a0, -2.0 * std::cos(w0) / a0, (1.0 - alpha) / a0};
}

Biquad lowpass(double f0, double q) {
  const double w0 = 2.0 * 3.14159265358979323846 * f0;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double c = std::cos(w0);
  const double a0 = 1.0 + alpha;
  return Biquad{(1.0 - c) / (2.0 * a0), (1.0 - c) / a0, (1.0 - c) / (2.0 * a0),
                -2.0 * c / a0, (1.0 - alpha) / a0};
}

struct ClassProfile {
  // Target RMS of the band-limited component feeding D1..D6 and A6.
  std::array<double, 7> band_rms;
  double spikes_per_sample;
  double spike_width;  // samples
  double spike_amp;
};

// Qualitative class shapes: myopathy skews high-frequency and low-amplitude
// with dense short spikes; ALS is large-amplitude with sparse long spikes
// and heavy low-frequency content; normal sits in between, mid-band heavy.
const ClassProfile& profile_for(ClassLabel cls) {
  static const ClassProfile kNormal{
      {0.30, 0.50, 0.80, 1.00, 0.80, 0.50, 0.30}, 40.0 / 8192.0, 8.0, 1.2};
  static const ClassProfile kMyopathy{
      {0.60, 0.90, 0.70, 0.50, 0.35, 0.25, 0.15}, 80.0 / 8192.0, 1.8, 0.9};
  static const ClassProfile kAls{
      {1.10, 0.70, 0.50, 0.60, 0.90, 1.20, 0.80}, 12.0 / 8192.0, 24.0, 4.0};
  switch (cls) {
    case ClassLabel::Normal: return kNormal;
    case ClassLabel::Myopathy: return kMyopathy;
    default: return kAls;
  }
}

constexpr Index kWarmup = 512;  // discards the biquad transient

void add_spike(Vec& w, Index center, double amp, double width) {
  const Index reach = static_cast<Index>(std::ceil(4.0 * width));
  for (Index dt = -reach; dt <= reach; ++dt) {
    Index idx = center + dt;
    if (idx < 0 || idx >= w.size()) continue;
    const double t = static_cast<double>(dt) / width;
    // Biphasic MUAP-like pulse (derivative of a Gaussian).
    w[idx] += amp * (-t) * std::exp(-0.5 * t * t);
  }
}

Vec synth_window(ClassLabel cls, Index n, std::mt19937_64& g) {
  const ClassProfile& prof = profile_for(cls);

  // One white stream drives all seven band filters.
  Vec noise(n + kWarmup);
  for (Index i = 0; i < noise.size(); ++i) noise[i] = rng::gaussian(g);

  std::array<Biquad, 7> filters;
  for (int j = 0; j < 6; ++j) {
    // Dj occupies (2^-(j+2), 2^-(j+1)) cycles/sample; center at the geometric mean.
    filters[j] = bandpass(std::pow(2.0, -(j + 1.5)), std::sqrt(2.0));
  }
  filters[6] = lowpass(std::pow(2.0, -7.5), 0.7071067811865476);

  Vec w = Vec::Zero(n);
  Vec filtered(noise.size());
  for (int j = 0; j < 7; ++j) {
    filters[j].apply(noise, filtered);
    auto body = filtered.tail(n);
    const double rms = std::sqrt(body.squaredNorm() / static_cast<double>(n));
    if (rms > 1e-30) w += (prof.band_rms[j] / rms) * body;
  }

  const Index base = std::max<Index>(1, static_cast<Index>(std::lround(prof.spikes_per_sample * n)));
  const Index count = base + static_cast<Index>(rng::bounded(g, base / 2 + 1));
  for (Index s = 0; s < count; ++s) {
    const Index center = static_cast<Index>(rng::bounded(g, static_cast<std::uint64_t>(n)));
    const double amp = prof.spike_amp * rng::uniform(g, 0.8, 1.2);
    const double sign = rng::bounded(g, 2) == 0 ? 1.0 : -1.0;
    add_spike(w, center, sign * amp, prof.spike_width);
  }
  return w;
}

}  // namespace

std::vector<Window> synth_generate(ClassLabel cls, int n_windows, std::uint64_t seed,
                                   Index window_len) {
  if (n_windows < 1) throw std::invalid_argument("n_windows must be >= 1");
  if (window_len < 4) throw std::invalid_argument("window_len must be >= 4");
  std::mt19937_64 g(rng::derive_seed(seed, 0x53594e5448ull + static_cast<int>(cls)));
  std::vector<Window> windows;
  windows.reserve(static_cast<std::size_t>(n_windows));
  for (int i = 0; i < n_windows; ++i) {
    windows.push_back(Window{synth_window(cls, window_len, g), cls});
  }
  return windows;
}

// ---------------------------------------------------------------------------
// Windows container
// ---------------------------------------------------------------------------

namespace {
constexpr char kWindowsMagic[6] = {'E', 'M', 'G', 'W', 'I', 'N'};
}

std::string encode_windows(const std::vector<Window>& windows) {
  if (windows.empty()) throw EmptyInput("no windows to encode");
  const Index len = windows.front().samples.size();
  std::string data;
  data.append(kWindowsMagic, sizeof(kWindowsMagic));
  detail::put_u32(data, 1);
  detail::put_u32(data, static_cast<std::uint32_t>(len));
  detail::put_u64(data, windows.size());
  for (const Window& w : windows) {
    if (w.samples.size() != len) throw BadInput("windows have mixed lengths");
    detail::put_i32(data, w.label ? static_cast<int>(*w.label) : -1);
    for (Index i = 0; i < len; ++i) detail::put_f64(data, w.samples[i]);
  }
  return data;
}

void save_windows(const std::vector<Window>& windows, const std::filesystem::path& path) {
  detail::atomic_write_file(path, encode_windows(windows));
}

std::vector<Window> load_windows(const std::filesystem::path& path) {
  std::string data = detail::read_file_bytes(path);
  if (data.size() < sizeof(kWindowsMagic) ||
      data.compare(0, sizeof(kWindowsMagic), kWindowsMagic, sizeof(kWindowsMagic)) != 0)
    throw ModelFormatError("not a windows container: " + path.string());
  detail::ByteReader reader(data, path.string());
  char magic[6];
  reader.bytes(magic, 6);
  const std::uint32_t version = reader.u32();
  if (version != 1)
    throw ModelFormatError("unsupported windows container version " + std::to_string(version));
  const Index len = static_cast<Index>(reader.u32());
  const std::uint64_t count = reader.u64();
  std::vector<Window> windows;
  windows.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    Window w;
    const std::int32_t raw_label = reader.i32();
    if (raw_label >= 0) w.label = class_label_from_int(raw_label);
    w.samples.resize(len);
    for (Index i = 0; i < len; ++i) w.samples[i] = reader.f64();
    windows.push_back(std::move(w));
  }
  if (!reader.exhausted())
    throw ModelFormatError("trailing bytes in windows container: " + path.string());
  return windows;
}

// ---------------------------------------------------------------------------
// Dataset CSV
// ---------------------------------------------------------------------------

void save_dataset_csv(const Dataset& dataset, const std::filesystem::path& path) {
  validate(dataset);
  std::string data;
  for (int i = 0; i < kFeatureCount; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "f%02d,", i + 1);
    data += buf;
  }
  data += "label\n";
  for (Index r = 0; r < dataset.rows(); ++r) {
    for (Index c = 0; c < kFeatureCount; ++c) {
      data += detail::format_double(dataset.features(r, c));
      data += ',';
    }
    data += std::to_string(static_cast<int>(dataset.labels[static_cast<std::size_t>(r)]));
    data += '\n';
  }
  detail::atomic_write_file(path, data);
}

Dataset load_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw EmptyInput("empty dataset file " + path.string());
  auto header = detail::split_csv_row(line);
  if (header.size() != kFeatureCount + 1 || header.back() != "label")
    throw ParseError("bad dataset header in " + path.string(), 1);

  std::vector<std::array<double, kFeatureCount>> rows;
  std::vector<ClassLabel> labels;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_row(line);
    if (fields.size() != kFeatureCount + 1)
      throw ParseError("expected 28 columns in " + path.string(), line_no);
    std::array<double, kFeatureCount> row;
    for (int c = 0; c < kFeatureCount; ++c) {
      if (!detail::parse_double(fields[static_cast<std::size_t>(c)], row[static_cast<std::size_t>(c)]))
        throw ParseError("non-numeric feature '" + fields[static_cast<std::size_t>(c)] + "'", line_no);
    }
    long raw_label;
    if (!detail::parse_long(fields.back(), raw_label))
      throw ParseError("non-integer label '" + fields.back() + "'", line_no);
    labels.push_back(class_label_from_int(static_cast<int>(raw_label)));
    rows.push_back(row);
  }
  if (rows.empty()) throw EmptyInput("dataset has no rows: " + path.string());

  Dataset ds;
  ds.features.resize(static_cast<Index>(rows.size()), kFeatureCount);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int c = 0; c < kFeatureCount; ++c)
      ds.features(static_cast<Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
  ds.labels = std::move(labels);
  validate(ds);
  return ds;
}

}  // namespace emgnet
