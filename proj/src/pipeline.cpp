#include "emgnet/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "emgnet/rng.hpp"
#include "emgnet/wavelet.hpp"
#include "io_util.hpp"

namespace emgnet {

namespace {

using ordered_json = nlohmann::ordered_json;

Dataset take_rows(const Dataset& ds, const std::vector<Index>& rows) {
  Dataset out;
  out.features.resize(static_cast<Index>(rows.size()), ds.features.cols());
  out.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Index>(i)) = ds.features.row(rows[i]);
    out.labels[i] = ds.labels[static_cast<std::size_t>(rows[i])];
  }
  return out;
}

int argmax_row(const Mat& probs, Index r) {
  int best = 0;
  for (int c = 1; c < static_cast<int>(probs.cols()); ++c)
    if (probs(r, c) > probs(r, best)) best = c;
  return best;
}

double accuracy_of(const Mat& probs, const std::vector<ClassLabel>& labels) {
  Index correct = 0;
  for (Index r = 0; r < probs.rows(); ++r)
    if (argmax_row(probs, r) == static_cast<int>(labels[static_cast<std::size_t>(r)]))
      ++correct;
  return static_cast<double>(correct) / static_cast<double>(probs.rows());
}

}  // namespace

SplitResult split(const Dataset& dataset, const SplitSpec& spec) {
  validate(dataset);
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0))
    throw BadInput("test_fraction must be in (0, 1)");
  if (!(spec.validation_fraction_of_train > 0.0 && spec.validation_fraction_of_train < 1.0))
    throw BadInput("validation_fraction_of_train must be in (0, 1)");

  std::vector<std::vector<Index>> strata;
  if (spec.stratified) {
    strata.resize(kNumClasses);
    for (Index r = 0; r < dataset.rows(); ++r)
      strata[static_cast<std::size_t>(dataset.labels[static_cast<std::size_t>(r)])].push_back(r);
    std::erase_if(strata, [](const std::vector<Index>& s) { return s.empty(); });
  } else {
    strata.resize(1);
    strata[0].resize(static_cast<std::size_t>(dataset.rows()));
    std::iota(strata[0].begin(), strata[0].end(), Index{0});
  }

  std::mt19937_64 gen(rng::derive_seed(spec.seed, 0x53504c49ull));
  std::vector<Index> test_rows, val_rows, sub_rows;
  for (auto& stratum : strata) {
    rng::shuffle(stratum, gen);
    const auto m = static_cast<Index>(stratum.size());
    const auto n_test = static_cast<Index>(
        std::llround(static_cast<double>(m) * spec.test_fraction));
    const Index n_train = m - n_test;
    const auto n_val = static_cast<Index>(
        std::llround(static_cast<double>(n_train) * spec.validation_fraction_of_train));
    const Index n_sub = n_train - n_val;
    if (n_test < 1 || n_val < 1 || n_sub < 1)
      throw StratificationError("stratum with " + std::to_string(m) +
                                " rows cannot fill test/validation/sub-training partitions");
    for (Index i = 0; i < n_test; ++i) test_rows.push_back(stratum[static_cast<std::size_t>(i)]);
    for (Index i = n_test; i < n_test + n_val; ++i)
      val_rows.push_back(stratum[static_cast<std::size_t>(i)]);
    for (Index i = n_test + n_val; i < m; ++i)
      sub_rows.push_back(stratum[static_cast<std::size_t>(i)]);
  }

  SplitResult result;
  result.sub_train = take_rows(dataset, sub_rows);
  result.validation = take_rows(dataset, val_rows);
  result.test = take_rows(dataset, test_rows);
  return result;
}

Standardizer standardize_fit(const Dataset& train) {
  validate(train);
  Standardizer s;
  s.mean = train.features.colwise().mean().transpose();
  Mat centered = train.features.rowwise() - s.mean.transpose();
  s.std = centered.array().square().colwise().mean().sqrt().matrix().transpose();
  for (Index c = 0; c < s.std.size(); ++c) {
    if (s.std[c] < 1e-12) {
      s.constant_columns.push_back(c);
      s.std[c] = 1.0;
    }
  }
  return s;
}

Mat standardize_apply(const Standardizer& s, const Mat& features) {
  if (features.cols() != s.mean.size())
    throw ShapeMismatch("feature width does not match the standardizer");
  Mat out = features.rowwise() - s.mean.transpose();
  out.array().rowwise() /= s.std.transpose().array();
  return out;
}

Dataset standardize_apply(const Standardizer& s, const Dataset& dataset) {
  Dataset out;
  out.features = standardize_apply(s, dataset.features);
  out.labels = dataset.labels;
  return out;
}

Mat standardize_invert(const Standardizer& s, const Mat& features) {
  if (features.cols() != s.mean.size())
    throw ShapeMismatch("feature width does not match the standardizer");
  Mat out = features;
  out.array().rowwise() *= s.std.transpose().array();
  out.rowwise() += s.mean.transpose();
  return out;
}

TrainResult train(const Dataset& sub_train, const Dataset& validation, const TrainConfig& config) {
  validate(sub_train);
  validate(validation);
  if (sub_train.features.cols() != validation.features.cols())
    throw ShapeMismatch("sub-training and validation feature widths differ");
  if (config.batch_size < 1) throw BadInput("batch_size must be >= 1");
  if (config.epochs < 1) throw BadInput("epochs must be >= 1");
  if (config.validate_every < 1) throw BadInput("validate_every must be >= 1");

  Network net = init_network(config.seed,
                             {sub_train.features.cols(), 120, 90, 30, 5, kNumClasses});
  net.dropout.rate = config.dropout_rate;
  for (int l = 0; l < 3; ++l) net.dense[static_cast<std::size_t>(l)].l2_lambda = config.l2_lambda;

  Vec params = net.flatten_parameters();
  AdamState adam = AdamState::init(params.size(), config.adam);
  std::mt19937_64 shuffle_gen(rng::derive_seed(config.seed, 0x53485546ull));

  const Index n = sub_train.rows();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  const Index batches = (n + config.batch_size - 1) / config.batch_size;

  LearningCurve curve;
  Network best_net = net;
  double best_val_acc = -1.0;
  double last_train_loss = std::numeric_limits<double>::quiet_NaN();
  double last_train_acc = std::numeric_limits<double>::quiet_NaN();
  std::int64_t steps = 0;

  auto run_validation = [&](Index epoch, Index minibatch) {
    Mat probs = net.forward(validation.features, Mode::Eval);
    const double vloss = net.loss(probs, validation.labels);
    if (!std::isfinite(vloss))
      throw TrainingDiverged("validation loss became non-finite at epoch " +
                                 std::to_string(epoch),
                             curve);
    const double vacc = accuracy_of(probs, validation.labels);
    curve.points.push_back({epoch, minibatch, last_train_loss, last_train_acc, vloss, vacc});
    if (vacc > best_val_acc) {
      best_val_acc = vacc;
      best_net = net;
    }
  };

  for (Index epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle_each_epoch) rng::shuffle(order, shuffle_gen);
    Index last_validated = 0;
    for (Index b = 0; b < batches; ++b) {
      const Index lo = b * config.batch_size;
      const Index hi = std::min(n, lo + config.batch_size);
      Mat batch(hi - lo, sub_train.features.cols());
      std::vector<ClassLabel> batch_labels(static_cast<std::size_t>(hi - lo));
      for (Index i = lo; i < hi; ++i) {
        const Index src = order[static_cast<std::size_t>(i)];
        batch.row(i - lo) = sub_train.features.row(src);
        batch_labels[static_cast<std::size_t>(i - lo)] =
            sub_train.labels[static_cast<std::size_t>(src)];
      }
      Mat probs = net.forward(batch, Mode::Train);
      last_train_loss = net.loss(probs, batch_labels);
      last_train_acc = accuracy_of(probs, batch_labels);
      if (!std::isfinite(last_train_loss))
        throw TrainingDiverged("training loss became non-finite at epoch " +
                                   std::to_string(epoch) + ", minibatch " +
                                   std::to_string(b + 1),
                               curve);
      NetworkGradients grads = net.backward(batch_labels);
      adam_step(params, grads.flatten(), adam);
      net.set_parameters(params);
      ++steps;
      if ((b + 1) % config.validate_every == 0) {
        run_validation(epoch, b + 1);
        last_validated = b + 1;
      }
    }
    if (last_validated != batches) run_validation(epoch, batches);
  }

  TrainResult result;
  result.net = std::move(best_net);
  result.curve = std::move(curve);
  result.best_validation_accuracy = best_val_acc;
  result.optimizer_steps = steps;
  return result;
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (const auto& row : counts)
    for (std::int64_t v : row) t += v;
  return t;
}

std::int64_t ConfusionMatrix::row_sum(int true_class) const {
  std::int64_t t = 0;
  for (std::int64_t v : counts[static_cast<std::size_t>(true_class)]) t += v;
  return t;
}

std::int64_t ConfusionMatrix::col_sum(int predicted_class) const {
  std::int64_t t = 0;
  for (const auto& row : counts) t += row[static_cast<std::size_t>(predicted_class)];
  return t;
}

std::vector<ClassLabel> predict(Network& net, const Mat& features) {
  if (features.rows() < 1) throw EmptyInput("predict: no rows");
  Mat probs = net.forward(features, Mode::Eval);
  std::vector<ClassLabel> out(static_cast<std::size_t>(features.rows()));
  for (Index r = 0; r < probs.rows(); ++r)
    out[static_cast<std::size_t>(r)] = class_label_from_int(argmax_row(probs, r));
  return out;
}

EvalReport report_from(const std::vector<ClassLabel>& truth,
                       const std::vector<ClassLabel>& predictions) {
  if (truth.size() != predictions.size())
    throw ShapeMismatch("report_from: label sequences differ in length");
  if (truth.empty()) throw EmptyInput("report_from: no labels");
  EvalReport report;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = static_cast<std::size_t>(truth[i]);
    const auto p = static_cast<std::size_t>(predictions[i]);
    ++report.confusion.counts[t][p];
  }
  std::int64_t diag = 0;
  for (int c = 0; c < kNumClasses; ++c)
    diag += report.confusion.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
  report.accuracy = static_cast<double>(diag) / static_cast<double>(report.confusion.total());
  for (int c = 0; c < kNumClasses; ++c) {
    const std::int64_t hit =
        report.confusion.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
    const std::int64_t col = report.confusion.col_sum(c);
    const std::int64_t row = report.confusion.row_sum(c);
    if (col > 0)
      report.precision[static_cast<std::size_t>(c)] =
          static_cast<double>(hit) / static_cast<double>(col);
    if (row > 0)
      report.recall[static_cast<std::size_t>(c)] =
          static_cast<double>(hit) / static_cast<double>(row);
  }
  return report;
}

EvalReport evaluate(Network& net, const Dataset& test) {
  if (test.rows() == 0) throw EmptyInput("evaluate: empty test set");
  validate(test);
  return report_from(test.labels, predict(net, test.features));
}

namespace {

nlohmann::ordered_json metrics_json_base(const EvalReport& report) {
  using ordered_json = nlohmann::ordered_json;
  ordered_json metrics;
  metrics["accuracy"] = report.accuracy;
  metrics["per_class"] = ordered_json::array();
  for (int c = 0; c < kNumClasses; ++c) {
    ordered_json entry;
    entry["class"] = class_label_name(class_label_from_int(c));
    const auto& prec = report.precision[static_cast<std::size_t>(c)];
    const auto& rec = report.recall[static_cast<std::size_t>(c)];
    if (prec) entry["precision"] = *prec; else entry["precision"] = nullptr;
    if (rec) entry["recall"] = *rec; else entry["recall"] = nullptr;
    metrics["per_class"].push_back(entry);
  }
  metrics["confusion_matrix"] = ordered_json::array();
  for (int t = 0; t < kNumClasses; ++t) {
    ordered_json row = ordered_json::array();
    for (int p = 0; p < kNumClasses; ++p)
      row.push_back(
          report.confusion.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]);
    metrics["confusion_matrix"].push_back(row);
  }
  return metrics;
}

}  // namespace

void save_learning_curve_csv(const LearningCurve& curve, const std::filesystem::path& path) {
  std::string csv =
      "epoch,minibatch,train_loss,train_accuracy,validation_loss,validation_accuracy\n";
  for (const CurvePoint& p : curve.points) {
    csv += std::to_string(p.epoch);
    csv += ',';
    csv += std::to_string(p.minibatch);
    csv += ',';
    csv += detail::format_double(p.train_loss);
    csv += ',';
    csv += detail::format_double(p.train_accuracy);
    csv += ',';
    csv += detail::format_double(p.validation_loss);
    csv += ',';
    csv += detail::format_double(p.validation_accuracy);
    csv += '\n';
  }
  detail::atomic_write_file(path, csv);
}

void save_metrics_json(const EvalReport& report, const std::filesystem::path& path) {
  detail::atomic_write_file(path, metrics_json_base(report).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Config file
// ---------------------------------------------------------------------------

namespace {

bool parse_bool_value(const std::string& v, bool& out) {
  if (v == "true") out = true;
  else if (v == "false") out = false;
  else return false;
  return true;
}

bool parse_u64_value(const std::string& v, std::uint64_t& out) {
  if (v.empty()) return false;
  const char* first = v.data();
  const char* last = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

double require_double(const std::string& key, const std::string& value, long line) {
  double d = 0.0;
  if (!detail::parse_double(value, d))
    throw ParseError("invalid number for " + key + ": '" + value + "'", line);
  return d;
}

Index require_index(const std::string& key, const std::string& value, long line) {
  long v = 0;
  if (!detail::parse_long(value, v))
    throw ParseError("invalid integer for " + key + ": '" + value + "'", line);
  return static_cast<Index>(v);
}

bool require_bool(const std::string& key, const std::string& value, long line) {
  bool b = false;
  if (!parse_bool_value(value, b))
    throw ParseError("expected true or false for " + key + ": '" + value + "'", line);
  return b;
}

void apply_config_entry(PipelineConfig& cfg, const std::string& key, const std::string& value,
                        long line) {
  if (key == "seed") {
    std::uint64_t s = 0;
    if (!parse_u64_value(value, s))
      throw ParseError("invalid seed: '" + value + "'", line);
    cfg.seed = s;
  } else if (key == "windows_per_class") {
    cfg.windows_per_class = require_index(key, value, line);
  } else if (key == "window_length") {
    cfg.window_length = require_index(key, value, line);
  } else if (key == "denoise") {
    cfg.denoise = require_bool(key, value, line);
  } else if (key == "mspca.filter") {
    try {
      cfg.mspca.filter = make_filter(value);
    } catch (const UnknownFilter&) {
      throw ParseError("unknown wavelet filter for mspca.filter: '" + value + "'", line);
    }
  } else if (key == "mspca.levels") {
    cfg.mspca.levels = static_cast<int>(require_index(key, value, line));
  } else if (key == "mspca.retention") {
    if (value == "kaiser") cfg.mspca.retention = RetentionRule::kaiser();
    else if (value == "fraction")
      cfg.mspca.retention.kind = RetentionRule::Kind::Fraction;
    else
      throw ParseError("expected kaiser or fraction for mspca.retention: '" + value + "'", line);
  } else if (key == "mspca.fraction") {
    cfg.mspca.retention.fraction = require_double(key, value, line);
  } else if (key == "wavelet") {
    try {
      make_filter(value);
    } catch (const UnknownFilter&) {
      throw ParseError("unknown wavelet filter: '" + value + "'", line);
    }
    cfg.wavelet = value;
  } else if (key == "levels") {
    cfg.levels = require_index(key, value, line);
  } else if (key == "ratio_mode") {
    if (value == "absolute") cfg.ratio_mode = RatioMode::AbsoluteMean;
    else if (value == "signed") cfg.ratio_mode = RatioMode::SignedMean;
    else
      throw ParseError("expected absolute or signed for ratio_mode: '" + value + "'", line);
  } else if (key == "split.test_fraction") {
    cfg.split.test_fraction = require_double(key, value, line);
  } else if (key == "split.validation_fraction") {
    cfg.split.validation_fraction_of_train = require_double(key, value, line);
  } else if (key == "split.stratified") {
    cfg.split.stratified = require_bool(key, value, line);
  } else if (key == "train.batch_size") {
    cfg.train.batch_size = require_index(key, value, line);
  } else if (key == "train.epochs") {
    cfg.train.epochs = require_index(key, value, line);
  } else if (key == "train.learning_rate") {
    cfg.train.adam.learning_rate = require_double(key, value, line);
  } else if (key == "train.beta1") {
    cfg.train.adam.beta1 = require_double(key, value, line);
  } else if (key == "train.beta2") {
    cfg.train.adam.beta2 = require_double(key, value, line);
  } else if (key == "train.epsilon") {
    cfg.train.adam.epsilon = require_double(key, value, line);
  } else if (key == "train.dropout") {
    cfg.train.dropout_rate = require_double(key, value, line);
  } else if (key == "train.l2_lambda") {
    cfg.train.l2_lambda = require_double(key, value, line);
  } else if (key == "train.shuffle") {
    cfg.train.shuffle_each_epoch = require_bool(key, value, line);
  } else if (key == "train.validate_every") {
    cfg.train.validate_every = require_index(key, value, line);
  } else {
    throw ParseError("unknown config key '" + key + "'", line);
  }
}

}  // namespace

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig cfg;
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("empty config key", line_no);
    apply_config_entry(cfg, key, value, line_no);
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(detail::read_file_bytes(path));
}

std::vector<std::pair<std::string, std::string>> config_snapshot(const PipelineConfig& c) {
  auto num = [](double v) { return detail::format_double(v); };
  auto idx = [](Index v) { return std::to_string(v); };
  auto flag = [](bool v) { return std::string(v ? "true" : "false"); };
  std::vector<std::pair<std::string, std::string>> s;
  s.emplace_back("seed", std::to_string(c.seed));
  s.emplace_back("windows_per_class", idx(c.windows_per_class));
  s.emplace_back("window_length", idx(c.window_length));
  s.emplace_back("denoise", flag(c.denoise));
  s.emplace_back("mspca.filter", c.mspca.filter.name);
  s.emplace_back("mspca.levels", std::to_string(c.mspca.levels));
  s.emplace_back("mspca.retention",
                 c.mspca.retention.kind == RetentionRule::Kind::Kaiser ? "kaiser" : "fraction");
  s.emplace_back("mspca.fraction", num(c.mspca.retention.fraction));
  s.emplace_back("wavelet", c.wavelet);
  s.emplace_back("levels", idx(c.levels));
  s.emplace_back("ratio_mode", c.ratio_mode == RatioMode::AbsoluteMean ? "absolute" : "signed");
  s.emplace_back("split.test_fraction", num(c.split.test_fraction));
  s.emplace_back("split.validation_fraction", num(c.split.validation_fraction_of_train));
  s.emplace_back("split.stratified", flag(c.split.stratified));
  s.emplace_back("train.batch_size", idx(c.train.batch_size));
  s.emplace_back("train.epochs", idx(c.train.epochs));
  s.emplace_back("train.learning_rate", num(c.train.adam.learning_rate));
  s.emplace_back("train.beta1", num(c.train.adam.beta1));
  s.emplace_back("train.beta2", num(c.train.adam.beta2));
  s.emplace_back("train.epsilon", num(c.train.adam.epsilon));
  s.emplace_back("train.dropout", num(c.train.dropout_rate));
  s.emplace_back("train.l2_lambda", num(c.train.l2_lambda));
  s.emplace_back("train.shuffle", flag(c.train.shuffle_each_epoch));
  s.emplace_back("train.validate_every", idx(c.train.validate_every));
  return s;
}

std::string render_config(const PipelineConfig& config) {
  std::string out;
  for (const auto& [key, value] : config_snapshot(config)) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// End-to-end run
// ---------------------------------------------------------------------------

namespace {

template <class F>
auto run_stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const TrainingDiverged&) {
    throw;  // self-identifying; keep the curve accessible
  } catch (...) {
    std::throw_with_nested(Error(std::string("pipeline stage '") + name + "' failed"));
  }
}

std::uint64_t hash_windows(const std::vector<Window>& windows) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const std::string& bytes) {
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ull;
    }
  };
  std::string chunk;
  detail::put_u64(chunk, windows.size());
  detail::put_u32(chunk, static_cast<std::uint32_t>(windows.front().samples.size()));
  mix(chunk);
  for (const Window& w : windows) {
    chunk.clear();
    detail::put_i32(chunk, w.label ? static_cast<int>(*w.label) : -1);
    for (Index i = 0; i < w.samples.size(); ++i) detail::put_f64(chunk, w.samples[i]);
    mix(chunk);
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string describe_exception(const std::exception& e) {
  std::string out = e.what();
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    out += ": ";
    out += describe_exception(inner);
  } catch (...) {
    out += ": unknown error";
  }
  return out;
}

PipelineResult run_pipeline(const std::vector<Window>& windows, const PipelineConfig& config) {
  if (windows.empty()) throw EmptyInput("pipeline: no input windows");
  if (config.levels != kDecompositionLevels)
    throw BadInput("feature extraction requires exactly " +
                   std::to_string(kDecompositionLevels) + " decomposition levels");

  const std::vector<Window>* source = &windows;
  std::vector<Window> denoised;
  if (config.denoise) {
    denoised = run_stage("mspca", [&] { return mspca_denoise(windows, config.mspca); });
    source = &denoised;
  }

  Dataset ds = run_stage("features", [&] {
    const WaveletFilter filter = make_filter(config.wavelet);
    Dataset d;
    d.features.resize(static_cast<Index>(source->size()), kFeatureCount);
    d.labels.resize(source->size());
    for (std::size_t i = 0; i < source->size(); ++i) {
      const Window& w = (*source)[i];
      if (!w.label) throw BadLabel("pipeline requires labeled windows");
      const WaveletDecomposition dec = dwt_multilevel(w.samples, filter, config.levels);
      d.features.row(static_cast<Index>(i)) =
          extract_feature_values(dec, config.ratio_mode).transpose();
      d.labels[i] = *w.label;
    }
    validate(d);
    return d;
  });

  SplitSpec split_spec = config.split;
  split_spec.seed = rng::derive_seed(config.seed, 0x53504c54ull);
  SplitResult parts = run_stage("split", [&] { return split(ds, split_spec); });

  Standardizer standardizer =
      run_stage("standardize", [&] { return standardize_fit(parts.sub_train); });
  const Dataset train_std = standardize_apply(standardizer, parts.sub_train);
  const Dataset val_std = standardize_apply(standardizer, parts.validation);
  const Dataset test_std = standardize_apply(standardizer, parts.test);

  TrainConfig train_cfg = config.train;
  train_cfg.seed = rng::derive_seed(config.seed, 0x5452414eull);
  TrainResult trained = run_stage("train", [&] { return train(train_std, val_std, train_cfg); });

  EvalReport report = run_stage("evaluate", [&] { return evaluate(trained.net, test_std); });

  PipelineResult result;
  result.report = report;
  result.curve = trained.curve;
  result.best_validation_accuracy = trained.best_validation_accuracy;
  result.feature_rows = ds.rows();
  result.feature_cols = ds.features.cols();
  result.model_path = config.out_dir / "model.emgnet";
  result.metrics_path = config.out_dir / "metrics.json";
  result.curve_path = config.out_dir / "learning_curve.csv";
  result.confusion_path = config.out_dir / "confusion_matrix.csv";
  result.manifest_path = config.out_dir / "manifest.json";

  run_stage("artifacts", [&] {
    std::filesystem::create_directories(config.out_dir);

    ModelBundle bundle;
    bundle.net = trained.net;
    bundle.config_snapshot = config_snapshot(config);
    bundle.has_standardizer = true;
    bundle.feature_mean = standardizer.mean;
    bundle.feature_std = standardizer.std;
    save_model(bundle, result.model_path);

    save_learning_curve_csv(trained.curve, result.curve_path);

    std::string conf_csv = "true_class";
    for (int c = 0; c < kNumClasses; ++c) {
      conf_csv += ",predicted_";
      conf_csv += class_label_name(class_label_from_int(c));
    }
    conf_csv += '\n';
    for (int t = 0; t < kNumClasses; ++t) {
      conf_csv += class_label_name(class_label_from_int(t));
      for (int p = 0; p < kNumClasses; ++p) {
        conf_csv += ',';
        conf_csv += std::to_string(
            report.confusion.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]);
      }
      conf_csv += '\n';
    }
    detail::atomic_write_file(result.confusion_path, conf_csv);

    ordered_json metrics = metrics_json_base(report);
    metrics["counts"]["sub_train"] = parts.sub_train.rows();
    metrics["counts"]["validation"] = parts.validation.rows();
    metrics["counts"]["test"] = parts.test.rows();
    metrics["best_validation_accuracy"] = trained.best_validation_accuracy;
    metrics["optimizer_steps"] = trained.optimizer_steps;
    detail::atomic_write_file(result.metrics_path, metrics.dump(2) + "\n");

    ordered_json manifest;
    manifest["config"] = ordered_json::object();
    for (const auto& [key, value] : bundle.config_snapshot) manifest["config"][key] = value;
    manifest["input"]["windows"] = static_cast<std::int64_t>(windows.size());
    manifest["input"]["window_length"] = windows.front().samples.size();
    manifest["input"]["fnv1a64"] = hex64(hash_windows(windows));
    manifest["denoise_applied"] = config.denoise;
    manifest["features"]["rows"] = result.feature_rows;
    manifest["features"]["cols"] = result.feature_cols;
    manifest["partitions"]["sub_train"] = parts.sub_train.rows();
    manifest["partitions"]["validation"] = parts.validation.rows();
    manifest["partitions"]["test"] = parts.test.rows();
    manifest["artifacts"]["model"] = result.model_path.filename().string();
    manifest["artifacts"]["metrics"] = result.metrics_path.filename().string();
    manifest["artifacts"]["learning_curve"] = result.curve_path.filename().string();
    manifest["artifacts"]["confusion_matrix"] = result.confusion_path.filename().string();
    detail::atomic_write_file(result.manifest_path, manifest.dump(2) + "\n");
    return 0;
  });

  return result;
}

PipelineResult run_pipeline(const std::vector<Signal>& signals, const PipelineConfig& config) {
  if (signals.empty()) throw EmptyInput("pipeline: no input signals");
  std::vector<Window> windows = run_stage("segment", [&] {
    std::vector<Window> all;
    for (const Signal& s : signals) {
      std::vector<Window> part = segment(s, config.window_length, config.window_length);
      for (auto& w : part) all.push_back(std::move(w));
    }
    return all;
  });
  return run_pipeline(windows, config);
}

}  // namespace emgnet
