#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "emgnet/errors.hpp"
#include "emgnet/features.hpp"
#include "emgnet/mspca.hpp"
#include "emgnet/neuralnet.hpp"
#include "emgnet/signal.hpp"
#include "emgnet/types.hpp"

namespace emgnet {

struct SplitSpec {
  double test_fraction = 0.20;
  double validation_fraction_of_train = 0.10;
  std::uint64_t seed = 0;
  bool stratified = true;
};

struct SplitResult {
  Dataset sub_train;
  Dataset validation;
  Dataset test;
};

// Deterministic in the seed. Per stratum (per class when stratified, the
// whole set otherwise): shuffle, take round(n * test_fraction) rows for
// test, round(rest * validation_fraction_of_train) for validation, the
// remainder for sub-training. Throws StratificationError when any stratum
// cannot fill all three partitions.
SplitResult split(const Dataset& dataset, const SplitSpec& spec);

// Per-feature affine transform fitted on the sub-training partition only.
// Population standard deviation; columns with std below 1e-12 are flagged
// and use std 1 so apply() maps them to zero.
struct Standardizer {
  Vec mean;
  Vec std;
  std::vector<Index> constant_columns;
};

Standardizer standardize_fit(const Dataset& train);
Mat standardize_apply(const Standardizer& s, const Mat& features);
Dataset standardize_apply(const Standardizer& s, const Dataset& dataset);
Mat standardize_invert(const Standardizer& s, const Mat& features);

struct TrainConfig {
  Index batch_size = 150;
  Index epochs = 100;
  AdamConfig adam;
  double dropout_rate = 0.5;
  double l2_lambda = 1e-6;
  bool shuffle_each_epoch = true;
  std::uint64_t seed = 0;
  Index validate_every = 10;  // minibatches; validation also runs at epoch end
};

struct CurvePoint {
  Index epoch;      // 1-based
  Index minibatch;  // 1-based within the epoch
  double train_loss;
  double train_accuracy;
  double validation_loss;
  double validation_accuracy;
};

struct LearningCurve {
  std::vector<CurvePoint> points;
};

// Non-finite training or validation loss. The curve recorded up to the
// failure is kept for inspection.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, LearningCurve curve)
      : Error(what), curve_(std::move(curve)) {}
  const LearningCurve& curve() const { return curve_; }

 private:
  LearningCurve curve_;
};

struct TrainResult {
  Network net;  // parameter snapshot with the best validation accuracy (ties -> earliest)
  LearningCurve curve;
  double best_validation_accuracy = 0.0;
  std::int64_t optimizer_steps = 0;
};

// Minibatch Adam over the flattened parameters with optional per-epoch
// shuffling. Expects standardized, non-empty datasets.
TrainResult train(const Dataset& sub_train, const Dataset& validation,
                  const TrainConfig& config);

struct ConfusionMatrix {
  // rows = true class, columns = predicted class
  std::array<std::array<std::int64_t, kNumClasses>, kNumClasses> counts{};

  std::int64_t total() const;
  std::int64_t row_sum(int true_class) const;
  std::int64_t col_sum(int predicted_class) const;
};

struct EvalReport {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  // nullopt when the defining denominator is zero
  std::array<std::optional<double>, kNumClasses> precision;
  std::array<std::optional<double>, kNumClasses> recall;
};

// Eval-mode argmax predictions; ties resolve to the lowest class index.
std::vector<ClassLabel> predict(Network& net, const Mat& features);

// Confusion counts and derived metrics for a pair of label sequences.
EvalReport report_from(const std::vector<ClassLabel>& truth,
                       const std::vector<ClassLabel>& predictions);

EvalReport evaluate(Network& net, const Dataset& test);

void save_learning_curve_csv(const LearningCurve& curve, const std::filesystem::path& path);
void save_metrics_json(const EvalReport& report, const std::filesystem::path& path);

struct PipelineConfig {
  std::uint64_t seed = 0;
  Index windows_per_class = 1200;
  Index window_length = kWindowLength;
  bool denoise = true;
  MspcaConfig mspca{make_filter("db4"), kDecompositionLevels, RetentionRule::kaiser()};
  std::string wavelet = "db4";
  Index levels = kDecompositionLevels;
  RatioMode ratio_mode = RatioMode::AbsoluteMean;
  SplitSpec split;
  TrainConfig train;
  std::filesystem::path out_dir = ".";
};

// Flat key=value text, one entry per line; '#' starts a comment. Unknown
// keys and malformed values throw ParseError with the line number. See
// config_snapshot() for the key list.
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);

// Canonical ordered key/value rendering of a config; parse_config of the
// rendered text reproduces the config exactly.
std::vector<std::pair<std::string, std::string>> config_snapshot(const PipelineConfig& config);
std::string render_config(const PipelineConfig& config);

struct PipelineResult {
  EvalReport report;
  LearningCurve curve;
  double best_validation_accuracy = 0.0;
  Index feature_rows = 0;
  Index feature_cols = 0;
  std::filesystem::path model_path;
  std::filesystem::path metrics_path;
  std::filesystem::path curve_path;
  std::filesystem::path confusion_path;
  std::filesystem::path manifest_path;
};

// segment -> optional MSPCA denoising -> DWT -> features -> split ->
// standardize -> train -> evaluate. Writes model, metrics JSON, learning
// curve CSV, confusion matrix CSV, and a manifest into config.out_dir.
// Stage failures are rethrown nested under an Error naming the stage.
PipelineResult run_pipeline(const std::vector<Window>& windows, const PipelineConfig& config);
PipelineResult run_pipeline(const std::vector<Signal>& signals, const PipelineConfig& config);

// Walks nested exceptions, joining messages with ": ".
std::string describe_exception(const std::exception& e);

}  // namespace emgnet
