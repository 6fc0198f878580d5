#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "emgnet/mspca.hpp"
#include "emgnet/neuralnet.hpp"
#include "emgnet/pipeline.hpp"
#include "emgnet/signal.hpp"
#include "emgnet/wavelet.hpp"

namespace {

using namespace emgnet;

struct CommonOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "flat key=value config file");
  cmd->add_option("--seed", opts.seed, "master seed");
  cmd->add_option("--out-dir", opts.out_dir, "output directory")->capture_default_str();
}

// Config file first, then explicit flags on top.
PipelineConfig base_config(const CLI::App* cmd, const CommonOpts& opts) {
  PipelineConfig cfg;
  if (!opts.config_path.empty()) cfg = load_config(opts.config_path);
  if (cmd->count("--seed")) cfg.seed = opts.seed;
  if (cmd->count("--out-dir")) cfg.out_dir = opts.out_dir;
  return cfg;
}

std::vector<ClassLabel> classes_from_name(const std::string& name) {
  if (name == "all")
    return {ClassLabel::Normal, ClassLabel::Myopathy, ClassLabel::Als};
  for (int c = 0; c < kNumClasses; ++c) {
    const ClassLabel label = class_label_from_int(c);
    if (name == class_label_name(label)) return {label};
  }
  throw BadInput("unknown class '" + name + "' (expected normal, myopathy, als, or all)");
}

Dataset extract_dataset(const std::vector<Window>& windows, const std::string& wavelet,
                        Index levels, RatioMode mode) {
  const WaveletFilter filter = make_filter(wavelet);
  Dataset ds;
  ds.features.resize(static_cast<Index>(windows.size()), kFeatureCount);
  ds.labels.resize(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (!windows[i].label) throw BadLabel("window " + std::to_string(i) + " has no class label");
    const WaveletDecomposition dec = dwt_multilevel(windows[i].samples, filter, levels);
    ds.features.row(static_cast<Index>(i)) = extract_feature_values(dec, mode).transpose();
    ds.labels[i] = *windows[i].label;
  }
  validate(ds);
  return ds;
}

Dataset standardize_with_model(const ModelBundle& bundle, const Dataset& raw) {
  if (!bundle.has_standardizer) return raw;
  Standardizer s;
  s.mean = bundle.feature_mean;
  s.std = bundle.feature_std;
  return standardize_apply(s, raw);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EMG window classification: wavelet features, MSPCA denoising, DNN classifier"};
  app.require_subcommand(1);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate labeled synthetic EMG windows");
  CommonOpts synth_common;
  add_common(synth_cmd, synth_common);
  std::string synth_class = "all";
  Index synth_count = 100;
  Index synth_window = 0;
  std::string synth_out;
  synth_cmd->add_option("--class", synth_class, "normal, myopathy, als, or all")
      ->capture_default_str();
  synth_cmd->add_option("--count", synth_count, "windows per class")->capture_default_str();
  synth_cmd->add_option("--window-length", synth_window, "samples per window (default 8192)");
  synth_cmd->add_option("--out", synth_out, "output windows file")->required();

  // denoise
  auto* denoise_cmd = app.add_subcommand("denoise", "MSPCA-denoise a windows file");
  CommonOpts denoise_common;
  add_common(denoise_cmd, denoise_common);
  std::string denoise_in, denoise_out, denoise_filter, denoise_retention;
  Index denoise_levels = 0;
  double denoise_fraction = 0.0;
  denoise_cmd->add_option("--in", denoise_in, "input windows file")->required();
  denoise_cmd->add_option("--out", denoise_out, "output windows file")->required();
  denoise_cmd->add_option("--filter", denoise_filter, "wavelet filter (haar, db2, db4)");
  denoise_cmd->add_option("--levels", denoise_levels, "decomposition levels");
  denoise_cmd->add_option("--retention", denoise_retention, "kaiser or fraction");
  denoise_cmd->add_option("--fraction", denoise_fraction,
                          "explained-variance fraction for --retention fraction");

  // extract
  auto* extract_cmd = app.add_subcommand("extract", "windows file -> feature CSV");
  CommonOpts extract_common;
  add_common(extract_cmd, extract_common);
  std::string extract_in, extract_out, extract_wavelet;
  bool extract_signed = false;
  extract_cmd->add_option("--in", extract_in, "input windows file")->required();
  extract_cmd->add_option("--out", extract_out, "output feature CSV")->required();
  extract_cmd->add_option("--wavelet", extract_wavelet, "wavelet filter (default db4)");
  extract_cmd->add_flag("--signed-ratios", extract_signed,
                        "signed-mean band ratios instead of absolute-mean");

  // split
  auto* split_cmd = app.add_subcommand("split", "feature CSV -> sub-train/validation/test CSVs");
  CommonOpts split_common;
  add_common(split_cmd, split_common);
  std::string split_in;
  double split_test = 0.0, split_val = 0.0;
  bool split_no_strat = false;
  split_cmd->add_option("--in", split_in, "input feature CSV")->required();
  split_cmd->add_option("--test-fraction", split_test, "test fraction (default 0.2)");
  split_cmd->add_option("--val-fraction", split_val,
                        "validation fraction of the training part (default 0.1)");
  split_cmd->add_flag("--no-stratify", split_no_strat, "plain random split");

  // train
  auto* train_cmd = app.add_subcommand("train", "train the classifier on feature CSVs");
  CommonOpts train_common;
  add_common(train_cmd, train_common);
  std::string train_in, train_val, train_model, train_curve;
  Index train_epochs = 0, train_batch = 0, train_val_every = 0;
  double train_lr = 0.0, train_dropout = -1.0, train_l2 = -1.0;
  bool train_no_shuffle = false;
  train_cmd->add_option("--train", train_in, "sub-training feature CSV")->required();
  train_cmd->add_option("--val", train_val, "validation feature CSV")->required();
  train_cmd->add_option("--out", train_model, "model file (default <out-dir>/model.emgnet)");
  train_cmd->add_option("--curve", train_curve,
                        "learning-curve CSV (default <out-dir>/learning_curve.csv)");
  train_cmd->add_option("--epochs", train_epochs, "training epochs (default 100)");
  train_cmd->add_option("--batch-size", train_batch, "minibatch size (default 150)");
  train_cmd->add_option("--learning-rate", train_lr, "Adam learning rate (default 0.001)");
  train_cmd->add_option("--dropout", train_dropout, "dropout rate (default 0.5)");
  train_cmd->add_option("--l2", train_l2, "L2 lambda for dense layers 1-3 (default 1e-6)");
  train_cmd->add_option("--validate-every", train_val_every,
                        "minibatches between validations (default 10)");
  train_cmd->add_flag("--no-shuffle", train_no_shuffle, "disable per-epoch shuffling");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a model on a feature CSV");
  CommonOpts eval_common;
  add_common(eval_cmd, eval_common);
  std::string eval_model, eval_in, eval_out;
  eval_cmd->add_option("--model", eval_model, "model file")->required();
  eval_cmd->add_option("--test", eval_in, "test feature CSV")->required();
  eval_cmd->add_option("--out", eval_out, "metrics JSON (default <out-dir>/metrics.json)");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "predict classes for a feature CSV");
  CommonOpts predict_common;
  add_common(predict_cmd, predict_common);
  std::string predict_model, predict_in, predict_out;
  predict_cmd->add_option("--model", predict_model, "model file")->required();
  predict_cmd->add_option("--in", predict_in, "feature CSV")->required();
  predict_cmd->add_option("--out", predict_out, "predictions CSV (default stdout)");

  // run
  auto* run_cmd = app.add_subcommand("run", "end-to-end pipeline (synthesizes input by default)");
  CommonOpts run_common;
  add_common(run_cmd, run_common);
  std::string run_in;
  Index run_wpc = 0, run_window = 0, run_epochs = 0;
  bool run_no_denoise = false;
  run_cmd->add_option("--in", run_in, "input windows file (default: synthesize)");
  run_cmd->add_option("--windows-per-class", run_wpc, "synthetic windows per class");
  run_cmd->add_option("--window-length", run_window, "samples per window");
  run_cmd->add_option("--epochs", run_epochs, "training epochs");
  run_cmd->add_flag("--no-denoise", run_no_denoise, "skip the MSPCA stage");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) {
      PipelineConfig cfg = base_config(synth_cmd, synth_common);
      if (synth_cmd->count("--count")) cfg.windows_per_class = synth_count;
      else if (synth_common.config_path.empty()) cfg.windows_per_class = synth_count;
      if (synth_cmd->count("--window-length")) cfg.window_length = synth_window;
      std::vector<Window> windows;
      for (ClassLabel cls : classes_from_name(synth_class)) {
        std::vector<Window> part = synth_generate(cls, static_cast<int>(cfg.windows_per_class),
                                                  cfg.seed, cfg.window_length);
        for (auto& w : part) windows.push_back(std::move(w));
      }
      save_windows(windows, synth_out);
      std::cout << "wrote " << windows.size() << " windows of length " << cfg.window_length
                << " to " << synth_out << "\n";
    } else if (*denoise_cmd) {
      PipelineConfig cfg = base_config(denoise_cmd, denoise_common);
      if (denoise_cmd->count("--filter")) cfg.mspca.filter = make_filter(denoise_filter);
      if (denoise_cmd->count("--levels")) cfg.mspca.levels = static_cast<int>(denoise_levels);
      if (denoise_cmd->count("--retention")) {
        if (denoise_retention == "kaiser") cfg.mspca.retention = RetentionRule::kaiser();
        else if (denoise_retention == "fraction")
          cfg.mspca.retention.kind = RetentionRule::Kind::Fraction;
        else throw BadInput("unknown retention rule '" + denoise_retention + "'");
      }
      if (denoise_cmd->count("--fraction")) cfg.mspca.retention.fraction = denoise_fraction;
      std::vector<Window> windows = load_windows(denoise_in);
      std::vector<Window> cleaned = mspca_denoise(windows, cfg.mspca);
      save_windows(cleaned, denoise_out);
      std::cout << "denoised " << cleaned.size() << " windows to " << denoise_out << "\n";
    } else if (*extract_cmd) {
      PipelineConfig cfg = base_config(extract_cmd, extract_common);
      if (extract_cmd->count("--wavelet")) cfg.wavelet = extract_wavelet;
      if (extract_signed) cfg.ratio_mode = RatioMode::SignedMean;
      std::vector<Window> windows = load_windows(extract_in);
      Dataset ds = extract_dataset(windows, cfg.wavelet, cfg.levels, cfg.ratio_mode);
      save_dataset_csv(ds, extract_out);
      std::cout << "wrote " << ds.rows() << " x " << ds.features.cols() << " features to "
                << extract_out << "\n";
    } else if (*split_cmd) {
      PipelineConfig cfg = base_config(split_cmd, split_common);
      SplitSpec spec = cfg.split;
      spec.seed = cfg.seed;
      if (split_cmd->count("--test-fraction")) spec.test_fraction = split_test;
      if (split_cmd->count("--val-fraction")) spec.validation_fraction_of_train = split_val;
      if (split_no_strat) spec.stratified = false;
      Dataset ds = load_dataset_csv(split_in);
      SplitResult parts = split(ds, spec);
      const std::filesystem::path dir = cfg.out_dir;
      std::filesystem::create_directories(dir);
      save_dataset_csv(parts.sub_train, dir / "sub_train.csv");
      save_dataset_csv(parts.validation, dir / "validation.csv");
      save_dataset_csv(parts.test, dir / "test.csv");
      std::cout << "split " << ds.rows() << " rows into " << parts.sub_train.rows() << " / "
                << parts.validation.rows() << " / " << parts.test.rows() << " in "
                << dir.string() << "\n";
    } else if (*train_cmd) {
      PipelineConfig cfg = base_config(train_cmd, train_common);
      TrainConfig tc = cfg.train;
      tc.seed = cfg.seed;
      if (train_cmd->count("--epochs")) tc.epochs = train_epochs;
      if (train_cmd->count("--batch-size")) tc.batch_size = train_batch;
      if (train_cmd->count("--learning-rate")) tc.adam.learning_rate = train_lr;
      if (train_cmd->count("--dropout")) tc.dropout_rate = train_dropout;
      if (train_cmd->count("--l2")) tc.l2_lambda = train_l2;
      if (train_cmd->count("--validate-every")) tc.validate_every = train_val_every;
      if (train_no_shuffle) tc.shuffle_each_epoch = false;
      cfg.train = tc;

      Dataset sub_train = load_dataset_csv(train_in);
      Dataset validation = load_dataset_csv(train_val);
      Standardizer standardizer = standardize_fit(sub_train);
      Dataset train_std = standardize_apply(standardizer, sub_train);
      Dataset val_std = standardize_apply(standardizer, validation);
      TrainResult trained = train(train_std, val_std, tc);

      const std::filesystem::path dir = cfg.out_dir;
      std::filesystem::create_directories(dir);
      const std::filesystem::path model_path =
          train_model.empty() ? dir / "model.emgnet" : std::filesystem::path(train_model);
      ModelBundle bundle;
      bundle.net = trained.net;
      bundle.config_snapshot = config_snapshot(cfg);
      bundle.has_standardizer = true;
      bundle.feature_mean = standardizer.mean;
      bundle.feature_std = standardizer.std;
      save_model(bundle, model_path);

      const std::filesystem::path curve_path =
          train_curve.empty() ? dir / "learning_curve.csv" : std::filesystem::path(train_curve);
      save_learning_curve_csv(trained.curve, curve_path);
      std::cout << "trained " << trained.optimizer_steps << " steps, best validation accuracy "
                << trained.best_validation_accuracy << ", model at " << model_path.string()
                << "\n";
    } else if (*eval_cmd) {
      PipelineConfig cfg = base_config(eval_cmd, eval_common);
      ModelBundle bundle = load_model(eval_model);
      Dataset test = load_dataset_csv(eval_in);
      Dataset test_std = standardize_with_model(bundle, test);
      EvalReport report = evaluate(bundle.net, test_std);
      const std::filesystem::path dir = cfg.out_dir;
      std::filesystem::create_directories(dir);
      const std::filesystem::path out =
          eval_out.empty() ? dir / "metrics.json" : std::filesystem::path(eval_out);
      save_metrics_json(report, out);
      std::cout << "accuracy " << report.accuracy << " on " << test.rows()
                << " rows; metrics at " << out.string() << "\n";
    } else if (*predict_cmd) {
      ModelBundle bundle = load_model(predict_model);
      Dataset in = load_dataset_csv(predict_in);
      Dataset in_std = standardize_with_model(bundle, in);
      std::vector<ClassLabel> preds = predict(bundle.net, in_std.features);
      std::string csv = "row,predicted_class,predicted_name\n";
      for (std::size_t i = 0; i < preds.size(); ++i) {
        csv += std::to_string(i) + ',' + std::to_string(static_cast<int>(preds[i])) + ',' +
               class_label_name(preds[i]) + '\n';
      }
      if (predict_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream out(predict_out);
        out << csv;
        std::cout << "wrote " << preds.size() << " predictions to " << predict_out << "\n";
      }
    } else if (*run_cmd) {
      PipelineConfig cfg = base_config(run_cmd, run_common);
      if (run_cmd->count("--windows-per-class")) cfg.windows_per_class = run_wpc;
      if (run_cmd->count("--window-length")) cfg.window_length = run_window;
      if (run_cmd->count("--epochs")) cfg.train.epochs = run_epochs;
      if (run_no_denoise) cfg.denoise = false;
      std::vector<Window> windows;
      if (!run_in.empty()) {
        windows = load_windows(run_in);
      } else {
        for (int c = 0; c < kNumClasses; ++c) {
          std::vector<Window> part =
              synth_generate(class_label_from_int(c), static_cast<int>(cfg.windows_per_class),
                             cfg.seed, cfg.window_length);
          for (auto& w : part) windows.push_back(std::move(w));
        }
      }
      PipelineResult result = run_pipeline(windows, cfg);
      std::cout << "features " << result.feature_rows << " x " << result.feature_cols
                << ", best validation accuracy " << result.best_validation_accuracy
                << ", test accuracy " << result.report.accuracy << "\n"
                << "artifacts in " << cfg.out_dir.string() << "\n";
    }
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << " (" << e.curve().points.size()
              << " learning-curve points recorded)\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << describe_exception(e) << "\n";
    return 1;
  }
  return 0;
}
