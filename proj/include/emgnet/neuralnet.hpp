#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "emgnet/types.hpp"

namespace emgnet {

enum class Mode { Train, Eval };

// Fully connected layer; rows of a batch are samples, so y = x W^T + b.
struct DenseLayer {
  Mat weights;  // out x in
  Vec biases;   // out
  double l2_lambda = 0.0;

  Mat cached_input;

  Mat forward(const Mat& x, bool train);
  // Returns the gradient w.r.t. the input; fills parameter gradients
  // including the 2*lambda*parameter L2 contribution.
  Mat backward(const Mat& grad_out, Mat& grad_w, Vec& grad_b) const;
};

// Per-feature batch normalization. Train mode normalizes with the batch's
// population statistics and folds them into the running estimates
// (running = momentum * running + (1 - momentum) * batch); eval mode uses
// the running estimates only.
struct BatchNormLayer {
  Vec gamma, beta;
  Vec running_mean, running_var;
  double momentum = 0.9;
  double epsilon = 1e-5;

  Mat cached_xhat;
  Vec cached_inv_std;

  BatchNormLayer() = default;
  explicit BatchNormLayer(Index width);

  Mat forward(const Mat& x, bool train);
  Mat backward(const Mat& grad_out, Vec& grad_gamma, Vec& grad_beta) const;
};

// Inverted dropout: kept units are scaled by 1/(1-rate) so eval needs no
// correction. freeze_mask re-uses the cached mask on the next train-mode
// forward of the same shape (gradient checks rely on this).
struct DropoutLayer {
  double rate = 0.5;
  bool freeze_mask = false;
  std::mt19937_64 rng{0};

  Mat cached_mask;

  Mat forward(const Mat& x, bool train);
  Mat backward(const Mat& grad_out) const;
};

// max(x, 0) + slope * min(x, 0); slope 0 gives plain ReLU.
struct LeakyRelu {
  double slope = 0.01;

  Mat cached_input;

  Mat forward(const Mat& x, bool train);
  Mat backward(const Mat& grad_out) const;
};

struct NetworkGradients {
  std::array<Mat, 5> dense_weights;
  std::array<Vec, 5> dense_biases;
  std::array<Vec, 2> bn_gamma;
  std::array<Vec, 2> bn_beta;

  Vec flatten() const;
};

// The eight-layer classifier: five dense layers (120, 90, 30, 5, 3 nodes),
// batch norm after the first and third, dropout after the second, softmax
// head. Activations: dense1 -> BN -> LeakyReLU, dense2 -> LeakyReLU ->
// dropout, dense3 -> BN -> LeakyReLU, dense4 -> ReLU, dense5 -> softmax.
struct Network {
  std::vector<Index> widths;  // {in, 120, 90, 30, 5, out}
  std::array<DenseLayer, 5> dense;
  std::array<BatchNormLayer, 2> batch_norm;
  DropoutLayer dropout;
  LeakyRelu act1, act2, act3;   // slope 0.01
  LeakyRelu act4{0.0, Mat()};   // slope 0 (plain ReLU)

  // Row-stochastic probabilities, one row per sample. Train mode caches the
  // intermediates backward() needs.
  Mat forward(const Mat& batch, Mode mode);

  // Mean cross-entropy plus the L2 term of every dense layer with a nonzero
  // lambda: lambda * (sum w^2 + sum b^2).
  double loss(const Mat& probabilities, const std::vector<ClassLabel>& labels) const;

  // Analytic gradients of loss() for the batch of the last train-mode
  // forward. Throws InvalidState without one.
  NetworkGradients backward(const std::vector<ClassLabel>& labels);

  Index parameter_count() const;
  Vec flatten_parameters() const;
  void set_parameters(const Vec& params);

  Mat cached_probs;
  bool has_cache = false;
};

// He-uniform weights, zero biases, BN gamma 1 / beta 0; deterministic in the
// seed. widths must list the five layer widths between input and output,
// e.g. {27, 120, 90, 30, 5, 3}.
Network init_network(std::uint64_t seed,
                     const std::vector<Index>& widths = {27, 120, 90, 30, 5, 3});

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  Vec first_moment;
  Vec second_moment;
  std::int64_t step_count = 0;

  static AdamState init(Index n_params, const AdamConfig& config);
};

// Standard bias-corrected Adam update, in place.
void adam_step(Vec& params, const Vec& grads, AdamState& state);

// Model container: the network plus an optional feature standardizer and a
// flat training-config snapshot, serialized as a versioned binary file with
// magic "EMGNET".
struct ModelBundle {
  Network net;
  std::vector<std::pair<std::string, std::string>> config_snapshot;
  bool has_standardizer = false;
  Vec feature_mean;
  Vec feature_std;
};

void save_model(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_model(const std::filesystem::path& path);

void save_model(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

}  // namespace emgnet
