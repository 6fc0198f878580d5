#include "emgnet/neuralnet.hpp"

#include <cmath>
#include <cstddef>
#include <cstring>
#include <string>
#include <utility>

#include "emgnet/errors.hpp"
#include "emgnet/rng.hpp"
#include "io_util.hpp"

namespace emgnet {

namespace {

// Single source of truth for the parameter flattening order. The gradient
// overload must visit the matching blocks in the same sequence.
template <class NetworkT, class F>
void for_each_parameter_block(NetworkT& net, F&& f) {
  f(net.dense[0].weights);
  f(net.dense[0].biases);
  f(net.batch_norm[0].gamma);
  f(net.batch_norm[0].beta);
  f(net.dense[1].weights);
  f(net.dense[1].biases);
  f(net.dense[2].weights);
  f(net.dense[2].biases);
  f(net.batch_norm[1].gamma);
  f(net.batch_norm[1].beta);
  f(net.dense[3].weights);
  f(net.dense[3].biases);
  f(net.dense[4].weights);
  f(net.dense[4].biases);
}

template <class F>
void for_each_gradient_block(const NetworkGradients& g, F&& f) {
  f(g.dense_weights[0]);
  f(g.dense_biases[0]);
  f(g.bn_gamma[0]);
  f(g.bn_beta[0]);
  f(g.dense_weights[1]);
  f(g.dense_biases[1]);
  f(g.dense_weights[2]);
  f(g.dense_biases[2]);
  f(g.bn_gamma[1]);
  f(g.bn_beta[1]);
  f(g.dense_weights[3]);
  f(g.dense_biases[3]);
  f(g.dense_weights[4]);
  f(g.dense_biases[4]);
}

}  // namespace

Mat DenseLayer::forward(const Mat& x, bool train) {
  if (x.cols() != weights.cols())
    throw ShapeMismatch("dense layer input width mismatch");
  if (train) cached_input = x;
  Mat out = x * weights.transpose();
  out.rowwise() += biases.transpose();
  return out;
}

Mat DenseLayer::backward(const Mat& grad_out, Mat& grad_w, Vec& grad_b) const {
  if (cached_input.rows() != grad_out.rows())
    throw InvalidState("dense backward without matching forward");
  grad_w = grad_out.transpose() * cached_input;
  grad_b = grad_out.colwise().sum().transpose();
  if (l2_lambda != 0.0) {
    grad_w += 2.0 * l2_lambda * weights;
    grad_b += 2.0 * l2_lambda * biases;
  }
  return grad_out * weights;
}

BatchNormLayer::BatchNormLayer(Index width)
    : gamma(Vec::Ones(width)),
      beta(Vec::Zero(width)),
      running_mean(Vec::Zero(width)),
      running_var(Vec::Ones(width)) {}

Mat BatchNormLayer::forward(const Mat& x, bool train) {
  if (x.cols() != gamma.size())
    throw ShapeMismatch("batch norm input width mismatch");
  Mat xhat;
  if (train) {
    Vec mean = x.colwise().mean().transpose();
    Mat centered = x.rowwise() - mean.transpose();
    Vec var = centered.array().square().colwise().mean().transpose();
    running_mean = momentum * running_mean + (1.0 - momentum) * mean;
    running_var = momentum * running_var + (1.0 - momentum) * var;
    cached_inv_std = (var.array() + epsilon).rsqrt().matrix();
    cached_xhat = centered;
    cached_xhat.array().rowwise() *= cached_inv_std.transpose().array();
    xhat = cached_xhat;
  } else {
    Vec inv_std = (running_var.array() + epsilon).rsqrt().matrix();
    xhat = x.rowwise() - running_mean.transpose();
    xhat.array().rowwise() *= inv_std.transpose().array();
  }
  xhat.array().rowwise() *= gamma.transpose().array();
  xhat.rowwise() += beta.transpose();
  return xhat;
}

Mat BatchNormLayer::backward(const Mat& grad_out, Vec& grad_gamma, Vec& grad_beta) const {
  if (cached_xhat.rows() != grad_out.rows() || cached_xhat.cols() != grad_out.cols())
    throw InvalidState("batch norm backward without matching forward");
  const double n = static_cast<double>(grad_out.rows());
  grad_gamma = (grad_out.array() * cached_xhat.array()).colwise().sum().transpose();
  grad_beta = grad_out.colwise().sum().transpose();
  Mat dxhat = grad_out;
  dxhat.array().rowwise() *= gamma.transpose().array();
  Vec sum_dxhat = dxhat.colwise().sum().transpose();
  Vec sum_dxhat_xhat = (dxhat.array() * cached_xhat.array()).colwise().sum().transpose();
  Mat dx = n * dxhat;
  dx.rowwise() -= sum_dxhat.transpose();
  dx -= cached_xhat * sum_dxhat_xhat.asDiagonal();
  dx.array().rowwise() *= (cached_inv_std.transpose().array() / n);
  return dx;
}

Mat DropoutLayer::forward(const Mat& x, bool train) {
  if (!train) return x;
  if (!(rate >= 0.0 && rate < 1.0)) throw BadInput("dropout rate must be in [0, 1)");
  const bool reuse = freeze_mask && cached_mask.rows() == x.rows() &&
                     cached_mask.cols() == x.cols();
  if (!reuse) {
    const double keep = 1.0 - rate;
    cached_mask.resize(x.rows(), x.cols());
    for (Index j = 0; j < x.cols(); ++j)
      for (Index i = 0; i < x.rows(); ++i)
        cached_mask(i, j) = rng::uniform01(rng) < keep ? 1.0 / keep : 0.0;
  }
  return x.cwiseProduct(cached_mask);
}

Mat DropoutLayer::backward(const Mat& grad_out) const {
  if (cached_mask.rows() != grad_out.rows() || cached_mask.cols() != grad_out.cols())
    throw InvalidState("dropout backward without matching forward");
  return grad_out.cwiseProduct(cached_mask);
}

Mat LeakyRelu::forward(const Mat& x, bool train) {
  if (train) cached_input = x;
  return x.cwiseMax(0.0) + slope * x.cwiseMin(0.0);
}

Mat LeakyRelu::backward(const Mat& grad_out) const {
  if (cached_input.rows() != grad_out.rows() || cached_input.cols() != grad_out.cols())
    throw InvalidState("activation backward without matching forward");
  return (cached_input.array() > 0.0).select(grad_out, slope * grad_out);
}

Vec NetworkGradients::flatten() const {
  Index total = 0;
  for_each_gradient_block(*this, [&](const auto& block) { total += block.size(); });
  Vec flat(total);
  Index at = 0;
  for_each_gradient_block(*this, [&](const auto& block) {
    flat.segment(at, block.size()) = Eigen::Map<const Vec>(block.data(), block.size());
    at += block.size();
  });
  return flat;
}

Mat Network::forward(const Mat& batch, Mode mode) {
  if (widths.size() != 6) throw InvalidState("network not initialized");
  if (batch.cols() != widths.front())
    throw ShapeMismatch("batch width does not match network input width");
  if (batch.rows() < 1) throw BadInput("empty batch");
  const bool train = mode == Mode::Train;
  Mat h = dense[0].forward(batch, train);
  h = batch_norm[0].forward(h, train);
  h = act1.forward(h, train);
  h = dense[1].forward(h, train);
  h = act2.forward(h, train);
  h = dropout.forward(h, train);
  h = dense[2].forward(h, train);
  h = batch_norm[1].forward(h, train);
  h = act3.forward(h, train);
  h = dense[3].forward(h, train);
  h = act4.forward(h, train);
  h = dense[4].forward(h, train);
  Mat probs(h.rows(), h.cols());
  for (Index r = 0; r < h.rows(); ++r) {
    const double peak = h.row(r).maxCoeff();
    Eigen::RowVectorXd shifted = (h.row(r).array() - peak).exp();
    probs.row(r) = shifted / shifted.sum();
  }
  if (train) {
    cached_probs = probs;
    has_cache = true;
  } else {
    has_cache = false;
  }
  return probs;
}

double Network::loss(const Mat& probabilities, const std::vector<ClassLabel>& labels) const {
  if (probabilities.rows() != static_cast<Index>(labels.size()))
    throw ShapeMismatch("probability rows do not match label count");
  if (probabilities.rows() < 1) throw BadInput("empty batch");
  double ce = 0.0;
  for (Index r = 0; r < probabilities.rows(); ++r) {
    const int li = static_cast<int>(labels[static_cast<std::size_t>(r)]);
    if (li < 0 || li >= probabilities.cols())
      throw BadLabel("label out of range for output width");
    // Floor keeps the loss finite when a probability underflows to zero.
    ce -= std::log(std::max(probabilities(r, li), 1e-300));
  }
  ce /= static_cast<double>(probabilities.rows());
  double reg = 0.0;
  for (const auto& layer : dense)
    if (layer.l2_lambda != 0.0)
      reg += layer.l2_lambda * (layer.weights.squaredNorm() + layer.biases.squaredNorm());
  return ce + reg;
}

NetworkGradients Network::backward(const std::vector<ClassLabel>& labels) {
  if (!has_cache) throw InvalidState("backward requires a train-mode forward");
  const Index n = cached_probs.rows();
  if (static_cast<Index>(labels.size()) != n)
    throw ShapeMismatch("label count does not match cached batch");
  Mat g = cached_probs;
  for (Index r = 0; r < n; ++r) {
    const int li = static_cast<int>(labels[static_cast<std::size_t>(r)]);
    if (li < 0 || li >= g.cols()) throw BadLabel("label out of range for output width");
    g(r, li) -= 1.0;
  }
  g /= static_cast<double>(n);
  NetworkGradients grads;
  g = dense[4].backward(g, grads.dense_weights[4], grads.dense_biases[4]);
  g = act4.backward(g);
  g = dense[3].backward(g, grads.dense_weights[3], grads.dense_biases[3]);
  g = act3.backward(g);
  g = batch_norm[1].backward(g, grads.bn_gamma[1], grads.bn_beta[1]);
  g = dense[2].backward(g, grads.dense_weights[2], grads.dense_biases[2]);
  g = dropout.backward(g);
  g = act2.backward(g);
  g = dense[1].backward(g, grads.dense_weights[1], grads.dense_biases[1]);
  g = act1.backward(g);
  g = batch_norm[0].backward(g, grads.bn_gamma[0], grads.bn_beta[0]);
  dense[0].backward(g, grads.dense_weights[0], grads.dense_biases[0]);
  return grads;
}

Index Network::parameter_count() const {
  Index total = 0;
  for_each_parameter_block(*this, [&](const auto& block) { total += block.size(); });
  return total;
}

Vec Network::flatten_parameters() const {
  Vec flat(parameter_count());
  Index at = 0;
  for_each_parameter_block(*this, [&](const auto& block) {
    flat.segment(at, block.size()) = Eigen::Map<const Vec>(block.data(), block.size());
    at += block.size();
  });
  return flat;
}

void Network::set_parameters(const Vec& params) {
  if (params.size() != parameter_count())
    throw ShapeMismatch("parameter vector length mismatch");
  Index at = 0;
  for_each_parameter_block(*this, [&](auto& block) {
    Eigen::Map<Vec>(block.data(), block.size()) = params.segment(at, block.size());
    at += block.size();
  });
}

Network init_network(std::uint64_t seed, const std::vector<Index>& widths) {
  if (widths.size() != 6) throw BadInput("expected six layer widths");
  for (Index w : widths)
    if (w < 1) throw BadInput("layer widths must be positive");
  Network net;
  net.widths = widths;
  std::mt19937_64 gen(rng::derive_seed(seed, 0x494e4954ull));
  for (int l = 0; l < 5; ++l) {
    const Index fan_in = widths[static_cast<std::size_t>(l)];
    const Index fan_out = widths[static_cast<std::size_t>(l) + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    Mat w(fan_out, fan_in);
    for (Index c = 0; c < fan_in; ++c)
      for (Index r = 0; r < fan_out; ++r)
        w(r, c) = rng::uniform(gen, -limit, limit);
    net.dense[static_cast<std::size_t>(l)].weights = std::move(w);
    net.dense[static_cast<std::size_t>(l)].biases = Vec::Zero(fan_out);
    net.dense[static_cast<std::size_t>(l)].l2_lambda = l < 3 ? 1e-6 : 0.0;
  }
  net.batch_norm[0] = BatchNormLayer(widths[1]);
  net.batch_norm[1] = BatchNormLayer(widths[3]);
  net.dropout.rng.seed(rng::derive_seed(seed, 0x44524f50ull));
  return net;
}

AdamState AdamState::init(Index n_params, const AdamConfig& config) {
  if (n_params < 1) throw BadInput("adam state needs at least one parameter");
  AdamState state;
  state.config = config;
  state.first_moment = Vec::Zero(n_params);
  state.second_moment = Vec::Zero(n_params);
  return state;
}

void adam_step(Vec& params, const Vec& grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw ShapeMismatch("adam_step size mismatch");
  const AdamConfig& c = state.config;
  ++state.step_count;
  state.first_moment = c.beta1 * state.first_moment + (1.0 - c.beta1) * grads;
  state.second_moment =
      (c.beta2 * state.second_moment.array() + (1.0 - c.beta2) * grads.array().square())
          .matrix();
  const double t = static_cast<double>(state.step_count);
  const Vec mhat = state.first_moment / (1.0 - std::pow(c.beta1, t));
  const Vec vhat = state.second_moment / (1.0 - std::pow(c.beta2, t));
  params.array() -= c.learning_rate * mhat.array() / (vhat.array().sqrt() + c.epsilon);
}

namespace {

constexpr char kModelMagic[6] = {'E', 'M', 'G', 'N', 'E', 'T'};
constexpr std::uint32_t kModelVersion = 1;

void put_vec(std::string& out, const Vec& v) {
  detail::put_u64(out, static_cast<std::uint64_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i) detail::put_f64(out, v[i]);
}

Vec read_vec(detail::ByteReader& r) {
  const std::uint64_t n = r.u64();
  if (n > (1ull << 32)) throw ModelFormatError("model file: implausible vector length");
  Vec v(static_cast<Index>(n));
  for (Index i = 0; i < v.size(); ++i) v[i] = r.f64();
  return v;
}

}  // namespace

void save_model(const ModelBundle& bundle, const std::filesystem::path& path) {
  const Network& net = bundle.net;
  if (net.widths.size() != 6) throw InvalidState("cannot save an uninitialized network");
  std::string out;
  out.append(kModelMagic, sizeof kModelMagic);
  detail::put_u32(out, kModelVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(net.widths.size()));
  for (Index w : net.widths) detail::put_u32(out, static_cast<std::uint32_t>(w));
  detail::put_f64(out, net.act1.slope);
  detail::put_f64(out, net.dropout.rate);
  for (const auto& bn : net.batch_norm) {
    detail::put_f64(out, bn.momentum);
    detail::put_f64(out, bn.epsilon);
  }
  for (const auto& layer : net.dense) detail::put_f64(out, layer.l2_lambda);
  for (const auto& layer : net.dense) {
    detail::put_u64(out, static_cast<std::uint64_t>(layer.weights.rows()));
    detail::put_u64(out, static_cast<std::uint64_t>(layer.weights.cols()));
    for (Index i = 0; i < layer.weights.size(); ++i)
      detail::put_f64(out, layer.weights.data()[i]);
    put_vec(out, layer.biases);
  }
  for (const auto& bn : net.batch_norm) {
    put_vec(out, bn.gamma);
    put_vec(out, bn.beta);
    put_vec(out, bn.running_mean);
    put_vec(out, bn.running_var);
  }
  out.push_back(bundle.has_standardizer ? '\1' : '\0');
  if (bundle.has_standardizer) {
    if (bundle.feature_mean.size() != bundle.feature_std.size())
      throw ShapeMismatch("standardizer mean/std length mismatch");
    put_vec(out, bundle.feature_mean);
    put_vec(out, bundle.feature_std);
  }
  detail::put_u32(out, static_cast<std::uint32_t>(bundle.config_snapshot.size()));
  for (const auto& [key, value] : bundle.config_snapshot) {
    detail::put_u32(out, static_cast<std::uint32_t>(key.size()));
    out.append(key);
    detail::put_u32(out, static_cast<std::uint32_t>(value.size()));
    out.append(value);
  }
  detail::atomic_write_file(path, out);
}

ModelBundle load_model(const std::filesystem::path& path) {
  const std::string data = detail::read_file_bytes(path);
  detail::ByteReader r(data, "model file");
  char magic[6];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kModelMagic, sizeof magic) != 0)
    throw ModelFormatError("model file: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kModelVersion)
    throw ModelFormatError("model file: unsupported version " + std::to_string(version));
  const std::uint32_t n_widths = r.u32();
  if (n_widths != 6) throw ModelFormatError("model file: expected six layer widths");
  ModelBundle bundle;
  Network& net = bundle.net;
  net.widths.resize(n_widths);
  for (auto& w : net.widths) {
    w = static_cast<Index>(r.u32());
    if (w < 1) throw ModelFormatError("model file: non-positive layer width");
  }
  const double slope = r.f64();
  net.act1.slope = net.act2.slope = net.act3.slope = slope;
  net.dropout.rate = r.f64();
  for (auto& bn : net.batch_norm) {
    bn.momentum = r.f64();
    bn.epsilon = r.f64();
  }
  for (auto& layer : net.dense) layer.l2_lambda = r.f64();
  for (std::size_t l = 0; l < net.dense.size(); ++l) {
    const auto rows = static_cast<Index>(r.u64());
    const auto cols = static_cast<Index>(r.u64());
    if (rows != net.widths[l + 1] || cols != net.widths[l])
      throw ModelFormatError("model file: weight shape does not match widths");
    Mat w(rows, cols);
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = r.f64();
    net.dense[l].weights = std::move(w);
    net.dense[l].biases = read_vec(r);
    if (net.dense[l].biases.size() != rows)
      throw ModelFormatError("model file: bias length does not match widths");
  }
  const std::array<Index, 2> bn_widths = {net.widths[1], net.widths[3]};
  for (std::size_t b = 0; b < net.batch_norm.size(); ++b) {
    auto& bn = net.batch_norm[b];
    bn.gamma = read_vec(r);
    bn.beta = read_vec(r);
    bn.running_mean = read_vec(r);
    bn.running_var = read_vec(r);
    if (bn.gamma.size() != bn_widths[b] || bn.beta.size() != bn_widths[b] ||
        bn.running_mean.size() != bn_widths[b] || bn.running_var.size() != bn_widths[b])
      throw ModelFormatError("model file: batch norm width mismatch");
  }
  char flag = 0;
  r.bytes(&flag, 1);
  bundle.has_standardizer = flag != 0;
  if (bundle.has_standardizer) {
    bundle.feature_mean = read_vec(r);
    bundle.feature_std = read_vec(r);
    if (bundle.feature_mean.size() != bundle.feature_std.size())
      throw ModelFormatError("model file: standardizer length mismatch");
  }
  const std::uint32_t n_entries = r.u32();
  bundle.config_snapshot.reserve(n_entries);
  for (std::uint32_t i = 0; i < n_entries; ++i) {
    const std::uint32_t klen = r.u32();
    std::string key(klen, '\0');
    if (klen > 0) r.bytes(key.data(), klen);
    const std::uint32_t vlen = r.u32();
    std::string value(vlen, '\0');
    if (vlen > 0) r.bytes(value.data(), vlen);
    bundle.config_snapshot.emplace_back(std::move(key), std::move(value));
  }
  if (!r.exhausted()) throw ModelFormatError("model file: trailing bytes");
  return bundle;
}

void save_model(const Network& net, const std::filesystem::path& path) {
  ModelBundle bundle;
  bundle.net = net;
  save_model(bundle, path);
}

Network load_network(const std::filesystem::path& path) {
  return load_model(path).net;
}

}  // namespace emgnet
