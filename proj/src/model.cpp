#include "ecgx/model.hpp"

#include <cmath>

#include "ecgx/error.hpp"
#include "ecgx/layers.hpp"
#include "ecgx/random.hpp"

namespace ecgx {

ModelConfig ModelConfig::default_config(std::size_t n_outputs) {
  ModelConfig c;
  c.conv_blocks = {{16, 7, 2}, {32, 5, 2}, {64, 5, 2}, {64, 3, 2}};
  c.dense_hidden = 128;
  c.n_outputs = n_outputs;
  return c;
}

void ModelConfig::validate() const {
  if (conv_blocks.empty()) throw Error(ErrorKind::ConfigError, "model needs at least one conv block");
  for (std::size_t i = 0; i < conv_blocks.size(); ++i) {
    const auto& b = conv_blocks[i];
    const std::string where = "conv" + std::to_string(i);
    if (b.out_channels == 0) throw Error(ErrorKind::ConfigError, where + ": zero output channels");
    if (b.kernel_size % 2 == 0) throw Error(ErrorKind::ConfigError, where + ": kernel size must be odd");
    if (b.pool_size == 0) throw Error(ErrorKind::ConfigError, where + ": pool size must be positive");
  }
  if (dense_hidden == 0) throw Error(ErrorKind::ConfigError, "dense_hidden must be positive");
  if (n_outputs == 0) throw Error(ErrorKind::ConfigError, "n_outputs must be at least 1");
}

ModelConfig adapt_to_rate(const ModelConfig& base, int fs) {
  ModelConfig out = base;
  if (fs <= 100 || fs % 100 != 0 || out.conv_blocks.empty()) return out;
  const auto r = static_cast<std::size_t>(fs / 100);
  auto& first = out.conv_blocks.front();
  first.kernel_size = first.kernel_size * r;
  if (first.kernel_size % 2 == 0) ++first.kernel_size;
  first.pool_size = r;
  return out;
}

nlohmann::json to_json(const ModelConfig& config) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : config.conv_blocks) {
    blocks.push_back({{"out_channels", b.out_channels},
                      {"kernel_size", b.kernel_size},
                      {"pool_size", b.pool_size}});
  }
  return {{"conv_blocks", blocks},
          {"dense_hidden", config.dense_hidden},
          {"n_outputs", config.n_outputs},
          {"activation", "relu"}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    for (const auto& b : j.at("conv_blocks")) {
      c.conv_blocks.push_back({b.at("out_channels").get<std::size_t>(),
                               b.at("kernel_size").get<std::size_t>(),
                               b.at("pool_size").get<std::size_t>()});
    }
    c.dense_hidden = j.at("dense_hidden").get<std::size_t>();
    c.n_outputs = j.at("n_outputs").get<std::size_t>();
    if (j.value("activation", std::string("relu")) != "relu") {
      throw Error(ErrorKind::ConfigError, "only relu activation is supported");
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("bad model config: ") + e.what());
  }
}

std::size_t CnnModel::feature_length() const {
  std::size_t len = in_length;
  for (const auto& b : config.conv_blocks) len /= b.pool_size;
  return len;
}

std::size_t CnnModel::flatten_size() const {
  return config.conv_blocks.back().out_channels * feature_length();
}

std::size_t CnnModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.values.size();
  return n;
}

Gradients zero_gradients(const CnnModel& model) {
  Gradients g;
  for (const auto& p : model.params) g.tensors.emplace_back(p.values.size(), 0.0);
  return g;
}

std::size_t receptive_field(const ModelConfig& config) {
  std::size_t rf = 1;
  std::size_t jump = 1;
  for (const auto& b : config.conv_blocks) {
    rf += (b.kernel_size - 1) * jump;
    rf += (b.pool_size - 1) * jump;
    jump *= b.pool_size;
  }
  return rf;
}

CnnModel init_model(const ModelConfig& config, std::size_t in_channels, std::size_t in_length,
                    std::uint64_t seed) {
  config.validate();
  if (in_channels == 0) throw Error(ErrorKind::ConfigError, "model needs at least one input channel");
  const std::size_t rf = receptive_field(config);
  if (rf > in_length) {
    throw Error(ErrorKind::ConfigError, "receptive field " + std::to_string(rf) +
                                            " exceeds input length " + std::to_string(in_length));
  }
  CnnModel model;
  model.config = config;
  model.in_channels = in_channels;
  model.in_length = in_length;
  model.seed = seed;
  if (model.feature_length() == 0) {
    throw Error(ErrorKind::ConfigError, "pooling reduces input length to zero");
  }

  Rng rng(derive_seed(seed, 0x11u));
  auto add = [&](std::string name, std::vector<std::size_t> shape, std::size_t fan_in) {
    ParamTensor p;
    p.name = std::move(name);
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    p.shape = std::move(shape);
    p.values.resize(n, 0.0);
    if (fan_in > 0) {
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (auto& v : p.values) v = rng.uniform(-limit, limit);
    }
    model.params.push_back(std::move(p));
  };

  std::size_t ch = in_channels;
  for (std::size_t i = 0; i < config.conv_blocks.size(); ++i) {
    const auto& b = config.conv_blocks[i];
    add("conv" + std::to_string(i) + ".weight", {b.out_channels, ch, b.kernel_size},
        ch * b.kernel_size);
    add("conv" + std::to_string(i) + ".bias", {b.out_channels}, 0);
    ch = b.out_channels;
  }
  const std::size_t flat = model.flatten_size();
  add("dense.weight", {config.dense_hidden, flat}, flat);
  add("dense.bias", {config.dense_hidden}, 0);
  add("head.weight", {config.n_outputs, config.dense_hidden}, config.dense_hidden);
  add("head.bias", {config.n_outputs}, 0);
  return model;
}

namespace {

void check_input(const CnnModel& model, const Tensor3& x) {
  if (x.channels() != model.in_channels) {
    throw Error(ErrorKind::ShapeError, "conv0: expected " + std::to_string(model.in_channels) +
                                           " input channels, got " + std::to_string(x.channels()));
  }
  if (x.length() != model.in_length) {
    throw Error(ErrorKind::ShapeError,
                "dense: model was sized for input length " + std::to_string(model.in_length) +
                    ", got " + std::to_string(x.length()));
  }
  if (x.batch() == 0) throw Error(ErrorKind::ShapeError, "conv0: empty batch");
}

}  // namespace

Matrix forward(const CnnModel& model, const Tensor3& x, ForwardTrace& trace) {
  check_input(model, x);
  const auto& cfg = model.config;
  const std::size_t nb = cfg.conv_blocks.size();
  trace.block_inputs.resize(nb);
  trace.conv_outputs.resize(nb);
  trace.pool_argmax.resize(nb);
  trace.block_inputs[0] = x;
  for (std::size_t i = 0; i < nb; ++i) {
    const auto& b = cfg.conv_blocks[i];
    conv1d_forward(trace.block_inputs[i], model.params[2 * i].values,
                   model.params[2 * i + 1].values, b.out_channels, b.kernel_size,
                   trace.conv_outputs[i]);
    relu_forward(trace.conv_outputs[i]);
    Tensor3& pooled = i + 1 < nb ? trace.block_inputs[i + 1] : trace.features;
    maxpool_forward(trace.conv_outputs[i], b.pool_size, pooled, trace.pool_argmax[i]);
  }
  dense_forward(trace.features.flat(), model.params[2 * nb].values, model.params[2 * nb + 1].values,
                cfg.dense_hidden, trace.hidden);
  relu_forward(trace.hidden);
  dense_forward(trace.hidden, model.params[2 * nb + 2].values, model.params[2 * nb + 3].values,
                cfg.n_outputs, trace.output);
  return trace.output;
}

Matrix forward(const CnnModel& model, const Tensor3& x) {
  ForwardTrace trace;
  return forward(model, x, trace);
}

Tensor3 feature_maps(const CnnModel& model, const Tensor3& x) {
  ForwardTrace trace;
  forward(model, x, trace);
  return trace.features;
}

double mse_loss(const Matrix& pred, const Matrix& target, const MaskMatrix& mask) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols() ||
      mask.rows() != pred.rows() || mask.cols() != pred.cols()) {
    throw Error(ErrorKind::ShapeError, "mse_loss: prediction, target and mask shapes differ");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (Eigen::Index r = 0; r < pred.rows(); ++r) {
    for (Eigen::Index c = 0; c < pred.cols(); ++c) {
      if (!mask(r, c)) continue;
      const double d = pred(r, c) - target(r, c);
      sum += d * d;
      ++count;
    }
  }
  if (count == 0) throw Error(ErrorKind::EmptyBatch, "mse_loss: every cell is masked");
  return sum / static_cast<double>(count);
}

LossAndGradients backward(const CnnModel& model, const Tensor3& x, const Matrix& target,
                          const MaskMatrix& mask) {
  ForwardTrace trace;
  const Matrix pred = forward(model, x, trace);
  LossAndGradients out;
  out.loss = mse_loss(pred, target, mask);
  out.grads = zero_gradients(model);
  auto& g = out.grads.tensors;

  const double count = static_cast<double>(mask.count());
  Matrix d_out = Matrix::Zero(pred.rows(), pred.cols());
  for (Eigen::Index r = 0; r < pred.rows(); ++r) {
    for (Eigen::Index c = 0; c < pred.cols(); ++c) {
      if (mask(r, c)) d_out(r, c) = 2.0 * (pred(r, c) - target(r, c)) / count;
    }
  }

  const auto& cfg = model.config;
  const std::size_t nb = cfg.conv_blocks.size();
  Matrix d_hidden;
  dense_backward(trace.hidden, d_out, model.params[2 * nb + 2].values, &d_hidden, g[2 * nb + 2],
                 g[2 * nb + 3]);
  relu_backward(trace.hidden, d_hidden);
  Matrix d_flat;
  dense_backward(trace.features.flat(), d_hidden, model.params[2 * nb].values, &d_flat, g[2 * nb],
                 g[2 * nb + 1]);

  Tensor3 d_pooled(trace.features.batch(), trace.features.channels(), trace.features.length());
  std::copy(d_flat.data(), d_flat.data() + d_flat.size(), d_pooled.data());
  Tensor3 d_conv;
  Tensor3 d_input;
  for (std::size_t i = nb; i-- > 0;) {
    const auto& conv_out = trace.conv_outputs[i];
    maxpool_backward(d_pooled, trace.pool_argmax[i], conv_out.length(), d_conv);
    relu_backward(conv_out, d_conv);
    conv1d_backward(trace.block_inputs[i], d_conv, model.params[2 * i].values,
                    cfg.conv_blocks[i].kernel_size, i > 0 ? &d_input : nullptr, g[2 * i],
                    g[2 * i + 1]);
    if (i > 0) std::swap(d_pooled, d_input);
  }
  return out;
}

AdamState init_adam(const CnnModel& model) {
  AdamState s;
  for (const auto& p : model.params) {
    s.m.emplace_back(p.values.size(), 0.0);
    s.v.emplace_back(p.values.size(), 0.0);
  }
  return s;
}

void adam_step(std::vector<ParamTensor>& params, const Gradients& grads, AdamState& state, double lr,
               const AdamOptions& o) {
  if (grads.tensors.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw Error(ErrorKind::ShapeError, "adam_step: parameter, gradient and state counts differ");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  if (!o.lr_scale.empty() && o.lr_scale.size() != params.size()) {
    throw Error(ErrorKind::ShapeError, "adam_step: one lr scale per tensor expected");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double step = o.lr_scale.empty() ? lr : lr * o.lr_scale[k];
    auto& p = params[k].values;
    const auto& g = grads.tensors[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size()) {
      throw Error(ErrorKind::ShapeError, "adam_step: size mismatch for " + params[k].name);
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= step * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

}  // namespace ecgx
