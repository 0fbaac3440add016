#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecgx/tensor.hpp"

namespace ecgx {

struct ConvBlock {
  std::size_t out_channels = 16;
  std::size_t kernel_size = 7;
  std::size_t pool_size = 2;

  bool operator==(const ConvBlock&) const = default;
};

enum class Activation { ReLU };

// [conv -> ReLU -> maxpool] x B -> flatten -> dense(hidden) -> ReLU -> dense(n_outputs)
struct ModelConfig {
  std::vector<ConvBlock> conv_blocks;
  std::size_t dense_hidden = 128;
  std::size_t n_outputs = 1;
  Activation activation = Activation::ReLU;

  // Four blocks (16, 32, 64, 64) with kernels (7, 5, 5, 3), pool 2, dense 128.
  static ModelConfig default_config(std::size_t n_outputs = 1);
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// For fs above 100 Hz with r = fs / 100: the first block's kernel becomes
// kernel * r (rounded up to odd) and its pool becomes r. Other rates are
// returned unchanged.
ModelConfig adapt_to_rate(const ModelConfig& base, int fs);

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct ParamTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

struct CnnModel {
  ModelConfig config;
  std::size_t in_channels = 1;
  std::size_t in_length = 0;
  std::uint64_t seed = 0;
  // conv{i}.weight, conv{i}.bias ..., dense.weight, dense.bias, head.weight, head.bias
  std::vector<ParamTensor> params;

  std::size_t feature_length() const;  // length after the last pool
  std::size_t flatten_size() const;
  std::size_t parameter_count() const;
};

// One gradient vector per parameter tensor, same order and sizes.
struct Gradients {
  std::vector<std::vector<double>> tensors;
};

Gradients zero_gradients(const CnnModel& model);

// Number of input samples that influence one pre-flatten output cell.
std::size_t receptive_field(const ModelConfig& config);

// He-uniform weights (limit sqrt(6 / fan_in)), zero biases. Throws
// ConfigError when the receptive field exceeds `in_length`.
CnnModel init_model(const ModelConfig& config, std::size_t in_channels, std::size_t in_length,
                    std::uint64_t seed);

// Activations kept for the backward pass.
struct ForwardTrace {
  std::vector<Tensor3> block_inputs;     // input of each conv
  std::vector<Tensor3> conv_outputs;     // post-ReLU conv output of each block
  std::vector<std::vector<std::uint32_t>> pool_argmax;
  Tensor3 features;                      // output of the last pool
  Matrix hidden;                         // post-ReLU dense output
  Matrix output;
};

// (batch x n_outputs) predictions. Throws ShapeError naming the first layer
// whose expected input does not match.
Matrix forward(const CnnModel& model, const Tensor3& x);
Matrix forward(const CnnModel& model, const Tensor3& x, ForwardTrace& trace);

// Pre-flatten feature maps of the convolutional stack.
Tensor3 feature_maps(const CnnModel& model, const Tensor3& x);

// Mean squared error over mask-true cells. Throws EmptyBatch when the mask
// has no true cell, ShapeError on mismatched shapes.
double mse_loss(const Matrix& pred, const Matrix& target, const MaskMatrix& mask);

struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
};

LossAndGradients backward(const CnnModel& model, const Tensor3& x, const Matrix& target,
                          const MaskMatrix& mask);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Optional per-tensor multiplier on lr; empty means 1 everywhere.
  std::vector<double> lr_scale;
};

AdamState init_adam(const CnnModel& model);
// Bias-corrected adaptive-moment update, in place.
void adam_step(std::vector<ParamTensor>& params, const Gradients& grads, AdamState& state, double lr,
               const AdamOptions& options = {});

// Binary checkpoint: "ECGXCKPT", u32 version, u64 header length, JSON
// header, then every tensor as little-endian float64 in header order.
inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_checkpoint(const CnnModel& model, const std::filesystem::path& path,
                     const nlohmann::json& extra = nlohmann::json::object());
CnnModel load_checkpoint(const std::filesystem::path& path, nlohmann::json* extra = nullptr);

}  // namespace ecgx
