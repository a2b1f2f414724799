#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

// One-hidden-layer ReLU classifier over an M-bin histogram:
//   logits = W2 relu(W1 h + b1) + b2,   class = lowest index attaining max.
namespace rwacert::mlp {

inline constexpr std::size_t kNumClasses = 4;

using Logits = std::array<double, kNumClasses>;

struct MlpModel {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::vector<double> w1;  // hidden_dim x input_dim, row-major
  std::vector<double> b1;  // hidden_dim
  std::vector<double> w2;  // kNumClasses x hidden_dim, row-major
  std::vector<double> b2;  // kNumClasses
  std::array<std::string, kNumClasses> class_names{"no anomaly", "urgency 1", "urgency 2", "urgency 3"};
  std::vector<double> bin_edges;  // input geometry, M+1 entries (may be empty)
  nlohmann::json metadata = nlohmann::json::object();

  static MlpModel zeros(std::size_t input_dim, std::size_t hidden_dim);

  double& weight1(std::size_t j, std::size_t i) { return w1[j * input_dim + i]; }
  double weight1(std::size_t j, std::size_t i) const { return w1[j * input_dim + i]; }
  double& weight2(std::size_t c, std::size_t j) { return w2[c * hidden_dim + j]; }
  double weight2(std::size_t c, std::size_t j) const { return w2[c * hidden_dim + j]; }

  std::size_t parameter_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

  // Throws DimensionMismatch / InvalidArgument.
  void validate() const;
};

Logits forward(const MlpModel& model, std::span<const double> h);

// Hidden pre-activations W1 h + b1.
std::vector<double> hidden_preactivations(const MlpModel& model, std::span<const double> h);

std::size_t argmax(const Logits& logits);

std::size_t classify(const MlpModel& model, std::span<const double> h);

struct Example {
  std::vector<double> features;
  std::size_t label = 0;
};

struct LossGrad {
  double loss = 0.0;
  MlpModel grad;  // same shape as the model
};

// Mean softmax cross-entropy over the batch plus (l2 / 2) * ||W1, W2||^2.
LossGrad loss_and_grad(const MlpModel& model, std::span<const Example> batch, double l2);

double dataset_loss(const MlpModel& model, std::span<const Example> data, double l2);

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t epochs = 300;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  double l2 = 1e-4;
  std::size_t hidden_dim = 10;
  // Adam moment decay rates.
  double beta1 = 0.9;
  double beta2 = 0.999;

  void validate() const;
};

struct TrainResult {
  MlpModel model;
  std::vector<double> epoch_loss;  // entry 0 is the loss before training
};

// Kaiming-style uniform init: U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.
MlpModel init_model(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed);

// Mini-batch Adam from `init_model(M, hidden, seed)`; batches are reshuffled
// every epoch from the same seed. Returns the epoch-final model.
TrainResult train(std::span<const Example> data, const TrainConfig& cfg);

// One Adam-free gradient step; used for update sanity checks.
void sgd_step(MlpModel& model, const MlpModel& grad, double learning_rate);

nlohmann::json to_json(const MlpModel& model);
MlpModel model_from_json(const nlohmann::json& j);
std::string serialize(const MlpModel& model);
void save(const MlpModel& model, const std::filesystem::path& path);
MlpModel load(const std::filesystem::path& path);

}  // namespace rwacert::mlp
