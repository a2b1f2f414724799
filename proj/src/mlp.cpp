#include "rwacert/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rwacert/error.hpp"
#include "rwacert/io.hpp"
#include "rwacert/rng.hpp"

namespace rwacert::mlp {

MlpModel MlpModel::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  MlpModel m;
  m.input_dim = input_dim;
  m.hidden_dim = hidden_dim;
  m.w1.assign(hidden_dim * input_dim, 0.0);
  m.b1.assign(hidden_dim, 0.0);
  m.w2.assign(kNumClasses * hidden_dim, 0.0);
  m.b2.assign(kNumClasses, 0.0);
  return m;
}

void MlpModel::validate() const {
  require(input_dim > 0 && hidden_dim > 0, ErrorKind::DimensionMismatch, "model dims must be positive");
  require(w1.size() == hidden_dim * input_dim && b1.size() == hidden_dim &&
              w2.size() == kNumClasses * hidden_dim && b2.size() == kNumClasses,
          ErrorKind::DimensionMismatch, "model weight arrays inconsistent with dims");
  require(bin_edges.empty() || bin_edges.size() == input_dim + 1, ErrorKind::DimensionMismatch,
          "bin_edges must have input_dim + 1 entries");
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  require(finite(w1) && finite(b1) && finite(w2) && finite(b2), ErrorKind::InvalidArgument,
          "model weights must be finite");
}

std::vector<double> hidden_preactivations(const MlpModel& model, std::span<const double> h) {
  require(h.size() == model.input_dim, ErrorKind::DimensionMismatch,
          "input length " + std::to_string(h.size()) + " != model input_dim " + std::to_string(model.input_dim));
  std::vector<double> z(model.hidden_dim);
  for (std::size_t j = 0; j < model.hidden_dim; ++j) {
    double acc = model.b1[j];
    const double* row = &model.w1[j * model.input_dim];
    for (std::size_t i = 0; i < model.input_dim; ++i) acc += row[i] * h[i];
    z[j] = acc;
  }
  return z;
}

Logits forward(const MlpModel& model, std::span<const double> h) {
  auto z = hidden_preactivations(model, h);
  Logits out{};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    double acc = model.b2[c];
    for (std::size_t j = 0; j < model.hidden_dim; ++j) acc += model.weight2(c, j) * std::max(z[j], 0.0);
    out[c] = acc;
  }
  return out;
}

std::size_t argmax(const Logits& logits) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.size(); ++c) {
    if (logits[c] > logits[best]) best = c;
  }
  return best;
}

std::size_t classify(const MlpModel& model, std::span<const double> h) { return argmax(forward(model, h)); }

LossGrad loss_and_grad(const MlpModel& model, std::span<const Example> batch, double l2) {
  require(!batch.empty(), ErrorKind::InvalidArgument, "empty batch");
  const std::size_t H = model.hidden_dim;
  const std::size_t M = model.input_dim;
  LossGrad out;
  out.grad = MlpModel::zeros(M, H);
  const double scale = 1.0 / static_cast<double>(batch.size());

  std::vector<double> a(H), dz(H);
  for (const Example& ex : batch) {
    require(ex.label < kNumClasses, ErrorKind::InvalidArgument, "label out of range");
    auto z = hidden_preactivations(model, ex.features);
    for (std::size_t j = 0; j < H; ++j) a[j] = std::max(z[j], 0.0);
    Logits y{};
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      double acc = model.b2[c];
      for (std::size_t j = 0; j < H; ++j) acc += model.weight2(c, j) * a[j];
      y[c] = acc;
    }
    const double ymax = *std::max_element(y.begin(), y.end());
    double norm = 0.0;
    Logits p{};
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      p[c] = std::exp(y[c] - ymax);
      norm += p[c];
    }
    for (double& v : p) v /= norm;
    out.loss += scale * (std::log(norm) + ymax - y[ex.label]);

    // dL/dy = softmax - onehot
    Logits dy = p;
    dy[ex.label] -= 1.0;
    std::fill(dz.begin(), dz.end(), 0.0);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      out.grad.b2[c] += scale * dy[c];
      for (std::size_t j = 0; j < H; ++j) {
        out.grad.weight2(c, j) += scale * dy[c] * a[j];
        dz[j] += dy[c] * model.weight2(c, j);
      }
    }
    for (std::size_t j = 0; j < H; ++j) {
      if (z[j] <= 0.0) continue;
      out.grad.b1[j] += scale * dz[j];
      for (std::size_t i = 0; i < M; ++i) out.grad.weight1(j, i) += scale * dz[j] * ex.features[i];
    }
  }

  if (l2 > 0.0) {
    double penalty = 0.0;
    for (std::size_t k = 0; k < model.w1.size(); ++k) {
      penalty += model.w1[k] * model.w1[k];
      out.grad.w1[k] += l2 * model.w1[k];
    }
    for (std::size_t k = 0; k < model.w2.size(); ++k) {
      penalty += model.w2[k] * model.w2[k];
      out.grad.w2[k] += l2 * model.w2[k];
    }
    out.loss += 0.5 * l2 * penalty;
  }
  return out;
}

double dataset_loss(const MlpModel& model, std::span<const Example> data, double l2) {
  return loss_and_grad(model, data, l2).loss;
}

void TrainConfig::validate() const {
  require(learning_rate >= 0.0 && std::isfinite(learning_rate), ErrorKind::InvalidArgument,
          "learning rate must be >= 0");
  require(epochs > 0, ErrorKind::InvalidArgument, "epochs must be > 0");
  require(batch_size > 0, ErrorKind::InvalidArgument, "batch_size must be > 0");
  require(hidden_dim > 0, ErrorKind::InvalidArgument, "hidden_dim must be > 0");
  require(l2 >= 0.0, ErrorKind::InvalidArgument, "l2 must be >= 0");
}

MlpModel init_model(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed) {
  MlpModel m = MlpModel::zeros(input_dim, hidden_dim);
  Rng rng(seed);
  const double bound1 = std::sqrt(6.0 / static_cast<double>(input_dim));
  const double bound2 = std::sqrt(6.0 / static_cast<double>(hidden_dim));
  for (double& w : m.w1) w = rng.uniform(-bound1, bound1);
  for (double& w : m.w2) w = rng.uniform(-bound2, bound2);
  return m;
}

void sgd_step(MlpModel& model, const MlpModel& grad, double learning_rate) {
  auto step = [learning_rate](std::vector<double>& p, const std::vector<double>& g) {
    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= learning_rate * g[k];
  };
  step(model.w1, grad.w1);
  step(model.b1, grad.b1);
  step(model.w2, grad.w2);
  step(model.b2, grad.b2);
}

namespace {

// Flat views over the four parameter blocks, in a fixed order.
std::array<std::vector<double>*, 4> blocks(MlpModel& m) { return {&m.w1, &m.b1, &m.w2, &m.b2}; }
std::array<const std::vector<double>*, 4> blocks(const MlpModel& m) { return {&m.w1, &m.b1, &m.w2, &m.b2}; }

}  // namespace

TrainResult train(std::span<const Example> data, const TrainConfig& cfg) {
  cfg.validate();
  require(!data.empty(), ErrorKind::InvalidArgument, "empty training set");
  const std::size_t M = data.front().features.size();
  for (const auto& ex : data) {
    require(ex.features.size() == M, ErrorKind::DimensionMismatch, "training histograms differ in length");
    require(ex.label < kNumClasses, ErrorKind::InvalidArgument, "label out of range");
  }

  TrainResult result;
  result.model = init_model(M, cfg.hidden_dim, cfg.seed);
  MlpModel& model = result.model;
  MlpModel m1 = MlpModel::zeros(M, cfg.hidden_dim);
  MlpModel m2 = MlpModel::zeros(M, cfg.hidden_dim);

  Rng rng(derive_seed(cfg.seed, streams::kSplit));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Example> batch;
  std::size_t step = 0;

  result.epoch_loss.push_back(dataset_loss(model, data, cfg.l2));
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      batch.clear();
      for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k) {
        batch.push_back(data[order[k]]);
      }
      LossGrad lg = loss_and_grad(model, batch, cfg.l2);
      if (!std::isfinite(lg.loss)) {
        fail(ErrorKind::NonFiniteLoss, "non-finite loss at epoch " + std::to_string(epoch) + ", batch starting at " +
                                           std::to_string(start) + " (learning_rate=" +
                                           io::format_double(cfg.learning_rate) + ")");
      }
      ++step;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      auto params = blocks(model);
      auto grads = blocks(static_cast<const MlpModel&>(lg.grad));
      auto first = blocks(m1);
      auto second = blocks(m2);
      for (std::size_t b = 0; b < params.size(); ++b) {
        auto& p = *params[b];
        const auto& g = *grads[b];
        auto& mm = *first[b];
        auto& vv = *second[b];
        for (std::size_t k = 0; k < p.size(); ++k) {
          mm[k] = cfg.beta1 * mm[k] + (1.0 - cfg.beta1) * g[k];
          vv[k] = cfg.beta2 * vv[k] + (1.0 - cfg.beta2) * g[k] * g[k];
          p[k] -= cfg.learning_rate * (mm[k] / c1) / (std::sqrt(vv[k] / c2) + 1e-8);
        }
      }
    }
    double loss = dataset_loss(model, data, cfg.l2);
    if (!std::isfinite(loss)) {
      fail(ErrorKind::NonFiniteLoss, "non-finite training loss after epoch " + std::to_string(epoch));
    }
    result.epoch_loss.push_back(loss);
  }

  model.metadata = {
      {"optimizer", "adam"},
      {"learning_rate", cfg.learning_rate},
      {"epochs", cfg.epochs},
      {"batch_size", cfg.batch_size},
      {"seed", cfg.seed},
      {"l2", cfg.l2},
      {"init", "kaiming_uniform"},
      {"examples", data.size()},
      {"final_loss", result.epoch_loss.back()},
  };
  return result;
}

// ---------------------------------------------------------------------------
// Serialization. nlohmann::json prints doubles in shortest round-trip form,
// so weights reload bit-exactly.

nlohmann::json to_json(const MlpModel& m) {
  return {
      {"format", "rwacert-mlp"},
      {"version", 1},
      {"input_dim", m.input_dim},
      {"hidden_dim", m.hidden_dim},
      {"output_dim", kNumClasses},
      {"w1", m.w1},
      {"b1", m.b1},
      {"w2", m.w2},
      {"b2", m.b2},
      {"class_names", m.class_names},
      {"bin_edges", m.bin_edges},
      {"training", m.metadata},
  };
}

MlpModel model_from_json(const nlohmann::json& j) {
  try {
    MlpModel m;
    m.input_dim = j.at("input_dim").get<std::size_t>();
    m.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    require(j.value("output_dim", kNumClasses) == kNumClasses, ErrorKind::DimensionMismatch,
            "model output_dim must be 4");
    m.w1 = j.at("w1").get<std::vector<double>>();
    m.b1 = j.at("b1").get<std::vector<double>>();
    m.w2 = j.at("w2").get<std::vector<double>>();
    m.b2 = j.at("b2").get<std::vector<double>>();
    if (j.contains("class_names")) {
      auto names = j.at("class_names").get<std::vector<std::string>>();
      require(names.size() == kNumClasses, ErrorKind::DimensionMismatch, "class_names must have 4 entries");
      std::copy(names.begin(), names.end(), m.class_names.begin());
    }
    if (j.contains("bin_edges")) m.bin_edges = j.at("bin_edges").get<std::vector<double>>();
    if (j.contains("training")) m.metadata = j.at("training");
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("malformed model file: ") + e.what());
  }
}

std::string serialize(const MlpModel& model) { return to_json(model).dump(1) + "\n"; }

void save(const MlpModel& model, const std::filesystem::path& path) {
  model.validate();
  io::write_file_atomic(path, serialize(model));
}

MlpModel load(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace rwacert::mlp
