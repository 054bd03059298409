#include "lindet/classifier.hpp"

#include <charconv>
#include <cmath>

#include "lindet/errors.hpp"

namespace lindet {

namespace {

void append_double(std::string& s, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  s.append(buf, res.ptr);
}

std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

void validate_examples(const FeatureMatrix& X, std::span<const kernels::TrainExample> examples) {
  for (const auto& ex : examples) {
    if (ex.row >= X.rows()) throw DataError("train: feature row out of range");
    if (!(ex.target >= 0.0 && ex.target <= 1.0)) {
      throw DataError("train: target outside [0,1]");
    }
    if (!(ex.weight > 0.0) || !std::isfinite(ex.weight)) {
      throw DataError("train: sample weight must be positive and finite");
    }
  }
}

}  // namespace

std::string config_digest(const TrainConfig& cfg, std::size_t dimension) {
  std::string s = "lr=";
  append_double(s, cfg.learning_rate);
  s += ";epochs=" + std::to_string(cfg.epochs) + ";l2=";
  append_double(s, cfg.l2_penalty);
  s += ";seed=" + std::to_string(cfg.seed) + ";dim=" + std::to_string(dimension);
  return to_hex(fnv1a64(s));
}

TrainResult train(const FeatureMatrix& features, std::span<const kernels::TrainExample> examples,
                  const TrainConfig& cfg) {
  if (examples.empty()) throw DataError("train: dataset is empty");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
  if (cfg.epochs <= 0) throw ConfigError("train: epochs must be positive");
  if (cfg.l2_penalty < 0.0) throw ConfigError("train: l2_penalty must be non-negative");
  validate_examples(features, examples);

  std::vector<double> w(features.dimension(), 0.0);
  double bias = 0.0;
  TrainResult res;
  res.epoch_loss.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto g = kernels::loss_gradient(w, bias, features, examples, cfg.l2_penalty);
    if (!std::isfinite(g.loss)) {
      throw DataError("train: non-finite loss at epoch " + std::to_string(epoch));
    }
    res.epoch_loss.push_back(g.loss);
    for (std::size_t d = 0; d < w.size(); ++d) w[d] -= cfg.learning_rate * g.grad_weights[d];
    bias -= cfg.learning_rate * g.grad_bias;
  }
  const auto last = kernels::loss_gradient(w, bias, features, examples, cfg.l2_penalty);
  if (!std::isfinite(last.loss)) {
    throw DataError("train: non-finite loss at epoch " + std::to_string(cfg.epochs));
  }
  res.final_loss = last.loss;
  res.model.weights = std::move(w);
  res.model.bias = bias;
  res.model.config_hash = config_digest(cfg, features.dimension());
  return res;
}

double predict(const LinearModel& model, std::span<const double> features) {
  if (features.size() != model.weights.size()) {
    throw DataError("predict: feature dimension " + std::to_string(features.size()) +
                    " does not match model dimension " + std::to_string(model.weights.size()));
  }
  return kernels::sigmoid(kernels::dot(model.weights, features) + model.bias);
}

kernels::GradientResult loss_gradient(const LinearModel& model, const FeatureMatrix& features,
                                      std::span<const kernels::TrainExample> examples, double l2) {
  if (model.weights.size() != features.dimension()) {
    throw DataError("loss_gradient: model dimension does not match feature matrix");
  }
  validate_examples(features, examples);
  return kernels::loss_gradient(model.weights, model.bias, features, examples, l2);
}

}  // namespace lindet
