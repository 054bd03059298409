#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lindet/corpus.hpp"
#include "lindet/kernels.hpp"

namespace lindet {

// Full-batch gradient descent; deterministic by construction (zero init,
// fixed reduction order), so the seed only matters upstream.
struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 50;
  double l2_penalty = 1e-4;
  std::uint64_t seed = 0;
};

struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  std::string config_hash;

  std::size_t dimension() const { return weights.size(); }
};

struct TrainResult {
  LinearModel model;
  double final_loss = 0.0;
  std::vector<double> epoch_loss;  // loss at the parameters entering each epoch
};

std::string config_digest(const TrainConfig& cfg, std::size_t dimension);

// Minimizes sum_i w_i * [-y_i log s(z_i) - (1-y_i) log(1-s(z_i))] + l2*||w||^2
// over soft targets y in [0,1].
TrainResult train(const FeatureMatrix& features, std::span<const kernels::TrainExample> examples,
                  const TrainConfig& cfg);

double predict(const LinearModel& model, std::span<const double> features);

kernels::GradientResult loss_gradient(const LinearModel& model, const FeatureMatrix& features,
                                      std::span<const kernels::TrainExample> examples, double l2);

}  // namespace lindet
