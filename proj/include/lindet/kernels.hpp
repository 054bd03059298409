#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lindet/corpus.hpp"

// Data-parallel inner loops. Each kernel has a serial reference used by the
// tests and the benchmark; the parallel variants reduce over fixed-size
// instance blocks so the result does not depend on the thread count.
namespace lindet::kernels {

struct TrainExample {
  std::uint32_t row = 0;
  double target = 0.0;
  double weight = 1.0;
};

struct GradientResult {
  std::vector<double> grad_weights;
  double grad_bias = 0.0;
  double loss = 0.0;
};

double sigmoid(double z);
double softplus(double z);
double dot(std::span<const double> a, std::span<const double> b);

// Weighted soft-target logistic cross-entropy summed over examples, plus
// l2 * ||w||^2, with its analytic gradient.
GradientResult loss_gradient_serial(std::span<const double> weights, double bias,
                                    const FeatureMatrix& features,
                                    std::span<const TrainExample> examples, double l2);
GradientResult loss_gradient(std::span<const double> weights, double bias,
                             const FeatureMatrix& features,
                             std::span<const TrainExample> examples, double l2);

std::vector<double> predict_batch_serial(std::span<const double> weights, double bias,
                                         const FeatureMatrix& features,
                                         std::span<const std::uint32_t> rows);
std::vector<double> predict_batch(std::span<const double> weights, double bias,
                                  const FeatureMatrix& features,
                                  std::span<const std::uint32_t> rows);

// For each query row, the index into ref_rows of the reference with the
// highest dot-product similarity; ties break toward the smallest ref id.
std::vector<std::size_t> nearest_reference_serial(const FeatureMatrix& features,
                                                  std::span<const std::uint32_t> query_rows,
                                                  std::span<const std::uint32_t> ref_rows,
                                                  std::span<const std::string> ref_ids);
std::vector<std::size_t> nearest_reference(const FeatureMatrix& features,
                                           std::span<const std::uint32_t> query_rows,
                                           std::span<const std::uint32_t> ref_rows,
                                           std::span<const std::string> ref_ids);

}  // namespace lindet::kernels
