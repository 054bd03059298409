#include "lindet/kernels.hpp"

#include <cmath>

namespace lindet::kernels {

double sigmoid(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

namespace {

// Instances per reduction block. Fixed so that the block layout, and with it
// every rounding step, is independent of the number of threads.
constexpr std::size_t kBlock = 1024;

struct Partial {
  std::vector<double> gw;
  double gb = 0.0;
  double loss = 0.0;
};

void accumulate(std::span<const double> w, double bias, const FeatureMatrix& X,
                std::span<const TrainExample> block, Partial& p) {
  for (const auto& ex : block) {
    const auto x = X.row(ex.row);
    const double z = dot(w, x) + bias;
    const double r = ex.weight * (sigmoid(z) - ex.target);
    p.loss += ex.weight * (softplus(z) - ex.target * z);
    for (std::size_t d = 0; d < x.size(); ++d) p.gw[d] += r * x[d];
    p.gb += r;
  }
}

GradientResult finalize(Partial&& p, std::span<const double> w, double l2) {
  GradientResult res;
  res.grad_weights = std::move(p.gw);
  res.grad_bias = p.gb;
  res.loss = p.loss;
  if (l2 != 0.0) {
    double wsq = 0.0;
    for (std::size_t d = 0; d < w.size(); ++d) {
      res.grad_weights[d] += 2.0 * l2 * w[d];
      wsq += w[d] * w[d];
    }
    res.loss += l2 * wsq;
  }
  return res;
}

}  // namespace

GradientResult loss_gradient_serial(std::span<const double> weights, double bias,
                                    const FeatureMatrix& features,
                                    std::span<const TrainExample> examples, double l2) {
  Partial p{std::vector<double>(weights.size(), 0.0), 0.0, 0.0};
  accumulate(weights, bias, features, examples, p);
  return finalize(std::move(p), weights, l2);
}

GradientResult loss_gradient(std::span<const double> weights, double bias,
                             const FeatureMatrix& features,
                             std::span<const TrainExample> examples, double l2) {
  const std::size_t n = examples.size();
  const std::size_t nblocks = n == 0 ? 1 : (n + kBlock - 1) / kBlock;
  std::vector<Partial> parts(nblocks);
  for (auto& p : parts) p.gw.assign(weights.size(), 0.0);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(nblocks); ++b) {
    const std::size_t begin = static_cast<std::size_t>(b) * kBlock;
    const std::size_t end = std::min(begin + kBlock, n);
    accumulate(weights, bias, features, examples.subspan(begin, end - begin), parts[b]);
  }

  // Pairwise tree over block partials, fixed combination order.
  for (std::size_t gap = 1; gap < nblocks; gap *= 2) {
    for (std::size_t i = 0; i + gap < nblocks; i += 2 * gap) {
      Partial& dst = parts[i];
      const Partial& src = parts[i + gap];
      for (std::size_t d = 0; d < dst.gw.size(); ++d) dst.gw[d] += src.gw[d];
      dst.gb += src.gb;
      dst.loss += src.loss;
    }
  }
  return finalize(std::move(parts[0]), weights, l2);
}

std::vector<double> predict_batch_serial(std::span<const double> weights, double bias,
                                         const FeatureMatrix& features,
                                         std::span<const std::uint32_t> rows) {
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out[i] = sigmoid(dot(weights, features.row(rows[i])) + bias);
  }
  return out;
}

std::vector<double> predict_batch(std::span<const double> weights, double bias,
                                  const FeatureMatrix& features,
                                  std::span<const std::uint32_t> rows) {
  std::vector<double> out(rows.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(rows.size()); ++i) {
    out[i] = sigmoid(dot(weights, features.row(rows[i])) + bias);
  }
  return out;
}

namespace {

std::size_t scan_one(const FeatureMatrix& X, std::uint32_t query_row,
                     std::span<const std::uint32_t> ref_rows,
                     std::span<const std::string> ref_ids) {
  const auto q = X.row(query_row);
  std::size_t best = 0;
  double best_sim = dot(q, X.row(ref_rows[0]));
  for (std::size_t j = 1; j < ref_rows.size(); ++j) {
    const double sim = dot(q, X.row(ref_rows[j]));
    if (sim > best_sim || (sim == best_sim && ref_ids[j] < ref_ids[best])) {
      best = j;
      best_sim = sim;
    }
  }
  return best;
}

}  // namespace

std::vector<std::size_t> nearest_reference_serial(const FeatureMatrix& features,
                                                  std::span<const std::uint32_t> query_rows,
                                                  std::span<const std::uint32_t> ref_rows,
                                                  std::span<const std::string> ref_ids) {
  std::vector<std::size_t> out(query_rows.size());
  for (std::size_t i = 0; i < query_rows.size(); ++i) {
    out[i] = scan_one(features, query_rows[i], ref_rows, ref_ids);
  }
  return out;
}

std::vector<std::size_t> nearest_reference(const FeatureMatrix& features,
                                           std::span<const std::uint32_t> query_rows,
                                           std::span<const std::uint32_t> ref_rows,
                                           std::span<const std::string> ref_ids) {
  std::vector<std::size_t> out(query_rows.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(query_rows.size()); ++i) {
    out[i] = scan_one(features, query_rows[i], ref_rows, ref_ids);
  }
  return out;
}

}  // namespace lindet::kernels
