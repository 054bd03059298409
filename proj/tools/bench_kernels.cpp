// Compares the OpenMP kernels against their serial references on random data
// and reports timings plus the largest observed deviation.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "lindet/kernels.hpp"
#include "lindet/rng.hpp"

using namespace lindet;

namespace {

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

template <typename Fn>
double time_ms(int iters, Fn&& fn) {
  fn();  // warm up
  const double start = now_ms();
  for (int i = 0; i < iters; ++i) fn();
  return (now_ms() - start) / iters;
}

void report(const char* name, double serial_ms, double parallel_ms, double deviation) {
  std::printf("%-18s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   max|diff| %.3e\n",
              name, serial_ms, parallel_ms, serial_ms / parallel_ms, deviation);
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t rows = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 8192;
  std::size_t dim = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 512;
  int iters = argc > 3 ? std::atoi(argv[3]) : 5;

#ifdef _OPENMP
  std::printf("rows=%zu dim=%zu iters=%d threads=%d\n", rows, dim, iters, omp_get_max_threads());
#else
  std::printf("rows=%zu dim=%zu iters=%d (OpenMP disabled)\n", rows, dim, iters);
#endif

  Rng rng(7);
  FeatureMatrix X(dim, rows);
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = X.row(r);
    double norm_sq = 0.0;
    for (auto& v : row) {
      v = rng.next_normal();
      norm_sq += v * v;
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& v : row) v *= inv;
  }

  std::vector<kernels::TrainExample> examples(rows);
  std::vector<std::uint32_t> all_rows(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    examples[i] = {static_cast<std::uint32_t>(i), rng.next_double(), 0.5 + rng.next_double()};
    all_rows[i] = static_cast<std::uint32_t>(i);
  }
  std::vector<double> w(dim);
  for (auto& v : w) v = 0.1 * rng.next_normal();
  const double bias = 0.05;

  // gradient
  {
    kernels::GradientResult gs, gp;
    const double t_serial =
        time_ms(iters, [&] { gs = kernels::loss_gradient_serial(w, bias, X, examples, 1e-4); });
    const double t_par =
        time_ms(iters, [&] { gp = kernels::loss_gradient(w, bias, X, examples, 1e-4); });
    double dev = std::fabs(gs.loss - gp.loss);
    for (std::size_t d = 0; d < dim; ++d) {
      dev = std::max(dev, std::fabs(gs.grad_weights[d] - gp.grad_weights[d]));
    }
    dev = std::max(dev, std::fabs(gs.grad_bias - gp.grad_bias));
    report("loss_gradient", t_serial, t_par, dev);
  }

  // batch prediction
  {
    std::vector<double> ps, pp;
    const double t_serial =
        time_ms(iters, [&] { ps = kernels::predict_batch_serial(w, bias, X, all_rows); });
    const double t_par = time_ms(iters, [&] { pp = kernels::predict_batch(w, bias, X, all_rows); });
    double dev = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) dev = std::max(dev, std::fabs(ps[i] - pp[i]));
    report("predict_batch", t_serial, t_par, dev);
  }

  // nearest reference scan: first eighth of the rows act as references
  {
    const std::size_t n_ref = std::max<std::size_t>(1, rows / 8);
    std::vector<std::uint32_t> ref_rows(all_rows.begin(), all_rows.begin() + n_ref);
    std::vector<std::uint32_t> query_rows(all_rows.begin() + n_ref, all_rows.end());
    std::vector<std::string> ref_ids(n_ref);
    for (std::size_t i = 0; i < n_ref; ++i) ref_ids[i] = "ref-" + std::to_string(i);

    std::vector<std::size_t> ns, np;
    const double t_serial = time_ms(
        iters, [&] { ns = kernels::nearest_reference_serial(X, query_rows, ref_rows, ref_ids); });
    const double t_par =
        time_ms(iters, [&] { np = kernels::nearest_reference(X, query_rows, ref_rows, ref_ids); });
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < ns.size(); ++i) mismatches += ns[i] != np[i];
    report("nearest_reference", t_serial, t_par, static_cast<double>(mismatches));
  }
  return 0;
}
