#pragma once

// Shared builders for the test suites: random corpora whose records always
// satisfy the ingestion invariants, encoded pools with random unit feature
// vectors, and a small grid runner for oracle experiments on synthetic worlds.

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "lindet/classifier.hpp"
#include "lindet/corpus.hpp"
#include "lindet/evaluation.hpp"
#include "lindet/imputation.hpp"
#include "lindet/pipeline.hpp"
#include "lindet/rng.hpp"
#include "lindet/synthetic.hpp"

namespace testutil {

using namespace lindet;

// Votes drawn first, outcome set to their majority, ties resampled.
inline std::vector<int> random_votes(Rng& rng, int panel, double p_one) {
  std::vector<int> votes(static_cast<std::size_t>(panel));
  do {
    for (auto& v : votes) v = rng.next_bernoulli(p_one) ? 1 : 0;
  } while (vote_majority(votes) == -1);
  return votes;
}

struct PoolOptions {
  std::size_t n = 40;
  std::size_t dim = 8;
  double p_determinate = 0.3;
  double p_violation = 0.5;
  int panel = 7;
  std::string id_prefix = "c";
};

// Records plus unit-norm feature rows; at least one case of each authority
// and each outcome per authority is forced so the pool is always usable.
struct EncodedPool {
  std::vector<CaseRecord> records;
  std::shared_ptr<FeatureMatrix> features;
  std::vector<EncodedCase> all, det, indet;

  EncodedCase at(std::size_t i) const {
    return {&records[i], static_cast<std::uint32_t>(i)};
  }
};

inline void rebuild_slices(EncodedPool& pool) {
  pool.all.clear();
  pool.det.clear();
  pool.indet.clear();
  for (std::size_t i = 0; i < pool.records.size(); ++i) {
    const EncodedCase ec{&pool.records[i], static_cast<std::uint32_t>(i)};
    pool.all.push_back(ec);
    (pool.records[i].authority == Authority::Determinate ? pool.det : pool.indet).push_back(ec);
  }
}

inline EncodedPool random_pool(Rng& rng, const PoolOptions& opt = {}) {
  EncodedPool pool;
  pool.features = std::make_shared<FeatureMatrix>(opt.dim, opt.n);
  for (std::size_t i = 0; i < opt.n; ++i) {
    CaseRecord rec;
    rec.id = opt.id_prefix + std::to_string(i);
    rec.year = 2000 + static_cast<int>(rng.next_below(20));
    bool det = rng.next_bernoulli(opt.p_determinate);
    // force both authorities and both outcomes per authority
    if (i == 0 || i == 1) det = true;
    if (i == 2 || i == 3) det = false;
    rec.authority = det ? Authority::Determinate : Authority::Indeterminate;
    if (det) {
      rec.outcome = (i == 0) ? 1 : (i == 1) ? 0 : (rng.next_bernoulli(opt.p_violation) ? 1 : 0);
    } else {
      double p = opt.p_violation;
      if (i == 2) p = 0.95;
      if (i == 3) p = 0.05;
      rec.votes = random_votes(rng, opt.panel, p);
      rec.outcome = vote_majority(rec.votes);
      if (i == 2 && rec.outcome != 1) {
        rec.votes.assign(static_cast<std::size_t>(opt.panel), 1);
        rec.outcome = 1;
      }
      if (i == 3 && rec.outcome != 0) {
        rec.votes.assign(static_cast<std::size_t>(opt.panel), 0);
        rec.outcome = 0;
      }
    }
    pool.records.push_back(std::move(rec));

    auto row = pool.features->row(i);
    double norm_sq = 0.0;
    for (auto& v : row) {
      v = rng.next_normal();
      norm_sq += v * v;
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& v : row) v *= inv;
  }
  rebuild_slices(pool);
  return pool;
}

// Encodes a generated world through the corpus pipeline and keeps the
// counterfactual labels aligned with the encoded rows.
struct EncodedWorld {
  EncodedExperiment enc;
  std::vector<int> counterfactual;  // by feature row
  std::vector<EncodedCase> test_cases;
  std::vector<int> test_counterfactual;
};

inline EncodedWorld encode_world(const std::vector<SyntheticCase>& world,
                                 const ExperimentConfig& cfg) {
  std::map<std::string, int> cf_by_id;
  std::vector<CaseRecord> records;
  records.reserve(world.size());
  for (const auto& sc : world) {
    cf_by_id[sc.record.id] = sc.counterfactual_outcome;
    records.push_back(sc.record);
  }
  EncodedWorld out;
  out.enc = encode_experiment(std::move(records), cfg);
  out.counterfactual.resize(out.enc.records.size());
  for (std::size_t i = 0; i < out.enc.records.size(); ++i) {
    out.counterfactual[i] = cf_by_id.at(out.enc.records[i].id);
  }
  for (std::size_t i = out.enc.train_count; i < out.enc.records.size(); ++i) {
    out.test_cases.push_back({&out.enc.records[i], static_cast<std::uint32_t>(i)});
    out.test_counterfactual.push_back(out.counterfactual[i]);
  }
  return out;
}

// Trains the method x set grid in memory and reports, per method, the mean
// oracle MCC over sets and the per-case mean predictions on the test split.
struct OracleGrid {
  std::map<MethodId, double> mean_oracle_mcc;
  std::map<MethodId, std::vector<double>> mean_test_prediction;  // by test case
  std::size_t test_cases = 0;
};

inline OracleGrid run_oracle_grid(const WorldConfig& world_cfg, const ExperimentConfig& cfg,
                                  const std::vector<MethodId>& methods) {
  const auto world = generate_world(world_cfg);
  EncodedWorld ew = encode_world(world, cfg);
  auto& enc = ew.enc;

  const auto det_sets =
      balanced_resample(enc.train_det, cfg.k, derive_seed(cfg.seed, "balance-determinate"));
  const auto indet_sets =
      balanced_resample(enc.train_indet, cfg.k, derive_seed(cfg.seed, "balance-indeterminate"));
  std::vector<std::vector<EncodedCase>> det_slices, indet_slices;
  for (const auto& s : det_sets) det_slices.push_back(resolve_case_ids(enc, s.case_ids));
  for (const auto& s : indet_sets) indet_slices.push_back(resolve_case_ids(enc, s.case_ids));

  ImputeOptions opts;
  opts.include_determinate = cfg.include_determinate;
  opts.normalize_ip_weights = cfg.normalize_ip_weights;
  opts.clip_min = cfg.clip_min;
  opts.propensity_train = cfg.train;
  PropensityModel prop;
  bool have_prop = false;
  for (MethodId m : methods) have_prop |= m == MethodId::ObsIp;
  if (have_prop) prop = fit_propensity(enc.train_all, enc.features, cfg.train, cfg.clip_min);

  OracleGrid grid;
  grid.test_cases = ew.test_cases.size();
  for (MethodId m : methods) {
    double mcc_sum = 0.0;
    std::vector<double> pred_sum(ew.test_cases.size(), 0.0);
    for (int si = 0; si < cfg.k; ++si) {
      auto ds = run_method(m, indet_slices[static_cast<std::size_t>(si)],
                           det_slices[static_cast<std::size_t>(si)], enc.train_all, enc.features,
                           si, opts, have_prop ? &prop : nullptr);
      const auto trained = train(*enc.features, ds.as_training_examples(), cfg.train);
      const auto ev = oracle_evaluate(trained.model, *enc.features, ew.test_cases,
                                      ew.test_counterfactual, cfg.threshold);
      mcc_sum += ev.mcc_raw;
      for (std::size_t i = 0; i < ev.predictions.size(); ++i) pred_sum[i] += ev.predictions[i];
    }
    grid.mean_oracle_mcc[m] = mcc_sum / cfg.k;
    for (auto& v : pred_sum) v /= cfg.k;
    grid.mean_test_prediction[m] = std::move(pred_sum);
  }
  return grid;
}

}  // namespace testutil
