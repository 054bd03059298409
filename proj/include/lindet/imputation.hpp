#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "lindet/classifier.hpp"
#include "lindet/corpus.hpp"

namespace lindet {

enum class MethodId { Corr, Obs, ObsIp, Nn, ExpAll, ExpAvg, ExpMax, ExpMin, ExpAgr };

inline constexpr std::array<MethodId, 9> kAllMethods = {
    MethodId::Corr,   MethodId::Obs,    MethodId::ObsIp,  MethodId::Nn,    MethodId::ExpAll,
    MethodId::ExpAvg, MethodId::ExpMax, MethodId::ExpMin, MethodId::ExpAgr};

std::string_view method_name(MethodId m);
std::optional<MethodId> parse_method(std::string_view name);

// One training example after imputation. replica_index is nonzero only for
// per-judge duplicates.
struct WeightedInstance {
  std::string case_id;
  std::uint32_t feature_row = 0;
  double target = 0.0;
  double weight = 1.0;
  int replica_index = 0;
};

struct ImputedDataset {
  MethodId method = MethodId::Corr;
  int set_index = 0;
  std::shared_ptr<const FeatureMatrix> features;
  std::vector<WeightedInstance> instances;

  std::vector<kernels::TrainExample> as_training_examples() const;
};

// Logistic estimate of P(authority = Determinate | features), clipped below.
struct PropensityModel {
  LinearModel model;
  double clip_min = 0.01;
  double mean_p_determinate = 0.0;    // calibration summary over the fit pool
  double mean_p_indeterminate = 0.0;

  double propensity(const FeatureMatrix& features, std::uint32_t row) const;
};

struct ImputeOptions {
  bool include_determinate = true;    // determinate cases join corr/nn/exp sets
  bool normalize_ip_weights = false;  // rescale obs_ip weights to mean 1
  double clip_min = 0.01;
  TrainConfig propensity_train;
};

ImputedDataset impute_corr(CaseSlice indeterminate, CaseSlice determinate,
                           std::shared_ptr<const FeatureMatrix> features,
                           bool include_determinate = true);
ImputedDataset impute_obs(CaseSlice indeterminate, CaseSlice determinate,
                          std::shared_ptr<const FeatureMatrix> features);
ImputedDataset impute_obs_ip(CaseSlice indeterminate, CaseSlice determinate,
                             std::shared_ptr<const FeatureMatrix> features,
                             const PropensityModel& propensity,
                             bool normalize_weights = false);
ImputedDataset impute_nn(CaseSlice indeterminate, CaseSlice determinate,
                         std::shared_ptr<const FeatureMatrix> features,
                         bool include_determinate = true);
ImputedDataset impute_exp_all(CaseSlice indeterminate, CaseSlice determinate,
                              std::shared_ptr<const FeatureMatrix> features,
                              bool include_determinate = true);
ImputedDataset impute_exp_avg(CaseSlice indeterminate, CaseSlice determinate,
                              std::shared_ptr<const FeatureMatrix> features,
                              bool include_determinate = true);
ImputedDataset impute_exp_max(CaseSlice indeterminate, CaseSlice determinate,
                              std::shared_ptr<const FeatureMatrix> features,
                              bool include_determinate = true);
ImputedDataset impute_exp_min(CaseSlice indeterminate, CaseSlice determinate,
                              std::shared_ptr<const FeatureMatrix> features,
                              bool include_determinate = true);
ImputedDataset impute_exp_agr(CaseSlice indeterminate, CaseSlice determinate,
                              std::shared_ptr<const FeatureMatrix> features,
                              bool include_determinate = true);

PropensityModel fit_propensity(CaseSlice training_pool,
                               std::shared_ptr<const FeatureMatrix> features,
                               const TrainConfig& cfg, double clip_min = 0.01);

// Dispatch over the nine methods. A prefit propensity model avoids refitting
// per grid cell; when absent, obs_ip fits one from the pool.
ImputedDataset run_method(MethodId method, CaseSlice indeterminate, CaseSlice determinate,
                          CaseSlice training_pool,
                          std::shared_ptr<const FeatureMatrix> features, int set_index,
                          const ImputeOptions& options = {},
                          const PropensityModel* prefit_propensity = nullptr);

// JSONL: one header line with method/set_index/seed, then one line per
// instance with case_id, target, weight, replica.
void write_imputed_jsonl(const ImputedDataset& dataset, std::uint64_t seed, std::ostream& out);

}  // namespace lindet
