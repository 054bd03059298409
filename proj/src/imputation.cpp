#include "lindet/imputation.hpp"

#include <algorithm>
#include <ostream>

#include "json.hpp"
#include "lindet/errors.hpp"

namespace lindet {

using nlohmann::json;

std::string_view method_name(MethodId m) {
  switch (m) {
    case MethodId::Corr: return "corr";
    case MethodId::Obs: return "obs";
    case MethodId::ObsIp: return "obs_ip";
    case MethodId::Nn: return "nn";
    case MethodId::ExpAll: return "exp_all";
    case MethodId::ExpAvg: return "exp_avg";
    case MethodId::ExpMax: return "exp_max";
    case MethodId::ExpMin: return "exp_min";
    case MethodId::ExpAgr: return "exp_agr";
  }
  return "corr";
}

std::optional<MethodId> parse_method(std::string_view name) {
  for (MethodId m : kAllMethods) {
    if (method_name(m) == name) return m;
  }
  return std::nullopt;
}

std::vector<kernels::TrainExample> ImputedDataset::as_training_examples() const {
  std::vector<kernels::TrainExample> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) {
    out.push_back({inst.feature_row, inst.target, inst.weight});
  }
  return out;
}

double PropensityModel::propensity(const FeatureMatrix& features, std::uint32_t row) const {
  return std::max(predict(model, features.row(row)), clip_min);
}

namespace {

ImputedDataset make_dataset(MethodId m, std::shared_ptr<const FeatureMatrix> features) {
  ImputedDataset ds;
  ds.method = m;
  ds.features = std::move(features);
  return ds;
}

void append_observed(std::vector<WeightedInstance>& out, CaseSlice cases) {
  for (const auto& c : cases) {
    out.push_back({c.record->id, c.feature_row, static_cast<double>(c.record->outcome), 1.0, 0});
  }
}

const std::vector<int>& votes_or_throw(const EncodedCase& c, std::string_view method) {
  if (!c.record->has_votes()) {
    throw DataError(std::string(method) + ": case '" + c.record->id + "' has no votes");
  }
  return c.record->votes;
}

void require_determinate(CaseSlice determinate, std::string_view method) {
  if (determinate.empty()) {
    throw DataError(std::string(method) + ": determinate set is empty, nothing to train on");
  }
}

}  // namespace

ImputedDataset impute_corr(CaseSlice indeterminate, CaseSlice determinate,
                           std::shared_ptr<const FeatureMatrix> features,
                           bool include_determinate) {
  auto ds = make_dataset(MethodId::Corr, std::move(features));
  append_observed(ds.instances, indeterminate);
  if (include_determinate) append_observed(ds.instances, determinate);
  return ds;
}

ImputedDataset impute_obs(CaseSlice indeterminate, CaseSlice determinate,
                          std::shared_ptr<const FeatureMatrix> features) {
  (void)indeterminate;
  require_determinate(determinate, "obs");
  auto ds = make_dataset(MethodId::Obs, std::move(features));
  append_observed(ds.instances, determinate);
  return ds;
}

ImputedDataset impute_obs_ip(CaseSlice indeterminate, CaseSlice determinate,
                             std::shared_ptr<const FeatureMatrix> features,
                             const PropensityModel& propensity, bool normalize_weights) {
  (void)indeterminate;
  require_determinate(determinate, "obs_ip");
  auto ds = make_dataset(MethodId::ObsIp, std::move(features));
  for (const auto& c : determinate) {
    const double p = propensity.propensity(*ds.features, c.feature_row);
    ds.instances.push_back(
        {c.record->id, c.feature_row, static_cast<double>(c.record->outcome), 1.0 / p, 0});
  }
  if (normalize_weights) {
    double total = 0.0;
    for (const auto& inst : ds.instances) total += inst.weight;
    const double mean = total / static_cast<double>(ds.instances.size());
    for (auto& inst : ds.instances) inst.weight /= mean;
  }
  return ds;
}

ImputedDataset impute_nn(CaseSlice indeterminate, CaseSlice determinate,
                         std::shared_ptr<const FeatureMatrix> features,
                         bool include_determinate) {
  require_determinate(determinate, "nn");
  auto ds = make_dataset(MethodId::Nn, std::move(features));

  std::vector<std::uint32_t> query_rows, ref_rows;
  std::vector<std::string> ref_ids;
  query_rows.reserve(indeterminate.size());
  for (const auto& c : indeterminate) query_rows.push_back(c.feature_row);
  ref_rows.reserve(determinate.size());
  for (const auto& c : determinate) {
    ref_rows.push_back(c.feature_row);
    ref_ids.push_back(c.record->id);
  }
  const auto nearest = kernels::nearest_reference(*ds.features, query_rows, ref_rows, ref_ids);
  for (std::size_t i = 0; i < indeterminate.size(); ++i) {
    const auto& c = indeterminate[i];
    const double label = static_cast<double>(determinate[nearest[i]].record->outcome);
    ds.instances.push_back({c.record->id, c.feature_row, label, 1.0, 0});
  }
  if (include_determinate) append_observed(ds.instances, determinate);
  return ds;
}

ImputedDataset impute_exp_all(CaseSlice indeterminate, CaseSlice determinate,
                              std::shared_ptr<const FeatureMatrix> features,
                              bool include_determinate) {
  auto ds = make_dataset(MethodId::ExpAll, std::move(features));
  for (const auto& c : indeterminate) {
    const auto& votes = votes_or_throw(c, "exp_all");
    const double w = 1.0 / static_cast<double>(votes.size());
    for (std::size_t j = 0; j < votes.size(); ++j) {
      ds.instances.push_back(
          {c.record->id, c.feature_row, static_cast<double>(votes[j]), w, static_cast<int>(j)});
    }
  }
  if (include_determinate) append_observed(ds.instances, determinate);
  return ds;
}

ImputedDataset impute_exp_avg(CaseSlice indeterminate, CaseSlice determinate,
                              std::shared_ptr<const FeatureMatrix> features,
                              bool include_determinate) {
  auto ds = make_dataset(MethodId::ExpAvg, std::move(features));
  for (const auto& c : indeterminate) {
    const auto& votes = votes_or_throw(c, "exp_avg");
    double sum = 0.0;
    for (int v : votes) sum += v;
    ds.instances.push_back(
        {c.record->id, c.feature_row, sum / static_cast<double>(votes.size()), 1.0, 0});
  }
  if (include_determinate) append_observed(ds.instances, determinate);
  return ds;
}

ImputedDataset impute_exp_max(CaseSlice indeterminate, CaseSlice determinate,
                              std::shared_ptr<const FeatureMatrix> features,
                              bool include_determinate) {
  auto ds = make_dataset(MethodId::ExpMax, std::move(features));
  for (const auto& c : indeterminate) {
    const auto& votes = votes_or_throw(c, "exp_max");
    const int label = *std::max_element(votes.begin(), votes.end());
    ds.instances.push_back({c.record->id, c.feature_row, static_cast<double>(label), 1.0, 0});
  }
  if (include_determinate) append_observed(ds.instances, determinate);
  return ds;
}

ImputedDataset impute_exp_min(CaseSlice indeterminate, CaseSlice determinate,
                              std::shared_ptr<const FeatureMatrix> features,
                              bool include_determinate) {
  auto ds = make_dataset(MethodId::ExpMin, std::move(features));
  for (const auto& c : indeterminate) {
    const auto& votes = votes_or_throw(c, "exp_min");
    const int label = *std::min_element(votes.begin(), votes.end());
    ds.instances.push_back({c.record->id, c.feature_row, static_cast<double>(label), 1.0, 0});
  }
  if (include_determinate) append_observed(ds.instances, determinate);
  return ds;
}

ImputedDataset impute_exp_agr(CaseSlice indeterminate, CaseSlice determinate,
                              std::shared_ptr<const FeatureMatrix> features,
                              bool include_determinate) {
  auto ds = make_dataset(MethodId::ExpAgr, std::move(features));
  for (const auto& c : indeterminate) {
    const auto& votes = votes_or_throw(c, "exp_agr");
    const bool unanimous = std::all_of(votes.begin(), votes.end(),
                                       [&](int v) { return v == votes.front(); });
    if (unanimous) {
      ds.instances.push_back(
          {c.record->id, c.feature_row, static_cast<double>(votes.front()), 1.0, 0});
    }
  }
  if (include_determinate) append_observed(ds.instances, determinate);
  return ds;
}

PropensityModel fit_propensity(CaseSlice training_pool,
                               std::shared_ptr<const FeatureMatrix> features,
                               const TrainConfig& cfg, double clip_min) {
  if (!(clip_min > 0.0 && clip_min <= 1.0)) {
    throw ConfigError("fit_propensity: clip_min must be in (0,1]");
  }
  bool has_det = false, has_indet = false;
  std::vector<kernels::TrainExample> examples;
  examples.reserve(training_pool.size());
  for (const auto& c : training_pool) {
    const bool det = c.record->authority == Authority::Determinate;
    has_det |= det;
    has_indet |= !det;
    examples.push_back({c.feature_row, det ? 1.0 : 0.0, 1.0});
  }
  if (!has_det || !has_indet) {
    throw DataError("fit_propensity: training pool contains a single authority");
  }

  PropensityModel prop;
  prop.clip_min = clip_min;
  prop.model = train(*features, examples, cfg).model;

  double sum_det = 0.0, sum_indet = 0.0;
  std::size_t n_det = 0, n_indet = 0;
  for (const auto& c : training_pool) {
    const double p = prop.propensity(*features, c.feature_row);
    if (c.record->authority == Authority::Determinate) {
      sum_det += p;
      ++n_det;
    } else {
      sum_indet += p;
      ++n_indet;
    }
  }
  prop.mean_p_determinate = sum_det / static_cast<double>(n_det);
  prop.mean_p_indeterminate = sum_indet / static_cast<double>(n_indet);
  return prop;
}

ImputedDataset run_method(MethodId method, CaseSlice indeterminate, CaseSlice determinate,
                          CaseSlice training_pool,
                          std::shared_ptr<const FeatureMatrix> features, int set_index,
                          const ImputeOptions& options, const PropensityModel* prefit) {
  ImputedDataset ds;
  switch (method) {
    case MethodId::Corr:
      ds = impute_corr(indeterminate, determinate, features, options.include_determinate);
      break;
    case MethodId::Obs:
      ds = impute_obs(indeterminate, determinate, features);
      break;
    case MethodId::ObsIp: {
      PropensityModel local;
      if (prefit == nullptr) {
        local = fit_propensity(training_pool, features, options.propensity_train,
                               options.clip_min);
        prefit = &local;
      }
      ds = impute_obs_ip(indeterminate, determinate, features, *prefit,
                         options.normalize_ip_weights);
      break;
    }
    case MethodId::Nn:
      ds = impute_nn(indeterminate, determinate, features, options.include_determinate);
      break;
    case MethodId::ExpAll:
      ds = impute_exp_all(indeterminate, determinate, features, options.include_determinate);
      break;
    case MethodId::ExpAvg:
      ds = impute_exp_avg(indeterminate, determinate, features, options.include_determinate);
      break;
    case MethodId::ExpMax:
      ds = impute_exp_max(indeterminate, determinate, features, options.include_determinate);
      break;
    case MethodId::ExpMin:
      ds = impute_exp_min(indeterminate, determinate, features, options.include_determinate);
      break;
    case MethodId::ExpAgr:
      ds = impute_exp_agr(indeterminate, determinate, features, options.include_determinate);
      break;
  }
  ds.set_index = set_index;
  return ds;
}

void write_imputed_jsonl(const ImputedDataset& dataset, std::uint64_t seed, std::ostream& out) {
  json header;
  header["method"] = std::string(method_name(dataset.method));
  header["set_index"] = dataset.set_index;
  header["seed"] = seed;
  out << header.dump() << '\n';
  for (const auto& inst : dataset.instances) {
    json line;
    line["case_id"] = inst.case_id;
    line["target"] = inst.target;
    line["weight"] = inst.weight;
    line["replica"] = inst.replica_index;
    out << line.dump() << '\n';
  }
}

}  // namespace lindet
