#include "lindet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "lindet/errors.hpp"
#include "lindet/kernels.hpp"

namespace lindet {

Confusion confusion(std::span<const double> predictions, std::span<const int> labels,
                    double threshold) {
  if (predictions.size() != labels.size()) {
    throw DataError("confusion: predictions and labels differ in length");
  }
  Confusion c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool pos = predictions[i] >= threshold;
    if (labels[i] == 1) {
      pos ? ++c.tp : ++c.fn;
    } else {
      pos ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

double mcc(const Confusion& c) {
  const double tp = static_cast<double>(c.tp);
  const double tn = static_cast<double>(c.tn);
  const double fp = static_cast<double>(c.fp);
  const double fn = static_cast<double>(c.fn);
  const double m1 = tp + fp, m2 = tp + fn, m3 = tn + fp, m4 = tn + fn;
  if (m1 == 0.0 || m2 == 0.0 || m3 == 0.0 || m4 == 0.0) return 0.0;
  const double v = (tp * tn - fp * fn) / std::sqrt(m1 * m2 * m3 * m4);
  return std::clamp(v, -1.0, 1.0);
}

FiveNumber five_number_summary(std::vector<double> values) {
  if (values.empty()) return {};
  std::sort(values.begin(), values.end());
  const auto quantile = [&](double q) {
    const double h = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
  };
  return {values.front(), quantile(0.25), quantile(0.5), quantile(0.75), values.back()};
}

SetEvaluation evaluate_set(MethodId method, int set_index, Authority test_set,
                           const LinearModel& model, const FeatureMatrix& features,
                           CaseSlice cases, double threshold) {
  if (model.weights.size() != features.dimension()) {
    throw DataError("evaluate_set: model dimension does not match feature matrix");
  }
  SetEvaluation ev;
  ev.method = method;
  ev.set_index = set_index;
  ev.test_set = test_set;
  std::vector<std::uint32_t> rows;
  rows.reserve(cases.size());
  for (const auto& c : cases) {
    ev.case_ids.push_back(c.record->id);
    ev.labels.push_back(c.record->outcome);
    rows.push_back(c.feature_row);
  }
  ev.predictions = kernels::predict_batch(model.weights, model.bias, features, rows);
  ev.conf = confusion(ev.predictions, ev.labels, threshold);
  ev.mcc_raw = mcc(ev.conf);
  return ev;
}

EvaluationReport aggregate(std::span<const SetEvaluation> sets) {
  if (sets.empty()) throw DataError("aggregate: no per-set evaluations");
  std::vector<const SetEvaluation*> ordered;
  ordered.reserve(sets.size());
  for (const auto& s : sets) {
    if (s.method != sets.front().method) {
      throw DataError("aggregate: mixed methods in one report");
    }
    if (s.test_set != sets.front().test_set) {
      throw DataError("aggregate: mixed test sets in one report");
    }
    ordered.push_back(&s);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const SetEvaluation* a, const SetEvaluation* b) {
              return a->set_index < b->set_index;
            });

  EvaluationReport rep;
  rep.method = sets.front().method;
  rep.test_set = sets.front().test_set;

  std::vector<double> pooled;
  const auto& ids = ordered.front()->case_ids;
  std::vector<double> case_sums(ids.size(), 0.0);
  for (const auto* s : ordered) {
    rep.per_set_mcc.push_back(s->mcc_raw * 100.0);
    pooled.insert(pooled.end(), s->predictions.begin(), s->predictions.end());
    if (s->case_ids != ids) {
      throw DataError("aggregate: per-set evaluations cover different cases");
    }
    for (std::size_t i = 0; i < ids.size(); ++i) case_sums[i] += s->predictions[i];
  }

  const double k = static_cast<double>(rep.per_set_mcc.size());
  double sum = 0.0;
  for (double v : rep.per_set_mcc) sum += v;
  rep.mean_mcc = sum / k;
  double var = 0.0;
  for (double v : rep.per_set_mcc) var += (v - rep.mean_mcc) * (v - rep.mean_mcc);
  rep.std_mcc = std::sqrt(var / k);

  rep.prediction_quantiles = five_number_summary(std::move(pooled));
  rep.per_case_mean_prediction.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    rep.per_case_mean_prediction.emplace_back(ids[i], case_sums[i] / k);
  }
  return rep;
}

std::vector<CaseComparison> compare_cases(std::span<const std::string> case_ids,
                                          std::span<const EvaluationReport> reports) {
  if (reports.empty()) throw DataError("compare_cases: no reports");
  std::vector<std::unordered_map<std::string_view, double>> lookup(reports.size());
  for (std::size_t r = 0; r < reports.size(); ++r) {
    if (reports[r].test_set != reports.front().test_set) {
      throw DataError("compare_cases: reports cover different test sets");
    }
    for (const auto& [id, mean] : reports[r].per_case_mean_prediction) {
      lookup[r].emplace(id, mean);
    }
  }
  std::vector<CaseComparison> out;
  out.reserve(case_ids.size());
  for (const auto& id : case_ids) {
    CaseComparison row;
    row.case_id = id;
    for (std::size_t r = 0; r < reports.size(); ++r) {
      const auto it = lookup[r].find(id);
      if (it == lookup[r].end()) {
        throw DataError("compare_cases: unknown case id '" + id + "' (" +
                        std::to_string(lookup[r].size()) + " case ids available)");
      }
      row.mean_by_method.push_back(it->second);
    }
    const auto [lo, hi] = std::minmax_element(row.mean_by_method.begin(),
                                              row.mean_by_method.end());
    row.spread = *hi - *lo;
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace lindet
