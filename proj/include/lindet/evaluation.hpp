#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lindet/corpus.hpp"
#include "lindet/imputation.hpp"

namespace lindet {

struct Confusion {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
};

// Predictions at or above the threshold count as positive.
Confusion confusion(std::span<const double> predictions, std::span<const int> labels,
                    double threshold = 0.5);

// Matthews correlation in [-1,1]; 0 when any marginal is zero.
double mcc(const Confusion& c);

struct FiveNumber {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

// Linear-interpolation quantiles; all zeros on empty input.
FiveNumber five_number_summary(std::vector<double> values);

// One trained model scored against one test set.
struct SetEvaluation {
  MethodId method = MethodId::Corr;
  int set_index = 0;
  Authority test_set = Authority::Determinate;
  std::vector<std::string> case_ids;
  std::vector<double> predictions;
  std::vector<int> labels;
  Confusion conf;
  double mcc_raw = 0.0;
};

SetEvaluation evaluate_set(MethodId method, int set_index, Authority test_set,
                           const LinearModel& model, const FeatureMatrix& features,
                           CaseSlice cases, double threshold = 0.5);

// Per-method aggregate over the k balanced sets. MCC fields are on the
// percent scale.
struct EvaluationReport {
  MethodId method = MethodId::Corr;
  Authority test_set = Authority::Determinate;
  std::vector<double> per_set_mcc;
  double mean_mcc = 0.0;
  double std_mcc = 0.0;  // population standard deviation
  FiveNumber prediction_quantiles;
  std::vector<std::pair<std::string, double>> per_case_mean_prediction;
};

EvaluationReport aggregate(std::span<const SetEvaluation> sets);

struct CaseComparison {
  std::string case_id;
  std::vector<double> mean_by_method;  // aligned with the reports argument
  double spread = 0.0;                 // max - min across methods
};

// Per-case mean predictions across methods; reports must share a test set.
std::vector<CaseComparison> compare_cases(std::span<const std::string> case_ids,
                                          std::span<const EvaluationReport> reports);

}  // namespace lindet
