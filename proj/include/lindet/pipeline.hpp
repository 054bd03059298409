#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "lindet/classifier.hpp"
#include "lindet/corpus.hpp"
#include "lindet/evaluation.hpp"
#include "lindet/imputation.hpp"

namespace lindet {

struct ExperimentConfig {
  std::string corpus_path;
  std::string output_dir;
  int cutoff_year = 2015;
  int k = 7;
  std::size_t feature_dimension = 4096;
  std::size_t truncate_limit = 4096;
  double head_fraction = 0.5;
  std::vector<MethodId> methods;  // defaults to all nine
  TrainConfig train;
  std::uint64_t seed = 0;
  bool include_determinate = true;
  bool normalize_ip_weights = false;
  double clip_min = 0.01;
  double threshold = 0.5;

  ExperimentConfig() : methods(kAllMethods.begin(), kAllMethods.end()) {}
  void validate() const;
};

// Corpus bound to its feature matrix; train rows precede test rows.
struct EncodedExperiment {
  std::vector<CaseRecord> records;
  std::size_t train_count = 0;
  std::shared_ptr<FeatureMatrix> features;
  std::unordered_map<std::string, std::uint32_t> row_of;
  std::vector<EncodedCase> train_all, train_det, train_indet, test_det, test_indet;
};

EncodedExperiment encode_experiment(std::vector<CaseRecord> corpus, const ExperimentConfig& cfg);

// Resolves a balanced set's ids against the encoded corpus.
std::vector<EncodedCase> resolve_case_ids(const EncodedExperiment& enc,
                                          std::span<const std::string> ids);

struct RunResult {
  std::vector<EvaluationReport> reports;  // determinate block then indeterminate block
  int models_trained = 0;
  std::filesystem::path results_csv;
  std::filesystem::path predictions_csv;
  std::filesystem::path manifest;
};

// Full experiment: parse, split, balance, impute, train, evaluate, report.
// Every output is a pure function of (corpus bytes, config).
RunResult run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr);

// Rebuilds results.csv and predictions.csv from the saved models of a run.
RunResult evaluate_run(const std::filesystem::path& run_dir, std::ostream* log = nullptr);

struct CompareTable {
  std::vector<std::string> methods;
  std::vector<CaseComparison> rows;
};

CompareTable compare_run(const std::filesystem::path& run_dir,
                         std::span<const std::string> case_ids);

// Plain key=value config file ('#' comments); keys carry the CLI flag names.
// Unknown keys are rejected.
ExperimentConfig load_config_file(const std::string& path);

// Shortest round-trip decimal form, used for every float the pipeline writes.
std::string format_double(double v);

void write_model_json(const std::filesystem::path& path, const LinearModel& model);
LinearModel load_model_json(const std::filesystem::path& path);

}  // namespace lindet
