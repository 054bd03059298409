#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "lindet/classifier.hpp"
#include "lindet/corpus.hpp"
#include "lindet/evaluation.hpp"

namespace lindet {

enum class SelectionMode { MAR, OutcomeDependent };

std::string_view selection_mode_name(SelectionMode m);
std::optional<SelectionMode> parse_selection_mode(std::string_view s);

struct WorldConfig {
  std::size_t population = 1000;
  std::size_t dimension = 32;  // latent feature dimension
  std::uint64_t seed = 0;
  SelectionMode selection_mode = SelectionMode::MAR;
  double selection_rate = 0.1;
  double flip_rate = 0.0;   // P(indeterminate outcome differs from counterfactual)
  int panel_size = 7;
  double vote_noise = 0.0;  // per-judge disagreement probability

  void validate() const;  // throws ConfigError
};

// A case plus the outcome the determinate authority would have issued.
struct SyntheticCase {
  CaseRecord record;
  int counterfactual_outcome = 0;
};

// Deterministic world with known counterfactuals. Case text encodes the
// latent feature signs as tokens so the corpus pipeline runs end to end;
// judgment years are spread uniformly over 2000-2019.
std::vector<SyntheticCase> generate_world(const WorldConfig& config);

// MCC against counterfactual outcomes, the quantity real data cannot provide.
SetEvaluation oracle_evaluate(const LinearModel& model, const FeatureMatrix& features,
                              CaseSlice cases, std::span<const int> counterfactual_outcomes,
                              double threshold = 0.5);

// Same JSONL schema the corpus parser reads, plus a counterfactual sidecar.
void write_world_jsonl(std::span<const SyntheticCase> world, std::ostream& out);
void write_counterfactual_jsonl(std::span<const SyntheticCase> world, std::ostream& out);

}  // namespace lindet
