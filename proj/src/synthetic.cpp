#include "lindet/synthetic.hpp"

#include <cmath>
#include <ostream>

#include "json.hpp"
#include "lindet/errors.hpp"
#include "lindet/kernels.hpp"
#include "lindet/rng.hpp"

namespace lindet {

using nlohmann::json;

namespace {

constexpr double kSelectionSlope = 2.0;  // slope on |score| for outcome-dependent referral
constexpr int kYearMin = 2000;
constexpr int kYearSpan = 20;

// Intercept a such that mean(sigmoid(a + slope*|score|)) hits the target rate.
double calibrate_intercept(const std::vector<double>& abs_scores, double slope, double rate) {
  const auto mean_rate = [&](double a) {
    double s = 0.0;
    for (double v : abs_scores) s += kernels::sigmoid(a + slope * v);
    return s / static_cast<double>(abs_scores.size());
  };
  double lo = -80.0, hi = 80.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean_rate(mid) < rate ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::string sign_token_text(std::span<const double> x) {
  std::string text;
  text.reserve(x.size() * 6);
  for (std::size_t j = 0; j < x.size(); ++j) {
    text += 'x';
    text += std::to_string(j);
    text += x[j] >= 0.0 ? "p " : "n ";
  }
  return text;
}

std::string case_id(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "case-%06zu", i);
  return buf;
}

}  // namespace

std::string_view selection_mode_name(SelectionMode m) {
  return m == SelectionMode::MAR ? "mar" : "outcome-dependent";
}

std::optional<SelectionMode> parse_selection_mode(std::string_view s) {
  if (s == "mar") return SelectionMode::MAR;
  if (s == "outcome-dependent") return SelectionMode::OutcomeDependent;
  return std::nullopt;
}

void WorldConfig::validate() const {
  if (population == 0) throw ConfigError("world: population must be positive");
  if (dimension == 0) throw ConfigError("world: dimension must be positive");
  if (!(selection_rate > 0.0 && selection_rate < 1.0)) {
    throw ConfigError("world: selection_rate must be in (0,1)");
  }
  if (!(flip_rate >= 0.0 && flip_rate < 1.0)) {
    throw ConfigError("world: flip_rate must be in [0,1)");
  }
  if (panel_size <= 0 || panel_size % 2 == 0) {
    throw ConfigError("world: panel_size must be an odd positive integer");
  }
  if (!(vote_noise >= 0.0 && vote_noise < 1.0)) {
    throw ConfigError("world: vote_noise must be in [0,1)");
  }
}

std::vector<SyntheticCase> generate_world(const WorldConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.seed, "world"));

  // Fixed random unit direction defining the latent decision rule.
  std::vector<double> direction(config.dimension);
  double norm_sq = 0.0;
  do {
    norm_sq = 0.0;
    for (auto& u : direction) {
      u = rng.next_normal();
      norm_sq += u * u;
    }
  } while (norm_sq == 0.0);
  const double inv_norm = 1.0 / std::sqrt(norm_sq);
  for (auto& u : direction) u *= inv_norm;

  struct Draft {
    std::vector<double> features;
    double score = 0.0;
    int counterfactual = 0;
    int year = 0;
  };
  std::vector<Draft> drafts(config.population);
  std::vector<double> abs_scores(config.population);
  for (std::size_t i = 0; i < config.population; ++i) {
    auto& d = drafts[i];
    d.features.resize(config.dimension);
    for (auto& v : d.features) v = rng.next_normal();
    d.score = kernels::dot(direction, d.features);
    d.counterfactual = d.score + rng.next_logistic() > 0.0 ? 1 : 0;
    d.year = kYearMin + static_cast<int>(rng.next_below(kYearSpan));
    abs_scores[i] = std::fabs(d.score);
  }

  double intercept = 0.0;
  if (config.selection_mode == SelectionMode::OutcomeDependent) {
    intercept = calibrate_intercept(abs_scores, kSelectionSlope, config.selection_rate);
  }

  std::vector<SyntheticCase> world(config.population);
  for (std::size_t i = 0; i < config.population; ++i) {
    const auto& d = drafts[i];
    auto& sc = world[i];
    sc.counterfactual_outcome = d.counterfactual;
    auto& rec = sc.record;
    rec.id = case_id(i);
    rec.year = d.year;

    const double p_select =
        config.selection_mode == SelectionMode::MAR
            ? config.selection_rate
            : kernels::sigmoid(intercept + kSelectionSlope * abs_scores[i]);
    const bool determinate = rng.next_bernoulli(p_select);
    rec.authority = determinate ? Authority::Determinate : Authority::Indeterminate;
    if (determinate) {
      rec.outcome = d.counterfactual;
    } else {
      const bool flip = rng.next_bernoulli(config.flip_rate);
      rec.outcome = flip ? 1 - d.counterfactual : d.counterfactual;
      // Panels must agree with the recorded outcome by majority; resample
      // vote vectors that do not.
      rec.votes.resize(static_cast<std::size_t>(config.panel_size));
      do {
        for (auto& v : rec.votes) {
          const bool dissent = rng.next_bernoulli(config.vote_noise);
          v = dissent ? 1 - rec.outcome : rec.outcome;
        }
      } while (vote_majority(rec.votes) != rec.outcome);
    }
    rec.text = sign_token_text(d.features);
  }
  return world;
}

SetEvaluation oracle_evaluate(const LinearModel& model, const FeatureMatrix& features,
                              CaseSlice cases, std::span<const int> counterfactual_outcomes,
                              double threshold) {
  if (cases.size() != counterfactual_outcomes.size()) {
    throw DataError("oracle_evaluate: cases and counterfactual outcomes differ in length");
  }
  SetEvaluation ev;
  ev.test_set = Authority::Determinate;
  std::vector<std::uint32_t> rows;
  rows.reserve(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) {
    ev.case_ids.push_back(cases[i].record->id);
    ev.labels.push_back(counterfactual_outcomes[i]);
    rows.push_back(cases[i].feature_row);
  }
  ev.predictions = kernels::predict_batch(model.weights, model.bias, features, rows);
  ev.conf = confusion(ev.predictions, ev.labels, threshold);
  ev.mcc_raw = mcc(ev.conf);
  return ev;
}

void write_world_jsonl(std::span<const SyntheticCase> world, std::ostream& out) {
  for (const auto& sc : world) {
    json j;
    j["id"] = sc.record.id;
    j["text"] = sc.record.text;
    j["year"] = sc.record.year;
    j["authority"] = std::string(authority_name(sc.record.authority));
    j["outcome"] = sc.record.outcome;
    if (sc.record.has_votes()) j["votes"] = sc.record.votes;
    out << j.dump() << '\n';
  }
}

void write_counterfactual_jsonl(std::span<const SyntheticCase> world, std::ostream& out) {
  for (const auto& sc : world) {
    json j;
    j["id"] = sc.record.id;
    j["counterfactual_outcome"] = sc.counterfactual_outcome;
    out << j.dump() << '\n';
  }
}

}  // namespace lindet
