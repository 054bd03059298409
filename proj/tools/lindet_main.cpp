#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lindet/errors.hpp"
#include "lindet/pipeline.hpp"
#include "lindet/synthetic.hpp"

namespace {

using namespace lindet;

std::string default_counterfactual_path(const std::string& corpus_path) {
  const std::string suffix = ".jsonl";
  std::string stem = corpus_path;
  if (stem.size() > suffix.size() &&
      stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) == 0) {
    stem.resize(stem.size() - suffix.size());
  }
  return stem + ".counterfactuals.jsonl";
}

int cmd_synth(const WorldConfig& world, const std::string& out_path, std::string cf_path) {
  if (cf_path.empty()) cf_path = default_counterfactual_path(out_path);
  const auto cases = generate_world(world);
  {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + out_path + "'");
    write_world_jsonl(cases, out);
  }
  {
    std::ofstream out(cf_path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + cf_path + "'");
    write_counterfactual_jsonl(cases, out);
  }
  std::size_t det = 0;
  for (const auto& c : cases) det += c.record.authority == Authority::Determinate;
  std::cout << "wrote " << cases.size() << " cases (" << det << " determinate) to " << out_path
            << "\ncounterfactual sidecar: " << cf_path << "\n";
  return 0;
}

int cmd_compare(const std::string& run_dir, const std::vector<std::string>& case_ids,
                const std::string& out_path) {
  const CompareTable table = compare_run(run_dir, case_ids);
  std::ostringstream os;
  os << "case_id";
  for (const auto& m : table.methods) os << ',' << m;
  os << ",spread\n";
  for (const auto& row : table.rows) {
    os << row.case_id;
    for (double v : row.mean_by_method) os << ',' << format_double(v);
    os << ',' << format_double(row.spread) << '\n';
  }
  std::cout << os.str();
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + out_path + "'");
    out << os.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"selective-labels experiment harness for judgment prediction"};
  app.require_subcommand(1);

  // synth
  WorldConfig world;
  std::string synth_out, synth_cf, mode_name = "mar";
  auto* synth =
      app.add_subcommand("synth", "generate a synthetic corpus with known counterfactuals");
  synth->add_option("--out", synth_out, "corpus JSONL path")->required();
  synth->add_option("--counterfactuals", synth_cf,
                    "sidecar JSONL path (default: <out>.counterfactuals.jsonl)");
  synth->add_option("--population", world.population, "number of cases")->capture_default_str();
  synth->add_option("--dimension", world.dimension, "latent feature dimension")
      ->capture_default_str();
  synth->add_option("--seed", world.seed, "world seed")->capture_default_str();
  synth->add_option("--selection-mode", mode_name, "mar or outcome-dependent")
      ->capture_default_str();
  synth->add_option("--selection-rate", world.selection_rate, "P(case is determinate)")
      ->capture_default_str();
  synth->add_option("--flip-rate", world.flip_rate,
                    "P(indeterminate outcome differs from counterfactual)")
      ->capture_default_str();
  synth->add_option("--panel-size", world.panel_size, "judges per indeterminate case (odd)")
      ->capture_default_str();
  synth->add_option("--vote-noise", world.vote_noise, "per-judge dissent probability")
      ->capture_default_str();

  // run
  ExperimentConfig cfg;
  std::vector<std::string> method_names;
  std::string config_path;
  auto* run = app.add_subcommand("run", "run the imputation/training/evaluation grid");
  run->add_option("--config", config_path, "key=value config file; command-line flags win");
  run->add_option("--corpus", cfg.corpus_path, "corpus JSONL path");
  run->add_option("--out", cfg.output_dir, "output directory");
  run->add_option("--cutoff-year", cfg.cutoff_year, "first test year")->capture_default_str();
  run->add_option("--k", cfg.k, "number of balanced sets")->capture_default_str();
  run->add_option("--feature-dimension", cfg.feature_dimension, "hashed TF-IDF buckets")
      ->capture_default_str();
  run->add_option("--truncate-limit", cfg.truncate_limit, "token budget per case")
      ->capture_default_str();
  run->add_option("--head-fraction", cfg.head_fraction, "share of the budget kept from the head")
      ->capture_default_str();
  run->add_option("--methods", method_names,
                  "subset of corr,obs,obs_ip,nn,exp_all,exp_avg,exp_max,exp_min,exp_agr")
      ->delimiter(',');
  run->add_option("--learning-rate", cfg.train.learning_rate, "gradient descent step")
      ->capture_default_str();
  run->add_option("--epochs", cfg.train.epochs, "full-batch epochs")->capture_default_str();
  run->add_option("--l2-penalty", cfg.train.l2_penalty, "L2 coefficient")->capture_default_str();
  run->add_option("--seed", cfg.seed, "experiment seed")->capture_default_str();
  run->add_flag("--include-determinate,!--exclude-determinate", cfg.include_determinate,
                "determinate cases join corr/nn/exp training sets");
  run->add_flag("--normalize-ip-weights", cfg.normalize_ip_weights,
                "rescale inverse-propensity weights to mean 1");
  run->add_option("--clip-min", cfg.clip_min, "propensity clip floor")->capture_default_str();
  run->add_option("--threshold", cfg.threshold, "positive-class threshold")
      ->capture_default_str();

  // eval
  std::string eval_dir;
  auto* eval = app.add_subcommand("eval", "rebuild results from the saved models of a run");
  eval->add_option("--run", eval_dir, "run directory")->required();

  // compare
  std::string cmp_dir, cmp_out;
  std::vector<std::string> cmp_cases;
  auto* compare =
      app.add_subcommand("compare", "per-case mean predictions across methods, with spreads");
  compare->add_option("--run", cmp_dir, "run directory")->required();
  compare->add_option("--case", cmp_cases, "case id (repeatable)")->required();
  compare->add_option("--out", cmp_out, "also write the table to this CSV file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) {
      const auto mode = parse_selection_mode(mode_name);
      if (!mode) throw ConfigError("unknown selection mode '" + mode_name + "'");
      world.selection_mode = *mode;
      return cmd_synth(world, synth_out, synth_cf);
    }
    if (run->parsed()) {
      if (!method_names.empty()) {
        cfg.methods.clear();
        for (const auto& name : method_names) {
          const auto m = parse_method(name);
          if (!m) throw ConfigError("unknown method '" + name + "'");
          cfg.methods.push_back(*m);
        }
      }
      if (!config_path.empty()) {
        // start from the file, then let explicitly passed flags win
        ExperimentConfig merged = load_config_file(config_path);
        if (run->count("--corpus")) merged.corpus_path = cfg.corpus_path;
        if (run->count("--out")) merged.output_dir = cfg.output_dir;
        if (run->count("--cutoff-year")) merged.cutoff_year = cfg.cutoff_year;
        if (run->count("--k")) merged.k = cfg.k;
        if (run->count("--feature-dimension")) merged.feature_dimension = cfg.feature_dimension;
        if (run->count("--truncate-limit")) merged.truncate_limit = cfg.truncate_limit;
        if (run->count("--head-fraction")) merged.head_fraction = cfg.head_fraction;
        if (run->count("--methods")) merged.methods = cfg.methods;
        if (run->count("--learning-rate")) merged.train.learning_rate = cfg.train.learning_rate;
        if (run->count("--epochs")) merged.train.epochs = cfg.train.epochs;
        if (run->count("--l2-penalty")) merged.train.l2_penalty = cfg.train.l2_penalty;
        if (run->count("--seed")) merged.seed = cfg.seed;
        if (run->count("--include-determinate") || run->count("--exclude-determinate")) {
          merged.include_determinate = cfg.include_determinate;
        }
        if (run->count("--normalize-ip-weights")) {
          merged.normalize_ip_weights = cfg.normalize_ip_weights;
        }
        if (run->count("--clip-min")) merged.clip_min = cfg.clip_min;
        if (run->count("--threshold")) merged.threshold = cfg.threshold;
        cfg = std::move(merged);
      }
      cfg.train.seed = cfg.seed;
      const RunResult result = run_experiment(cfg, &std::cout);
      std::cout << "results: " << result.results_csv.string() << "\n";
      return 0;
    }
    if (eval->parsed()) {
      const RunResult result = evaluate_run(eval_dir, &std::cout);
      std::cout << "results: " << result.results_csv.string() << "\n";
      return 0;
    }
    if (compare->parsed()) {
      return cmd_compare(cmp_dir, cmp_cases, cmp_out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
