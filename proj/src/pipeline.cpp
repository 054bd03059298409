#include "lindet/pipeline.hpp"

#include <atomic>
#include <charconv>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "lindet/errors.hpp"
#include "lindet/rng.hpp"
#include "lindet/synthetic.hpp"

namespace lindet {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void ExperimentConfig::validate() const {
  if (corpus_path.empty()) throw ConfigError("config: corpus path is required");
  if (output_dir.empty()) throw ConfigError("config: output directory is required");
  if (k <= 0) throw ConfigError("config: k must be positive");
  if (feature_dimension == 0) throw ConfigError("config: feature dimension must be positive");
  if (truncate_limit < 2) throw ConfigError("config: truncate limit must be at least 2");
  if (!(head_fraction >= 0.0 && head_fraction <= 1.0)) {
    throw ConfigError("config: head fraction must be in [0,1]");
  }
  if (methods.empty()) throw ConfigError("config: at least one method is required");
  if (!(clip_min > 0.0 && clip_min <= 1.0)) throw ConfigError("config: clip_min must be in (0,1]");
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ConfigError("config: threshold must be in [0,1]");
  }
  if (!(train.learning_rate > 0.0)) throw ConfigError("config: learning rate must be positive");
  if (train.epochs <= 0) throw ConfigError("config: epochs must be positive");
  if (train.l2_penalty < 0.0) throw ConfigError("config: l2 penalty must be non-negative");
}

namespace {

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["corpus"] = cfg.corpus_path;
  j["out"] = cfg.output_dir;
  j["cutoff-year"] = cfg.cutoff_year;
  j["k"] = cfg.k;
  j["feature-dimension"] = cfg.feature_dimension;
  j["truncate-limit"] = cfg.truncate_limit;
  j["head-fraction"] = cfg.head_fraction;
  std::vector<std::string> names;
  for (MethodId m : cfg.methods) names.emplace_back(method_name(m));
  j["methods"] = names;
  j["learning-rate"] = cfg.train.learning_rate;
  j["epochs"] = cfg.train.epochs;
  j["l2-penalty"] = cfg.train.l2_penalty;
  j["seed"] = cfg.seed;
  j["include-determinate"] = cfg.include_determinate;
  j["normalize-ip-weights"] = cfg.normalize_ip_weights;
  j["clip-min"] = cfg.clip_min;
  j["threshold"] = cfg.threshold;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  static const std::vector<std::string> known = {
      "corpus",        "out",           "cutoff-year",         "k",
      "feature-dimension", "truncate-limit", "head-fraction",  "methods",
      "learning-rate", "epochs",        "l2-penalty",          "seed",
      "include-determinate", "normalize-ip-weights", "clip-min", "threshold"};
  for (const auto& item : j.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
      throw ConfigError("config: unknown key '" + item.key() + "'");
    }
  }
  ExperimentConfig cfg;
  try {
    cfg.corpus_path = j.at("corpus").get<std::string>();
    cfg.output_dir = j.at("out").get<std::string>();
    cfg.cutoff_year = j.at("cutoff-year").get<int>();
    cfg.k = j.at("k").get<int>();
    cfg.feature_dimension = j.at("feature-dimension").get<std::size_t>();
    cfg.truncate_limit = j.at("truncate-limit").get<std::size_t>();
    cfg.head_fraction = j.at("head-fraction").get<double>();
    cfg.methods.clear();
    for (const auto& name : j.at("methods")) {
      const auto m = parse_method(name.get<std::string>());
      if (!m) throw ConfigError("config: unknown method '" + name.get<std::string>() + "'");
      cfg.methods.push_back(*m);
    }
    cfg.train.learning_rate = j.at("learning-rate").get<double>();
    cfg.train.epochs = j.at("epochs").get<int>();
    cfg.train.l2_penalty = j.at("l2-penalty").get<double>();
    cfg.train.seed = j.at("seed").get<std::uint64_t>();
    cfg.seed = cfg.train.seed;
    cfg.include_determinate = j.at("include-determinate").get<bool>();
    cfg.normalize_ip_weights = j.at("normalize-ip-weights").get<bool>();
    cfg.clip_min = j.at("clip-min").get<double>();
    cfg.threshold = j.at("threshold").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

template <typename T>
T parse_number(std::string_view value, const std::string& where) {
  T out{};
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    throw ConfigError(where + ": cannot parse '" + std::string(value) + "'");
  }
  return out;
}

bool parse_bool(std::string_view value, const std::string& where) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(where + ": expected true or false, got '" + std::string(value) + "'");
}

void apply_config_entry(ExperimentConfig& cfg, std::string_view key, std::string_view value,
                        const std::string& where) {
  if (key == "corpus") {
    cfg.corpus_path = value;
  } else if (key == "out") {
    cfg.output_dir = value;
  } else if (key == "cutoff-year") {
    cfg.cutoff_year = parse_number<int>(value, where);
  } else if (key == "k") {
    cfg.k = parse_number<int>(value, where);
  } else if (key == "feature-dimension") {
    cfg.feature_dimension = parse_number<std::size_t>(value, where);
  } else if (key == "truncate-limit") {
    cfg.truncate_limit = parse_number<std::size_t>(value, where);
  } else if (key == "head-fraction") {
    cfg.head_fraction = parse_number<double>(value, where);
  } else if (key == "methods") {
    cfg.methods.clear();
    std::string_view rest = value;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const auto name = trim(rest.substr(0, comma));
      const auto m = parse_method(name);
      if (!m) throw ConfigError(where + ": unknown method '" + std::string(name) + "'");
      cfg.methods.push_back(*m);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
  } else if (key == "learning-rate") {
    cfg.train.learning_rate = parse_number<double>(value, where);
  } else if (key == "epochs") {
    cfg.train.epochs = parse_number<int>(value, where);
  } else if (key == "l2-penalty") {
    cfg.train.l2_penalty = parse_number<double>(value, where);
  } else if (key == "seed") {
    cfg.seed = parse_number<std::uint64_t>(value, where);
  } else if (key == "include-determinate") {
    cfg.include_determinate = parse_bool(value, where);
  } else if (key == "normalize-ip-weights") {
    cfg.normalize_ip_weights = parse_bool(value, where);
  } else if (key == "clip-min") {
    cfg.clip_min = parse_number<double>(value, where);
  } else if (key == "threshold") {
    cfg.threshold = parse_number<double>(value, where);
  } else {
    throw ConfigError(where + ": unknown config key '" + std::string(key) + "'");
  }
}

void write_text_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw DataError("short write to '" + path.string() + "'");
}

std::string hash_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot hash missing file '" + path.string() + "'");
  std::uint64_t h = 14695981039346656037ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return std::string("fnv1a64:") + hex;
}

std::string methods_label(const std::vector<MethodId>& methods) {
  std::string s;
  for (MethodId m : methods) {
    if (!s.empty()) s += ',';
    s += method_name(m);
  }
  return s;
}

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("[") + name + "] " + e.what());
  } catch (const std::exception& e) {
    throw DataError(std::string("[") + name + "] " + e.what());
  }
}

}  // namespace

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  ExperimentConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const auto eq = stripped.find('=');
    const std::string where = path + ":" + std::to_string(lineno);
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key=value");
    apply_config_entry(cfg, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)), where);
  }
  cfg.train.seed = cfg.seed;
  return cfg;
}

EncodedExperiment encode_experiment(std::vector<CaseRecord> corpus, const ExperimentConfig& cfg) {
  // tokenization runs inside parallel regions; reject bad parameters up front
  if (cfg.truncate_limit < 2) throw ConfigError("config: truncate limit must be at least 2");
  if (!(cfg.head_fraction >= 0.0 && cfg.head_fraction <= 1.0)) {
    throw ConfigError("config: head fraction must be in [0,1]");
  }
  if (cfg.feature_dimension == 0) throw ConfigError("config: feature dimension must be positive");

  EncodedExperiment enc;
  {
    SplitCorpus split = temporal_split(corpus, cfg.cutoff_year);
    enc.train_count = split.train.size();
    enc.records = std::move(split.train);
    enc.records.insert(enc.records.end(), std::make_move_iterator(split.test.begin()),
                       std::make_move_iterator(split.test.end()));
  }

  // Document frequencies come from the training split only.
  std::vector<std::vector<std::string>> train_docs(enc.train_count);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(enc.train_count); ++i) {
    train_docs[i] =
        head_tail_truncate(tokenize(enc.records[i].text), cfg.truncate_limit, cfg.head_fraction);
  }
  const DocFrequency stats = build_doc_frequency(train_docs, cfg.feature_dimension);
  train_docs.clear();
  train_docs.shrink_to_fit();

  enc.features = std::make_shared<FeatureMatrix>(cfg.feature_dimension, enc.records.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(enc.records.size()); ++i) {
    const auto tokens =
        head_tail_truncate(tokenize(enc.records[i].text), cfg.truncate_limit, cfg.head_fraction);
    vectorize_into(tokens, stats, enc.features->row(static_cast<std::size_t>(i)));
  }

  enc.row_of.reserve(enc.records.size());
  for (std::size_t i = 0; i < enc.records.size(); ++i) {
    if (!enc.row_of.emplace(enc.records[i].id, static_cast<std::uint32_t>(i)).second) {
      throw DataError("duplicate case id '" + enc.records[i].id + "'");
    }
    const EncodedCase ec{&enc.records[i], static_cast<std::uint32_t>(i)};
    const bool det = enc.records[i].authority == Authority::Determinate;
    if (i < enc.train_count) {
      enc.train_all.push_back(ec);
      (det ? enc.train_det : enc.train_indet).push_back(ec);
    } else {
      (det ? enc.test_det : enc.test_indet).push_back(ec);
    }
  }
  return enc;
}

std::vector<EncodedCase> resolve_case_ids(const EncodedExperiment& enc,
                                          std::span<const std::string> ids) {
  std::vector<EncodedCase> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = enc.row_of.find(id);
    if (it == enc.row_of.end()) throw DataError("unknown case id '" + id + "'");
    out.push_back({&enc.records[it->second], it->second});
  }
  return out;
}

namespace {

struct CellEvaluations {
  SetEvaluation det;
  SetEvaluation indet;
};

std::string cell_stem(MethodId m, int set_index) {
  return std::string(method_name(m)) + "_set" + std::to_string(set_index);
}

void write_results_csv(const fs::path& path, std::span<const EvaluationReport> reports, int k) {
  std::ostringstream os;
  os << "test_set,method,mean_mcc,std_mcc";
  for (int i = 0; i < k; ++i) os << ",mcc_set_" << i;
  os << '\n';
  for (const auto& rep : reports) {
    os << authority_name(rep.test_set) << ',' << method_name(rep.method) << ','
       << format_double(rep.mean_mcc) << ',' << format_double(rep.std_mcc);
    for (double v : rep.per_set_mcc) os << ',' << format_double(v);
    os << '\n';
  }
  write_text_file(path, os.str());
}

void write_predictions_csv(const fs::path& path, const std::vector<MethodId>& methods, int k,
                           const std::vector<CellEvaluations>& cells) {
  std::ostringstream os;
  os << "method,set_index,case_id,prediction,label,authority\n";
  const auto emit = [&](const SetEvaluation& ev, Authority auth) {
    for (std::size_t i = 0; i < ev.case_ids.size(); ++i) {
      os << method_name(ev.method) << ',' << ev.set_index << ',' << ev.case_ids[i] << ','
         << format_double(ev.predictions[i]) << ',' << ev.labels[i] << ','
         << authority_name(auth) << '\n';
    }
  };
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    for (int si = 0; si < k; ++si) {
      const auto& cell = cells[mi * static_cast<std::size_t>(k) + static_cast<std::size_t>(si)];
      emit(cell.det, Authority::Determinate);
      emit(cell.indet, Authority::Indeterminate);
    }
  }
  write_text_file(path, os.str());
}

json balanced_sets_json(const std::vector<BalancedSet>& sets) {
  json arr = json::array();
  for (const auto& s : sets) {
    json e;
    e["set_index"] = s.set_index;
    e["case_ids"] = s.case_ids;
    arr.push_back(std::move(e));
  }
  return arr;
}

std::vector<MethodId> canonical_methods(const std::vector<MethodId>& requested) {
  std::vector<MethodId> out;
  for (MethodId m : kAllMethods) {
    if (std::find(requested.begin(), requested.end(), m) != requested.end()) out.push_back(m);
  }
  return out;
}

struct GridOutput {
  std::vector<CellEvaluations> cells;
  std::vector<EvaluationReport> reports;
};

GridOutput run_grid(const EncodedExperiment& enc, const ExperimentConfig& cfg,
                    const std::vector<MethodId>& methods,
                    const std::vector<std::vector<EncodedCase>>& det_slices,
                    const std::vector<std::vector<EncodedCase>>& indet_slices,
                    const PropensityModel* prop, const fs::path& out_dir, std::ostream* log) {
  const std::size_t n_cells = methods.size() * static_cast<std::size_t>(cfg.k);
  GridOutput grid;
  grid.cells.resize(n_cells);

  ImputeOptions opts;
  opts.include_determinate = cfg.include_determinate;
  opts.normalize_ip_weights = cfg.normalize_ip_weights;
  opts.clip_min = cfg.clip_min;
  opts.propensity_train = cfg.train;

  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex err_mu;

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t idx = 0; idx < static_cast<std::ptrdiff_t>(n_cells); ++idx) {
    if (failed.load(std::memory_order_relaxed)) continue;
    const MethodId m = methods[static_cast<std::size_t>(idx) / static_cast<std::size_t>(cfg.k)];
    const int si = static_cast<int>(static_cast<std::size_t>(idx) %
                                    static_cast<std::size_t>(cfg.k));
    try {
      auto ds = run_method(m, indet_slices[static_cast<std::size_t>(si)],
                           det_slices[static_cast<std::size_t>(si)], enc.train_all, enc.features,
                           si, opts, prop);
      {
        std::ostringstream os;
        write_imputed_jsonl(ds, cfg.seed, os);
        write_text_file(out_dir / "imputed" / (cell_stem(m, si) + ".jsonl"), os.str());
      }
      const auto trained = train(*enc.features, ds.as_training_examples(), cfg.train);
      write_model_json(out_dir / "models" / (cell_stem(m, si) + ".json"), trained.model);
      auto& cell = grid.cells[static_cast<std::size_t>(idx)];
      cell.det = evaluate_set(m, si, Authority::Determinate, trained.model, *enc.features,
                              enc.test_det, cfg.threshold);
      cell.indet = evaluate_set(m, si, Authority::Indeterminate, trained.model, *enc.features,
                                enc.test_indet, cfg.threshold);
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(err_mu);
      if (!failed.exchange(true)) {
        first_error = std::string(method_name(m)) + " set " + std::to_string(si) + ": " + e.what();
      }
    }
  }
  if (failed.load()) throw DataError(first_error);

  for (Authority test_set : {Authority::Determinate, Authority::Indeterminate}) {
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      std::vector<SetEvaluation> per_set;
      per_set.reserve(static_cast<std::size_t>(cfg.k));
      for (int si = 0; si < cfg.k; ++si) {
        const auto& cell =
            grid.cells[mi * static_cast<std::size_t>(cfg.k) + static_cast<std::size_t>(si)];
        per_set.push_back(test_set == Authority::Determinate ? cell.det : cell.indet);
      }
      grid.reports.push_back(aggregate(per_set));
    }
  }
  if (log) {
    *log << "trained " << n_cells << " models (" << methods.size() << " methods x " << cfg.k
         << " sets)\n";
  }
  return grid;
}

}  // namespace

void write_model_json(const fs::path& path, const LinearModel& model) {
  json j;
  j["dimension"] = model.weights.size();
  j["weights"] = model.weights;
  j["bias"] = model.bias;
  j["config_hash"] = model.config_hash;
  write_text_file(path, j.dump() + "\n");
}

LinearModel load_model_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file '" + path.string() + "'");
  json j;
  try {
    in >> j;
    LinearModel model;
    model.weights = j.at("weights").get<std::vector<double>>();
    model.bias = j.at("bias").get<double>();
    model.config_hash = j.at("config_hash").get<std::string>();
    if (j.at("dimension").get<std::size_t>() != model.weights.size()) {
      throw DataError("model file '" + path.string() + "': dimension mismatch");
    }
    return model;
  } catch (const json::exception& e) {
    throw DataError("model file '" + path.string() + "': " + e.what());
  }
}

RunResult run_experiment(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  const fs::path out_dir(cfg.output_dir);
  fs::create_directories(out_dir / "manifests");
  fs::create_directories(out_dir / "imputed");
  fs::create_directories(out_dir / "models");

  auto records = stage("parse", [&] { return parse_corpus(cfg.corpus_path); });
  if (log) {
    std::size_t det = 0;
    for (const auto& r : records) det += r.authority == Authority::Determinate;
    *log << "parsed " << records.size() << " records (" << det << " determinate, "
         << records.size() - det << " indeterminate)\n";
  }

  auto enc = stage("encode", [&] { return encode_experiment(std::move(records), cfg); });
  if (log) {
    *log << "split at year " << cfg.cutoff_year << ": train " << enc.train_count << " (det "
         << enc.train_det.size() << ", indet " << enc.train_indet.size() << "), test "
         << enc.records.size() - enc.train_count << " (det " << enc.test_det.size() << ", indet "
         << enc.test_indet.size() << ")\n";
  }

  const auto det_sets = stage("balance", [&] {
    return balanced_resample(enc.train_det, cfg.k, derive_seed(cfg.seed, "balance-determinate"));
  });
  const auto indet_sets = stage("balance", [&] {
    return balanced_resample(enc.train_indet, cfg.k,
                             derive_seed(cfg.seed, "balance-indeterminate"));
  });
  if (log) {
    *log << "balanced sets: determinate " << det_sets.front().case_ids.size()
         << " cases/set, indeterminate " << indet_sets.front().case_ids.size() << " cases/set\n";
  }

  stage("manifests", [&] {
    json split;
    split["cutoff_year"] = cfg.cutoff_year;
    json train_ids = json::array(), test_ids = json::array();
    for (std::size_t i = 0; i < enc.records.size(); ++i) {
      (i < enc.train_count ? train_ids : test_ids).push_back(enc.records[i].id);
    }
    split["train"] = std::move(train_ids);
    split["test"] = std::move(test_ids);
    split["counts"] = {{"train_determinate", enc.train_det.size()},
                       {"train_indeterminate", enc.train_indet.size()},
                       {"test_determinate", enc.test_det.size()},
                       {"test_indeterminate", enc.test_indet.size()}};
    write_text_file(out_dir / "manifests" / "split.json", split.dump(2) + "\n");
    write_text_file(out_dir / "manifests" / "balanced_determinate.json",
                    balanced_sets_json(det_sets).dump(2) + "\n");
    write_text_file(out_dir / "manifests" / "balanced_indeterminate.json",
                    balanced_sets_json(indet_sets).dump(2) + "\n");
    return 0;
  });

  std::vector<std::vector<EncodedCase>> det_slices, indet_slices;
  for (const auto& s : det_sets) det_slices.push_back(resolve_case_ids(enc, s.case_ids));
  for (const auto& s : indet_sets) indet_slices.push_back(resolve_case_ids(enc, s.case_ids));

  const auto methods = canonical_methods(cfg.methods);
  PropensityModel prop;
  const bool needs_propensity =
      std::find(methods.begin(), methods.end(), MethodId::ObsIp) != methods.end();
  if (needs_propensity) {
    prop = stage("propensity",
                 [&] { return fit_propensity(enc.train_all, enc.features, cfg.train, cfg.clip_min); });
    if (log) {
      *log << "propensity calibration: mean p(det)=" << format_double(prop.mean_p_determinate)
           << " on determinate, " << format_double(prop.mean_p_indeterminate)
           << " on indeterminate\n";
    }
  }

  auto grid = stage("grid", [&] {
    return run_grid(enc, cfg, methods, det_slices, indet_slices,
                    needs_propensity ? &prop : nullptr, out_dir, log);
  });

  RunResult result;
  result.reports = std::move(grid.reports);
  result.models_trained = static_cast<int>(methods.size()) * cfg.k;
  result.results_csv = out_dir / "results.csv";
  result.predictions_csv = out_dir / "predictions.csv";
  result.manifest = out_dir / "run_manifest.json";

  stage("report", [&] {
    write_results_csv(result.results_csv, result.reports, cfg.k);
    write_predictions_csv(result.predictions_csv, methods, cfg.k, grid.cells);
    return 0;
  });

  stage("manifest", [&] {
    json manifest;
    manifest["config"] = config_to_json(cfg);
    manifest["corpus_hash"] = hash_file(cfg.corpus_path);
    manifest["counts"] = {{"records", enc.records.size()},
                          {"train_determinate", enc.train_det.size()},
                          {"train_indeterminate", enc.train_indet.size()},
                          {"test_determinate", enc.test_det.size()},
                          {"test_indeterminate", enc.test_indet.size()}};
    manifest["grid"] = {{"methods", methods_label(methods)},
                        {"k", cfg.k},
                        {"models", result.models_trained}};
    std::map<std::string, std::string> files;
    files["results.csv"] = hash_file(result.results_csv);
    files["predictions.csv"] = hash_file(result.predictions_csv);
    for (const char* name : {"split.json", "balanced_determinate.json",
                             "balanced_indeterminate.json"}) {
      files[std::string("manifests/") + name] = hash_file(out_dir / "manifests" / name);
    }
    for (MethodId m : methods) {
      for (int si = 0; si < cfg.k; ++si) {
        const std::string stem = cell_stem(m, si);
        files["imputed/" + stem + ".jsonl"] = hash_file(out_dir / "imputed" / (stem + ".jsonl"));
        files["models/" + stem + ".json"] = hash_file(out_dir / "models" / (stem + ".json"));
      }
    }
    manifest["files"] = files;
    write_text_file(result.manifest, manifest.dump(2) + "\n");
    return 0;
  });

  return result;
}

RunResult evaluate_run(const fs::path& run_dir, std::ostream* log) {
  json manifest;
  {
    std::ifstream in(run_dir / "run_manifest.json");
    if (!in) {
      throw DataError("no run_manifest.json under '" + run_dir.string() + "'; incomplete run");
    }
    try {
      in >> manifest;
    } catch (const json::exception& e) {
      throw DataError(std::string("run_manifest.json: ") + e.what());
    }
  }
  ExperimentConfig cfg = config_from_json(manifest.at("config"));

  stage("verify", [&] {
    const std::string actual = hash_file(cfg.corpus_path);
    const std::string expected = manifest.at("corpus_hash").get<std::string>();
    if (actual != expected) {
      throw DataError("corpus '" + cfg.corpus_path + "' does not match the recorded run (" +
                      actual + " != " + expected + ")");
    }
    return 0;
  });

  auto records = stage("parse", [&] { return parse_corpus(cfg.corpus_path); });
  auto enc = stage("encode", [&] { return encode_experiment(std::move(records), cfg); });

  const auto methods = canonical_methods(cfg.methods);
  std::vector<CellEvaluations> cells(methods.size() * static_cast<std::size_t>(cfg.k));
  stage("evaluate", [&] {
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      for (int si = 0; si < cfg.k; ++si) {
        const auto model =
            load_model_json(run_dir / "models" / (cell_stem(methods[mi], si) + ".json"));
        auto& cell = cells[mi * static_cast<std::size_t>(cfg.k) + static_cast<std::size_t>(si)];
        cell.det = evaluate_set(methods[mi], si, Authority::Determinate, model, *enc.features,
                                enc.test_det, cfg.threshold);
        cell.indet = evaluate_set(methods[mi], si, Authority::Indeterminate, model, *enc.features,
                                  enc.test_indet, cfg.threshold);
      }
    }
    return 0;
  });

  RunResult result;
  for (Authority test_set : {Authority::Determinate, Authority::Indeterminate}) {
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      std::vector<SetEvaluation> per_set;
      for (int si = 0; si < cfg.k; ++si) {
        const auto& cell =
            cells[mi * static_cast<std::size_t>(cfg.k) + static_cast<std::size_t>(si)];
        per_set.push_back(test_set == Authority::Determinate ? cell.det : cell.indet);
      }
      result.reports.push_back(aggregate(per_set));
    }
  }
  result.models_trained = static_cast<int>(methods.size()) * cfg.k;
  result.results_csv = run_dir / "results.csv";
  result.predictions_csv = run_dir / "predictions.csv";
  result.manifest = run_dir / "run_manifest.json";
  stage("report", [&] {
    write_results_csv(result.results_csv, result.reports, cfg.k);
    write_predictions_csv(result.predictions_csv, methods, cfg.k, cells);
    return 0;
  });
  if (log) *log << "re-evaluated " << result.models_trained << " saved models\n";
  return result;
}

CompareTable compare_run(const fs::path& run_dir, std::span<const std::string> case_ids) {
  std::ifstream in(run_dir / "predictions.csv");
  if (!in) {
    throw DataError("no predictions.csv under '" + run_dir.string() + "'; incomplete run");
  }
  std::string line;
  if (!std::getline(in, line)) throw DataError("predictions.csv is empty");

  struct Acc {
    double sum = 0.0;
    std::size_t count = 0;
  };
  std::vector<std::string> methods;
  std::map<std::string, std::map<std::string, Acc>> by_method;  // method -> case -> acc
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    // method,set_index,case_id,prediction,label,authority — the id sits
    // between the second comma from the left and the third from the right.
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    const auto c6 = line.rfind(',');
    const auto c5 = line.rfind(',', c6 - 1);
    const auto c4 = line.rfind(',', c5 - 1);
    if (c1 == std::string::npos || c2 == std::string::npos || c4 == std::string::npos ||
        c4 <= c2) {
      throw DataError("predictions.csv line " + std::to_string(lineno) + ": malformed row");
    }
    const std::string method = line.substr(0, c1);
    const std::string case_id = line.substr(c2 + 1, c4 - c2 - 1);
    const std::string pred_str = line.substr(c4 + 1, c5 - c4 - 1);
    double pred = 0.0;
    const auto res = std::from_chars(pred_str.data(), pred_str.data() + pred_str.size(), pred);
    if (res.ec != std::errc()) {
      throw DataError("predictions.csv line " + std::to_string(lineno) + ": bad prediction");
    }
    if (by_method.find(method) == by_method.end()) methods.push_back(method);
    auto& acc = by_method[method][case_id];
    acc.sum += pred;
    ++acc.count;
  }
  if (by_method.empty()) throw DataError("predictions.csv holds no prediction rows");

  // Keep canonical method order for the columns.
  std::vector<std::string> ordered;
  for (MethodId m : kAllMethods) {
    const std::string name(method_name(m));
    if (by_method.count(name)) ordered.push_back(name);
  }

  CompareTable table;
  table.methods = ordered;
  const std::size_t available = by_method.begin()->second.size();
  for (const auto& id : case_ids) {
    CaseComparison row;
    row.case_id = id;
    for (const auto& name : ordered) {
      const auto& cases = by_method.at(name);
      const auto it = cases.find(id);
      if (it == cases.end()) {
        throw DataError("unknown case id '" + id + "' (" + std::to_string(available) +
                        " case ids available)");
      }
      row.mean_by_method.push_back(it->second.sum / static_cast<double>(it->second.count));
    }
    const auto [lo, hi] =
        std::minmax_element(row.mean_by_method.begin(), row.mean_by_method.end());
    row.spread = *hi - *lo;
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace lindet
