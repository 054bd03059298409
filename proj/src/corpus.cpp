#include "lindet/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "json.hpp"
#include "lindet/errors.hpp"
#include "lindet/rng.hpp"

namespace lindet {

using nlohmann::json;

std::string_view authority_name(Authority a) {
  return a == Authority::Determinate ? "determinate" : "indeterminate";
}

std::optional<Authority> parse_authority(std::string_view s) {
  if (s == "determinate") return Authority::Determinate;
  if (s == "indeterminate") return Authority::Indeterminate;
  return std::nullopt;
}

int vote_majority(std::span<const int> votes) {
  int ones = 0;
  for (int v : votes) ones += v;
  const int n = static_cast<int>(votes.size());
  if (2 * ones == n) return -1;
  return 2 * ones > n ? 1 : 0;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::size_t token_bucket(std::string_view token, std::size_t dimension) {
  return static_cast<std::size_t>(fnv1a64(token) % dimension);
}

double DocFrequency::idf(std::size_t bucket) const {
  const double df = bucket_docs[bucket];
  return std::log((1.0 + static_cast<double>(doc_count)) / (1.0 + df)) + 1.0;
}

namespace {

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

int require_binary(const json& j, const char* key, std::size_t lineno) {
  const auto& v = j.at(key);
  if (!v.is_number_integer()) {
    throw DataError("line " + std::to_string(lineno) + ": field '" + key +
                    "' must be an integer 0 or 1");
  }
  const int x = v.get<int>();
  if (x != 0 && x != 1) {
    throw DataError("line " + std::to_string(lineno) + ": field '" + key + "' must be 0 or 1");
  }
  return x;
}

CaseRecord parse_record(const json& j, std::size_t lineno) {
  CaseRecord rec;
  try {
    rec.id = j.at("id").get<std::string>();
    rec.text = j.at("text").get<std::string>();
    rec.year = j.at("year").get<int>();
    const auto auth = parse_authority(j.at("authority").get<std::string>());
    if (!auth) {
      throw DataError("line " + std::to_string(lineno) +
                      ": authority must be 'determinate' or 'indeterminate'");
    }
    rec.authority = *auth;
    rec.outcome = require_binary(j, "outcome", lineno);
    if (j.contains("votes")) {
      const auto& votes = j.at("votes");
      if (!votes.is_array() || votes.empty()) {
        throw DataError("line " + std::to_string(lineno) + ": votes must be a non-empty array");
      }
      for (const auto& v : votes) {
        if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1)) {
          throw DataError("line " + std::to_string(lineno) + ": votes entries must be 0 or 1");
        }
        rec.votes.push_back(v.get<int>());
      }
    }
  } catch (const json::exception& e) {
    throw DataError("line " + std::to_string(lineno) + ": " + e.what());
  }
  if (rec.id.empty()) {
    throw DataError("line " + std::to_string(lineno) + ": id must be non-empty");
  }
  if (rec.has_votes()) {
    const int maj = vote_majority(rec.votes);
    if (maj == -1) {
      throw DataError("case '" + rec.id + "': tied votes, no majority outcome to validate");
    }
    if (maj != rec.outcome) {
      throw DataError("case '" + rec.id + "': outcome " + std::to_string(rec.outcome) +
                      " does not match the vote majority " + std::to_string(maj));
    }
  }
  return rec;
}

}  // namespace

std::vector<CaseRecord> parse_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file '" + path + "'");
  std::vector<CaseRecord> records;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || is_blank(line)) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(lineno) + ": malformed JSON: " + e.what());
    }
    CaseRecord rec = parse_record(j, lineno);
    if (!seen.insert(rec.id).second) {
      throw DataError("duplicate case id '" + rec.id + "'");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  const std::size_t n = text.size();
  std::size_t i = 0;
  bool at_line_start = true;
  const auto is_alnum = [](char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
  };
  while (i < n) {
    if (at_line_start) {
      // "12. " style paragraph numbers are structural noise, not content.
      std::size_t j = i;
      while (j < n && (text[j] == ' ' || text[j] == '\t')) ++j;
      std::size_t d = j;
      while (d < n && text[d] >= '0' && text[d] <= '9') ++d;
      if (d > j && d < n && text[d] == '.' &&
          (d + 1 == n || text[d + 1] == ' ' || text[d + 1] == '\t' || text[d + 1] == '\n' ||
           text[d + 1] == '\r')) {
        i = d + 1;
      }
      at_line_start = false;
      continue;
    }
    const char c = text[i];
    if (c == '\n') {
      at_line_start = true;
      ++i;
      continue;
    }
    if (!is_alnum(c)) {
      ++i;
      continue;
    }
    const std::size_t begin = i;
    while (i < n && is_alnum(text[i])) ++i;
    std::string tok(text.substr(begin, i - begin));
    for (char& ch : tok) {
      if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
    }
    out.push_back(std::move(tok));
  }
  return out;
}

std::vector<std::string> head_tail_truncate(std::vector<std::string> tokens, std::size_t limit,
                                            double head_fraction) {
  if (limit < 2) throw ConfigError("head_tail_truncate: limit must be at least 2");
  if (!(head_fraction >= 0.0 && head_fraction <= 1.0)) {
    throw ConfigError("head_tail_truncate: head_fraction must be in [0,1]");
  }
  if (tokens.size() <= limit) return tokens;
  const std::size_t head = static_cast<std::size_t>(
      std::floor(static_cast<double>(limit) * head_fraction));
  const std::size_t tail = limit - head;
  std::vector<std::string> out;
  out.reserve(limit);
  for (std::size_t i = 0; i < head; ++i) out.push_back(std::move(tokens[i]));
  for (std::size_t i = tokens.size() - tail; i < tokens.size(); ++i) {
    out.push_back(std::move(tokens[i]));
  }
  return out;
}

DocFrequency build_doc_frequency(std::span<const std::vector<std::string>> documents,
                                 std::size_t dimension) {
  DocFrequency stats;
  stats.dimension = dimension;
  stats.doc_count = documents.size();
  stats.bucket_docs.assign(dimension, 0);
  std::vector<std::uint8_t> seen(dimension, 0);
  std::vector<std::size_t> touched;
  for (const auto& doc : documents) {
    touched.clear();
    for (const auto& tok : doc) {
      const std::size_t b = token_bucket(tok, dimension);
      if (!seen[b]) {
        seen[b] = 1;
        touched.push_back(b);
      }
    }
    for (std::size_t b : touched) {
      ++stats.bucket_docs[b];
      seen[b] = 0;
    }
  }
  return stats;
}

void vectorize_into(std::span<const std::string> tokens, const DocFrequency& stats,
                    std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (const auto& tok : tokens) {
    out[token_bucket(tok, stats.dimension)] += 1.0;
  }
  double norm_sq = 0.0;
  for (std::size_t b = 0; b < out.size(); ++b) {
    if (out[b] != 0.0) out[b] *= stats.idf(b);
    norm_sq += out[b] * out[b];
  }
  if (norm_sq > 0.0) {
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& v : out) v *= inv;
  }
}

FeatureVector vectorize(std::span<const std::string> tokens, const DocFrequency& stats) {
  FeatureVector v(stats.dimension, 0.0);
  vectorize_into(tokens, stats, v);
  return v;
}

SplitCorpus temporal_split(std::span<const CaseRecord> corpus, int cutoff_year) {
  SplitCorpus split;
  split.cutoff_year = cutoff_year;
  for (const auto& rec : corpus) {
    if (rec.year < cutoff_year) {
      split.train.push_back(rec);
    } else {
      split.test.push_back(rec);
    }
  }
  return split;
}

std::vector<BalancedSet> balanced_resample(CaseSlice pool, int k, std::uint64_t seed) {
  if (k <= 0) throw ConfigError("balanced_resample: k must be positive");
  std::vector<std::string> by_outcome[2];
  for (const auto& c : pool) {
    by_outcome[c.record->outcome == 1 ? 1 : 0].push_back(c.record->id);
  }
  if (by_outcome[0].empty() || by_outcome[1].empty()) {
    throw DataError("balanced_resample: pool contains a single outcome class");
  }
  const bool minority_is_one = by_outcome[1].size() < by_outcome[0].size();
  const auto& minority = by_outcome[minority_is_one ? 1 : 0];
  const auto& majority = by_outcome[minority_is_one ? 0 : 1];
  const std::size_t m = minority.size();

  Rng rng(seed);
  std::vector<std::string> queue = majority;
  rng.shuffle(queue);

  std::vector<BalancedSet> sets;
  sets.reserve(static_cast<std::size_t>(k));
  for (int s = 0; s < k; ++s) {
    BalancedSet bs;
    bs.set_index = s;
    bs.case_ids = minority;
    std::unordered_set<std::string> chosen;
    while (chosen.size() < m) {
      if (queue.empty()) {
        queue = majority;
        rng.shuffle(queue);
      }
      std::string id = std::move(queue.back());
      queue.pop_back();
      // A refilled queue can repeat an id already drawn for this set; skip it.
      if (chosen.insert(id).second) {
        bs.case_ids.push_back(std::move(id));
      }
    }
    sets.push_back(std::move(bs));
  }
  return sets;
}

}  // namespace lindet
