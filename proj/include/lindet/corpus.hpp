#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lindet {

enum class Authority { Determinate, Indeterminate };

std::string_view authority_name(Authority a);
std::optional<Authority> parse_authority(std::string_view s);

// One court case. votes is empty when per-judge votes are not known.
struct CaseRecord {
  std::string id;
  std::string text;
  int year = 0;
  Authority authority = Authority::Indeterminate;
  int outcome = 0;  // 0 = non-violation, 1 = violation
  std::vector<int> votes;

  bool has_votes() const { return !votes.empty(); }
};

// Majority outcome of a vote vector; -1 on a tie.
int vote_majority(std::span<const int> votes);

using FeatureVector = std::vector<double>;

// Dense row-major feature storage, one row per case.
class FeatureMatrix {
 public:
  FeatureMatrix(std::size_t dimension, std::size_t rows)
      : dim_(dimension), data_(dimension * rows, 0.0) {}

  std::size_t dimension() const { return dim_; }
  std::size_t rows() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * dim_, dim_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * dim_, dim_}; }

 private:
  std::size_t dim_;
  std::vector<double> data_;
};

// A case record bound to its row in a FeatureMatrix.
struct EncodedCase {
  const CaseRecord* record = nullptr;
  std::uint32_t feature_row = 0;
};
using CaseSlice = std::span<const EncodedCase>;

struct SplitCorpus {
  std::vector<CaseRecord> train;
  std::vector<CaseRecord> test;
  int cutoff_year = 0;
};

struct BalancedSet {
  std::vector<std::string> case_ids;
  int set_index = 0;
};

// Document frequencies of the hashed vocabulary, built from a training split.
struct DocFrequency {
  std::size_t dimension = 0;
  std::size_t doc_count = 0;
  std::vector<std::uint32_t> bucket_docs;

  double idf(std::size_t bucket) const;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::size_t token_bucket(std::string_view token, std::size_t dimension);

// Reads a JSON Lines corpus; throws DataError naming the offending line or id.
std::vector<CaseRecord> parse_corpus(const std::string& path);

// Lowercased alphanumeric runs; paragraph-numbering prefixes ("12. ...") at
// line starts are dropped as structural noise.
std::vector<std::string> tokenize(std::string_view text);

// Keeps the first floor(limit*head_fraction) tokens and fills the rest of the
// budget from the tail. Inputs within the limit pass through unchanged.
std::vector<std::string> head_tail_truncate(std::vector<std::string> tokens, std::size_t limit,
                                            double head_fraction);

DocFrequency build_doc_frequency(std::span<const std::vector<std::string>> documents,
                                 std::size_t dimension);

// Hashed TF-IDF, L2-normalized; the all-zero vector stays zero.
FeatureVector vectorize(std::span<const std::string> tokens, const DocFrequency& stats);
void vectorize_into(std::span<const std::string> tokens, const DocFrequency& stats,
                    std::span<double> out);

// Cases with year < cutoff_year train, the rest test.
SplitCorpus temporal_split(std::span<const CaseRecord> corpus, int cutoff_year);

// k sets, each holding every minority-class case plus as many majority-class
// cases, drawn from a shuffled global queue that is refilled only when
// exhausted so cross-set overlap stays minimal.
std::vector<BalancedSet> balanced_resample(CaseSlice pool, int k, std::uint64_t seed);

}  // namespace lindet
