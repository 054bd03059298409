#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <unordered_set>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "lindet/corpus.hpp"
#include "lindet/errors.hpp"

using namespace lindet;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
  return fs::temp_directory_path() / (std::string("lindet_corpus_") + name);
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

std::string record_line(const std::string& id, int year, Authority auth, int outcome,
                        const std::vector<int>& votes = {}, const std::string& text = "facts") {
  nlohmann::json j;
  j["id"] = id;
  j["text"] = text;
  j["year"] = year;
  j["authority"] = std::string(authority_name(auth));
  j["outcome"] = outcome;
  if (!votes.empty()) j["votes"] = votes;
  return j.dump() + "\n";
}

}  // namespace

TEST_CASE("tokenize lowercases and splits on non-alphanumeric runs") {
  CHECK(tokenize("The applicant alleged") == std::vector<std::string>{"the", "applicant",
                                                                      "alleged"});
  CHECK(tokenize("") == std::vector<std::string>{});
  CHECK(tokenize("a-b_c,d") == std::vector<std::string>{"a", "b", "c", "d"});
}

TEST_CASE("tokenize strips paragraph numbering at line starts") {
  CHECK(tokenize("12. On 3 May") == std::vector<std::string>{"on", "3", "may"});
  CHECK(tokenize("1. First\n23. Second bit") ==
        std::vector<std::string>{"first", "second", "bit"});
  // only at line starts, and not for decimals
  CHECK(tokenize("see para 12. end") == std::vector<std::string>{"see", "para", "12", "end"});
  CHECK(tokenize("12.3 metres") == std::vector<std::string>{"12", "3", "metres"});
  CHECK(tokenize("  7. indented") == std::vector<std::string>{"indented"});
}

TEST_CASE("head_tail_truncate keeps short inputs unchanged") {
  std::vector<std::string> tokens(1303, "tok");
  CHECK(head_tail_truncate(tokens, 4096, 0.5).size() == 1303);
  std::vector<std::string> exact(10, "t");
  CHECK(head_tail_truncate(exact, 10, 0.5).size() == 10);
}

TEST_CASE("head_tail_truncate splits the budget between head and tail") {
  std::vector<std::string> tokens;
  for (int i = 1; i <= 10; ++i) tokens.push_back(std::to_string(i));
  CHECK(head_tail_truncate(tokens, 4, 0.5) == std::vector<std::string>{"1", "2", "9", "10"});
  CHECK(head_tail_truncate(tokens, 4, 0.25) == std::vector<std::string>{"1", "8", "9", "10"});
  CHECK(head_tail_truncate(tokens, 3, 0.0) == std::vector<std::string>{"8", "9", "10"});
  CHECK(head_tail_truncate(tokens, 3, 1.0) == std::vector<std::string>{"1", "2", "3"});
  CHECK_THROWS_AS(head_tail_truncate(tokens, 1, 0.5), ConfigError);
}

TEST_CASE("head_tail_truncate output is a prefix plus a suffix of the input") {
  Rng rng(42);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 1 + rng.next_below(60);
    const std::size_t limit = 2 + rng.next_below(40);
    const double frac = rng.next_double();
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < n; ++i) tokens.push_back(std::to_string(i));
    const auto out = head_tail_truncate(tokens, limit, frac);
    REQUIRE(out.size() == std::min(n, limit));
    if (n <= limit) {
      CHECK(out == tokens);
    } else {
      const std::size_t head = static_cast<std::size_t>(std::floor(limit * frac));
      for (std::size_t i = 0; i < head; ++i) CHECK(out[i] == tokens[i]);
      for (std::size_t i = head; i < out.size(); ++i) {
        CHECK(out[i] == tokens[n - (limit - head) + (i - head)]);
      }
    }
  }
}

TEST_CASE("vectorize maps the empty document to the zero vector") {
  DocFrequency stats;
  stats.dimension = 16;
  stats.doc_count = 2;
  stats.bucket_docs.assign(16, 0);
  const auto v = vectorize(std::vector<std::string>{}, stats);
  for (double x : v) CHECK(x == 0.0);
}

TEST_CASE("vectorize is scale invariant in term frequency") {
  std::vector<std::vector<std::string>> docs = {{"alpha"}, {"beta"}};
  const auto stats = build_doc_frequency(docs, 32);
  const auto once = vectorize(std::vector<std::string>{"alpha"}, stats);
  const auto twice = vectorize(std::vector<std::string>{"alpha", "alpha"}, stats);
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(once[i] == doctest::Approx(twice[i]));
}

TEST_CASE("vectorize gives rarer tokens the larger idf weight") {
  // two documents, one shared and one unique token
  std::vector<std::vector<std::string>> docs = {{"shared", "unique"}, {"shared"}};
  const std::size_t dim = 64;
  const auto stats = build_doc_frequency(docs, dim);
  const std::size_t b_shared = token_bucket("shared", dim);
  const std::size_t b_unique = token_bucket("unique", dim);
  REQUIRE(b_shared != b_unique);

  const double idf_shared = std::log(3.0 / 3.0) + 1.0;
  const double idf_unique = std::log(3.0 / 2.0) + 1.0;
  const double norm = std::sqrt(idf_shared * idf_shared + idf_unique * idf_unique);

  const auto v = vectorize(docs[0], stats);
  CHECK(v[b_shared] == doctest::Approx(idf_shared / norm).epsilon(1e-12));
  CHECK(v[b_unique] == doctest::Approx(idf_unique / norm).epsilon(1e-12));
  CHECK(v[b_unique] > v[b_shared]);
}

TEST_CASE("vectorize produces unit L2 norm for non-empty documents") {
  Rng rng(7);
  std::vector<std::vector<std::string>> docs;
  for (int d = 0; d < 30; ++d) {
    std::vector<std::string> doc;
    const std::size_t len = 1 + rng.next_below(50);
    for (std::size_t i = 0; i < len; ++i) doc.push_back("w" + std::to_string(rng.next_below(40)));
    docs.push_back(std::move(doc));
  }
  const auto stats = build_doc_frequency(docs, 128);
  for (const auto& doc : docs) {
    const auto v = vectorize(doc, stats);
    double norm_sq = 0.0;
    for (double x : v) norm_sq += x * x;
    CHECK(std::fabs(std::sqrt(norm_sq) - 1.0) < 1e-9);
  }
}

TEST_CASE("parse_corpus reads every valid record in file order") {
  const auto path = temp_file("counts.jsonl");
  std::string content;
  for (int i = 0; i < 191; ++i) {
    content += record_line("gc" + std::to_string(i), 2000, Authority::Determinate, i % 2);
  }
  for (int i = 0; i < 5902; ++i) {
    content += record_line("ch" + std::to_string(i), 2000, Authority::Indeterminate, 1,
                           {1, 1, 1, 1, 1, 1, 0});
  }
  write_file(path, content);
  const auto records = parse_corpus(path.string());
  REQUIRE(records.size() == 6093);
  std::size_t det = 0;
  for (const auto& r : records) det += r.authority == Authority::Determinate;
  CHECK(det == 191);
  CHECK(records.front().id == "gc0");
  CHECK(records.back().id == "ch5901");
  fs::remove(path);
}

TEST_CASE("parse_corpus accepts the empty file") {
  const auto path = temp_file("empty.jsonl");
  write_file(path, "");
  CHECK(parse_corpus(path.string()).empty());
  fs::remove(path);
}

TEST_CASE("parse_corpus rejects outcome/vote-majority mismatches by id") {
  const auto path = temp_file("mismatch.jsonl");
  write_file(path, record_line("bad-maj", 2001, Authority::Indeterminate, 1,
                               {0, 0, 0, 0, 1, 0, 0}));
  CHECK_THROWS_WITH_AS(parse_corpus(path.string()),
                       doctest::Contains("bad-maj"), DataError);
  fs::remove(path);
}

TEST_CASE("parse_corpus rejects tied votes") {
  const auto path = temp_file("tie.jsonl");
  write_file(path, record_line("tied", 2001, Authority::Indeterminate, 1, {1, 1, 0, 0}));
  CHECK_THROWS_WITH_AS(parse_corpus(path.string()), doctest::Contains("tied"), DataError);
  fs::remove(path);
}

TEST_CASE("parse_corpus names the line of malformed input") {
  const auto path = temp_file("malformed.jsonl");
  write_file(path, record_line("ok", 2000, Authority::Determinate, 0) + "{not json\n");
  CHECK_THROWS_WITH_AS(parse_corpus(path.string()), doctest::Contains("line 2"), DataError);
  fs::remove(path);
}

TEST_CASE("parse_corpus names duplicate ids") {
  const auto path = temp_file("dup.jsonl");
  write_file(path, record_line("same", 2000, Authority::Determinate, 0) +
                       record_line("same", 2001, Authority::Determinate, 1));
  CHECK_THROWS_WITH_AS(parse_corpus(path.string()), doctest::Contains("same"), DataError);
  fs::remove(path);
}

TEST_CASE("temporal_split reproduces the published split counts") {
  std::vector<CaseRecord> corpus;
  const auto add = [&](const char* prefix, int n, int year, Authority auth) {
    for (int i = 0; i < n; ++i) {
      CaseRecord rec;
      rec.id = std::string(prefix) + std::to_string(corpus.size());
      rec.year = year;
      rec.authority = auth;
      corpus.push_back(std::move(rec));
    }
  };
  add("gc-tr", 157, 2010, Authority::Determinate);
  add("gc-te", 34, 2016, Authority::Determinate);
  add("ch-tr", 5031, 2012, Authority::Indeterminate);
  add("ch-te", 871, 2019, Authority::Indeterminate);

  const auto split = temporal_split(corpus, 2015);
  std::size_t train_det = 0, train_indet = 0, test_det = 0, test_indet = 0;
  for (const auto& r : split.train) {
    (r.authority == Authority::Determinate ? train_det : train_indet) += 1;
  }
  for (const auto& r : split.test) {
    (r.authority == Authority::Determinate ? test_det : test_indet) += 1;
  }
  CHECK(train_det == 157);
  CHECK(test_det == 34);
  CHECK(train_indet == 5031);
  CHECK(test_indet == 871);
}

TEST_CASE("temporal_split sends the cutoff year to the test set") {
  std::vector<CaseRecord> corpus(1);
  corpus[0].id = "x";
  corpus[0].year = 2015;
  const auto split = temporal_split(corpus, 2015);
  CHECK(split.train.empty());
  REQUIRE(split.test.size() == 1);
}

TEST_CASE("temporal_split with all years before the cutoff leaves the test set empty") {
  std::vector<CaseRecord> corpus(3);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    corpus[i].id = "x" + std::to_string(i);
    corpus[i].year = 2000 + static_cast<int>(i);
  }
  const auto split = temporal_split(corpus, 2015);
  CHECK(split.test.empty());
  CHECK(split.train.size() == 3);
}

TEST_CASE("temporal_split partitions arbitrary corpora") {
  Rng rng(99);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<CaseRecord> corpus(1 + rng.next_below(80));
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      corpus[i].id = "r" + std::to_string(i);
      corpus[i].year = 1990 + static_cast<int>(rng.next_below(40));
    }
    const int cutoff = 1990 + static_cast<int>(rng.next_below(40));
    const auto split = temporal_split(corpus, cutoff);
    CHECK(split.train.size() + split.test.size() == corpus.size());
    for (const auto& r : split.train) CHECK(r.year < cutoff);
    for (const auto& r : split.test) CHECK(r.year >= cutoff);
    std::unordered_set<std::string> ids;
    for (const auto& r : split.train) ids.insert(r.id);
    for (const auto& r : split.test) ids.insert(r.id);
    CHECK(ids.size() == corpus.size());
  }
}

namespace {

// pool with the given class sizes; outcome 1 is "violation"
std::vector<CaseRecord> two_class_pool(int violations, int non_violations) {
  std::vector<CaseRecord> pool;
  for (int i = 0; i < violations; ++i) {
    CaseRecord r;
    r.id = "v" + std::to_string(i);
    r.outcome = 1;
    pool.push_back(std::move(r));
  }
  for (int i = 0; i < non_violations; ++i) {
    CaseRecord r;
    r.id = "n" + std::to_string(i);
    r.outcome = 0;
    pool.push_back(std::move(r));
  }
  return pool;
}

std::vector<EncodedCase> as_slice(const std::vector<CaseRecord>& pool) {
  std::vector<EncodedCase> s;
  for (std::size_t i = 0; i < pool.size(); ++i) s.push_back({&pool[i], 0});
  return s;
}

}  // namespace

TEST_CASE("balanced_resample reproduces the 157-case geometry") {
  const auto pool = two_class_pool(99, 58);
  const auto slice = as_slice(pool);
  const auto sets = balanced_resample(slice, 7, 21);
  REQUIRE(sets.size() == 7);
  std::set<std::string> majority_used;
  for (const auto& s : sets) {
    REQUIRE(s.case_ids.size() == 116);
    int ones = 0, zeros = 0;
    std::set<std::string> distinct(s.case_ids.begin(), s.case_ids.end());
    CHECK(distinct.size() == 116);
    for (const auto& id : s.case_ids) {
      if (id[0] == 'v') {
        ++ones;
        majority_used.insert(id);
      } else {
        ++zeros;
      }
    }
    CHECK(ones == 58);
    CHECK(zeros == 58);
    for (int i = 0; i < 58; ++i) CHECK(distinct.count("n" + std::to_string(i)) == 1);
  }
  CHECK(majority_used.size() == 99);  // min(99, 7*58)
}

TEST_CASE("balanced_resample on an already balanced pool returns the whole pool") {
  const auto pool = two_class_pool(5, 5);
  const auto slice = as_slice(pool);
  const auto sets = balanced_resample(slice, 1, 3);
  REQUIRE(sets.size() == 1);
  std::set<std::string> ids(sets[0].case_ids.begin(), sets[0].case_ids.end());
  CHECK(ids.size() == 10);
}

TEST_CASE("balanced_resample covers the majority pool before repeating") {
  // majority 10, minority 4, three sets: 12 draws force one refill
  const auto pool = two_class_pool(10, 4);
  const auto slice = as_slice(pool);
  const auto sets = balanced_resample(slice, 3, 5);
  std::set<std::string> majority_used;
  for (const auto& s : sets) {
    for (const auto& id : s.case_ids) {
      if (id[0] == 'v') majority_used.insert(id);
    }
  }
  CHECK(majority_used.size() == 10);
}

TEST_CASE("balanced_resample rejects single-class pools") {
  const auto pool = two_class_pool(6, 0);
  const auto slice = as_slice(pool);
  CHECK_THROWS_AS(balanced_resample(slice, 2, 0), DataError);
}

TEST_CASE("balanced_resample is deterministic in the seed") {
  const auto pool = two_class_pool(23, 9);
  const auto slice = as_slice(pool);
  const auto a = balanced_resample(slice, 5, 77);
  const auto b = balanced_resample(slice, 5, 77);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].case_ids == b[i].case_ids);
  const auto c = balanced_resample(slice, 5, 78);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) any_diff |= a[i].case_ids != c[i].case_ids;
  CHECK(any_diff);
}

TEST_CASE("balanced_resample invariants hold on random pools") {
  Rng rng(1234);
  for (int rep = 0; rep < 100; ++rep) {
    const int ones = 1 + static_cast<int>(rng.next_below(30));
    const int zeros = 1 + static_cast<int>(rng.next_below(30));
    const int k = 1 + static_cast<int>(rng.next_below(6));
    const auto pool = two_class_pool(ones, zeros);
    const auto slice = as_slice(pool);
    const auto sets = balanced_resample(slice, k, rng.next_u64());

    const std::size_t m = static_cast<std::size_t>(std::min(ones, zeros));
    const std::size_t maj = static_cast<std::size_t>(std::max(ones, zeros));
    const char minority_tag = ones < zeros ? 'v' : 'n';
    std::set<std::string> majority_used;
    for (const auto& s : sets) {
      REQUIRE(s.case_ids.size() == 2 * m);
      std::set<std::string> distinct(s.case_ids.begin(), s.case_ids.end());
      CHECK(distinct.size() == 2 * m);
      std::size_t n_min = 0;
      for (const auto& id : s.case_ids) {
        if (id[0] == minority_tag) {
          ++n_min;
        } else {
          majority_used.insert(id);
        }
      }
      CHECK(n_min == m);
    }
    CHECK(majority_used.size() ==
          std::min(maj, static_cast<std::size_t>(k) * m));
  }
}
