#pragma once
// Okapi BM25 over an inverted index.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ragcode/corpus.hpp"

namespace ragcode::sparse {

struct Posting {
  std::uint32_t doc;
  std::uint32_t tf;
  bool operator==(const Posting&) const = default;
};

struct Hit {
  std::size_t doc;
  double score;
};

class InvertedIndex {
 public:
  static constexpr double kDefaultK1 = 1.2;
  static constexpr double kDefaultB = 0.75;

  InvertedIndex() = default;
  /// Indexes pre-tokenized documents; ordinal = position in `docs`.
  explicit InvertedIndex(std::span<const std::vector<std::string>> docs, double k1 = kDefaultK1,
                         double b = kDefaultB);

  std::size_t num_docs() const { return doc_lengths_.size(); }
  double avg_doc_length() const { return avg_doc_length_; }
  double k1() const { return k1_; }
  double b() const { return b_; }
  std::span<const std::uint32_t> doc_lengths() const { return doc_lengths_; }
  /// Empty span for unknown terms.
  std::span<const Posting> postings(std::string_view term) const;
  std::size_t doc_frequency(std::string_view term) const { return postings(term).size(); }
  std::size_t num_terms() const { return postings_.size(); }

  /// ln(1 + (N - df + 0.5) / (df + 0.5))
  double idf(std::string_view term) const;

  /// Sum over query tokens (duplicates count again). Throws Error when
  /// `doc` is out of range.
  double score(std::span<const std::string> query, std::size_t doc) const;

  /// Positive-score documents, best first, ties by ascending ordinal.
  std::vector<Hit> topk(std::span<const std::string> query, std::size_t k) const;

  void save(const std::filesystem::path& path) const;
  static InvertedIndex load(const std::filesystem::path& path);

  bool operator==(const InvertedIndex&) const = default;

 private:
  double term_weight(std::uint32_t tf, std::uint32_t dl, double idf) const;

  std::map<std::string, std::vector<Posting>, std::less<>> postings_;
  std::vector<std::uint32_t> doc_lengths_;
  double avg_doc_length_ = 0.0;
  double k1_ = kDefaultK1;
  double b_ = kDefaultB;
};

/// Tokenizes with the code tokenizer for code databases and the NL tokenizer
/// for summary databases.
InvertedIndex build_index(const corpus::RetrievalDatabase& db);

/// Tokenizes `query` with the tokenizer matching `query_kind`.
std::vector<Hit> sparse_topk(const InvertedIndex& index, std::string_view query, corpus::DocKind query_kind,
                             std::size_t k);

/// Highest-scoring document whose normalized text differs from the target's,
/// or nothing when every positive-score document is the target.
std::optional<std::size_t> mine_hard_negative(const InvertedIndex& index, const corpus::RetrievalDatabase& db,
                                              std::span<const std::string> query_tokens, std::string_view target,
                                              std::size_t depth = 16);

}  // namespace ragcode::sparse
