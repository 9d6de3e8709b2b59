#pragma once
// Synthetic MiniLang corpora with known structure.
//
// Every corpus is a code database whose documents pair each function with its
// one-line summary, plus train/test query files where `text` is the summary
// (the generator input for code generation) and `pair_text` the reference
// function.
//
// aligned     one function per query, summary words drawn from the code
// paraphrase  same, but every summary word replaced by a fixed synonym so no
//             token is shared between summary and code
// near_copy   function families whose variants differ only in their name; a
//             query's target is one variant, the others stay in the database.
//             With probability 1 - near_copy_rate the remaining variants also
//             get one constant changed.

#include <cstdint>
#include <string>
#include <vector>

#include "ragcode/corpus.hpp"

namespace ragcode::synthetic {

enum class Flavor { aligned, paraphrase, near_copy };

Flavor parse_flavor(std::string_view s);
std::string_view to_string(Flavor f);

struct SyntheticConfig {
  Flavor flavor = Flavor::near_copy;
  std::size_t train = 200;
  std::size_t test = 60;
  std::size_t variants = 3;        // near_copy: functions per family (one is the query target)
  double near_copy_rate = 0.8;     // near_copy: families whose siblings differ only by name
  double bimodal_fraction = 1.0;   // database documents that keep their summary as pair_text
  std::uint64_t seed = 0;
};

struct SyntheticCorpus {
  corpus::RetrievalDatabase code_db{corpus::DbKind::code_db};
  /// Summaries as documents, paired with their code (for summarization).
  corpus::RetrievalDatabase summary_db{corpus::DbKind::summary_db};
  std::vector<corpus::Document> train;  // kind summary: text = summary, pair_text = target code
  std::vector<corpus::Document> test;
};

SyntheticCorpus make_synthetic(const SyntheticConfig& cfg);

/// Swaps text and pair_text and flips the kind, turning code-generation
/// queries into summarization queries.
std::vector<corpus::Document> as_summarization_queries(const std::vector<corpus::Document>& queries);

}  // namespace ragcode::synthetic
