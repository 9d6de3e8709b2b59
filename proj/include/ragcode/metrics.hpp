#pragma once
// Evaluation metrics. Texts are compared as whitespace-separated tokens; the
// pipeline puts hypotheses and references through the task tokenizer first.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ragcode/minilang.hpp"

namespace ragcode::metrics {

std::vector<std::string> whitespace_tokens(std::string_view s);

/// Corpus BLEU-4 in [0, 100]. Orders that no hypothesis in the corpus is
/// long enough for are left out of the geometric mean. Throws Error on a
/// length mismatch; an empty corpus scores 0.
double corpus_bleu(std::span<const std::string> hyps, std::span<const std::string> refs);

/// Sentence BLEU-4 in [0, 100] with add-one smoothing for orders >= 2.
double smoothed_bleu4(std::string_view hyp, std::string_view ref);
/// Mean sentence score over the corpus.
double smoothed_bleu4(std::span<const std::string> hyps, std::span<const std::string> refs);

/// Fraction in [0, 1] of pairs equal after whitespace normalization.
double exact_match(std::span<const std::string> hyps, std::span<const std::string> refs);

/// Clipped fraction of reference subtree shapes found among the hypothesis
/// subtrees. 0 if either side is unparseable; 1 if the reference has no
/// subtrees and the hypothesis parses.
double ast_match(const minilang::MiniAst& hyp, const minilang::MiniAst& ref);

/// Clipped fraction of reference def-use edges present in the hypothesis.
/// Reference without edges: 1 if the hypothesis parses, else 0. Either side
/// unparseable: 0.
double dataflow_match(std::string_view hyp, std::string_view ref);

inline constexpr double kKeywordWeight = 5.0;

/// Corpus BLEU-4 in [0, 1] where unigram counts of MiniLang keywords weigh
/// kKeywordWeight times an ordinary token.
double weighted_ngram_match(std::span<const std::string> hyps, std::span<const std::string> refs);

struct CodeBleu {
  double ngram = 0.0;           // corpus BLEU / 100
  double weighted_ngram = 0.0;  // keyword-weighted corpus BLEU
  double ast = 0.0;             // mean ast_match
  double dataflow = 0.0;        // mean dataflow_match
  double score = 0.0;           // 0.25 * (sum of the four)
};

CodeBleu codebleu(std::span<const std::string> hyps, std::span<const std::string> refs);

/// For each k, the fraction of queries whose gold id is in the first k.
std::map<std::size_t, double> recall_at_k(std::span<const std::vector<std::string>> rankings,
                                          std::span<const std::string> gold, std::span<const std::size_t> ks);

/// Mean of 1/rank of the gold id, 0 when absent.
double mrr(std::span<const std::vector<std::string>> rankings, std::span<const std::string> gold);

struct MetricReport {
  std::size_t count = 0;
  double bleu = 0.0;
  double smoothed_bleu4 = 0.0;
  double exact_match = 0.0;
  CodeBleu codebleu;
  bool has_codebleu = false;
  std::map<std::size_t, double> recall_at_k;
  double mrr = 0.0;
  bool has_retrieval = false;
};

/// BLEU, smoothed BLEU-4, EM and (when `with_codebleu`) CodeBLEU.
MetricReport evaluate_generation(std::span<const std::string> hyps, std::span<const std::string> refs,
                                 bool with_codebleu);

nlohmann::ordered_json to_json(const MetricReport& report);

}  // namespace ragcode::metrics
