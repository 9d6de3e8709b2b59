#pragma once
// Brute-force reference implementations used to cross-check the library.
// They share nothing with the library except the MiniLang parser.

#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ragcode/dense.hpp"
#include "ragcode/generate.hpp"
#include "ragcode/minilang.hpp"

namespace oracle {

std::vector<std::string> split(const std::string& s);

double corpus_bleu(const std::vector<std::string>& hyps, const std::vector<std::string>& refs);
double weighted_bleu(const std::vector<std::string>& hyps, const std::vector<std::string>& refs);
double sentence_bleu_smoothed(const std::string& hyp, const std::string& ref);
double mean_smoothed_bleu(const std::vector<std::string>& hyps, const std::vector<std::string>& refs);
double exact_match(const std::vector<std::string>& hyps, const std::vector<std::string>& refs);
double ast_match(const std::string& hyp, const std::string& ref);
double dataflow_match(const std::string& hyp, const std::string& ref);

struct CodeBleuParts {
  double ngram, weighted, ast, dataflow, score;
};
CodeBleuParts codebleu(const std::vector<std::string>& hyps, const std::vector<std::string>& refs);

double recall_at(const std::vector<std::vector<std::string>>& rankings, const std::vector<std::string>& gold,
                 std::size_t k);
double mrr(const std::vector<std::vector<std::string>>& rankings, const std::vector<std::string>& gold);

/// Score every document, keep positive ones, sort by score then ordinal.
std::vector<std::pair<std::size_t, double>> bm25_all(const std::vector<std::vector<std::string>>& docs,
                                                     const std::vector<std::string>& query);
/// Score every row by inner product, sort by score then ordinal.
std::vector<std::pair<std::size_t, double>> mips_all(const std::vector<std::vector<double>>& rows,
                                                     const std::vector<double>& q);

/// Random token soup over a small MiniLang-flavoured alphabet: sometimes a
/// well-formed program, sometimes not.
std::string random_code(std::mt19937_64& rng);
std::string random_sentence(std::mt19937_64& rng, std::size_t max_len);

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Per tensor: probes where either gradient exceeded 1e-8 in magnitude.
  std::vector<std::size_t> nontrivial;
};

/// Central differences (step 1e-5) on `samples` random entries of every
/// tensor, half of them drawn from entries with a non-zero analytic
/// gradient; relative error |a-n| / max(1e-6, |a|+|n|).
GradCheck check_retriever_gradients(const ragcode::dense::Retriever& model,
                                    const std::vector<ragcode::dense::TrainingPair>& pairs, bool hard_negatives,
                                    std::size_t samples, std::mt19937_64& rng);
GradCheck check_seq2seq_gradients(const ragcode::generate::Seq2SeqParams& params,
                                  const ragcode::text::TokenSequence& input,
                                  const ragcode::text::TokenSequence& target, std::size_t samples,
                                  std::mt19937_64& rng);

}  // namespace oracle
