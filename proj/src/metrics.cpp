#include "ragcode/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "ragcode/corpus.hpp"

namespace ragcode::metrics {

namespace {

constexpr std::size_t kMaxOrder = 4;

using NgramCounts = std::unordered_map<std::string, std::size_t>;

NgramCounts count_ngrams(const std::vector<std::string>& toks, std::size_t n) {
  NgramCounts counts;
  if (toks.size() < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    std::string key = toks[i];
    for (std::size_t j = 1; j < n; ++j) {
      key.push_back('\x1f');
      key += toks[i + j];
    }
    ++counts[key];
  }
  return counts;
}

void check_lengths(std::size_t h, std::size_t r) {
  if (h != r)
    throw Error("hypothesis/reference count mismatch: " + std::to_string(h) + " vs " + std::to_string(r));
}

double unit_weight(std::string_view) { return 1.0; }
double keyword_weight(std::string_view tok) { return minilang::is_keyword(tok) ? kKeywordWeight : 1.0; }

// Corpus BLEU in [0, 1]. `weight` scales unigram counts.
template <typename Weight>
double corpus_bleu_unit(std::span<const std::string> hyps, std::span<const std::string> refs, Weight weight) {
  check_lengths(hyps.size(), refs.size());
  std::array<double, kMaxOrder> matched{};
  std::array<double, kMaxOrder> total{};
  double hyp_len = 0.0;
  double ref_len = 0.0;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    const auto h = whitespace_tokens(hyps[s]);
    const auto r = whitespace_tokens(refs[s]);
    hyp_len += static_cast<double>(h.size());
    ref_len += static_cast<double>(r.size());
    for (std::size_t n = 1; n <= kMaxOrder; ++n) {
      const NgramCounts hc = count_ngrams(h, n);
      const NgramCounts rc = count_ngrams(r, n);
      for (const auto& [gram, c] : hc) {
        const double w = n == 1 ? weight(gram) : 1.0;
        auto it = rc.find(gram);
        const std::size_t clip = it == rc.end() ? 0 : std::min(c, it->second);
        matched[n - 1] += w * static_cast<double>(clip);
        total[n - 1] += w * static_cast<double>(c);
      }
    }
  }
  if (hyp_len == 0.0) return 0.0;
  double log_sum = 0.0;
  std::size_t orders = 0;
  for (std::size_t n = 0; n < kMaxOrder; ++n) {
    if (total[n] == 0.0) continue;  // no hypothesis has n-grams of this order
    if (matched[n] == 0.0) return 0.0;
    log_sum += std::log(matched[n] / total[n]);
    ++orders;
  }
  const double bp = hyp_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / hyp_len);
  return bp * std::exp(log_sum / static_cast<double>(orders));
}

}  // namespace

std::vector<std::string> whitespace_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const auto space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (i < s.size()) {
    while (i < s.size() && space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !space(s[j])) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

double corpus_bleu(std::span<const std::string> hyps, std::span<const std::string> refs) {
  return 100.0 * corpus_bleu_unit(hyps, refs, unit_weight);
}

double weighted_ngram_match(std::span<const std::string> hyps, std::span<const std::string> refs) {
  return corpus_bleu_unit(hyps, refs, keyword_weight);
}

double smoothed_bleu4(std::string_view hyp, std::string_view ref) {
  const auto h = whitespace_tokens(hyp);
  const auto r = whitespace_tokens(ref);
  if (h.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= kMaxOrder; ++n) {
    const NgramCounts hc = count_ngrams(h, n);
    const NgramCounts rc = count_ngrams(r, n);
    double matched = 0.0;
    double total = 0.0;
    for (const auto& [gram, c] : hc) {
      auto it = rc.find(gram);
      matched += static_cast<double>(it == rc.end() ? 0 : std::min(c, it->second));
      total += static_cast<double>(c);
    }
    if (n >= 2) {
      matched += 1.0;
      total += 1.0;
    }
    if (matched == 0.0) return 0.0;
    log_sum += std::log(matched / total);
  }
  const double c = static_cast<double>(h.size());
  const double rl = static_cast<double>(r.size());
  const double bp = c >= rl ? 1.0 : std::exp(1.0 - rl / c);
  return 100.0 * bp * std::exp(log_sum / static_cast<double>(kMaxOrder));
}

double smoothed_bleu4(std::span<const std::string> hyps, std::span<const std::string> refs) {
  check_lengths(hyps.size(), refs.size());
  if (hyps.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < hyps.size(); ++i) total += smoothed_bleu4(hyps[i], refs[i]);
  return total / static_cast<double>(hyps.size());
}

double exact_match(std::span<const std::string> hyps, std::span<const std::string> refs) {
  check_lengths(hyps.size(), refs.size());
  if (hyps.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i)
    if (corpus::normalize(hyps[i]) == corpus::normalize(refs[i])) ++hits;
  return static_cast<double>(hits) / static_cast<double>(hyps.size());
}

namespace {

void collect_shapes(const minilang::AstNode& node, std::unordered_map<std::string, std::size_t>& out) {
  if (node.children.empty()) return;
  ++out[minilang::serialize_shape(node)];
  for (const auto& c : node.children) collect_shapes(c, out);
}

}  // namespace

double ast_match(const minilang::MiniAst& hyp, const minilang::MiniAst& ref) {
  if (!hyp.parseable || !ref.parseable) return 0.0;
  std::unordered_map<std::string, std::size_t> ref_shapes;
  std::unordered_map<std::string, std::size_t> hyp_shapes;
  collect_shapes(ref.root, ref_shapes);
  collect_shapes(hyp.root, hyp_shapes);
  std::size_t total = 0;
  std::size_t matched = 0;
  for (const auto& [shape, c] : ref_shapes) {
    total += c;
    auto it = hyp_shapes.find(shape);
    if (it != hyp_shapes.end()) matched += std::min(c, it->second);
  }
  if (total == 0) return 1.0;
  return static_cast<double>(matched) / static_cast<double>(total);
}

double dataflow_match(std::string_view hyp, std::string_view ref) {
  const auto h = minilang::parse_minilang(hyp);
  const auto r = minilang::parse_minilang(ref);
  if (!h.parseable || !r.parseable) return 0.0;
  const auto ref_edges = minilang::dataflow_edges(r);
  if (ref_edges.empty()) return 1.0;
  auto hyp_edges = minilang::dataflow_edges(h);
  std::map<minilang::DefUseEdge, std::size_t> pool;
  for (const auto& e : hyp_edges) ++pool[e];
  std::size_t matched = 0;
  for (const auto& e : ref_edges) {
    auto it = pool.find(e);
    if (it != pool.end() && it->second > 0) {
      --it->second;
      ++matched;
    }
  }
  return static_cast<double>(matched) / static_cast<double>(ref_edges.size());
}

CodeBleu codebleu(std::span<const std::string> hyps, std::span<const std::string> refs) {
  check_lengths(hyps.size(), refs.size());
  CodeBleu out;
  if (hyps.empty()) return out;
  out.ngram = corpus_bleu(hyps, refs) / 100.0;
  out.weighted_ngram = weighted_ngram_match(hyps, refs);
  double ast = 0.0;
  double flow = 0.0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    ast += ast_match(minilang::parse_minilang(hyps[i]), minilang::parse_minilang(refs[i]));
    flow += dataflow_match(hyps[i], refs[i]);
  }
  out.ast = ast / static_cast<double>(hyps.size());
  out.dataflow = flow / static_cast<double>(hyps.size());
  out.score = 0.25 * (out.ngram + out.weighted_ngram + out.ast + out.dataflow);
  return out;
}

std::map<std::size_t, double> recall_at_k(std::span<const std::vector<std::string>> rankings,
                                          std::span<const std::string> gold, std::span<const std::size_t> ks) {
  check_lengths(rankings.size(), gold.size());
  std::map<std::size_t, double> out;
  for (std::size_t k : ks) {
    std::size_t hits = 0;
    for (std::size_t q = 0; q < rankings.size(); ++q) {
      const auto& r = rankings[q];
      const auto end = r.begin() + static_cast<std::ptrdiff_t>(std::min(k, r.size()));
      if (std::find(r.begin(), end, gold[q]) != end) ++hits;
    }
    out[k] = rankings.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(rankings.size());
  }
  return out;
}

double mrr(std::span<const std::vector<std::string>> rankings, std::span<const std::string> gold) {
  check_lengths(rankings.size(), gold.size());
  if (rankings.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    const auto& r = rankings[q];
    auto it = std::find(r.begin(), r.end(), gold[q]);
    if (it != r.end()) total += 1.0 / static_cast<double>(it - r.begin() + 1);
  }
  return total / static_cast<double>(rankings.size());
}

MetricReport evaluate_generation(std::span<const std::string> hyps, std::span<const std::string> refs,
                                 bool with_codebleu) {
  MetricReport r;
  r.count = hyps.size();
  r.bleu = corpus_bleu(hyps, refs);
  r.smoothed_bleu4 = smoothed_bleu4(hyps, refs);
  r.exact_match = exact_match(hyps, refs);
  if (with_codebleu) {
    r.codebleu = codebleu(hyps, refs);
    r.has_codebleu = true;
  }
  return r;
}

nlohmann::ordered_json to_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["count"] = report.count;
  j["bleu"] = report.bleu;
  j["smoothed_bleu4"] = report.smoothed_bleu4;
  j["exact_match"] = report.exact_match;
  if (report.has_codebleu) {
    j["codebleu"] = {{"score", report.codebleu.score},
                     {"ngram", report.codebleu.ngram},
                     {"weighted_ngram", report.codebleu.weighted_ngram},
                     {"ast", report.codebleu.ast},
                     {"dataflow", report.codebleu.dataflow}};
  }
  if (report.has_retrieval) {
    nlohmann::ordered_json rec = nlohmann::ordered_json::object();
    for (const auto& [k, v] : report.recall_at_k) rec[std::to_string(k)] = v;
    j["recall_at_k"] = rec;
    j["mrr"] = report.mrr;
  }
  return j;
}

}  // namespace ragcode::metrics
