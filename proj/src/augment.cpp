#include "ragcode/augment.hpp"

namespace ragcode::augment {

namespace {

corpus::DocKind other(corpus::DocKind k) {
  return k == corpus::DocKind::code ? corpus::DocKind::summary : corpus::DocKind::code;
}

AugmentedInput render_impl(bool with_pairs, std::string_view x, std::span<const RetrievedCandidate> candidates,
                           const text::Vocabulary& vocab, const RenderOptions& opts) {
  const auto specials = text::special_tokens();
  const std::string csep(specials[text::kCsep]);
  const std::string nsep(specials[text::kNsep]);
  AugmentedInput out;
  out.base_text = std::string(x);
  out.candidates.assign(candidates.begin(), candidates.end());
  out.tokens = text::tokenize(x, opts.query_kind);
  if (out.tokens.size() > opts.max_len) {
    // the query alone overflows; nothing else can fit
    out.tokens.resize(opts.max_len);
    out.truncated = true;
  }
  for (const RetrievedCandidate& c : candidates) {
    if (out.truncated) break;
    std::vector<std::string> piece{csep};
    for (auto& t : text::tokenize(c.primary_text, opts.candidate_kind)) piece.push_back(std::move(t));
    if (with_pairs) {
      piece.push_back(nsep);
      if (c.paired_text)
        for (auto& t : text::tokenize(*c.paired_text, other(opts.candidate_kind))) piece.push_back(std::move(t));
    }
    const std::size_t room = opts.max_len - out.tokens.size();
    if (piece.size() > room) {
      piece.resize(room);
      out.truncated = true;
    }
    if (!piece.empty()) ++out.candidates_kept;
    for (auto& t : piece) out.tokens.push_back(std::move(t));
  }
  out.rendered = vocab.encode(out.tokens);
  return out;
}

}  // namespace

Mode parse_mode(std::string_view s) {
  if (s == "none") return Mode::none;
  if (s == "case1") return Mode::case1;
  if (s == "case2") return Mode::case2;
  throw Error("unknown augmentation mode '" + std::string(s) + "' (expected none, case1 or case2)");
}

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::none: return "none";
    case Mode::case1: return "case1";
    case Mode::case2: return "case2";
  }
  return "none";
}

void validate_candidates(std::span<const RetrievedCandidate> candidates) {
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].rank != i + 1)
      throw Error("candidate ranks must run 1..k; found rank " + std::to_string(candidates[i].rank) +
                  " at position " + std::to_string(i + 1));
    if (i > 0 && candidates[i].score > candidates[i - 1].score)
      throw Error("candidate scores increase at rank " + std::to_string(i + 1));
  }
}

AugmentedInput render_case1(std::string_view x, std::span<const RetrievedCandidate> candidates,
                            const text::Vocabulary& vocab, const RenderOptions& opts) {
  return render_impl(false, x, candidates, vocab, opts);
}

AugmentedInput render_case2(std::string_view x, std::span<const RetrievedCandidate> candidates,
                            const text::Vocabulary& vocab, const RenderOptions& opts) {
  return render_impl(true, x, candidates, vocab, opts);
}

AugmentedInput render(Mode mode, std::string_view x, std::span<const RetrievedCandidate> candidates,
                      const text::Vocabulary& vocab, const RenderOptions& opts) {
  switch (mode) {
    case Mode::none: return render_impl(false, x, {}, vocab, opts);
    case Mode::case1: return render_case1(x, candidates, vocab, opts);
    case Mode::case2: return render_case2(x, candidates, vocab, opts);
  }
  return render_impl(false, x, {}, vocab, opts);
}

}  // namespace ragcode::augment
