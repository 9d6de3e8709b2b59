#pragma once
// Rendering of the generator input: the query followed by retrieved
// candidates (case 1) or candidates with their paired counterparts (case 2).

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ragcode/corpus.hpp"
#include "ragcode/text.hpp"

namespace ragcode::augment {

enum class Mode { none, case1, case2 };

Mode parse_mode(std::string_view s);
std::string_view to_string(Mode mode);

struct RetrievedCandidate {
  std::string primary_text;
  std::optional<std::string> paired_text;
  double score = 0.0;
  std::size_t rank = 1;  // 1-based
};

struct RenderOptions {
  corpus::DocKind query_kind = corpus::DocKind::summary;
  corpus::DocKind candidate_kind = corpus::DocKind::code;
  std::size_t max_len = 512;
};

struct AugmentedInput {
  std::string base_text;
  std::vector<RetrievedCandidate> candidates;
  std::vector<std::string> tokens;  // surface tokens, specials included
  text::TokenSequence rendered;
  bool truncated = false;
  /// Candidates whose tokens survived truncation at least partially.
  std::size_t candidates_kept = 0;
};

/// x [CSEP] y1 [CSEP] y2 ... cut from the right to max_len tokens.
AugmentedInput render_case1(std::string_view x, std::span<const RetrievedCandidate> candidates,
                            const text::Vocabulary& vocab, const RenderOptions& opts);

/// x [CSEP] y1 [NSEP] x1 [CSEP] y2 [NSEP] x2 ...; a missing pair renders as
/// nothing after its [NSEP].
AugmentedInput render_case2(std::string_view x, std::span<const RetrievedCandidate> candidates,
                            const text::Vocabulary& vocab, const RenderOptions& opts);

/// Dispatches on mode; Mode::none renders the query alone.
AugmentedInput render(Mode mode, std::string_view x, std::span<const RetrievedCandidate> candidates,
                      const text::Vocabulary& vocab, const RenderOptions& opts);

/// Throws Error unless ranks run 1..k and scores do not increase with rank.
void validate_candidates(std::span<const RetrievedCandidate> candidates);

}  // namespace ragcode::augment
