#include <gtest/gtest.h>

#include <random>

#include "ragcode/augment.hpp"

using namespace ragcode;
using namespace ragcode::augment;
using V = std::vector<std::string>;

namespace {

text::Vocabulary letters() { return text::build_vocab(std::vector<V>{{"a", "b", "c", "d", "e"}}, 100); }

RenderOptions nl_opts(std::size_t max_len = 512) {
  RenderOptions o;
  o.query_kind = corpus::DocKind::summary;
  o.candidate_kind = corpus::DocKind::summary;
  o.max_len = max_len;
  return o;
}

std::vector<RetrievedCandidate> cands(const V& texts) {
  std::vector<RetrievedCandidate> out;
  for (std::size_t i = 0; i < texts.size(); ++i) out.push_back({texts[i], std::nullopt, 1.0 - 0.1 * i, i + 1});
  return out;
}

}  // namespace

TEST(RenderCase1, NoCandidatesIsQuery) {
  const auto v = letters();
  const auto r = render_case1("a b", {}, v, nl_opts());
  EXPECT_EQ(r.tokens, (V{"a", "b"}));
  EXPECT_FALSE(r.truncated);
  EXPECT_EQ(r.rendered, v.encode(V{"a", "b"}));
}

TEST(RenderCase1, SeparatorsBetweenCandidates) {
  const auto v = letters();
  const auto r = render_case1("a", cands({"b", "c"}), v, nl_opts());
  EXPECT_EQ(r.tokens, (V{"a", "[CSEP]", "b", "[CSEP]", "c"}));
  EXPECT_EQ(r.rendered.ids[1], text::kCsep);
  EXPECT_EQ(r.candidates_kept, 2u);
}

TEST(RenderCase1, TruncatesFromTheRight) {
  const auto v = letters();
  const auto r = render_case1("a b", cands({"c d e a b"}), v, nl_opts(3));
  EXPECT_EQ(r.rendered.length(), 3u);
  EXPECT_TRUE(r.truncated);
  EXPECT_EQ(r.tokens, (V{"a", "b", "[CSEP]"}));
}

TEST(RenderCase2, PairedAndSingleton) {
  const auto v = letters();
  auto c = cands({"b"});
  c[0].paired_text = "d";
  EXPECT_EQ(render_case2("a", c, v, nl_opts()).tokens, (V{"a", "[CSEP]", "b", "[NSEP]", "d"}));
  EXPECT_EQ(render_case2("a", cands({"b"}), v, nl_opts()).tokens, (V{"a", "[CSEP]", "b", "[NSEP]"}));
  EXPECT_EQ(render_case2("a", {}, v, nl_opts()).tokens, (V{"a"}));
}

TEST(Render, NoneIgnoresCandidates) {
  const auto v = letters();
  EXPECT_EQ(render(Mode::none, "a", cands({"b"}), v, nl_opts()).tokens, V{"a"});
}

TEST(Render, UsesKindTokenizers) {
  const auto v = letters();
  RenderOptions o;  // summary query, code candidates
  auto c = cands({"getA"});
  c[0].paired_text = "Hello.";
  EXPECT_EQ(render_case2("Find it.", c, v, o).tokens, (V{"find", "it", ".", "[CSEP]", "get", "a", "[NSEP]", "hello", "."}));
}

TEST(Render, LengthPropertiesOnRandomInputs) {
  const auto v = letters();
  std::mt19937_64 rng(5);
  const V words{"a", "b", "c", "d", "e"};
  auto sentence = [&](int max) {
    std::string s;
    for (int n = std::uniform_int_distribution<int>(1, max)(rng); n > 0; --n) s += words[rng() % 5] + " ";
    return s;
  };
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = rng() % 5;
    const std::size_t max_len = 1 + rng() % 30;
    std::vector<RetrievedCandidate> cs;
    V primaries;
    for (std::size_t i = 0; i < k; ++i) primaries.push_back(sentence(6));
    cs = cands(primaries);
    const std::string x = sentence(5);
    const auto r1 = render_case1(x, cs, v, nl_opts(max_len));
    EXPECT_LE(r1.rendered.length(), max_len);
    std::size_t full = text::tokenize_nl(x).size();
    for (const auto& c : cs) full += 1 + text::tokenize_nl(c.primary_text).size();
    EXPECT_EQ(r1.truncated, full > max_len);
    if (!r1.truncated) EXPECT_EQ(r1.rendered.length(), full);
    // Case 2 without pairs equals case 1 plus one [NSEP] per candidate.
    const auto r2 = render_case2(x, cs, v, nl_opts(10000));
    const auto r1_full = render_case1(x, cs, v, nl_opts(10000));
    V stripped;
    for (const auto& t : r2.tokens)
      if (t != "[NSEP]") stripped.push_back(t);
    EXPECT_EQ(stripped, r1_full.tokens);
    EXPECT_EQ(r2.tokens.size(), r1_full.tokens.size() + k);
    // Scores do not matter for fixed ranks.
    auto rescored = cs;
    for (auto& c : rescored) c.score = 0.0;
    EXPECT_EQ(render_case1(x, rescored, v, nl_opts(max_len)).tokens, r1.tokens);
  }
}

TEST(ValidateCandidates, RanksAndScores) {
  EXPECT_NO_THROW(validate_candidates(cands({"a", "b"})));
  auto bad = cands({"a", "b"});
  bad[1].rank = 3;
  EXPECT_THROW(validate_candidates(bad), Error);
  auto rising = cands({"a", "b"});
  rising[1].score = 5.0;
  EXPECT_THROW(validate_candidates(rising), Error);
}

TEST(Mode, ParseRoundTrip) {
  for (Mode m : {Mode::none, Mode::case1, Mode::case2}) EXPECT_EQ(parse_mode(to_string(m)), m);
  EXPECT_THROW(parse_mode("case3"), Error);
}
