#include <gtest/gtest.h>

#include <set>

#include "ragcode/minilang.hpp"
#include "ragcode/synthetic.hpp"
#include "ragcode/text.hpp"

using namespace ragcode;
using namespace ragcode::synthetic;

TEST(Synthetic, DeterministicPerSeed) {
  SyntheticConfig cfg;
  cfg.train = 10;
  cfg.test = 5;
  cfg.seed = 3;
  const auto a = make_synthetic(cfg);
  const auto b = make_synthetic(cfg);
  EXPECT_EQ(a.train, b.train);
  ASSERT_EQ(a.code_db.size(), b.code_db.size());
  for (std::size_t i = 0; i < a.code_db.size(); ++i) EXPECT_EQ(a.code_db[i], b.code_db[i]);
  cfg.seed = 4;
  EXPECT_NE(make_synthetic(cfg).train, a.train);
}

TEST(Synthetic, NearCopyShape) {
  SyntheticConfig cfg;
  cfg.train = 12;
  cfg.test = 6;
  cfg.variants = 3;
  cfg.near_copy_rate = 1.0;
  const auto c = make_synthetic(cfg);
  EXPECT_EQ(c.train.size(), 12u);
  EXPECT_EQ(c.test.size(), 6u);
  EXPECT_EQ(c.code_db.size(), 18u * 3);
  EXPECT_EQ(c.summary_db.size(), c.code_db.size());
  for (const auto& q : c.test) {
    ASSERT_TRUE(q.pair_text);
    EXPECT_EQ(q.kind, corpus::DocKind::summary);
    EXPECT_EQ(c.code_db.find_text(*q.pair_text).size(), 1u);
  }
  // With rate 1 a sibling differs from the target only in the function name.
  const auto& target = c.code_db[0].text;
  const auto& sibling = c.code_db[1].text;
  const auto tt = text::tokenize_code(target), st = text::tokenize_code(sibling);
  ASSERT_EQ(tt.size(), st.size());
  std::size_t diff = 0;
  for (std::size_t i = 0; i < tt.size(); ++i) diff += tt[i] != st[i];
  EXPECT_EQ(diff, 1u);
}

TEST(Synthetic, CodeParsesAndSurvivesTokenizeJoin) {
  for (Flavor f : {Flavor::aligned, Flavor::paraphrase, Flavor::near_copy}) {
    SyntheticConfig cfg;
    cfg.flavor = f;
    cfg.train = 30;
    cfg.test = 10;
    cfg.near_copy_rate = 0.5;
    const auto c = make_synthetic(cfg);
    for (const auto& d : c.code_db.documents()) {
      EXPECT_TRUE(minilang::parse_minilang(d.text).parseable) << d.text;
      EXPECT_EQ(text::join(text::tokenize_code(d.text)), d.text);
      ASSERT_TRUE(d.pair_text);
      EXPECT_EQ(text::join(text::tokenize_nl(*d.pair_text)), *d.pair_text);
    }
  }
}

TEST(Synthetic, ParaphraseSharesNoSummaryWordWithCode) {
  SyntheticConfig cfg;
  cfg.flavor = Flavor::paraphrase;
  cfg.train = 20;
  cfg.test = 5;
  const auto c = make_synthetic(cfg);
  const std::set<std::string> glue{"compute", "from", "and", "via"};
  for (const auto& q : c.train) {
    const auto code = text::tokenize_code(*q.pair_text);
    const std::set<std::string> code_set(code.begin(), code.end());
    for (const auto& w : text::tokenize_nl(q.text))
      if (!glue.contains(w)) EXPECT_FALSE(code_set.contains(w)) << w;
  }
}

TEST(Synthetic, BimodalFraction) {
  SyntheticConfig cfg;
  cfg.flavor = Flavor::aligned;
  cfg.train = 40;
  cfg.test = 0;
  cfg.bimodal_fraction = 0.0;
  for (const auto& d : make_synthetic(cfg).code_db.documents()) EXPECT_FALSE(d.pair_text);
}

TEST(Synthetic, SummarizationQueries) {
  SyntheticConfig cfg;
  cfg.train = 3;
  cfg.test = 1;
  const auto c = make_synthetic(cfg);
  const auto s = as_summarization_queries(c.train);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0].kind, corpus::DocKind::code);
  EXPECT_EQ(s[0].text, *c.train[0].pair_text);
  EXPECT_EQ(*s[0].pair_text, c.train[0].text);
}

TEST(Synthetic, RejectsBadConfig) {
  SyntheticConfig cfg;
  cfg.variants = 1;
  EXPECT_THROW(make_synthetic(cfg), Error);
  cfg = {};
  cfg.near_copy_rate = 1.5;
  EXPECT_THROW(make_synthetic(cfg), Error);
  EXPECT_THROW(parse_flavor("fuzzy"), Error);
}
