#include <gtest/gtest.h>

#include <random>

#include "ragcode/text.hpp"

using namespace ragcode;
using namespace ragcode::text;
using V = std::vector<std::string>;

TEST(TokenizeCode, SpecExamples) {
  EXPECT_EQ(tokenize_code("getMuxerStream"), (V{"get", "muxer", "stream"}));
  EXPECT_EQ(tokenize_code("a_b=c;"), (V{"a", "b", "=", "c", ";"}));
  EXPECT_EQ(tokenize_code(""), V{});
}

TEST(TokenizeCode, OperatorsAndNumbers) {
  EXPECT_EQ(tokenize_code("if(a==b){x+=1.5;}"), (V{"if", "(", "a", "==", "b", ")", "{", "x", "+=", "1.5", ";", "}"}));
  EXPECT_EQ(tokenize_code("HTTPServer"), (V{"http", "server"}));
}

TEST(TokenizeNl, SpecExamples) {
  EXPECT_EQ(tokenize_nl("Get the MuxerStream."), (V{"get", "the", "muxerstream", "."}));
  EXPECT_EQ(tokenize_nl("   "), V{});
  EXPECT_EQ(tokenize_nl("top-k search"), (V{"top", "-", "k", "search"}));
}

TEST(Tokenize, DispatchesOnKind) {
  EXPECT_EQ(tokenize("fooBar", corpus::DocKind::code), (V{"foo", "bar"}));
  EXPECT_EQ(tokenize("fooBar", corpus::DocKind::summary), (V{"foobar"}));
}

TEST(Tokenize, TotalOnRandomBytes) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> byte(0, 255), len(0, 40);
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    for (int n = len(rng); n > 0; --n) s.push_back(static_cast<char>(byte(rng)));
    const auto a = tokenize_code(s);
    EXPECT_EQ(a, tokenize_code(s));
    for (const auto& t : a) EXPECT_FALSE(t.empty());
    EXPECT_NO_THROW(tokenize_nl(s));
  }
}

TEST(Vocabulary, SpecialsFirst) {
  Vocabulary v;
  ASSERT_EQ(v.size(), kNumSpecials);
  const auto specials = special_tokens();
  for (std::size_t i = 0; i < kNumSpecials; ++i) EXPECT_EQ(v.id(specials[i]), static_cast<TokenId>(i));
  EXPECT_EQ(v.id("[CSEP]"), kCsep);
  EXPECT_EQ(v.id("[NSEP]"), kNsep);
}

TEST(BuildVocab, FrequencyOrder) {
  const std::vector<V> corpora{{"a", "a", "b"}};
  const auto v = build_vocab(corpora, 8);
  ASSERT_EQ(v.size(), 8u);
  EXPECT_EQ(v.id("a"), 6);
  EXPECT_EQ(v.id("b"), 7);
}

TEST(BuildVocab, EmptyCorpus) {
  EXPECT_EQ(build_vocab(std::vector<V>{}, 100).size(), kNumSpecials);
}

TEST(BuildVocab, TruncatesToMostFrequent) {
  V tokens;
  for (int i = 0; i < 10; ++i)
    for (int r = 0; r <= i; ++r) tokens.push_back("t" + std::to_string(i));
  const auto v = build_vocab(std::vector<V>{tokens}, 9);
  ASSERT_EQ(v.size(), 9u);
  EXPECT_EQ(v.token(6), "t9");
  EXPECT_EQ(v.token(7), "t8");
  EXPECT_EQ(v.token(8), "t7");
}

TEST(BuildVocab, LexicographicTieBreakAndDeterminism) {
  const std::vector<V> corpora{{"z", "m", "a"}, {"m", "b"}};
  const auto v = build_vocab(corpora, 100);
  EXPECT_EQ(v.token(6), "m");
  EXPECT_EQ(v.token(7), "a");
  EXPECT_EQ(v.token(8), "b");
  EXPECT_EQ(v.token(9), "z");
  EXPECT_EQ(v, build_vocab(corpora, 100));
}

TEST(BuildVocab, TooSmallIsError) { EXPECT_THROW(build_vocab(std::vector<V>{}, 5), Error); }

TEST(Encode, RoundTripAndUnk) {
  const auto v = build_vocab(std::vector<V>{{"x", "y", "z"}}, 50);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    V seq;
    for (int n = std::uniform_int_distribution<int>(0, 8)(rng); n > 0; --n)
      seq.push_back(v.token(std::uniform_int_distribution<TokenId>(6, 8)(rng)));
    EXPECT_EQ(v.decode(v.encode(seq)), seq);
  }
  EXPECT_EQ(v.encode(V{"nope"}).ids, std::vector<TokenId>{kUnk});
  EXPECT_TRUE(v.encode(V{}).ids.empty());
}

TEST(Vocabulary, SaveLoad) {
  const auto v = build_vocab(std::vector<V>{{"alpha", "beta", "beta"}}, 50);
  const auto path = std::filesystem::temp_directory_path() / "ragcode_unit_vocab.txt";
  v.save(path);
  EXPECT_EQ(Vocabulary::load(path), v);
}

TEST(Join, SingleSpaces) { EXPECT_EQ(join(V{"a", "b", "c"}), "a b c"); }
