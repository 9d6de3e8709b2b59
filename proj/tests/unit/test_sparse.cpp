#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "ragcode/sparse.hpp"
#include "ragcode/text.hpp"

using namespace ragcode;
using namespace ragcode::sparse;
using V = std::vector<std::string>;

TEST(InvertedIndex, Empty) {
  const InvertedIndex idx(std::vector<V>{});
  EXPECT_EQ(idx.num_docs(), 0u);
  EXPECT_TRUE(idx.topk(V{"a"}, 5).empty());
  EXPECT_EQ(build_index(corpus::RetrievalDatabase{}).num_docs(), 0u);
}

TEST(InvertedIndex, PostingsAndLengths) {
  const std::vector<V> docs{{"a", "b"}, {"a"}};
  const InvertedIndex idx(docs);
  EXPECT_EQ(idx.postings("a").size(), 2u);
  EXPECT_EQ(idx.postings("b").size(), 1u);
  EXPECT_TRUE(idx.postings("zzz").empty());
  EXPECT_DOUBLE_EQ(idx.avg_doc_length(), 1.5);
}

TEST(InvertedIndex, PostingsSortedByOrdinal) {
  std::mt19937_64 rng(2);
  std::vector<V> docs;
  for (int i = 0; i < 50; ++i) docs.push_back({"w" + std::to_string(i % 5), "w" + std::to_string(i % 3)});
  const InvertedIndex idx(docs);
  for (int t = 0; t < 5; ++t) {
    auto p = idx.postings("w" + std::to_string(t));
    for (std::size_t i = 1; i < p.size(); ++i) EXPECT_LT(p[i - 1].doc, p[i].doc);
    for (const auto& x : p) EXPECT_LT(x.doc, idx.num_docs());
  }
}

TEST(Bm25, SingleDocHandValue) {
  const InvertedIndex idx(std::vector<V>{{"a"}});
  EXPECT_NEAR(idx.score(V{"a"}, 0), std::log(4.0 / 3.0), 1e-12);
  EXPECT_NEAR(idx.score(V{"a"}, 0), 0.28768207245178090, 1e-12);
}

TEST(Bm25, AbsentTermAndDuplicates) {
  const InvertedIndex idx(std::vector<V>{{"a", "b"}, {"c"}});
  EXPECT_EQ(idx.score(V{"zzz"}, 0), 0.0);
  EXPECT_DOUBLE_EQ(idx.score(V{"a", "a"}, 0), 2.0 * idx.score(V{"a"}, 0));
  EXPECT_THROW(idx.score(V{"a"}, 7), Error);
}

TEST(SparseTopk, ZeroKAndNoOverlap) {
  const InvertedIndex idx(std::vector<V>{{"a"}, {"b"}});
  EXPECT_TRUE(idx.topk(V{"a"}, 0).empty());
  EXPECT_TRUE(idx.topk(V{"q"}, 5).empty());
}

TEST(SparseTopk, MatchesBruteForceOnRandomCorpora) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 20)(rng);
    std::vector<V> docs;
    for (int i = 0; i < n; ++i) {
      V d;
      for (int t = std::uniform_int_distribution<int>(1, 8)(rng); t > 0; --t)
        d.push_back("w" + std::to_string(std::uniform_int_distribution<int>(0, 9)(rng)));
      docs.push_back(d);
    }
    V q;
    for (int t = std::uniform_int_distribution<int>(1, 4)(rng); t > 0; --t)
      q.push_back("w" + std::to_string(std::uniform_int_distribution<int>(0, 12)(rng)));
    const InvertedIndex idx(docs);
    const auto want = oracle::bm25_all(docs, q);
    for (std::size_t k : {std::size_t{0}, std::size_t{1}, std::size_t{3}, static_cast<std::size_t>(n), std::size_t{100}}) {
      const auto got = idx.topk(q, k);
      ASSERT_EQ(got.size(), std::min(k, want.size()));
      for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_EQ(got[i].doc, want[i].first);
        EXPECT_NEAR(got[i].score, want[i].second, 1e-12);
        EXPECT_GE(got[i].score, 0.0);
      }
    }
  }
}

TEST(SparseTopk, UnrelatedDocumentKeepsOrder) {
  std::vector<V> docs{{"a", "b"}, {"a", "c", "c"}, {"b", "d"}, {"a"}};
  const V q{"a", "b"};
  const auto before = InvertedIndex(docs).topk(q, 10);
  docs.push_back({"x", "y"});
  const auto after = InvertedIndex(docs).topk(q, 10);
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(before[i].doc, after[i].doc);
}

TEST(InvertedIndex, SaveLoad) {
  const InvertedIndex idx(std::vector<V>{{"a", "b", "a"}, {"c"}});
  const auto path = std::filesystem::temp_directory_path() / "ragcode_unit_bm25.idx";
  idx.save(path);
  EXPECT_EQ(InvertedIndex::load(path), idx);
}

TEST(HardNegative, SkipsTargetText) {
  corpus::RetrievalDatabase db;
  db.add({"t", corpus::DocKind::code, "alpha beta", {}, ""});
  db.add({"n", corpus::DocKind::code, "alpha gamma", {}, ""});
  db.add({"z", corpus::DocKind::code, "omega", {}, ""});
  const auto idx = build_index(db);
  const V q = text::tokenize_code("alpha beta");
  EXPECT_EQ(mine_hard_negative(idx, db, q, "alpha   beta"), std::optional<std::size_t>(1));
  EXPECT_EQ(mine_hard_negative(idx, db, V{"omega"}, "omega"), std::nullopt);
}
