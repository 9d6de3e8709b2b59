#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "ragcode/dense.hpp"

using namespace ragcode;
using namespace ragcode::dense;
using text::TokenSequence;

namespace {

EncoderDims small_dims(std::size_t vocab = 20) { return {vocab, 4, 4, 4}; }

TokenSequence random_tokens(std::mt19937_64& rng, std::size_t vocab, std::size_t max_len) {
  TokenSequence s;
  for (std::size_t n = std::uniform_int_distribution<std::size_t>(1, max_len)(rng); n > 0; --n)
    s.ids.push_back(std::uniform_int_distribution<text::TokenId>(0, static_cast<text::TokenId>(vocab) - 1)(rng));
  return s;
}

std::vector<TrainingPair> random_pairs(std::mt19937_64& rng, std::size_t n, std::size_t vocab, bool negatives) {
  std::vector<TrainingPair> out;
  for (std::size_t i = 0; i < n; ++i) {
    TrainingPair p{random_tokens(rng, vocab, 5), random_tokens(rng, vocab, 5), std::nullopt};
    if (negatives) p.hard_negative = random_tokens(rng, vocab, 5);
    out.push_back(p);
  }
  return out;
}

}  // namespace

TEST(Sim, Examples) {
  EXPECT_EQ(sim(std::vector<double>{1, 0, 0}, std::vector<double>{1, 0, 0}), 1.0);
  EXPECT_EQ(sim(std::vector<double>{1, 0}, std::vector<double>{0, 3}), 0.0);
  EXPECT_EQ(sim(std::vector<double>{1, 2}, std::vector<double>{3, 4}), 11.0);
  EXPECT_THROW(sim(std::vector<double>{1, 2}, std::vector<double>{3}), Error);
}

TEST(Encode, SingleTokenIsThatEmbeddingThroughTheMlp) {
  std::mt19937_64 rng(1);
  const auto p = EncoderParams::random(small_dims(), rng);
  const TokenSequence s{{7}};
  const auto v = encode(p, s);
  std::vector<double> h(4);
  for (std::size_t j = 0; j < 4; ++j) {
    double z = p.b1[j];
    for (std::size_t i = 0; i < 4; ++i) z += p.embedding(7, i) * p.w1(i, j);
    h[j] = std::tanh(z);
  }
  for (std::size_t o = 0; o < 4; ++o) {
    double want = p.b2[o];
    for (std::size_t j = 0; j < 4; ++j) want += h[j] * p.w2(j, o);
    EXPECT_NEAR(v[o], want, 1e-12);
  }
}

TEST(Encode, OrderInvariant) {
  std::mt19937_64 rng(2);
  const auto p = EncoderParams::random(small_dims(), rng);
  TokenSequence s{{3, 9, 9, 14, 6, 1}};
  const auto a = encode(p, s);
  std::reverse(s.ids.begin(), s.ids.end());
  const auto b = encode(p, s);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Encode, ZeroOutputLayerGivesZero) {
  std::mt19937_64 rng(3);
  auto p = EncoderParams::random(small_dims(), rng);
  p.w2.fill(0.0);
  std::fill(p.b2.begin(), p.b2.end(), 0.0);
  for (const auto& v : {encode(p, TokenSequence{{4, 5}}), encode(p, TokenSequence{})})
    for (double x : v) EXPECT_EQ(x, 0.0);
}

TEST(Encode, EmptyPoolsPad) {
  std::mt19937_64 rng(4);
  const auto p = EncoderParams::random(small_dims(), rng);
  EXPECT_EQ(encode(p, TokenSequence{}), encode(p, TokenSequence{{text::kPad}}));
}

TEST(InBatchLoss, UniformSimilaritiesGiveLnB) {
  for (std::size_t b : {2, 4, 8}) {
    std::vector<EmbeddingVector> v(b, EmbeddingVector{0.3, -1.2, 0.7});
    EXPECT_NEAR(in_batch_loss(v, v).loss, std::log(static_cast<double>(b)), 1e-12);
  }
}

TEST(InBatchLoss, SeparatedPairHandValue) {
  const std::vector<EmbeddingVector> q{{1, 0}, {0, 1}};
  const std::vector<EmbeddingVector> p{{10, -10}, {-10, 10}};
  // -ln(e^10 / (e^10 + e^-10)) = ln(1 + e^-20)
  const double want = std::log1p(std::exp(-20.0));
  EXPECT_NEAR(want, 2.0611536e-9, 1e-15);
  EXPECT_NEAR(in_batch_loss(q, p).loss, want, 1e-18);
}

TEST(InBatchLoss, NeedsTwoRows) {
  const std::vector<EmbeddingVector> one{{1.0}};
  EXPECT_THROW(in_batch_loss(one, one), Error);
}

TEST(InBatchLoss, NonNegativeAndShiftInvariant) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0, 2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t b = 2 + trial % 5;
    std::vector<EmbeddingVector> q(b, EmbeddingVector(4)), p(b, EmbeddingVector(4));
    for (auto& v : q) std::generate(v.begin(), v.end(), [&] { return g(rng); });
    for (auto& v : p) std::generate(v.begin(), v.end(), [&] { return g(rng); });
    const double base = in_batch_loss(q, p).loss;
    EXPECT_GE(base, 0.0);
    // An extra coordinate equal to 1 on every document shifts row i by c_i.
    auto q2 = q, p2 = p;
    for (auto& v : p2) v.push_back(1.0);
    for (auto& v : q2) v.push_back(g(rng) * 10);
    EXPECT_NEAR(in_batch_loss(q2, p2).loss, base, 1e-10);
  }
}

TEST(InBatchLoss, VectorGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0, 1);
  std::vector<EmbeddingVector> q(3, EmbeddingVector(4)), p(5, EmbeddingVector(4));  // two shared negatives
  for (auto& v : q) std::generate(v.begin(), v.end(), [&] { return g(rng); });
  for (auto& v : p) std::generate(v.begin(), v.end(), [&] { return g(rng); });
  const auto res = in_batch_loss(q, p);
  const double h = 1e-6;
  for (int side = 0; side < 2; ++side) {
    auto& vecs = side == 0 ? q : p;
    const auto& grads = side == 0 ? res.d_query : res.d_docs;
    for (std::size_t i = 0; i < vecs.size(); ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        const double keep = vecs[i][j];
        vecs[i][j] = keep + h;
        const double up = in_batch_loss(q, p).loss;
        vecs[i][j] = keep - h;
        const double down = in_batch_loss(q, p).loss;
        vecs[i][j] = keep;
        EXPECT_NEAR(grads[i][j], (up - down) / (2 * h), 1e-7);
      }
  }
}

TEST(Retriever, ParameterGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(7);
  for (bool negatives : {false, true}) {
    const auto model = Retriever::random(small_dims(), rng);
    const auto pairs = random_pairs(rng, 3, 20, negatives);
    const auto r = oracle::check_retriever_gradients(model, pairs, negatives, 12, rng);
    EXPECT_LT(r.max_rel_error, 1e-4) << "hard negatives " << negatives;
    EXPECT_GT(r.checked, 0u);
  }
}

TEST(TrainRetriever, LossDecreasesMedianOverSeeds) {
  std::vector<int> improved;
  for (std::uint64_t seed : {1, 2, 3}) {
    std::mt19937_64 rng(seed);
    const auto pairs = random_pairs(rng, 64, 60, false);
    TrainConfig cfg;
    cfg.dims = {60, 16, 16, 8};
    cfg.epochs = 20;
    cfg.lr = 1e-2;
    cfg.seed = seed;
    TrainReport report;
    train_retriever(pairs, cfg, &report);
    ASSERT_EQ(report.epoch_loss.size(), 20u);
    improved.push_back(report.epoch_loss.back() < report.initial_loss ? 1 : 0);
  }
  std::sort(improved.begin(), improved.end());
  EXPECT_EQ(improved[1], 1);
}

TEST(TrainRetriever, Deterministic) {
  std::mt19937_64 rng(8);
  const auto pairs = random_pairs(rng, 20, 30, true);
  TrainConfig cfg;
  cfg.dims = {30, 8, 8, 4};
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.seed = 42;
  cfg.hard_negatives = true;
  EXPECT_EQ(train_retriever(pairs, cfg), train_retriever(pairs, cfg));
  cfg.seed = 43;
  const auto other = train_retriever(pairs, cfg);
  cfg.seed = 42;
  EXPECT_FALSE(train_retriever(pairs, cfg) == other);
}

TEST(TrainRetriever, ClampsBatchAndRejectsTinyInput) {
  std::mt19937_64 rng(9);
  const auto pairs = random_pairs(rng, 3, 10, false);
  TrainConfig cfg;
  cfg.dims = {10, 4, 4, 4};
  cfg.epochs = 1;
  cfg.batch_size = 16;
  TrainReport report;
  train_retriever(pairs, cfg, &report);
  EXPECT_EQ(report.effective_batch_size, 3u);
  EXPECT_THROW(train_retriever(std::span(pairs).first(1), cfg), Error);
}

TEST(DenseTopk, MatchesBruteForce) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 100, d = 8;
    DenseIndex idx;
    idx.doc_vectors = Matrix(n, d);
    std::vector<std::vector<double>> rows(n, std::vector<double>(d));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) idx.doc_vectors(i, j) = rows[i][j] = trial % 2 ? std::round(g(rng)) : g(rng);
    idx.doc_ordinals.resize(n);
    std::iota(idx.doc_ordinals.begin(), idx.doc_ordinals.end(), 0);
    std::vector<double> q(d);
    for (auto& x : q) x = trial % 2 ? std::round(g(rng)) : g(rng);
    const auto want = oracle::mips_all(rows, q);
    for (std::size_t k : {0, 1, 5, 99, 100, 250}) {
      const auto got = dense_topk(idx, q, k);
      ASSERT_EQ(got.size(), std::min(k, n));
      for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_EQ(got[i].doc, want[i].first);
        EXPECT_NEAR(got[i].score, want[i].second, 1e-12);
        if (i > 0) EXPECT_GE(got[i - 1].score, got[i].score);
      }
    }
  }
}

TEST(DenseTopk, UnitVectorQueryRanksItselfFirst) {
  DenseIndex idx;
  idx.doc_vectors = Matrix(4, 4);
  for (std::size_t i = 0; i < 4; ++i) idx.doc_vectors(i, i) = 1.0;
  idx.doc_ordinals = {0, 1, 2, 3};
  const auto hits = dense_topk(idx, std::vector<double>{0, 0, 1, 0}, 4);
  ASSERT_EQ(hits.size(), 4u);
  EXPECT_EQ(hits[0].doc, 2u);
  EXPECT_EQ(hits[1].doc, 0u);  // ties by ascending ordinal
  EXPECT_EQ(hits[2].doc, 1u);
  EXPECT_EQ(hits[3].doc, 3u);
}

TEST(DenseIndex, BuildSaveLoad) {
  std::mt19937_64 rng(11);
  const auto p = EncoderParams::random(small_dims(), rng);
  const std::vector<TokenSequence> docs{{{6, 7}}, {{8}}, {{9, 9, 10}}};
  const auto idx = build_dense_index(p, docs);
  ASSERT_EQ(idx.size(), 3u);
  ASSERT_EQ(idx.doc_vectors.rows(), 3u);
  EXPECT_EQ(std::vector<double>(idx.doc_vectors.row(1).begin(), idx.doc_vectors.row(1).end()), encode(p, docs[1]));
  const auto path = std::filesystem::temp_directory_path() / "ragcode_unit_dense.idx";
  idx.save(path);
  const auto back = DenseIndex::load(path);
  EXPECT_EQ(back.doc_ordinals, idx.doc_ordinals);
  for (std::size_t i = 0; i < idx.doc_vectors.size(); ++i)
    EXPECT_EQ(back.doc_vectors.flat()[i], static_cast<double>(static_cast<float>(idx.doc_vectors.flat()[i])));
}

TEST(Retriever, SaveLoadRoundsToFloat) {
  std::mt19937_64 rng(12);
  const auto m = Retriever::random(small_dims(), rng);
  const auto path = std::filesystem::temp_directory_path() / "ragcode_unit_retriever.bin";
  m.save(path);
  const auto back = Retriever::load(path);
  EXPECT_EQ(back.query.dims(), m.query.dims());
  const auto a = m.tensors();
  const auto b = back.tensors();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t t = 0; t < a.size(); ++t)
    for (std::size_t i = 0; i < a[t].size(); ++i) EXPECT_EQ(b[t][i], static_cast<double>(static_cast<float>(a[t][i])));
}

TEST(Retriever, EncodersInitialisedIndependently) {
  std::mt19937_64 rng(13);
  const auto m = Retriever::random(small_dims(), rng);
  EXPECT_FALSE(m.query == m.doc);
}
