#pragma once
// Bi-encoder dense retriever: query and document encoders, inner-product
// similarity, in-batch-negative training and exact MIPS.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "ragcode/tensor.hpp"
#include "ragcode/text.hpp"

namespace ragcode::dense {

using EmbeddingVector = std::vector<double>;

struct EncoderDims {
  std::size_t vocab = 0;
  std::size_t d_emb = 64;
  std::size_t d_h = 64;
  std::size_t d_out = 32;
  bool operator==(const EncoderDims&) const = default;
};

/// Mean-pooled token embeddings followed by a two-layer tanh projection:
/// v = W2^T tanh(W1^T mean(E[tokens]) + b1) + b2.
struct EncoderParams {
  Matrix embedding;  // vocab x d_emb
  Matrix w1;         // d_emb x d_h
  std::vector<double> b1;
  Matrix w2;  // d_h x d_out
  std::vector<double> b2;

  /// Zero-filled parameters of the given shape (also the gradient layout).
  static EncoderParams zeros(const EncoderDims& dims);
  static EncoderParams random(const EncoderDims& dims, std::mt19937_64& rng);

  EncoderDims dims() const;
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  bool all_finite() const;
  bool operator==(const EncoderParams&) const = default;
};

EmbeddingVector encode(const EncoderParams& params, const text::TokenSequence& tokens);

/// Backpropagates `d_vec` (gradient w.r.t. the encoder output) into `grads`.
void encode_backward(const EncoderParams& params, const text::TokenSequence& tokens,
                     std::span<const double> d_vec, EncoderParams& grads);

/// Inner product. Throws Error on dimension mismatch.
double sim(std::span<const double> q, std::span<const double> p);

struct InBatchLoss {
  double loss = 0.0;
  std::vector<EmbeddingVector> d_query;
  std::vector<EmbeddingVector> d_docs;
};

/// Mean over rows i of -log softmax_j(sim(q_i, p_j))[i]. `docs` holds the B
/// positives first (docs[i] pairs with queries[i]) and may continue with
/// extra negatives shared by every row. Throws Error when B < 2.
InBatchLoss in_batch_loss(std::span<const EmbeddingVector> queries, std::span<const EmbeddingVector> docs);

struct Retriever {
  EncoderParams query;
  EncoderParams doc;

  static Retriever random(const EncoderDims& dims, std::mt19937_64& rng);
  static Retriever zeros(const EncoderDims& dims);
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  bool operator==(const Retriever&) const = default;

  void save(const std::filesystem::path& path) const;
  static Retriever load(const std::filesystem::path& path);
};

struct TrainingPair {
  text::TokenSequence query;
  text::TokenSequence positive;
  std::optional<text::TokenSequence> hard_negative;
};

/// Loss of one batch through both encoders; gradients are accumulated into
/// `grads` when given. With `use_hard_negatives`, the hard negatives present
/// on the pairs are appended to the document side of every row's softmax.
double batch_loss(const Retriever& model, std::span<const TrainingPair* const> batch, Retriever* grads,
                  bool use_hard_negatives = false);

struct TrainConfig {
  EncoderDims dims;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
  bool hard_negatives = false;
};

struct TrainReport {
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;  // mean batch loss per epoch
  std::size_t effective_batch_size = 0;
};

/// Mini-batch Adam on the in-batch-negative loss. Batch size is clamped to
/// the number of pairs (with a warning on stderr). Hard negatives are used
/// only when `config.hard_negatives` is set.
Retriever train_retriever(std::span<const TrainingPair> pairs, const TrainConfig& config,
                          TrainReport* report = nullptr);

struct Hit {
  std::size_t doc;
  double score;
};

struct DenseIndex {
  Matrix doc_vectors;  // N x d_out
  std::vector<std::size_t> doc_ordinals;

  std::size_t size() const { return doc_ordinals.size(); }
  void save(const std::filesystem::path& path) const;
  static DenseIndex load(const std::filesystem::path& path);
};

DenseIndex build_dense_index(const EncoderParams& doc_encoder, std::span<const text::TokenSequence> docs);

/// Exact top-k by inner product, ties by ascending ordinal.
std::vector<Hit> dense_topk(const DenseIndex& index, std::span<const double> query, std::size_t k);

}  // namespace ragcode::dense
