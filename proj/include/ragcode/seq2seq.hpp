#pragma once
// Single-layer, single-head attention encoder-decoder with sinusoidal
// positions and hand-written reverse-mode gradients.
//
// encoder:  X = E[src] + PE;  X += SelfAttn(X);  X += FF(X)
// decoder:  Y = E[tgt] + PE;  Y += CausalSelfAttn(Y);  Y += CrossAttn(Y, X);
//           Y += FF(Y);  logits = Y * W_out
// FF(z) = gelu(z W1 + b1) W2 + b2, with the tanh approximation of gelu.

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ragcode/tensor.hpp"
#include "ragcode/text.hpp"

namespace ragcode::generate {

struct Seq2SeqDims {
  std::size_t vocab = 0;
  std::size_t d = 64;
  bool operator==(const Seq2SeqDims&) const = default;
};

struct AttentionParams {
  Matrix wq, wk, wv, wo;  // d x d
  bool operator==(const AttentionParams&) const = default;
};

struct FeedForwardParams {
  Matrix w1;  // d x 4d
  std::vector<double> b1;
  Matrix w2;  // 4d x d
  std::vector<double> b2;
  bool operator==(const FeedForwardParams&) const = default;
};

struct NamedTensor {
  std::string name;
  std::span<double> values;
};

struct Seq2SeqParams {
  Matrix embedding;  // vocab x d, shared by encoder and decoder inputs
  AttentionParams enc_self;
  FeedForwardParams enc_ff;
  AttentionParams dec_self;
  AttentionParams dec_cross;
  FeedForwardParams dec_ff;
  Matrix out_proj;  // d x vocab

  static Seq2SeqParams zeros(const Seq2SeqDims& dims);
  static Seq2SeqParams random(const Seq2SeqDims& dims, std::mt19937_64& rng);

  Seq2SeqDims dims() const { return {embedding.rows(), embedding.cols()}; }
  std::vector<NamedTensor> named_tensors();
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  bool all_finite() const;
  bool operator==(const Seq2SeqParams&) const = default;

  void save(const std::filesystem::path& path) const;
  static Seq2SeqParams load(const std::filesystem::path& path);
};

/// Logits (one row per target_prefix position, one column per token).
/// An empty input is treated as a single [PAD].
Matrix seq2seq_forward(const Seq2SeqParams& params, const text::TokenSequence& input,
                       const text::TokenSequence& target_prefix);

/// Teacher-forced cross-entropy summed over the positions of `target`
/// (decoder input [BOS] + target, expected output target + [EOS]).
/// Gradients are accumulated into `grads` scaled by `grad_scale` when given.
/// Returns the summed loss and writes the number of positions to `positions`.
double sequence_loss(const Seq2SeqParams& params, const text::TokenSequence& input,
                     const text::TokenSequence& target, Seq2SeqParams* grads, double grad_scale,
                     std::size_t* positions = nullptr);

/// Mean per-position cross-entropy of one example.
double mean_sequence_loss(const Seq2SeqParams& params, const text::TokenSequence& input,
                          const text::TokenSequence& target);

/// sin/cos position table, `length` x `d`.
Matrix sinusoidal_positions(std::size_t length, std::size_t d);

}  // namespace ragcode::generate
