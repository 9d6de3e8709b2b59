#pragma once
// Target generation: copy-the-top-candidate baseline and the seq2seq model.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ragcode/augment.hpp"
#include "ragcode/seq2seq.hpp"

namespace ragcode::generate {

/// primary_text of the rank-1 candidate, or "" when there is none.
std::string copy_top1(std::span<const augment::RetrievedCandidate> candidates);

struct GenExample {
  text::TokenSequence input;
  text::TokenSequence target;
};

struct GenTrainConfig {
  Seq2SeqDims dims;
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  /// Called after every epoch with (epoch index, mean token loss).
  std::function<void(std::size_t, double)> on_epoch;
};

struct GenTrainReport {
  double initial_loss = 0.0;  // mean token loss before the first update
  std::vector<double> epoch_loss;
};

/// Teacher-forced mini-batch Adam on the mean token-level cross-entropy.
/// Deterministic given the seed. Throws Error on an empty example list.
Seq2SeqParams train_generator(std::span<const GenExample> examples, const GenTrainConfig& config,
                              GenTrainReport* report = nullptr);

/// Mean token-level cross-entropy over a set of examples.
double corpus_loss(const Seq2SeqParams& params, std::span<const GenExample> examples);

struct DecodeConfig {
  std::size_t max_target_length = 128;
  std::uint64_t seed = 0;  // unused by greedy decoding; kept for the CLI contract
};

/// Argmax per step (lowest id on ties) until [EOS] or the length cap.
text::TokenSequence generate_greedy_ids(const Seq2SeqParams& params, const text::TokenSequence& input,
                                        const DecodeConfig& cfg);

/// Greedy decode, detokenized by joining tokens with single spaces.
std::string generate_greedy(const Seq2SeqParams& params, const text::TokenSequence& input,
                            const text::Vocabulary& vocab, const DecodeConfig& cfg);

}  // namespace ragcode::generate
