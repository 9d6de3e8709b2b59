#include "ragcode/generate.hpp"

#include <algorithm>
#include <numeric>

#include "ragcode/optim.hpp"

namespace ragcode::generate {

std::string copy_top1(std::span<const augment::RetrievedCandidate> candidates) {
  for (const auto& c : candidates)
    if (c.rank == 1) return c.primary_text;
  return candidates.empty() ? std::string() : candidates.front().primary_text;
}

double corpus_loss(const Seq2SeqParams& params, std::span<const GenExample> examples) {
  double total = 0.0;
  std::size_t positions = 0;
  for (const GenExample& ex : examples) {
    std::size_t n = 0;
    total += sequence_loss(params, ex.input, ex.target, nullptr, 1.0, &n);
    positions += n;
  }
  return positions == 0 ? 0.0 : total / static_cast<double>(positions);
}

Seq2SeqParams train_generator(std::span<const GenExample> examples, const GenTrainConfig& config,
                              GenTrainReport* report) {
  if (examples.empty()) throw Error("generator training needs at least one example");
  std::mt19937_64 rng(config.seed);
  Seq2SeqParams params = Seq2SeqParams::random(config.dims, rng);
  Seq2SeqParams grads = Seq2SeqParams::zeros(config.dims);
  Adam opt(params.tensors(), {.lr = config.lr});
  if (report != nullptr) report->initial_loss = corpus_loss(params, examples);

  const std::size_t bsz = std::clamp<std::size_t>(config.batch_size, 1, examples.size());
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0.0;
    std::size_t epoch_positions = 0;
    for (std::size_t start = 0; start < order.size(); start += bsz) {
      const std::size_t end = std::min(start + bsz, order.size());
      std::size_t positions = 0;
      for (std::size_t i = start; i < end; ++i) positions += examples[order[i]].target.ids.size() + 1;
      const double scale = 1.0 / static_cast<double>(positions);
      for (auto t : grads.tensors()) std::fill(t.begin(), t.end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const GenExample& ex = examples[order[i]];
        epoch_total += sequence_loss(params, ex.input, ex.target, &grads, scale);
      }
      epoch_positions += positions;
      opt.step(std::as_const(grads).tensors());
    }
    const double mean = epoch_total / static_cast<double>(epoch_positions);
    if (report != nullptr) report->epoch_loss.push_back(mean);
    if (config.on_epoch) config.on_epoch(epoch, mean);
  }
  return params;
}

std::string generate_greedy(const Seq2SeqParams& params, const text::TokenSequence& input,
                            const text::Vocabulary& vocab, const DecodeConfig& cfg) {
  return text::join(vocab.decode(generate_greedy_ids(params, input, cfg)));
}

}  // namespace ragcode::generate
