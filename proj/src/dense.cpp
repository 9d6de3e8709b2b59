#include "ragcode/dense.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "ragcode/kernels.hpp"
#include "ragcode/optim.hpp"
#include "ragcode/param_io.hpp"

namespace ragcode::dense {

namespace {

constexpr std::array<char, 4> kRetrieverMagic = {'R', 'C', 'D', 'R'};
constexpr std::array<char, 4> kIndexMagic = {'R', 'C', 'D', 'X'};
constexpr std::uint32_t kVersion = 1;

struct Forward {
  std::vector<double> pooled;
  std::vector<double> hidden;  // tanh output
  EmbeddingVector out;
};

std::span<const double> embedding_row(const EncoderParams& p, text::TokenId id) {
  if (id < 0 || static_cast<std::size_t>(id) >= p.embedding.rows())
    throw Error("token id " + std::to_string(id) + " outside the encoder vocabulary");
  return p.embedding.row(static_cast<std::size_t>(id));
}

Forward forward(const EncoderParams& p, const text::TokenSequence& tokens) {
  const auto& k = simd::active();
  const std::size_t d_emb = p.w1.rows();
  const std::size_t d_h = p.w1.cols();
  const std::size_t d_out = p.w2.cols();
  Forward f;
  f.pooled.assign(d_emb, 0.0);
  if (tokens.ids.empty()) {
    auto row = embedding_row(p, text::kPad);
    std::copy(row.begin(), row.end(), f.pooled.begin());
  } else {
    for (text::TokenId id : tokens.ids) k.axpy(1.0, embedding_row(p, id).data(), f.pooled.data(), d_emb);
    k.scale(1.0 / static_cast<double>(tokens.ids.size()), f.pooled.data(), d_emb);
  }
  f.hidden = p.b1;
  for (std::size_t i = 0; i < d_emb; ++i) k.axpy(f.pooled[i], p.w1.data() + i * d_h, f.hidden.data(), d_h);
  for (double& h : f.hidden) h = std::tanh(h);
  f.out = p.b2;
  for (std::size_t j = 0; j < d_h; ++j) k.axpy(f.hidden[j], p.w2.data() + j * d_out, f.out.data(), d_out);
  return f;
}

void backward(const EncoderParams& p, const text::TokenSequence& tokens, const Forward& f,
              std::span<const double> d_vec, EncoderParams& g) {
  const auto& k = simd::active();
  const std::size_t d_emb = p.w1.rows();
  const std::size_t d_h = p.w1.cols();
  const std::size_t d_out = p.w2.cols();
  for (std::size_t c = 0; c < d_out; ++c) g.b2[c] += d_vec[c];
  std::vector<double> d_hidden(d_h);
  for (std::size_t j = 0; j < d_h; ++j) {
    k.axpy(f.hidden[j], d_vec.data(), g.w2.data() + j * d_out, d_out);
    d_hidden[j] = k.dot(p.w2.data() + j * d_out, d_vec.data(), d_out) * (1.0 - f.hidden[j] * f.hidden[j]);
  }
  for (std::size_t j = 0; j < d_h; ++j) g.b1[j] += d_hidden[j];
  std::vector<double> d_pooled(d_emb);
  for (std::size_t i = 0; i < d_emb; ++i) {
    k.axpy(f.pooled[i], d_hidden.data(), g.w1.data() + i * d_h, d_h);
    d_pooled[i] = k.dot(p.w1.data() + i * d_h, d_hidden.data(), d_h);
  }
  if (tokens.ids.empty()) {
    k.axpy(1.0, d_pooled.data(), g.embedding.data() + text::kPad * d_emb, d_emb);
    return;
  }
  const double inv = 1.0 / static_cast<double>(tokens.ids.size());
  for (text::TokenId id : tokens.ids)
    k.axpy(inv, d_pooled.data(), g.embedding.data() + static_cast<std::size_t>(id) * d_emb, d_emb);
}

bool better(const Hit& a, const Hit& b) { return a.score > b.score || (a.score == b.score && a.doc < b.doc); }

}  // namespace

EncoderParams EncoderParams::zeros(const EncoderDims& d) {
  EncoderParams p;
  p.embedding = Matrix(d.vocab, d.d_emb);
  p.w1 = Matrix(d.d_emb, d.d_h);
  p.b1.assign(d.d_h, 0.0);
  p.w2 = Matrix(d.d_h, d.d_out);
  p.b2.assign(d.d_out, 0.0);
  return p;
}

EncoderParams EncoderParams::random(const EncoderDims& d, std::mt19937_64& rng) {
  EncoderParams p = zeros(d);
  p.embedding.fill_normal(rng, 1.0);
  p.w1.fill_normal(rng, 1.0 / std::sqrt(static_cast<double>(d.d_emb)));
  p.w2.fill_normal(rng, 1.0 / std::sqrt(static_cast<double>(d.d_h)));
  return p;
}

EncoderDims EncoderParams::dims() const { return {embedding.rows(), embedding.cols(), w1.cols(), w2.cols()}; }

std::vector<std::span<double>> EncoderParams::tensors() {
  return {embedding.flat(), w1.flat(), std::span<double>(b1), w2.flat(), std::span<double>(b2)};
}

std::vector<std::span<const double>> EncoderParams::tensors() const {
  return {embedding.flat(), w1.flat(), std::span<const double>(b1), w2.flat(), std::span<const double>(b2)};
}

bool EncoderParams::all_finite() const {
  for (auto t : tensors())
    for (double v : t)
      if (!std::isfinite(v)) return false;
  return true;
}

EmbeddingVector encode(const EncoderParams& params, const text::TokenSequence& tokens) {
  return forward(params, tokens).out;
}

void encode_backward(const EncoderParams& params, const text::TokenSequence& tokens, std::span<const double> d_vec,
                     EncoderParams& grads) {
  backward(params, tokens, forward(params, tokens), d_vec, grads);
}

double sim(std::span<const double> q, std::span<const double> p) {
  if (q.size() != p.size())
    throw Error("similarity of vectors with dimensions " + std::to_string(q.size()) + " and " +
                std::to_string(p.size()));
  return simd::dot(q, p);
}

InBatchLoss in_batch_loss(std::span<const EmbeddingVector> queries, std::span<const EmbeddingVector> docs) {
  const std::size_t b = queries.size();
  if (b < 2) throw Error("in-batch loss needs at least 2 examples, got " + std::to_string(b));
  if (docs.size() < b) throw Error("in-batch loss needs a positive document for every query");
  const std::size_t n = docs.size();
  Matrix probs(b, n);
  InBatchLoss out;
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < n; ++j) probs(i, j) = sim(queries[i], docs[j]);
  for (std::size_t i = 0; i < b; ++i) {
    auto row = probs.row(i);
    const auto top = std::max_element(row.begin(), row.end());
    const double mx = *top;
    // log-sum-exp as mx + log1p(sum of the other terms), exact near zero loss
    double rest = 0.0;
    for (auto it = row.begin(); it != row.end(); ++it)
      if (it != top) rest += std::exp(*it - mx);
    out.loss += std::log1p(rest) + (mx - row[i]);
  }
  out.loss /= static_cast<double>(b);
  softmax_rows(probs);
  const double inv_b = 1.0 / static_cast<double>(b);
  out.d_query.assign(b, EmbeddingVector(queries[0].size(), 0.0));
  out.d_docs.assign(n, EmbeddingVector(queries[0].size(), 0.0));
  const auto& k = simd::active();
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double g = (probs(i, j) - (i == j ? 1.0 : 0.0)) * inv_b;
      if (g == 0.0) continue;
      k.axpy(g, docs[j].data(), out.d_query[i].data(), docs[j].size());
      k.axpy(g, queries[i].data(), out.d_docs[j].data(), queries[i].size());
    }
  }
  return out;
}

Retriever Retriever::random(const EncoderDims& dims, std::mt19937_64& rng) {
  Retriever r;
  r.query = EncoderParams::random(dims, rng);
  r.doc = EncoderParams::random(dims, rng);
  return r;
}

Retriever Retriever::zeros(const EncoderDims& dims) { return {EncoderParams::zeros(dims), EncoderParams::zeros(dims)}; }

std::vector<std::span<double>> Retriever::tensors() {
  auto out = query.tensors();
  auto rest = doc.tensors();
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

std::vector<std::span<const double>> Retriever::tensors() const {
  auto out = query.tensors();
  auto rest = doc.tensors();
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

void Retriever::save(const std::filesystem::path& path) const {
  const EncoderDims d = query.dims();
  param_io::FlatFile f;
  f.magic = kRetrieverMagic;
  f.version = kVersion;
  f.header = {static_cast<std::uint32_t>(d.vocab), static_cast<std::uint32_t>(d.d_emb),
              static_cast<std::uint32_t>(d.d_h), static_cast<std::uint32_t>(d.d_out)};
  const auto ts = tensors();
  param_io::pack(ts, f.values);
  param_io::write(path, f);
}

Retriever Retriever::load(const std::filesystem::path& path) {
  const param_io::FlatFile f = param_io::read(path);
  if (f.magic != kRetrieverMagic || f.version != kVersion || f.header.size() != 4)
    throw Error(path.string() + ": not a retriever parameter file");
  Retriever r = zeros({f.header[0], f.header[1], f.header[2], f.header[3]});
  const auto ts = r.tensors();
  if (param_io::unpack(f.values, 0, ts) != f.values.size())
    throw Error(path.string() + ": parameter count does not match the header");
  return r;
}

double batch_loss(const Retriever& model, std::span<const TrainingPair* const> batch, Retriever* grads,
                  bool use_hard_negatives) {
  std::vector<EmbeddingVector> qv;
  std::vector<EmbeddingVector> dv;
  std::vector<Forward> qf;
  std::vector<Forward> df;
  std::vector<const text::TokenSequence*> doc_tokens;
  for (const TrainingPair* p : batch) {
    qf.push_back(forward(model.query, p->query));
    df.push_back(forward(model.doc, p->positive));
    doc_tokens.push_back(&p->positive);
  }
  if (use_hard_negatives)
    for (const TrainingPair* p : batch)
      if (p->hard_negative) {
        df.push_back(forward(model.doc, *p->hard_negative));
        doc_tokens.push_back(&*p->hard_negative);
      }
  for (const Forward& f : qf) qv.push_back(f.out);
  for (const Forward& f : df) dv.push_back(f.out);
  InBatchLoss l = in_batch_loss(qv, dv);
  if (grads != nullptr) {
    for (std::size_t i = 0; i < batch.size(); ++i) backward(model.query, batch[i]->query, qf[i], l.d_query[i], grads->query);
    for (std::size_t j = 0; j < df.size(); ++j) backward(model.doc, *doc_tokens[j], df[j], l.d_docs[j], grads->doc);
  }
  return l.loss;
}

Retriever train_retriever(std::span<const TrainingPair> pairs, const TrainConfig& config, TrainReport* report) {
  if (pairs.size() < 2) throw Error("retriever training needs at least 2 pairs");
  std::size_t bsz = std::max<std::size_t>(config.batch_size, 2);
  if (bsz > pairs.size()) {
    std::cerr << "warning: batch size " << bsz << " exceeds " << pairs.size() << " pairs; clamping\n";
    bsz = pairs.size();
  }
  std::mt19937_64 rng(config.seed);
  Retriever model = Retriever::random(config.dims, rng);
  Retriever grads = Retriever::zeros(config.dims);
  Adam opt(model.tensors(), {.lr = config.lr});

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<const TrainingPair*> batch;
  const auto run_batch = [&](std::size_t begin, std::size_t end, Retriever* g) {
    batch.clear();
    for (std::size_t i = begin; i < end; ++i) batch.push_back(&pairs[order[i]]);
    return batch_loss(model, batch, g, config.hard_negatives);
  };

  if (report != nullptr) {
    report->effective_batch_size = bsz;
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t s = 0; s + 2 <= pairs.size(); s += bsz, ++n) total += run_batch(s, std::min(s + bsz, pairs.size()), nullptr);
    report->initial_loss = total / static_cast<double>(n);
  }

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t s = 0; s + 2 <= pairs.size(); s += bsz) {
      for (auto t : grads.tensors()) std::fill(t.begin(), t.end(), 0.0);
      total += run_batch(s, std::min(s + bsz, pairs.size()), &grads);
      ++n;
      const auto g = std::as_const(grads).tensors();
      opt.step(g);
    }
    if (report != nullptr) report->epoch_loss.push_back(total / static_cast<double>(n));
  }
  return model;
}

void DenseIndex::save(const std::filesystem::path& path) const {
  param_io::FlatFile f;
  f.magic = kIndexMagic;
  f.version = kVersion;
  f.header = {static_cast<std::uint32_t>(doc_vectors.rows()), static_cast<std::uint32_t>(doc_vectors.cols())};
  // ordinals are stored as leading floats; exact below 2^24
  if (doc_ordinals.size() >= (1u << 24)) throw Error("dense index too large for the float32 ordinal column");
  f.values.reserve(doc_ordinals.size() + doc_vectors.size());
  for (std::size_t o : doc_ordinals) f.values.push_back(static_cast<float>(o));
  param_io::pack(std::vector<std::span<const double>>{doc_vectors.flat()}, f.values);
  param_io::write(path, f);
}

DenseIndex DenseIndex::load(const std::filesystem::path& path) {
  const param_io::FlatFile f = param_io::read(path);
  if (f.magic != kIndexMagic || f.version != kVersion || f.header.size() != 2)
    throw Error(path.string() + ": not a dense index file");
  const std::size_t n = f.header[0];
  const std::size_t d = f.header[1];
  if (f.values.size() != n + n * d) throw Error(path.string() + ": value count does not match the header");
  DenseIndex idx;
  idx.doc_ordinals.reserve(n);
  for (std::size_t i = 0; i < n; ++i) idx.doc_ordinals.push_back(static_cast<std::size_t>(f.values[i]));
  idx.doc_vectors = Matrix(n, d);
  param_io::unpack(f.values, n, std::vector<std::span<double>>{idx.doc_vectors.flat()});
  return idx;
}

DenseIndex build_dense_index(const EncoderParams& doc_encoder, std::span<const text::TokenSequence> docs) {
  DenseIndex idx;
  idx.doc_vectors = Matrix(docs.size(), doc_encoder.w2.cols());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const EmbeddingVector v = encode(doc_encoder, docs[i]);
    std::copy(v.begin(), v.end(), idx.doc_vectors.row(i).begin());
    idx.doc_ordinals.push_back(i);
  }
  return idx;
}

std::vector<Hit> dense_topk(const DenseIndex& index, std::span<const double> query, std::size_t k) {
  if (k == 0 || index.size() == 0) return {};
  if (query.size() != index.doc_vectors.cols())
    throw Error("query dimension " + std::to_string(query.size()) + " does not match the index dimension " +
                std::to_string(index.doc_vectors.cols()));
  std::vector<double> scores(index.size());
  simd::active().row_dots(index.doc_vectors.data(), index.size(), index.doc_vectors.cols(), query.data(),
                          scores.data());
  std::vector<Hit> hits;
  hits.reserve(scores.size());
  for (std::size_t r = 0; r < scores.size(); ++r) hits.push_back({index.doc_ordinals[r], scores[r]});
  if (k < hits.size()) {
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), better);
    hits.resize(k);
  } else {
    std::sort(hits.begin(), hits.end(), better);
  }
  return hits;
}

}  // namespace ragcode::dense
