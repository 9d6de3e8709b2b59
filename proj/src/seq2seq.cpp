#include "ragcode/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "ragcode/corpus.hpp"
#include "ragcode/generate.hpp"
#include "ragcode/kernels.hpp"
#include "ragcode/param_io.hpp"

namespace ragcode::generate {

namespace {

constexpr std::array<char, 4> kMagic = {'R', 'C', 'S', 'G'};
constexpr std::uint32_t kVersion = 1;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

double gelu(double u) { return 0.5 * u * (1.0 + std::tanh(kGeluC * (u + kGeluA * u * u * u))); }

double gelu_grad(double u) {
  const double t = std::tanh(kGeluC * (u + kGeluA * u * u * u));
  return 0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * u * u);
}

const Matrix& positions(std::size_t length, std::size_t d) {
  thread_local std::unordered_map<std::size_t, Matrix> cache;
  Matrix& table = cache[d];
  if (table.rows() < length) table = sinusoidal_positions(std::max<std::size_t>(length, 2 * table.rows()), d);
  return table;
}

Matrix embed(const Seq2SeqParams& p, std::span<const text::TokenId> ids) {
  const std::size_t d = p.embedding.cols();
  const Matrix& pe = positions(ids.size(), d);
  Matrix x(ids.size(), d);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const auto id = ids[t];
    if (id < 0 || static_cast<std::size_t>(id) >= p.embedding.rows())
      throw Error("token id " + std::to_string(id) + " outside the generator vocabulary");
    auto row = x.row(t);
    auto e = p.embedding.row(static_cast<std::size_t>(id));
    auto pos = pe.row(t);
    for (std::size_t c = 0; c < d; ++c) row[c] = e[c] + pos[c];
  }
  return x;
}

void embed_backward(std::span<const text::TokenId> ids, const Matrix& dx, Matrix& d_embedding) {
  for (std::size_t t = 0; t < ids.size(); ++t) {
    auto g = d_embedding.row(static_cast<std::size_t>(ids[t]));
    auto src = dx.row(t);
    for (std::size_t c = 0; c < g.size(); ++c) g[c] += src[c];
  }
}

void add_in_place(Matrix& a, const Matrix& b) {
  auto fa = a.flat();
  auto fb = b.flat();
  for (std::size_t i = 0; i < fa.size(); ++i) fa[i] += fb[i];
}

struct AttentionCache {
  const Matrix* xq = nullptr;
  const Matrix* xkv = nullptr;
  Matrix q, k, v, probs, ctx;
};

Matrix attention_forward(const AttentionParams& p, const Matrix& xq, const Matrix& xkv, bool causal,
                         AttentionCache& c) {
  c.xq = &xq;
  c.xkv = &xkv;
  matmul(xq, p.wq, c.q);
  matmul(xkv, p.wk, c.k);
  matmul(xkv, p.wv, c.v);
  matmul_a_bt(c.q, c.k, c.probs);
  const double scale = 1.0 / std::sqrt(static_cast<double>(p.wq.cols()));
  for (double& s : c.probs.flat()) s *= scale;
  if (causal) {
    std::vector<std::size_t> width(c.probs.rows());
    for (std::size_t t = 0; t < width.size(); ++t) width[t] = std::min(t + 1, c.probs.cols());
    softmax_rows(c.probs, width);
  } else {
    softmax_rows(c.probs);
  }
  matmul(c.probs, c.v, c.ctx);
  Matrix out;
  matmul(c.ctx, p.wo, out);
  return out;
}

// d_xq and d_xkv are accumulated into (they may alias for self-attention).
void attention_backward(const AttentionParams& p, const AttentionCache& c, const Matrix& d_out, Matrix& d_xq,
                        Matrix& d_xkv, AttentionParams& g) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(p.wq.cols()));
  matmul_at_b_acc(c.ctx, d_out, g.wo);
  Matrix d_ctx;
  matmul_a_bt(d_out, p.wo, d_ctx);
  Matrix d_probs;
  matmul_a_bt(d_ctx, c.v, d_probs);
  Matrix d_v(c.v.rows(), c.v.cols());
  matmul_at_b_acc(c.probs, d_ctx, d_v);
  // softmax backward, folded with the 1/sqrt(d) scale
  Matrix d_scores(d_probs.rows(), d_probs.cols());
  for (std::size_t i = 0; i < d_probs.rows(); ++i) {
    auto pr = c.probs.row(i);
    auto dp = d_probs.row(i);
    double inner = 0.0;
    for (std::size_t j = 0; j < pr.size(); ++j) inner += pr[j] * dp[j];
    auto ds = d_scores.row(i);
    for (std::size_t j = 0; j < pr.size(); ++j) ds[j] = pr[j] * (dp[j] - inner) * scale;
  }
  Matrix d_q;
  matmul(d_scores, c.k, d_q);
  Matrix d_k(c.k.rows(), c.k.cols());
  matmul_at_b_acc(d_scores, c.q, d_k);

  matmul_at_b_acc(*c.xq, d_q, g.wq);
  matmul_at_b_acc(*c.xkv, d_k, g.wk);
  matmul_at_b_acc(*c.xkv, d_v, g.wv);
  matmul_a_bt_acc(d_q, p.wq, d_xq);
  matmul_a_bt_acc(d_k, p.wk, d_xkv);
  matmul_a_bt_acc(d_v, p.wv, d_xkv);
}

struct FeedForwardCache {
  const Matrix* x = nullptr;
  Matrix pre, act;
};

Matrix feed_forward(const FeedForwardParams& p, const Matrix& x, FeedForwardCache& c) {
  c.x = &x;
  matmul(x, p.w1, c.pre);
  add_row_bias(c.pre, p.b1);
  c.act = c.pre;
  for (double& v : c.act.flat()) v = gelu(v);
  Matrix out;
  matmul(c.act, p.w2, out);
  add_row_bias(out, p.b2);
  return out;
}

void feed_forward_backward(const FeedForwardParams& p, const FeedForwardCache& c, const Matrix& d_out, Matrix& d_x,
                           FeedForwardParams& g) {
  matmul_at_b_acc(c.act, d_out, g.w2);
  accumulate_column_sums(d_out, g.b2);
  Matrix d_act;
  matmul_a_bt(d_out, p.w2, d_act);
  auto pre = c.pre.flat();
  auto da = d_act.flat();
  for (std::size_t i = 0; i < da.size(); ++i) da[i] *= gelu_grad(pre[i]);
  matmul_at_b_acc(*c.x, d_act, g.w1);
  accumulate_column_sums(d_act, g.b1);
  matmul_a_bt_acc(d_act, p.w1, d_x);
}

struct EncoderState {
  std::vector<text::TokenId> ids;
  Matrix x0, x1, x2;
  AttentionCache attn;
  FeedForwardCache ff;
};

struct DecoderState {
  std::vector<text::TokenId> ids;
  Matrix y0, y1, y2, y3;
  AttentionCache self_attn, cross_attn;
  FeedForwardCache ff;
};

// EncoderState/DecoderState hold pointers into themselves; they are filled
// in place and never moved afterwards.
void run_encoder(const Seq2SeqParams& p, const text::TokenSequence& input, EncoderState& s) {
  s.ids = input.ids.empty() ? std::vector<text::TokenId>{text::kPad} : input.ids;
  s.x0 = embed(p, s.ids);
  s.x1 = attention_forward(p.enc_self, s.x0, s.x0, false, s.attn);
  add_in_place(s.x1, s.x0);
  s.x2 = feed_forward(p.enc_ff, s.x1, s.ff);
  add_in_place(s.x2, s.x1);
}

void run_decoder(const Seq2SeqParams& p, const EncoderState& enc, std::span<const text::TokenId> prefix,
                 DecoderState& s) {
  s.ids.assign(prefix.begin(), prefix.end());
  s.y0 = embed(p, s.ids);
  s.y1 = attention_forward(p.dec_self, s.y0, s.y0, true, s.self_attn);
  add_in_place(s.y1, s.y0);
  s.y2 = attention_forward(p.dec_cross, s.y1, enc.x2, false, s.cross_attn);
  add_in_place(s.y2, s.y1);
  s.y3 = feed_forward(p.dec_ff, s.y2, s.ff);
  add_in_place(s.y3, s.y2);
}

void init_attention(AttentionParams& a, std::size_t d) {
  a.wq = a.wk = a.wv = a.wo = Matrix(d, d);
}

void init_ff(FeedForwardParams& f, std::size_t d) {
  f.w1 = Matrix(d, 4 * d);
  f.b1.assign(4 * d, 0.0);
  f.w2 = Matrix(4 * d, d);
  f.b2.assign(d, 0.0);
}

}  // namespace

Matrix sinusoidal_positions(std::size_t length, std::size_t d) {
  Matrix pe(length, d);
  for (std::size_t pos = 0; pos < length; ++pos)
    for (std::size_t i = 0; i < d; i += 2) {
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
      pe(pos, i) = std::sin(angle);
      if (i + 1 < d) pe(pos, i + 1) = std::cos(angle);
    }
  return pe;
}

Seq2SeqParams Seq2SeqParams::zeros(const Seq2SeqDims& dims) {
  Seq2SeqParams p;
  p.embedding = Matrix(dims.vocab, dims.d);
  init_attention(p.enc_self, dims.d);
  init_ff(p.enc_ff, dims.d);
  init_attention(p.dec_self, dims.d);
  init_attention(p.dec_cross, dims.d);
  init_ff(p.dec_ff, dims.d);
  p.out_proj = Matrix(dims.d, dims.vocab);
  return p;
}

Seq2SeqParams Seq2SeqParams::random(const Seq2SeqDims& dims, std::mt19937_64& rng) {
  Seq2SeqParams p = zeros(dims);
  const double s = 1.0 / std::sqrt(static_cast<double>(dims.d));
  p.embedding.fill_normal(rng, 1.0);
  for (AttentionParams* a : {&p.enc_self, &p.dec_self, &p.dec_cross})
    for (Matrix* m : {&a->wq, &a->wk, &a->wv, &a->wo}) m->fill_normal(rng, s);
  for (FeedForwardParams* f : {&p.enc_ff, &p.dec_ff}) {
    f->w1.fill_normal(rng, s);
    f->w2.fill_normal(rng, 0.5 * s);
  }
  p.out_proj.fill_normal(rng, s);
  return p;
}

std::vector<NamedTensor> Seq2SeqParams::named_tensors() {
  std::vector<NamedTensor> out{{"embedding", embedding.flat()}};
  const auto attn = [&](const std::string& prefix, AttentionParams& a) {
    out.push_back({prefix + ".wq", a.wq.flat()});
    out.push_back({prefix + ".wk", a.wk.flat()});
    out.push_back({prefix + ".wv", a.wv.flat()});
    out.push_back({prefix + ".wo", a.wo.flat()});
  };
  const auto ff = [&](const std::string& prefix, FeedForwardParams& f) {
    out.push_back({prefix + ".w1", f.w1.flat()});
    out.push_back({prefix + ".b1", std::span<double>(f.b1)});
    out.push_back({prefix + ".w2", f.w2.flat()});
    out.push_back({prefix + ".b2", std::span<double>(f.b2)});
  };
  attn("enc_self", enc_self);
  ff("enc_ff", enc_ff);
  attn("dec_self", dec_self);
  attn("dec_cross", dec_cross);
  ff("dec_ff", dec_ff);
  out.push_back({"out_proj", out_proj.flat()});
  return out;
}

std::vector<std::span<double>> Seq2SeqParams::tensors() {
  std::vector<std::span<double>> out;
  for (auto& nt : named_tensors()) out.push_back(nt.values);
  return out;
}

std::vector<std::span<const double>> Seq2SeqParams::tensors() const {
  std::vector<std::span<const double>> out;
  for (auto& nt : const_cast<Seq2SeqParams*>(this)->named_tensors()) out.emplace_back(nt.values);
  return out;
}

bool Seq2SeqParams::all_finite() const {
  for (auto t : tensors())
    for (double v : t)
      if (!std::isfinite(v)) return false;
  return true;
}

void Seq2SeqParams::save(const std::filesystem::path& path) const {
  param_io::FlatFile f;
  f.magic = kMagic;
  f.version = kVersion;
  f.header = {static_cast<std::uint32_t>(embedding.rows()), static_cast<std::uint32_t>(embedding.cols())};
  param_io::pack(tensors(), f.values);
  param_io::write(path, f);
}

Seq2SeqParams Seq2SeqParams::load(const std::filesystem::path& path) {
  const param_io::FlatFile f = param_io::read(path);
  if (f.magic != kMagic || f.version != kVersion || f.header.size() != 2)
    throw Error(path.string() + ": not a generator parameter file");
  Seq2SeqParams p = zeros({f.header[0], f.header[1]});
  if (param_io::unpack(f.values, 0, p.tensors()) != f.values.size())
    throw Error(path.string() + ": parameter count does not match the header");
  return p;
}

Matrix seq2seq_forward(const Seq2SeqParams& params, const text::TokenSequence& input,
                       const text::TokenSequence& target_prefix) {
  EncoderState enc;
  run_encoder(params, input, enc);
  DecoderState dec;
  run_decoder(params, enc, target_prefix.ids, dec);
  Matrix logits;
  matmul(dec.y3, params.out_proj, logits);
  return logits;
}

double sequence_loss(const Seq2SeqParams& p, const text::TokenSequence& input, const text::TokenSequence& target,
                     Seq2SeqParams* grads, double grad_scale, std::size_t* positions_out) {
  std::vector<text::TokenId> prefix{text::kBos};
  prefix.insert(prefix.end(), target.ids.begin(), target.ids.end());
  std::vector<text::TokenId> expected(target.ids.begin(), target.ids.end());
  expected.push_back(text::kEos);

  EncoderState enc;
  run_encoder(p, input, enc);
  DecoderState dec;
  run_decoder(p, enc, prefix, dec);
  Matrix probs;
  matmul(dec.y3, p.out_proj, probs);

  double loss = 0.0;
  for (std::size_t t = 0; t < expected.size(); ++t) {
    auto row = probs.row(t);
    const double mx = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double v : row) total += std::exp(v - mx);
    loss += mx + std::log(total) - row[static_cast<std::size_t>(expected[t])];
  }
  if (positions_out != nullptr) *positions_out = expected.size();
  if (grads == nullptr) return loss;

  softmax_rows(probs);
  Matrix& d_logits = probs;
  for (std::size_t t = 0; t < expected.size(); ++t) d_logits(t, static_cast<std::size_t>(expected[t])) -= 1.0;
  for (double& v : d_logits.flat()) v *= grad_scale;

  Seq2SeqParams& g = *grads;
  matmul_at_b_acc(dec.y3, d_logits, g.out_proj);
  Matrix d_y3;
  matmul_a_bt(d_logits, p.out_proj, d_y3);

  // decoder, top down; each residual passes its gradient straight through
  Matrix d_y2 = d_y3;
  feed_forward_backward(p.dec_ff, dec.ff, d_y3, d_y2, g.dec_ff);
  Matrix d_y1 = d_y2;
  Matrix d_enc(enc.x2.rows(), enc.x2.cols());
  attention_backward(p.dec_cross, dec.cross_attn, d_y2, d_y1, d_enc, g.dec_cross);
  Matrix d_y0 = d_y1;
  attention_backward(p.dec_self, dec.self_attn, d_y1, d_y0, d_y0, g.dec_self);
  embed_backward(dec.ids, d_y0, g.embedding);

  Matrix d_x1 = d_enc;
  feed_forward_backward(p.enc_ff, enc.ff, d_enc, d_x1, g.enc_ff);
  Matrix d_x0 = d_x1;
  attention_backward(p.enc_self, enc.attn, d_x1, d_x0, d_x0, g.enc_self);
  embed_backward(enc.ids, d_x0, g.embedding);
  return loss;
}

double mean_sequence_loss(const Seq2SeqParams& params, const text::TokenSequence& input,
                          const text::TokenSequence& target) {
  std::size_t n = 0;
  const double total = sequence_loss(params, input, target, nullptr, 1.0, &n);
  return total / static_cast<double>(n);
}

text::TokenSequence generate_greedy_ids(const Seq2SeqParams& params, const text::TokenSequence& input,
                                        const DecodeConfig& cfg) {
  EncoderState enc;
  run_encoder(params, input, enc);
  std::vector<text::TokenId> prefix{text::kBos};
  text::TokenSequence out;
  const std::size_t d = params.out_proj.rows();
  const std::size_t vocab = params.out_proj.cols();
  std::vector<double> logits(vocab);
  for (std::size_t step = 0; step < cfg.max_target_length; ++step) {
    DecoderState dec;
    run_decoder(params, enc, prefix, dec);
    // only the last position's logits are needed
    std::fill(logits.begin(), logits.end(), 0.0);
    auto last = dec.y3.row(dec.y3.rows() - 1);
    for (std::size_t c = 0; c < d; ++c)
      if (last[c] != 0.0) simd::active().axpy(last[c], params.out_proj.row(c).data(), logits.data(), vocab);
    const auto best = static_cast<text::TokenId>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (best == text::kEos) break;
    out.ids.push_back(best);
    prefix.push_back(best);
  }
  return out;
}

}  // namespace ragcode::generate
