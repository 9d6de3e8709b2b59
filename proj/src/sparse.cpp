#include "ragcode/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

#include "ragcode/text.hpp"

namespace ragcode::sparse {

namespace {

constexpr std::string_view kMagic = "ragcode-bm25";
constexpr int kVersion = 1;

bool better(const Hit& a, const Hit& b) { return a.score > b.score || (a.score == b.score && a.doc < b.doc); }

}  // namespace

InvertedIndex::InvertedIndex(std::span<const std::vector<std::string>> docs, double k1, double b)
    : k1_(k1), b_(b) {
  doc_lengths_.reserve(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    std::map<std::string_view, std::uint32_t> tf;
    for (const std::string& t : docs[d]) ++tf[t];
    for (const auto& [term, count] : tf) {
      auto it = postings_.find(term);
      if (it == postings_.end()) it = postings_.emplace(std::string(term), std::vector<Posting>{}).first;
      it->second.push_back({static_cast<std::uint32_t>(d), count});
    }
    doc_lengths_.push_back(static_cast<std::uint32_t>(docs[d].size()));
  }
  if (!doc_lengths_.empty())
    avg_doc_length_ = std::accumulate(doc_lengths_.begin(), doc_lengths_.end(), 0.0) /
                      static_cast<double>(doc_lengths_.size());
}

std::span<const Posting> InvertedIndex::postings(std::string_view term) const {
  auto it = postings_.find(term);
  if (it == postings_.end()) return {};
  return it->second;
}

double InvertedIndex::idf(std::string_view term) const {
  const double n = static_cast<double>(num_docs());
  const double df = static_cast<double>(doc_frequency(term));
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double InvertedIndex::term_weight(std::uint32_t tf, std::uint32_t dl, double idf) const {
  const double f = tf;
  const double norm = avg_doc_length_ > 0.0 ? static_cast<double>(dl) / avg_doc_length_ : 0.0;
  return idf * f * (k1_ + 1.0) / (f + k1_ * (1.0 - b_ + b_ * norm));
}

double InvertedIndex::score(std::span<const std::string> query, std::size_t doc) const {
  if (doc >= num_docs())
    throw Error("document ordinal " + std::to_string(doc) + " out of range (" + std::to_string(num_docs()) + ")");
  double total = 0.0;
  for (const std::string& term : query) {
    auto list = postings(term);
    auto it = std::lower_bound(list.begin(), list.end(), doc,
                               [](const Posting& p, std::size_t d) { return p.doc < d; });
    if (it == list.end() || it->doc != doc) continue;
    total += term_weight(it->tf, doc_lengths_[doc], idf(term));
  }
  return total;
}

std::vector<Hit> InvertedIndex::topk(std::span<const std::string> query, std::size_t k) const {
  if (k == 0 || num_docs() == 0) return {};
  // term-at-a-time, in query order, so each accumulator matches score() bit for bit
  std::vector<double> acc(num_docs(), 0.0);
  std::vector<char> touched(num_docs(), 0);
  for (const std::string& term : query) {
    auto list = postings(term);
    if (list.empty()) continue;
    const double w_idf = idf(term);
    for (const Posting& p : list) {
      acc[p.doc] += term_weight(p.tf, doc_lengths_[p.doc], w_idf);
      touched[p.doc] = 1;
    }
  }
  std::vector<Hit> hits;
  for (std::size_t d = 0; d < acc.size(); ++d)
    if (touched[d] && acc[d] > 0.0) hits.push_back({d, acc[d]});
  if (hits.size() > k) {
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), better);
    hits.resize(k);
  } else {
    std::sort(hits.begin(), hits.end(), better);
  }
  return hits;
}

void InvertedIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << kMagic << ' ' << kVersion << '\n';
  out << "params " << k1_ << ' ' << b_ << '\n';
  out << "docs " << doc_lengths_.size();
  for (auto dl : doc_lengths_) out << ' ' << dl;
  out << '\n';
  for (const auto& [term, list] : postings_) {
    out << "term " << term << ' ' << list.size();
    for (const Posting& p : list) out << ' ' << p.doc << ':' << p.tf;
    out << '\n';
  }
}

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const auto bad = [&](const std::string& why) { return Error(path.string() + ": " + why); };
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kMagic || version != kVersion) throw bad("not a BM25 index (or unsupported version)");
  InvertedIndex idx;
  std::string tag;
  if (!(in >> tag >> idx.k1_ >> idx.b_) || tag != "params") throw bad("missing params line");
  std::size_t n = 0;
  if (!(in >> tag >> n) || tag != "docs") throw bad("missing docs line");
  idx.doc_lengths_.resize(n);
  for (auto& dl : idx.doc_lengths_)
    if (!(in >> dl)) throw bad("truncated doc lengths");
  while (in >> tag) {
    if (tag != "term") throw bad("unexpected record '" + tag + "'");
    std::string term;
    std::size_t count = 0;
    if (!(in >> term >> count)) throw bad("truncated term record");
    std::vector<Posting> list(count);
    for (Posting& p : list) {
      char colon = 0;
      if (!(in >> p.doc >> colon >> p.tf) || colon != ':' || p.doc >= n) throw bad("bad posting for '" + term + "'");
    }
    idx.postings_.emplace(std::move(term), std::move(list));
  }
  if (n > 0)
    idx.avg_doc_length_ =
        std::accumulate(idx.doc_lengths_.begin(), idx.doc_lengths_.end(), 0.0) / static_cast<double>(n);
  return idx;
}

InvertedIndex build_index(const corpus::RetrievalDatabase& db) {
  std::vector<std::vector<std::string>> docs;
  docs.reserve(db.size());
  const corpus::DocKind kind = corpus::doc_kind_for(db.kind());
  for (const corpus::Document& d : db.documents()) docs.push_back(text::tokenize(d.text, kind));
  return InvertedIndex(docs);
}

std::vector<Hit> sparse_topk(const InvertedIndex& index, std::string_view query, corpus::DocKind query_kind,
                             std::size_t k) {
  const auto tokens = text::tokenize(query, query_kind);
  return index.topk(tokens, k);
}

std::optional<std::size_t> mine_hard_negative(const InvertedIndex& index, const corpus::RetrievalDatabase& db,
                                              std::span<const std::string> query_tokens, std::string_view target,
                                              std::size_t depth) {
  const std::string norm_target = corpus::normalize(target);
  for (const Hit& h : index.topk(query_tokens, depth))
    if (corpus::normalize(db[h.doc].text) != norm_target) return h.doc;
  return std::nullopt;
}

}  // namespace ragcode::sparse
