#include "ragcode/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>

namespace ragcode::pipeline {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

[[noreturn]] void missing_stage(std::string_view stage, std::string_view what) {
  throw Error("missing stage '" + std::string(stage) + "': " + std::string(what));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw Error("option '" + std::string(key) + "': cannot parse '" + std::string(value) + "'");
  return out;
}

double parse_double(std::string_view key, std::string_view value) {
  try {
    std::size_t used = 0;
    const std::string s(value);
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error("option '" + std::string(key) + "': cannot parse '" + std::string(value) + "'");
  }
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw Error("option '" + std::string(key) + "': expected true or false, got '" + std::string(value) + "'");
}

std::size_t parse_positive(std::string_view key, std::string_view value) {
  const auto v = parse_number<std::size_t>(key, value);
  if (v == 0) throw Error("option '" + std::string(key) + "' must be positive");
  return v;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string joined_tokens(std::string_view text, corpus::DocKind kind) {
  return text::join(text::tokenize(text, kind));
}

void check_queries(std::span<const corpus::Document> queries, Task task, std::string_view which) {
  for (const auto& q : queries) {
    if (q.kind != query_kind(task))
      throw Error(std::string(which) + " query '" + q.id + "' is a " + std::string(corpus::to_string(q.kind)) +
                  " but task " + std::string(to_string(task)) + " expects " +
                  std::string(corpus::to_string(query_kind(task))));
    if (!q.pair_text) throw Error(std::string(which) + " query '" + q.id + "' has no reference target (pair_text)");
  }
}

void log_line(const RunContext& ctx, const std::string& msg) {
  if (ctx.log) ctx.log(msg);
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

template <typename F>
void for_each_json_line(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
      f(j);
    } catch (const json::exception& e) {
      throw Error(path.string() + ": line " + std::to_string(n) + ": " + e.what());
    }
  }
}

}  // namespace

Task parse_task(std::string_view s) {
  if (s == "code_gen") return Task::code_gen;
  if (s == "code_sum") return Task::code_sum;
  throw Error("unknown task '" + std::string(s) + "' (expected code_gen or code_sum)");
}

Method parse_method(std::string_view s) {
  if (s == "bm25") return Method::bm25;
  if (s == "dense") return Method::dense;
  throw Error("unknown retrieval method '" + std::string(s) + "' (expected bm25 or dense)");
}

GeneratorKind parse_generator(std::string_view s) {
  if (s == "copy") return GeneratorKind::copy;
  if (s == "seq2seq") return GeneratorKind::seq2seq;
  throw Error("unknown generator '" + std::string(s) + "' (expected copy or seq2seq)");
}

std::string_view to_string(Task t) { return t == Task::code_gen ? "code_gen" : "code_sum"; }
std::string_view to_string(Method m) { return m == Method::bm25 ? "bm25" : "dense"; }
std::string_view to_string(GeneratorKind g) { return g == GeneratorKind::copy ? "copy" : "seq2seq"; }

corpus::DocKind query_kind(Task t) { return t == Task::code_gen ? corpus::DocKind::summary : corpus::DocKind::code; }
corpus::DocKind target_kind(Task t) { return t == Task::code_gen ? corpus::DocKind::code : corpus::DocKind::summary; }
corpus::DbKind database_kind(Task t) { return corpus::db_kind_for(target_kind(t)); }

dense::TrainConfig PipelineConfig::retriever_train_config(std::size_t vsize) const {
  dense::TrainConfig c;
  c.dims = retriever_dims;
  c.dims.vocab = vsize;
  c.batch_size = retriever_batch_size;
  c.lr = retriever_lr;
  c.epochs = retriever_epochs;
  c.seed = seed;
  c.hard_negatives = hard_negatives;
  return c;
}

generate::GenTrainConfig PipelineConfig::generator_train_config(std::size_t vsize) const {
  generate::GenTrainConfig c;
  c.dims = {vsize, gen_d};
  c.epochs = gen_epochs;
  c.batch_size = gen_batch_size;
  c.lr = gen_lr;
  c.seed = seed;
  return c;
}

void set_option(PipelineConfig& cfg, std::string_view key, std::string_view raw) {
  const std::string value = trim(raw);
  if (key == "task") cfg.task = parse_task(value);
  else if (key == "method") cfg.method = parse_method(value);
  else if (key == "augment") cfg.augment = augment::parse_mode(value);
  else if (key == "generator") cfg.generator = parse_generator(value);
  else if (key == "k") cfg.k = parse_number<std::size_t>(key, value);
  else if (key == "max_len") cfg.max_len = parse_positive(key, value);
  else if (key == "exclude_targets") cfg.exclude_targets = parse_bool(key, value);
  else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "vocab_size") cfg.vocab_size = parse_positive(key, value);
  else if (key == "eval_split") {
    if (value == "train") cfg.eval_split = Split::train;
    else if (value == "test") cfg.eval_split = Split::test;
    else throw Error("option 'eval_split': expected train or test, got '" + value + "'");
  }
  else if (key == "retriever.d_emb") cfg.retriever_dims.d_emb = parse_positive(key, value);
  else if (key == "retriever.d_h") cfg.retriever_dims.d_h = parse_positive(key, value);
  else if (key == "retriever.d_out") cfg.retriever_dims.d_out = parse_positive(key, value);
  else if (key == "retriever.epochs") cfg.retriever_epochs = parse_number<std::size_t>(key, value);
  else if (key == "retriever.batch_size") cfg.retriever_batch_size = parse_positive(key, value);
  else if (key == "retriever.lr") cfg.retriever_lr = parse_double(key, value);
  else if (key == "retriever.hard_negatives") cfg.hard_negatives = parse_bool(key, value);
  else if (key == "generator.d") cfg.gen_d = parse_positive(key, value);
  else if (key == "generator.epochs") cfg.gen_epochs = parse_number<std::size_t>(key, value);
  else if (key == "generator.batch_size") cfg.gen_batch_size = parse_positive(key, value);
  else if (key == "generator.lr") cfg.gen_lr = parse_double(key, value);
  else if (key == "generator.max_target_length") cfg.max_target_length = parse_positive(key, value);
  else if (key == "db") cfg.db = value;
  else if (key == "train") cfg.train = value;
  else if (key == "test") cfg.test = value;
  else if (key == "vocab") cfg.vocab = value;
  else if (key == "retriever.model") cfg.retriever_model = value;
  else if (key == "generator.model") cfg.generator_model = value;
  else if (key == "out_dir") cfg.out_dir = value;
  else throw Error("unknown option '" + std::string(key) + "'");
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw Error(path.string() + ": line " + std::to_string(n) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw Error(path.string() + ": line " + std::to_string(n) + ": empty key");
    out[key] = trim(t.substr(eq + 1));
  }
  return out;
}

PipelineConfig make_config(const std::optional<std::filesystem::path>& file,
                           const std::map<std::string, std::string>& overrides) {
  PipelineConfig cfg;
  if (file) {
    for (const auto& [k, v] : read_key_values(*file)) set_option(cfg, k, v);
  }
  for (const auto& [k, v] : overrides) set_option(cfg, k, v);
  return cfg;
}

ojson to_json(const PipelineConfig& c) {
  ojson j;
  j["task"] = to_string(c.task);
  j["method"] = to_string(c.method);
  j["augment"] = augment::to_string(c.augment);
  j["generator"] = to_string(c.generator);
  j["k"] = c.k;
  j["max_len"] = c.max_len;
  j["exclude_targets"] = c.exclude_targets;
  j["seed"] = c.seed;
  j["vocab_size"] = c.vocab_size;
  j["eval_split"] = c.eval_split == Split::train ? "train" : "test";
  j["retriever"] = {{"d_emb", c.retriever_dims.d_emb},  {"d_h", c.retriever_dims.d_h},
                    {"d_out", c.retriever_dims.d_out},  {"epochs", c.retriever_epochs},
                    {"batch_size", c.retriever_batch_size}, {"lr", c.retriever_lr},
                    {"hard_negatives", c.hard_negatives}};
  j["generator_params"] = {{"d", c.gen_d},
                           {"epochs", c.gen_epochs},
                           {"batch_size", c.gen_batch_size},
                           {"lr", c.gen_lr},
                           {"max_target_length", c.max_target_length}};
  return j;
}

Dataset load_dataset(const PipelineConfig& cfg) {
  if (cfg.db.empty()) missing_stage("build-db", "no database configured (db = ...)");
  if (!std::filesystem::exists(cfg.db)) missing_stage("build-db", "database " + cfg.db.string() + " does not exist");
  Dataset d{corpus::load_database(cfg.db, database_kind(cfg.task)), {}, {}};
  if (!cfg.train.empty()) d.train = corpus::load_documents(cfg.train);
  if (!cfg.test.empty()) d.test = corpus::load_documents(cfg.test);
  check_queries(d.train, cfg.task, "train");
  check_queries(d.test, cfg.task, "test");
  return d;
}

text::Vocabulary build_pipeline_vocab(const Dataset& data, const PipelineConfig& cfg) {
  const corpus::DocKind tk = target_kind(cfg.task);
  const corpus::DocKind qk = query_kind(cfg.task);
  std::vector<std::vector<std::string>> corpora;
  for (const auto& doc : data.db.documents()) {
    corpora.push_back(text::tokenize(doc.text, tk));
    if (doc.pair_text) corpora.push_back(text::tokenize(*doc.pair_text, qk));
  }
  for (const auto& q : data.train) {
    corpora.push_back(text::tokenize(q.text, qk));
    corpora.push_back(text::tokenize(*q.pair_text, tk));
  }
  return text::build_vocab(corpora, cfg.vocab_size);
}

std::vector<dense::TrainingPair> retriever_pairs(const Dataset& data, const text::Vocabulary& vocab,
                                                 const PipelineConfig& cfg) {
  const corpus::DocKind tk = target_kind(cfg.task);
  const corpus::DocKind qk = query_kind(cfg.task);
  std::optional<sparse::InvertedIndex> index;
  if (cfg.hard_negatives) index = sparse::build_index(data.db);
  std::vector<dense::TrainingPair> pairs;
  pairs.reserve(data.train.size());
  for (const auto& q : data.train) {
    const auto q_tokens = text::tokenize(q.text, qk);
    dense::TrainingPair p{vocab.encode(q_tokens), vocab.encode(text::tokenize(*q.pair_text, tk)), std::nullopt};
    if (index) {
      if (auto neg = sparse::mine_hard_negative(*index, data.db, q_tokens, *q.pair_text))
        p.hard_negative = vocab.encode(text::tokenize(data.db[*neg].text, tk));
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

dense::Retriever train_pipeline_retriever(const Dataset& data, const text::Vocabulary& vocab,
                                          const PipelineConfig& cfg, dense::TrainReport* report) {
  if (data.train.size() < 2) missing_stage("train-retriever", "dense retrieval needs at least 2 training queries");
  const auto pairs = retriever_pairs(data, vocab, cfg);
  return dense::train_retriever(pairs, cfg.retriever_train_config(vocab.size()), report);
}

// ---------------------------------------------------------------- Searcher

Searcher Searcher::bm25(const corpus::RetrievalDatabase& db) { return bm25(db, sparse::build_index(db)); }

Searcher Searcher::bm25(const corpus::RetrievalDatabase& db, sparse::InvertedIndex index) {
  if (index.num_docs() != db.size())
    throw Error("BM25 index covers " + std::to_string(index.num_docs()) + " documents but the database has " +
                std::to_string(db.size()));
  Searcher s;
  s.method_ = Method::bm25;
  s.db_ = &db;
  s.bm25_ = std::move(index);
  return s;
}

Searcher Searcher::dense(const corpus::RetrievalDatabase& db, const text::Vocabulary& vocab, dense::Retriever model) {
  const corpus::DocKind kind = corpus::doc_kind_for(db.kind());
  std::vector<text::TokenSequence> docs;
  docs.reserve(db.size());
  for (const auto& d : db.documents()) docs.push_back(vocab.encode(text::tokenize(d.text, kind)));
  dense::DenseIndex index = dense::build_dense_index(model.doc, docs);
  return dense(db, vocab, std::move(model), std::move(index));
}

Searcher Searcher::dense(const corpus::RetrievalDatabase& db, const text::Vocabulary& vocab, dense::Retriever model,
                         dense::DenseIndex index) {
  if (index.size() != db.size())
    throw Error("dense index covers " + std::to_string(index.size()) + " documents but the database has " +
                std::to_string(db.size()));
  if (model.query.dims().vocab != vocab.size())
    throw Error("retriever vocabulary (" + std::to_string(model.query.dims().vocab) +
                ") does not match the vocabulary file (" + std::to_string(vocab.size()) + ")");
  Searcher s;
  s.method_ = Method::dense;
  s.db_ = &db;
  s.vocab_ = &vocab;
  s.model_ = std::move(model);
  s.dense_ = std::move(index);
  return s;
}

std::vector<ScoredDoc> Searcher::search(std::string_view query, corpus::DocKind kind, std::size_t k) const {
  std::vector<ScoredDoc> out;
  if (k == 0) return out;
  if (method_ == Method::bm25) {
    for (const auto& h : sparse::sparse_topk(bm25_, query, kind, k)) out.push_back({h.doc, h.score});
  } else {
    const auto q = dense::encode(model_->query, vocab_->encode(text::tokenize(query, kind)));
    for (const auto& h : dense::dense_topk(dense_, q, k)) out.push_back({h.doc, h.score});
  }
  return out;
}

std::vector<ScoredDoc> Searcher::search_excluding(std::string_view query, corpus::DocKind kind, std::size_t k,
                                                  std::string_view exclude) const {
  if (k == 0) return {};
  const std::size_t blocked = db_->find_text(exclude).size();
  std::vector<ScoredDoc> hits = search(query, kind, k + blocked);
  const std::string target = corpus::normalize(exclude);
  std::erase_if(hits, [&](const ScoredDoc& h) { return corpus::normalize((*db_)[h.doc].text) == target; });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

std::vector<QueryHits> retrieve(const Searcher& searcher, std::span<const corpus::Document> queries,
                                corpus::DocKind kind, std::size_t k, bool exclude_targets) {
  std::vector<QueryHits> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    QueryHits qh{q.id, {}};
    if (exclude_targets) {
      if (!q.pair_text) throw Error("query '" + q.id + "' has no target to exclude");
      qh.hits = searcher.search_excluding(q.text, kind, k, *q.pair_text);
    } else {
      qh.hits = searcher.search(q.text, kind, k);
    }
    out.push_back(std::move(qh));
  }
  return out;
}

void save_retrievals(const std::filesystem::path& path, std::span<const QueryHits> results,
                     const corpus::RetrievalDatabase& db) {
  auto out = open_out(path);
  for (const auto& r : results) {
    for (std::size_t i = 0; i < r.hits.size(); ++i) {
      ojson j;
      j["query_id"] = r.query_id;
      j["rank"] = i + 1;
      j["doc_id"] = db[r.hits[i].doc].id;
      j["score"] = r.hits[i].score;
      out << j.dump() << '\n';
    }
  }
}

std::vector<QueryHits> load_retrievals(const std::filesystem::path& path, const corpus::RetrievalDatabase& db) {
  std::vector<QueryHits> out;
  std::unordered_map<std::string, std::size_t> slot;
  for_each_json_line(path, [&](const json& j) {
    const std::string qid = j.at("query_id").get<std::string>();
    const std::string did = j.at("doc_id").get<std::string>();
    const auto rank = j.at("rank").get<std::size_t>();
    const auto ord = db.find_id(did);
    if (!ord) throw Error("retrieval for '" + qid + "' names unknown document '" + did + "'");
    auto [it, fresh] = slot.emplace(qid, out.size());
    if (fresh) out.push_back({qid, {}});
    auto& hits = out[it->second].hits;
    if (rank != hits.size() + 1)
      throw Error("retrieval for '" + qid + "' has rank " + std::to_string(rank) + " out of order");
    hits.push_back({*ord, j.at("score").get<double>()});
  });
  return out;
}

// ---------------------------------------------------------------- augment

std::vector<AugmentedRecord> augment_queries(std::span<const corpus::Document> queries,
                                             std::span<const QueryHits> hits, const corpus::RetrievalDatabase& db,
                                             const text::Vocabulary& vocab, const PipelineConfig& cfg) {
  std::unordered_map<std::string_view, const QueryHits*> by_id;
  for (const auto& h : hits) by_id[h.query_id] = &h;
  const augment::RenderOptions opts{query_kind(cfg.task), target_kind(cfg.task), cfg.max_len};
  std::vector<AugmentedRecord> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    std::vector<augment::RetrievedCandidate> cands;
    if (cfg.augment != augment::Mode::none) {
      auto it = by_id.find(q.id);
      if (it == by_id.end()) missing_stage("retrieve", "no retrieval results for query '" + q.id + "'");
      const auto& list = it->second->hits;
      for (std::size_t i = 0; i < list.size() && i < cfg.k; ++i) {
        const auto& d = db[list[i].doc];
        cands.push_back({d.text, d.pair_text, list[i].score, i + 1});
      }
    }
    augment::validate_candidates(cands);
    const auto rendered = augment::render(cfg.augment, q.text, cands, vocab, opts);
    out.push_back({q.id, text::join(rendered.tokens), q.pair_text.value_or(""), q.text, std::move(cands),
                   rendered.truncated, rendered.candidates_kept});
  }
  return out;
}

void save_augmented(const std::filesystem::path& path, std::span<const AugmentedRecord> records) {
  auto out = open_out(path);
  for (const auto& r : records) {
    ojson j;
    j["id"] = r.id;
    j["input"] = r.input;
    j["target"] = r.target;
    j["base"] = r.base;
    j["truncated"] = r.truncated;
    j["candidates_kept"] = r.candidates_kept;
    ojson cands = ojson::array();
    for (const auto& c : r.candidates) {
      ojson cj;
      cj["rank"] = c.rank;
      cj["score"] = c.score;
      cj["text"] = c.primary_text;
      if (c.paired_text) cj["pair_text"] = *c.paired_text;
      cands.push_back(std::move(cj));
    }
    j["candidates"] = std::move(cands);
    out << j.dump() << '\n';
  }
}

std::vector<AugmentedRecord> load_augmented(const std::filesystem::path& path) {
  std::vector<AugmentedRecord> out;
  for_each_json_line(path, [&](const json& j) {
    AugmentedRecord r;
    r.id = j.at("id").get<std::string>();
    r.input = j.at("input").get<std::string>();
    r.target = j.at("target").get<std::string>();
    r.base = j.value("base", std::string());
    r.truncated = j.value("truncated", false);
    r.candidates_kept = j.value("candidates_kept", std::size_t{0});
    for (const auto& cj : j.value("candidates", json::array())) {
      augment::RetrievedCandidate c;
      c.rank = cj.at("rank").get<std::size_t>();
      c.score = cj.at("score").get<double>();
      c.primary_text = cj.at("text").get<std::string>();
      if (cj.contains("pair_text")) c.paired_text = cj.at("pair_text").get<std::string>();
      r.candidates.push_back(std::move(c));
    }
    augment::validate_candidates(r.candidates);
    out.push_back(std::move(r));
  });
  return out;
}

// ---------------------------------------------------------------- generate

std::vector<generate::GenExample> generator_examples(std::span<const AugmentedRecord> records,
                                                     const text::Vocabulary& vocab, Task task) {
  std::vector<generate::GenExample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back({vocab.encode(metrics::whitespace_tokens(r.input)),
                   vocab.encode(text::tokenize(r.target, target_kind(task)))});
  }
  return out;
}

std::vector<Prediction> predict(std::span<const AugmentedRecord> records, const PipelineConfig& cfg,
                                const text::Vocabulary& vocab, const generate::Seq2SeqParams* model) {
  const corpus::DocKind tk = target_kind(cfg.task);
  if (cfg.generator == GeneratorKind::copy && cfg.augment == augment::Mode::none)
    throw Error("the copy generator needs retrieved candidates; augment=none leaves nothing to copy");
  if (cfg.generator == GeneratorKind::seq2seq && model == nullptr)
    missing_stage("train-gen", "no generator model");
  const generate::DecodeConfig dc{cfg.max_target_length, cfg.seed};
  std::vector<Prediction> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    Prediction p{r.id, {}, joined_tokens(r.target, tk), r.input, r.truncated};
    if (cfg.generator == GeneratorKind::copy) {
      p.hypothesis = joined_tokens(generate::copy_top1(r.candidates), tk);
    } else {
      p.hypothesis = generate::generate_greedy(*model, vocab.encode(metrics::whitespace_tokens(r.input)), vocab, dc);
    }
    out.push_back(std::move(p));
  }
  return out;
}

void save_predictions(const std::filesystem::path& path, std::span<const Prediction> preds) {
  auto out = open_out(path);
  for (const auto& p : preds) {
    ojson j;
    j["id"] = p.id;
    j["hypothesis"] = p.hypothesis;
    j["reference"] = p.reference;
    j["input"] = p.input;
    j["truncated"] = p.truncated;
    out << j.dump() << '\n';
  }
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  std::vector<Prediction> out;
  for_each_json_line(path, [&](const json& j) {
    out.push_back({j.at("id").get<std::string>(), j.at("hypothesis").get<std::string>(),
                   j.at("reference").get<std::string>(), j.value("input", std::string()),
                   j.value("truncated", false)});
  });
  return out;
}

metrics::MetricReport evaluate_predictions(std::span<const Prediction> preds, Task task) {
  std::vector<std::string> hyps;
  std::vector<std::string> refs;
  for (const auto& p : preds) {
    hyps.push_back(p.hypothesis);
    refs.push_back(p.reference);
  }
  return metrics::evaluate_generation(hyps, refs, task == Task::code_gen);
}

// ---------------------------------------------------------------- runs

RunResult run_pipeline(const PipelineConfig& cfg, const Dataset& data, const RunContext& ctx) {
  if (cfg.generator == GeneratorKind::copy && cfg.augment == augment::Mode::none)
    throw Error("the copy generator needs retrieved candidates; augment=none leaves nothing to copy");
  if (data.test.empty()) missing_stage("retrieve", "no test queries");
  check_queries(data.train, cfg.task, "train");
  check_queries(data.test, cfg.task, "test");

  std::optional<text::Vocabulary> own_vocab;
  if (ctx.vocab == nullptr) {
    own_vocab = !cfg.vocab.empty() && std::filesystem::exists(cfg.vocab) ? text::Vocabulary::load(cfg.vocab)
                                                                          : build_pipeline_vocab(data, cfg);
  }
  const text::Vocabulary& vocab = ctx.vocab != nullptr ? *ctx.vocab : *own_vocab;

  const bool needs_retrieval = cfg.augment != augment::Mode::none && cfg.k > 0;
  std::optional<Searcher> own_searcher;
  const Searcher* searcher = ctx.searcher;
  if (needs_retrieval && searcher == nullptr) {
    if (cfg.method == Method::bm25) {
      own_searcher = Searcher::bm25(data.db);
    } else if (ctx.retriever != nullptr) {
      own_searcher = Searcher::dense(data.db, vocab, *ctx.retriever);
    } else if (!cfg.retriever_model.empty()) {
      own_searcher = Searcher::dense(data.db, vocab, dense::Retriever::load(cfg.retriever_model));
    } else {
      log_line(ctx, "training dense retriever");
      own_searcher = Searcher::dense(data.db, vocab, train_pipeline_retriever(data, vocab, cfg));
    }
    searcher = &*own_searcher;
  }
  if (searcher != nullptr && needs_retrieval && searcher->method() != cfg.method)
    throw Error("supplied searcher uses " + std::string(to_string(searcher->method())) + " but the config asks for " +
                std::string(to_string(cfg.method)));

  const corpus::DocKind qk = query_kind(cfg.task);
  const auto hits_for = [&](std::span<const corpus::Document> qs) {
    return needs_retrieval ? retrieve(*searcher, qs, qk, cfg.k, cfg.exclude_targets) : std::vector<QueryHits>{};
  };
  PipelineConfig render_cfg = cfg;
  if (!needs_retrieval) render_cfg.augment = augment::Mode::none;
  if (cfg.generator == GeneratorKind::copy) render_cfg.augment = cfg.augment;

  RunResult result;
  const auto test_hits = hits_for(data.test);
  std::vector<AugmentedRecord> test_records;
  if (cfg.generator == GeneratorKind::copy && !needs_retrieval) {
    for (const auto& q : data.test) test_records.push_back({q.id, "", *q.pair_text, q.text, {}, false, 0});
  } else {
    test_records = augment_queries(data.test, test_hits, data.db, vocab, render_cfg);
  }

  std::optional<generate::Seq2SeqParams> model;
  if (cfg.generator == GeneratorKind::seq2seq) {
    if (!cfg.generator_model.empty()) {
      model = generate::Seq2SeqParams::load(cfg.generator_model);
    } else {
      if (data.train.empty()) missing_stage("train-gen", "no training queries to fit the generator on");
      const auto train_records = augment_queries(data.train, hits_for(data.train), data.db, vocab, render_cfg);
      const auto examples = generator_examples(train_records, vocab, cfg.task);
      auto gcfg = cfg.generator_train_config(vocab.size());
      if (ctx.log) gcfg.on_epoch = [&](std::size_t e, double loss) {
        ctx.log("generator epoch " + std::to_string(e + 1) + " loss " + std::to_string(loss));
      };
      model = generate::train_generator(examples, gcfg, &result.generator_report);
    }
    if (model->embedding.rows() != vocab.size())
      throw Error("generator vocabulary (" + std::to_string(model->embedding.rows()) +
                  ") does not match the vocabulary (" + std::to_string(vocab.size()) + ")");
  }

  result.predictions = predict(test_records, render_cfg, vocab, model ? &*model : nullptr);
  for (const auto& r : test_records) result.truncated_inputs += r.truncated ? 1 : 0;
  result.report = evaluate_predictions(result.predictions, cfg.task);
  return result;
}

RunResult run_pipeline(const PipelineConfig& cfg) { return run_pipeline(cfg, load_dataset(cfg)); }

// ---------------------------------------------------------------- experiments

std::string ExperimentResult::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "bucket,method,metric,value\n";
  for (const auto& r : rows) out << r.bucket << ',' << r.method << ',' << r.metric << ',' << r.value << '\n';
  return out.str();
}

ojson ExperimentResult::to_json() const {
  ojson arr = ojson::array();
  for (const auto& r : rows) arr.push_back({{"bucket", r.bucket}, {"method", r.method}, {"metric", r.metric},
                                            {"value", r.value}});
  return arr;
}

ExperimentResult sweep_k(const PipelineConfig& cfg, const Dataset& data, std::span<const std::size_t> ks,
                         const RunContext& ctx) {
  if (ks.empty()) throw Error("sweep-k needs at least one k");
  ExperimentResult out;
  std::optional<text::Vocabulary> own_vocab;
  RunContext inner = ctx;
  if (inner.vocab == nullptr) {
    own_vocab = build_pipeline_vocab(data, cfg);
    inner.vocab = &*own_vocab;
  }
  std::optional<Searcher> own_searcher;
  std::optional<dense::Retriever> own_retriever;
  if (inner.searcher == nullptr && cfg.augment != augment::Mode::none) {
    if (cfg.method == Method::bm25) {
      own_searcher = Searcher::bm25(data.db);
    } else {
      if (inner.retriever == nullptr) {
        own_retriever = cfg.retriever_model.empty() ? train_pipeline_retriever(data, *inner.vocab, cfg)
                                                    : dense::Retriever::load(cfg.retriever_model);
        inner.retriever = &*own_retriever;
      }
      own_searcher = Searcher::dense(data.db, *inner.vocab, *inner.retriever);
    }
    inner.searcher = &*own_searcher;
  }
  const std::string method(to_string(cfg.method));
  for (std::size_t k : ks) {
    PipelineConfig c = cfg;
    c.k = k;
    log_line(ctx, "sweep k=" + std::to_string(k));
    const RunResult r = run_pipeline(c, data, inner);
    const std::string b = std::to_string(k);
    out.rows.push_back({b, method, "bleu", r.report.bleu});
    out.rows.push_back({b, method, "smoothed_bleu4", r.report.smoothed_bleu4});
    out.rows.push_back({b, method, "exact_match", r.report.exact_match});
    if (r.report.has_codebleu) out.rows.push_back({b, method, "codebleu", r.report.codebleu.score});
    out.rows.push_back({b, method, "truncated_inputs", static_cast<double>(r.truncated_inputs)});
  }
  return out;
}

ExperimentResult bucket_by_target_length(std::span<const LabeledPredictions> runs, std::span<const std::size_t> edges) {
  if (edges.empty()) throw Error("bucket edges must not be empty");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (edges[i] <= edges[i - 1]) throw Error("bucket edges must be strictly increasing");
  const auto label = [&](std::size_t b) {
    return "[" + std::to_string(edges[b]) + "," + (b + 1 < edges.size() ? std::to_string(edges[b + 1]) : "inf") + ")";
  };
  ExperimentResult out;
  for (std::size_t b = 0; b < edges.size(); ++b) {
    for (const auto& run : runs) {
      std::vector<std::string> hyps;
      std::vector<std::string> refs;
      for (const auto& p : run.predictions) {
        const std::size_t len = metrics::whitespace_tokens(p.reference).size();
        if (len < edges[b] || (b + 1 < edges.size() && len >= edges[b + 1])) continue;
        hyps.push_back(p.hypothesis);
        refs.push_back(p.reference);
      }
      if (hyps.empty()) continue;
      out.rows.push_back({label(b), run.method, "count", static_cast<double>(hyps.size())});
      out.rows.push_back({label(b), run.method, "bleu", metrics::corpus_bleu(hyps, refs)});
      out.rows.push_back({label(b), run.method, "exact_match", metrics::exact_match(hyps, refs)});
    }
  }
  return out;
}

ExperimentResult retrieval_eval(const PipelineConfig& cfg, const Dataset& data, std::span<const std::size_t> ks,
                                const RunContext& ctx) {
  const auto& queries = cfg.eval_split == Split::train ? data.train : data.test;
  if (queries.empty()) missing_stage("retrieve", "no queries to evaluate");
  if (ks.empty()) throw Error("retrieval-eval needs at least one k");
  check_queries(queries, cfg.task, "evaluation");
  std::optional<text::Vocabulary> own_vocab;
  const text::Vocabulary* vocab = ctx.vocab;
  if (vocab == nullptr) {
    own_vocab = !cfg.vocab.empty() && std::filesystem::exists(cfg.vocab) ? text::Vocabulary::load(cfg.vocab)
                                                                          : build_pipeline_vocab(data, cfg);
    vocab = &*own_vocab;
  }
  // Rankings use the first document of each fingerprint so duplicates of the
  // gold text count as the gold.
  const auto canonical = [&](std::size_t ord) { return data.db[data.db.find_text(data.db[ord].text).front()].id; };
  std::vector<std::string> gold;
  for (const auto& q : queries) {
    const auto matches = data.db.find_text(*q.pair_text);
    gold.push_back(matches.empty() ? std::string("\x1f<absent>") : data.db[matches.front()].id);
  }
  const corpus::DocKind qk = query_kind(cfg.task);
  ExperimentResult out;
  const auto score = [&](const Searcher& s) {
    std::vector<std::vector<std::string>> rankings;
    for (const auto& q : queries) {
      std::vector<std::string> ids;
      for (const auto& h : s.search(q.text, qk, data.db.size())) ids.push_back(canonical(h.doc));
      rankings.push_back(std::move(ids));
    }
    const std::string m(to_string(s.method()));
    for (const auto& [k, v] : metrics::recall_at_k(rankings, gold, ks)) out.rows.push_back({std::to_string(k), m, "recall", v});
    out.rows.push_back({"all", m, "mrr", metrics::mrr(rankings, gold)});
  };
  score(Searcher::bm25(data.db));
  std::optional<dense::Retriever> model;
  if (ctx.retriever != nullptr) model = *ctx.retriever;
  else if (!cfg.retriever_model.empty()) model = dense::Retriever::load(cfg.retriever_model);
  else if (data.train.size() >= 2) model = train_pipeline_retriever(data, *vocab, cfg);
  if (model) score(Searcher::dense(data.db, *vocab, std::move(*model)));
  return out;
}

}  // namespace ragcode::pipeline
