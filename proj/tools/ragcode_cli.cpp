// ragcode command-line driver. Every subcommand reads an optional key=value
// config file (--config), then --set overrides, then the named flags; later
// sources win.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ragcode/pipeline.hpp"
#include "ragcode/synthetic.hpp"

namespace fs = std::filesystem;
using namespace ragcode;

namespace {

struct Settings {
  std::optional<std::string> config;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;  // key -> value as given on the command line
};

// Flags shared by every subcommand, each mapped onto a config key.
const std::vector<std::pair<std::string, std::string>> kFlagKeys = {
    {"--seed", "seed"},
    {"--task", "task"},
    {"--method", "method"},
    {"--augment", "augment"},
    {"--generator", "generator"},
    {"--k", "k"},
    {"--max-len", "max_len"},
    {"--exclude-targets", "exclude_targets"},
    {"--db", "db"},
    {"--train", "train"},
    {"--test", "test"},
    {"--vocab", "vocab"},
    {"--retriever-model", "retriever.model"},
    {"--generator-model", "generator.model"},
    {"--hard-negatives", "retriever.hard_negatives"},
    {"--epochs", "generator.epochs"},
    {"--retriever-epochs", "retriever.epochs"},
    {"--eval-split", "eval_split"},
};

void add_settings(CLI::App* app, Settings& s) {
  app->add_option("--config", s.config, "key=value config file");
  app->add_option("--set", s.sets, "override a config key (key=value), repeatable");
  for (const auto& [flag, key] : kFlagKeys) {
    app->add_option_function<std::string>(flag, [&s, key = key](const std::string& v) { s.flags[key] = v; },
                                          "config key " + key);
  }
}

pipeline::PipelineConfig resolve(const Settings& s) {
  std::map<std::string, std::string> overrides;
  for (const auto& kv : s.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
    overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  for (const auto& [k, v] : s.flags) overrides[k] = v;
  std::optional<fs::path> file;
  if (s.config) file = *s.config;
  return pipeline::make_config(file, overrides);
}

std::vector<std::size_t> parse_ks(const std::string& list) {
  std::vector<std::size_t> out;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stoul(item));
    } catch (const std::exception&) {
      throw Error("cannot parse k value '" + item + "'");
    }
  }
  if (out.empty()) throw Error("empty k list");
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void emit(const std::optional<std::string>& out, const std::string& text) {
  if (out) write_text(*out, text);
  else std::cout << text;
}

text::Vocabulary load_or_build_vocab(const pipeline::PipelineConfig& cfg, const pipeline::Dataset& data) {
  if (!cfg.vocab.empty() && fs::exists(cfg.vocab)) return text::Vocabulary::load(cfg.vocab);
  return pipeline::build_pipeline_vocab(data, cfg);
}

text::Vocabulary require_vocab(const pipeline::PipelineConfig& cfg) {
  if (cfg.vocab.empty() || !fs::exists(cfg.vocab))
    throw Error("missing stage 'build-db': no vocabulary file (vocab = ...)");
  return text::Vocabulary::load(cfg.vocab);
}

corpus::RetrievalDatabase require_db(const pipeline::PipelineConfig& cfg) {
  if (cfg.db.empty() || !fs::exists(cfg.db)) throw Error("missing stage 'build-db': no database (db = ...)");
  return corpus::load_database(cfg.db, pipeline::database_kind(cfg.task));
}

std::vector<corpus::Document> require_queries(const fs::path& path, const char* what) {
  if (path.empty() || !fs::exists(path)) throw Error(std::string("no ") + what + " query file");
  return corpus::load_documents(path);
}

std::string report_text(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrieval-augmented code generation and summarization toolkit"};
  app.require_subcommand(1);

  // make-synthetic
  Settings syn_s;
  synthetic::SyntheticConfig syn_cfg;
  std::string syn_flavor = "near_copy";
  std::string syn_out;
  auto* syn = app.add_subcommand("make-synthetic", "write a synthetic MiniLang corpus");
  syn->add_option("--flavor", syn_flavor, "aligned, paraphrase or near_copy");
  syn->add_option("--train-size", syn_cfg.train, "training queries");
  syn->add_option("--test-size", syn_cfg.test, "test queries");
  syn->add_option("--variants", syn_cfg.variants, "near_copy: functions per family");
  syn->add_option("--near-copy-rate", syn_cfg.near_copy_rate, "near_copy: share of exact siblings");
  syn->add_option("--bimodal-fraction", syn_cfg.bimodal_fraction, "documents that keep their pair");
  syn->add_option("--out", syn_out, "output directory")->required();
  add_settings(syn, syn_s);

  // build-db
  Settings bdb_s;
  std::vector<std::string> bdb_inputs;
  bool bdb_dedup = false;
  std::optional<std::string> bdb_vocab_out;
  std::string bdb_out;
  auto* bdb = app.add_subcommand("build-db", "validate, merge and deduplicate documents into a database");
  bdb->add_option("--input", bdb_inputs, "JSONL document files")->required();
  bdb->add_flag("--dedup", bdb_dedup, "drop documents whose normalized text repeats");
  bdb->add_option("--vocab-out", bdb_vocab_out, "also write the pipeline vocabulary");
  bdb->add_option("--out", bdb_out, "database file")->required();
  add_settings(bdb, bdb_s);

  // train-retriever
  Settings tr_s;
  std::string tr_out;
  auto* tr = app.add_subcommand("train-retriever", "train the dense bi-encoder on training queries");
  tr->add_option("--out", tr_out, "retriever parameter file")->required();
  add_settings(tr, tr_s);

  // index
  Settings ix_s;
  std::string ix_out;
  auto* ix = app.add_subcommand("index", "build a BM25 or dense index over the database");
  ix->add_option("--out", ix_out, "index file")->required();
  add_settings(ix, ix_s);

  // retrieve
  Settings rt_s;
  std::optional<std::string> rt_index;
  std::string rt_queries;
  std::string rt_out;
  auto* rt = app.add_subcommand("retrieve", "top-k retrieval for a query file");
  rt->add_option("--index", rt_index, "index file from `index` (built on the fly when absent)");
  rt->add_option("--queries", rt_queries, "query JSONL")->required();
  rt->add_option("--out", rt_out, "retrieval results JSONL")->required();
  add_settings(rt, rt_s);

  // augment
  Settings au_s;
  std::string au_queries;
  std::optional<std::string> au_retrievals;
  std::string au_out;
  auto* au = app.add_subcommand("augment", "render generator inputs from queries and retrieval results");
  au->add_option("--queries", au_queries, "query JSONL")->required();
  au->add_option("--retrievals", au_retrievals, "retrieval results JSONL (not needed for augment=none)");
  au->add_option("--out", au_out, "augmented JSONL")->required();
  add_settings(au, au_s);

  // train-gen
  Settings tg_s;
  std::string tg_input;
  std::string tg_out;
  auto* tg = app.add_subcommand("train-gen", "train the seq2seq generator on augmented examples");
  tg->add_option("--augmented", tg_input, "augmented training JSONL")->required();
  tg->add_option("--out", tg_out, "generator parameter file")->required();
  add_settings(tg, tg_s);

  // generate
  Settings gn_s;
  std::string gn_input;
  std::string gn_out;
  auto* gn = app.add_subcommand("generate", "produce predictions with the copy baseline or the seq2seq model");
  gn->add_option("--augmented", gn_input, "augmented JSONL")->required();
  gn->add_option("--out", gn_out, "predictions JSONL")->required();
  add_settings(gn, gn_s);

  // evaluate
  Settings ev_s;
  std::string ev_input;
  std::optional<std::string> ev_out;
  auto* ev = app.add_subcommand("evaluate", "score predictions");
  ev->add_option("--predictions", ev_input, "predictions JSONL")->required();
  ev->add_option("--out", ev_out, "metrics JSON (stdout when absent)");
  add_settings(ev, ev_s);

  // run
  Settings rn_s;
  std::optional<std::string> rn_out;
  std::optional<std::string> rn_predictions;
  auto* rn = app.add_subcommand("run", "retrieve, augment, generate and evaluate in one go");
  rn->add_option("--out", rn_out, "metrics JSON (stdout when absent)");
  rn->add_option("--predictions-out", rn_predictions, "also write the predictions");
  add_settings(rn, rn_s);

  // sweep-k
  Settings sk_s;
  std::string sk_ks = "0,1,3,5";
  std::optional<std::string> sk_out;
  std::optional<std::string> sk_json;
  auto* sk = app.add_subcommand("sweep-k", "run the pipeline for several candidate counts");
  sk->add_option("--ks", sk_ks, "comma-separated k values");
  sk->add_option("--out", sk_out, "CSV (stdout when absent)");
  sk->add_option("--json", sk_json, "also write the rows as JSON");
  add_settings(sk, sk_s);

  // retrieval-eval
  Settings re_s;
  std::string re_ks = "1,5,10,100";
  std::optional<std::string> re_out;
  auto* re = app.add_subcommand("retrieval-eval", "recall@k and MRR for BM25 and dense retrieval");
  re->add_option("--ks", re_ks, "comma-separated k values");
  re->add_option("--out", re_out, "CSV (stdout when absent)");
  add_settings(re, re_s);

  // bucket-length
  Settings bl_s;
  std::vector<std::string> bl_inputs;
  std::string bl_edges = "0,16,32,64,128";
  std::optional<std::string> bl_out;
  auto* bl = app.add_subcommand("bucket-length", "BLEU and EM by reference length");
  bl->add_option("--predictions", bl_inputs, "label=predictions.jsonl, repeatable")->required();
  bl->add_option("--edges", bl_edges, "comma-separated bucket lower edges");
  bl->add_option("--out", bl_out, "CSV (stdout when absent)");
  add_settings(bl, bl_s);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto log = [](std::string_view msg) { std::cerr << msg << '\n'; };

    if (syn->parsed()) {
      const auto cfg = resolve(syn_s);
      syn_cfg.flavor = synthetic::parse_flavor(syn_flavor);
      syn_cfg.seed = cfg.seed;
      const auto corpus = synthetic::make_synthetic(syn_cfg);
      const fs::path dir(syn_out);
      fs::create_directories(dir);
      corpus::save_database(corpus.code_db, dir / "code_db.jsonl");
      corpus::save_database(corpus.summary_db, dir / "summary_db.jsonl");
      corpus::save_documents(corpus.train, dir / "train.jsonl");
      corpus::save_documents(corpus.test, dir / "test.jsonl");
      corpus::save_documents(synthetic::as_summarization_queries(corpus.train), dir / "train_sum.jsonl");
      corpus::save_documents(synthetic::as_summarization_queries(corpus.test), dir / "test_sum.jsonl");
      std::cerr << "wrote " << corpus.code_db.size() << " documents, " << corpus.train.size() << " train and "
                << corpus.test.size() << " test queries to " << dir.string() << '\n';
    } else if (bdb->parsed()) {
      const auto cfg = resolve(bdb_s);
      corpus::RetrievalDatabase db(pipeline::database_kind(cfg.task));
      for (const auto& in : bdb_inputs)
        for (auto& d : corpus::load_documents(in)) db.add(std::move(d));
      if (bdb_dedup) db = corpus::deduplicate(db);
      corpus::save_database(db, bdb_out);
      std::cerr << "database: " << db.size() << " documents\n";
      if (bdb_vocab_out) {
        pipeline::Dataset data{db, {}, {}};
        if (!cfg.train.empty()) data.train = corpus::load_documents(cfg.train);
        const auto vocab = pipeline::build_pipeline_vocab(data, cfg);
        vocab.save(*bdb_vocab_out);
        std::cerr << "vocabulary: " << vocab.size() << " tokens\n";
      }
    } else if (tr->parsed()) {
      const auto cfg = resolve(tr_s);
      const auto data = pipeline::load_dataset(cfg);
      const auto vocab = load_or_build_vocab(cfg, data);
      dense::TrainReport report;
      const auto model = pipeline::train_pipeline_retriever(data, vocab, cfg, &report);
      model.save(tr_out);
      std::cerr << "retriever loss " << report.initial_loss << " -> "
                << (report.epoch_loss.empty() ? report.initial_loss : report.epoch_loss.back()) << '\n';
    } else if (ix->parsed()) {
      const auto cfg = resolve(ix_s);
      const auto db = require_db(cfg);
      if (cfg.method == pipeline::Method::bm25) {
        sparse::build_index(db).save(ix_out);
      } else {
        if (cfg.retriever_model.empty()) throw Error("missing stage 'train-retriever': no retriever.model");
        const auto vocab = require_vocab(cfg);
        const auto model = dense::Retriever::load(cfg.retriever_model);
        const corpus::DocKind kind = corpus::doc_kind_for(db.kind());
        std::vector<text::TokenSequence> docs;
        for (const auto& d : db.documents()) docs.push_back(vocab.encode(text::tokenize(d.text, kind)));
        dense::build_dense_index(model.doc, docs).save(ix_out);
      }
      std::cerr << "indexed " << db.size() << " documents\n";
    } else if (rt->parsed()) {
      const auto cfg = resolve(rt_s);
      const auto db = require_db(cfg);
      const auto queries = require_queries(rt_queries, "retrieval");
      std::optional<text::Vocabulary> vocab;
      std::optional<pipeline::Searcher> searcher;
      if (cfg.method == pipeline::Method::bm25) {
        searcher = rt_index ? pipeline::Searcher::bm25(db, sparse::InvertedIndex::load(*rt_index))
                            : pipeline::Searcher::bm25(db);
      } else {
        if (cfg.retriever_model.empty()) throw Error("missing stage 'train-retriever': no retriever.model");
        vocab = require_vocab(cfg);
        auto model = dense::Retriever::load(cfg.retriever_model);
        searcher = rt_index ? pipeline::Searcher::dense(db, *vocab, std::move(model), dense::DenseIndex::load(*rt_index))
                            : pipeline::Searcher::dense(db, *vocab, std::move(model));
      }
      const auto hits = pipeline::retrieve(*searcher, queries, pipeline::query_kind(cfg.task), cfg.k,
                                           cfg.exclude_targets);
      pipeline::save_retrievals(rt_out, hits, db);
    } else if (au->parsed()) {
      const auto cfg = resolve(au_s);
      const auto db = require_db(cfg);
      const auto vocab = require_vocab(cfg);
      const auto queries = require_queries(au_queries, "augmentation");
      std::vector<pipeline::QueryHits> hits;
      if (cfg.augment != augment::Mode::none) {
        if (!au_retrievals) throw Error("missing stage 'retrieve': --retrievals is required unless augment=none");
        hits = pipeline::load_retrievals(*au_retrievals, db);
      }
      const auto records = pipeline::augment_queries(queries, hits, db, vocab, cfg);
      pipeline::save_augmented(au_out, records);
      std::size_t truncated = 0;
      for (const auto& r : records) truncated += r.truncated ? 1 : 0;
      std::cerr << records.size() << " inputs, " << truncated << " truncated\n";
    } else if (tg->parsed()) {
      const auto cfg = resolve(tg_s);
      const auto vocab = require_vocab(cfg);
      const auto records = pipeline::load_augmented(tg_input);
      const auto examples = pipeline::generator_examples(records, vocab, cfg.task);
      auto gcfg = cfg.generator_train_config(vocab.size());
      gcfg.on_epoch = [](std::size_t e, double loss) {
        std::cerr << "epoch " << e + 1 << " loss " << loss << '\n';
      };
      generate::train_generator(examples, gcfg).save(tg_out);
    } else if (gn->parsed()) {
      const auto cfg = resolve(gn_s);
      const auto records = pipeline::load_augmented(gn_input);
      std::optional<text::Vocabulary> vocab;
      std::optional<generate::Seq2SeqParams> model;
      if (cfg.generator == pipeline::GeneratorKind::seq2seq) {
        if (cfg.generator_model.empty()) throw Error("missing stage 'train-gen': no generator.model");
        model = generate::Seq2SeqParams::load(cfg.generator_model);
      }
      vocab = cfg.vocab.empty() ? text::Vocabulary() : text::Vocabulary::load(cfg.vocab);
      if (model && model->embedding.rows() != vocab->size())
        throw Error("missing stage 'build-db': generator vocabulary does not match the vocabulary file");
      const auto preds = pipeline::predict(records, cfg, *vocab, model ? &*model : nullptr);
      pipeline::save_predictions(gn_out, preds);
    } else if (ev->parsed()) {
      const auto cfg = resolve(ev_s);
      const auto preds = pipeline::load_predictions(ev_input);
      emit(ev_out, report_text(metrics::to_json(pipeline::evaluate_predictions(preds, cfg.task))));
    } else if (rn->parsed()) {
      const auto cfg = resolve(rn_s);
      const auto data = pipeline::load_dataset(cfg);
      pipeline::RunContext ctx;
      ctx.log = log;
      const auto result = pipeline::run_pipeline(cfg, data, ctx);
      if (rn_predictions) pipeline::save_predictions(*rn_predictions, result.predictions);
      nlohmann::ordered_json j;
      j["config"] = pipeline::to_json(cfg);
      j["metrics"] = metrics::to_json(result.report);
      j["truncated_inputs"] = result.truncated_inputs;
      emit(rn_out, report_text(j));
    } else if (sk->parsed()) {
      const auto cfg = resolve(sk_s);
      const auto data = pipeline::load_dataset(cfg);
      pipeline::RunContext ctx;
      ctx.log = log;
      const auto ks = parse_ks(sk_ks);
      const auto result = pipeline::sweep_k(cfg, data, ks, ctx);
      if (sk_json) write_text(*sk_json, report_text(result.to_json()));
      emit(sk_out, result.to_csv());
    } else if (re->parsed()) {
      const auto cfg = resolve(re_s);
      const auto data = pipeline::load_dataset(cfg);
      pipeline::RunContext ctx;
      ctx.log = log;
      const auto ks = parse_ks(re_ks);
      emit(re_out, pipeline::retrieval_eval(cfg, data, ks, ctx).to_csv());
    } else if (bl->parsed()) {
      std::vector<pipeline::LabeledPredictions> runs;
      for (const auto& arg : bl_inputs) {
        const auto eq = arg.find('=');
        if (eq == std::string::npos) throw Error("--predictions expects label=file, got '" + arg + "'");
        runs.push_back({arg.substr(0, eq), pipeline::load_predictions(arg.substr(eq + 1))});
      }
      const auto edges = parse_ks(bl_edges);
      emit(bl_out, pipeline::bucket_by_target_length(runs, edges).to_csv());
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
