#pragma once
// End-to-end retrieve -> augment -> generate -> evaluate, plus the k sweep,
// length bucketing and retrieval evaluation built on it.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ragcode/augment.hpp"
#include "ragcode/corpus.hpp"
#include "ragcode/dense.hpp"
#include "ragcode/generate.hpp"
#include "ragcode/metrics.hpp"
#include "ragcode/sparse.hpp"
#include "ragcode/text.hpp"

namespace ragcode::pipeline {

/// code_gen: summary -> code over a code database.
/// code_sum: code -> summary over a summary database.
enum class Task { code_gen, code_sum };
enum class Method { bm25, dense };
enum class GeneratorKind { copy, seq2seq };

Task parse_task(std::string_view s);
Method parse_method(std::string_view s);
GeneratorKind parse_generator(std::string_view s);
std::string_view to_string(Task t);
std::string_view to_string(Method m);
std::string_view to_string(GeneratorKind g);

corpus::DocKind query_kind(Task t);
corpus::DocKind target_kind(Task t);
corpus::DbKind database_kind(Task t);

enum class Split { train, test };

struct PipelineConfig {
  Task task = Task::code_gen;
  Method method = Method::bm25;
  augment::Mode augment = augment::Mode::case1;
  GeneratorKind generator = GeneratorKind::seq2seq;
  std::size_t k = 3;
  std::size_t max_len = 512;
  bool exclude_targets = true;
  std::uint64_t seed = 0;
  std::size_t vocab_size = 50000;
  /// Queries scored by retrieval_eval.
  Split eval_split = Split::test;

  // dense retriever training; dims.vocab comes from the vocabulary
  dense::EncoderDims retriever_dims;
  std::size_t retriever_epochs = 20;
  std::size_t retriever_batch_size = 16;
  double retriever_lr = 1e-3;
  bool hard_negatives = false;

  // seq2seq generator
  std::size_t gen_d = 64;
  std::size_t gen_epochs = 30;
  std::size_t gen_batch_size = 8;
  double gen_lr = 1e-3;
  std::size_t max_target_length = 128;

  // files (empty = not configured)
  std::filesystem::path db;
  std::filesystem::path train;
  std::filesystem::path test;
  std::filesystem::path vocab;
  std::filesystem::path retriever_model;
  std::filesystem::path generator_model;
  std::filesystem::path out_dir;

  dense::TrainConfig retriever_train_config(std::size_t vocab_size) const;
  generate::GenTrainConfig generator_train_config(std::size_t vocab_size) const;
};

/// Sets one key; throws Error naming the key for unknown keys or bad values.
void set_option(PipelineConfig& cfg, std::string_view key, std::string_view value);

/// Parses `key = value` lines; '#' starts a comment, blank lines are skipped.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

/// Applies the file (when given) and then `overrides`, so overrides win.
PipelineConfig make_config(const std::optional<std::filesystem::path>& file,
                           const std::map<std::string, std::string>& overrides);

nlohmann::ordered_json to_json(const PipelineConfig& cfg);

/// The database and query sets a run works on. Queries carry the reference
/// target in pair_text.
struct Dataset {
  corpus::RetrievalDatabase db;
  std::vector<corpus::Document> train;
  std::vector<corpus::Document> test;
};

/// Loads db/train/test from the configured paths. Throws Error naming the
/// missing stage input.
Dataset load_dataset(const PipelineConfig& cfg);

/// Vocabulary over database texts, their pairs, and training queries and
/// targets.
text::Vocabulary build_pipeline_vocab(const Dataset& data, const PipelineConfig& cfg);

std::vector<dense::TrainingPair> retriever_pairs(const Dataset& data, const text::Vocabulary& vocab,
                                                 const PipelineConfig& cfg);

dense::Retriever train_pipeline_retriever(const Dataset& data, const text::Vocabulary& vocab,
                                          const PipelineConfig& cfg, dense::TrainReport* report = nullptr);

struct ScoredDoc {
  std::size_t doc;  // ordinal in the database
  double score;
};

/// A searchable view of one database with either method.
class Searcher {
 public:
  static Searcher bm25(const corpus::RetrievalDatabase& db);
  static Searcher bm25(const corpus::RetrievalDatabase& db, sparse::InvertedIndex index);
  static Searcher dense(const corpus::RetrievalDatabase& db, const text::Vocabulary& vocab,
                        dense::Retriever model);
  static Searcher dense(const corpus::RetrievalDatabase& db, const text::Vocabulary& vocab,
                        dense::Retriever model, dense::DenseIndex index);

  Method method() const { return method_; }
  const corpus::RetrievalDatabase& db() const { return *db_; }

  /// Best first, at most k.
  std::vector<ScoredDoc> search(std::string_view query, corpus::DocKind kind, std::size_t k) const;

  /// Like search, but documents whose normalized text equals `exclude` are
  /// skipped before counting k.
  std::vector<ScoredDoc> search_excluding(std::string_view query, corpus::DocKind kind, std::size_t k,
                                          std::string_view exclude) const;

 private:
  Searcher() = default;
  Method method_ = Method::bm25;
  const corpus::RetrievalDatabase* db_ = nullptr;
  const text::Vocabulary* vocab_ = nullptr;
  sparse::InvertedIndex bm25_;
  std::optional<dense::Retriever> model_;
  dense::DenseIndex dense_;
};

struct QueryHits {
  std::string query_id;
  std::vector<ScoredDoc> hits;
};

std::vector<QueryHits> retrieve(const Searcher& searcher, std::span<const corpus::Document> queries,
                                corpus::DocKind query_kind, std::size_t k, bool exclude_targets);

/// JSONL, one {query_id, rank, doc_id, score} object per hit.
void save_retrievals(const std::filesystem::path& path, std::span<const QueryHits> results,
                     const corpus::RetrievalDatabase& db);
std::vector<QueryHits> load_retrievals(const std::filesystem::path& path, const corpus::RetrievalDatabase& db);

struct AugmentedRecord {
  std::string id;
  std::string input;                 // rendered tokens joined by spaces
  std::string target;                // reference text
  std::string base;                  // query text
  std::vector<augment::RetrievedCandidate> candidates;
  bool truncated = false;
  std::size_t candidates_kept = 0;
};

/// Throws Error when a query has no retrieval entry.
std::vector<AugmentedRecord> augment_queries(std::span<const corpus::Document> queries,
                                             std::span<const QueryHits> hits, const corpus::RetrievalDatabase& db,
                                             const text::Vocabulary& vocab, const PipelineConfig& cfg);

void save_augmented(const std::filesystem::path& path, std::span<const AugmentedRecord> records);
std::vector<AugmentedRecord> load_augmented(const std::filesystem::path& path);

std::vector<generate::GenExample> generator_examples(std::span<const AugmentedRecord> records,
                                                     const text::Vocabulary& vocab, Task task);

struct Prediction {
  std::string id;
  std::string hypothesis;  // tokenizer output joined by spaces
  std::string reference;   // same treatment
  std::string input;
  bool truncated = false;
};

std::vector<Prediction> predict(std::span<const AugmentedRecord> records, const PipelineConfig& cfg,
                                const text::Vocabulary& vocab, const generate::Seq2SeqParams* model);

void save_predictions(const std::filesystem::path& path, std::span<const Prediction> preds);
std::vector<Prediction> load_predictions(const std::filesystem::path& path);

metrics::MetricReport evaluate_predictions(std::span<const Prediction> preds, Task task);

struct RunResult {
  metrics::MetricReport report;
  std::vector<Prediction> predictions;
  std::size_t truncated_inputs = 0;
  generate::GenTrainReport generator_report;
};

/// Optional hooks for reusing expensive stages across runs.
struct RunContext {
  const text::Vocabulary* vocab = nullptr;
  const Searcher* searcher = nullptr;
  const dense::Retriever* retriever = nullptr;
  std::function<void(std::string_view)> log;
};

/// Trains whatever is not supplied (retriever for dense, generator for
/// seq2seq) on the training queries, then evaluates on the test queries.
/// Throws Error for augment=none with the copy generator and names the
/// missing stage when an input is absent.
RunResult run_pipeline(const PipelineConfig& cfg, const Dataset& data, const RunContext& ctx = {});
/// Loads the dataset from the configured paths first.
RunResult run_pipeline(const PipelineConfig& cfg);

struct ExperimentRow {
  std::string bucket;
  std::string method;
  std::string metric;
  double value = 0.0;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;
  std::string to_csv() const;
  nlohmann::ordered_json to_json() const;
};

/// Rows: one per (k, metric). The metrics are bleu, smoothed_bleu4,
/// exact_match, codebleu (code_gen only) and truncated_inputs.
ExperimentResult sweep_k(const PipelineConfig& cfg, const Dataset& data, std::span<const std::size_t> ks,
                         const RunContext& ctx = {});

inline const std::vector<std::size_t> kDefaultLengthEdges{0, 16, 32, 64, 128};

struct LabeledPredictions {
  std::string method;
  std::vector<Prediction> predictions;
};

/// Buckets [e_i, e_{i+1}) by reference token count, the last one open.
/// Rows per non-empty (bucket, method): count, bleu and exact_match.
/// Throws Error unless edges are non-empty and strictly increasing.
ExperimentResult bucket_by_target_length(std::span<const LabeledPredictions> runs,
                                         std::span<const std::size_t> edges = kDefaultLengthEdges);

/// Recall@k and MRR for BM25 and (when a retriever is available or can be
/// trained) dense retrieval, always with the target kept in the database.
ExperimentResult retrieval_eval(const PipelineConfig& cfg, const Dataset& data, std::span<const std::size_t> ks,
                                const RunContext& ctx = {});

}  // namespace ragcode::pipeline
