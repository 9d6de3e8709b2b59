#pragma once
// Retrieval databases: loading, deduplication, target exclusion, persistence.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace ragcode {

/// Base error for malformed inputs and broken contracts across the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ragcode

namespace ragcode::corpus {

enum class DocKind { code, summary };
enum class DbKind { code_db, summary_db };

std::string_view to_string(DocKind kind);
DocKind parse_doc_kind(std::string_view s);
DbKind db_kind_for(DocKind kind);
DocKind doc_kind_for(DbKind kind);

struct Document {
  std::string id;
  DocKind kind = DocKind::code;
  std::string text;
  std::optional<std::string> pair_text;
  std::string lang;

  bool bimodal() const { return pair_text.has_value(); }
  bool operator==(const Document&) const = default;
};

/// Collapses whitespace runs to one space and trims both ends. Case is kept.
std::string normalize(std::string_view text);

class RetrievalDatabase {
 public:
  explicit RetrievalDatabase(DbKind kind = DbKind::code_db) : kind_(kind) {}

  /// Validates and appends. Throws on kind mismatch, empty text, empty
  /// pair_text, or a duplicate id.
  void add(Document doc);

  DbKind kind() const { return kind_; }
  std::size_t size() const { return docs_.size(); }
  bool empty() const { return docs_.empty(); }
  const Document& operator[](std::size_t i) const { return docs_[i]; }
  std::span<const Document> documents() const { return docs_; }
  std::optional<std::size_t> find_id(std::string_view id) const;

  /// Ordinals whose normalized text equals normalize(text).
  std::vector<std::size_t> find_text(std::string_view text) const;

  /// Number of distinct normalized texts.
  std::size_t distinct_fingerprints() const { return by_text_.size(); }

 private:
  DbKind kind_;
  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_text_;
};

/// Reads one JSON object per line. Blank lines are skipped. Throws Error
/// naming the line number for malformed records and naming the id for
/// duplicates.
RetrievalDatabase load_database(const std::filesystem::path& path, DbKind kind);
RetrievalDatabase parse_database(std::string_view contents, DbKind kind);

/// Reads documents of any kind (query files mix nothing but are not tied to
/// a database kind).
std::vector<Document> load_documents(const std::filesystem::path& path);

void save_database(const RetrievalDatabase& db, const std::filesystem::path& path);
void save_documents(std::span<const Document> docs, const std::filesystem::path& path);
std::string serialize_document(const Document& doc);

/// Keeps the first document of each normalized text.
RetrievalDatabase deduplicate(const RetrievalDatabase& db);

/// Drops every document whose normalized text equals a normalized target.
RetrievalDatabase exclude_targets(const RetrievalDatabase& db, std::span<const std::string> targets);

}  // namespace ragcode::corpus
