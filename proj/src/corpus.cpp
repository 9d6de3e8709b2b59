#include "ragcode/corpus.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ragcode::corpus {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Document parse_record(std::string_view line, std::size_t line_no) {
  const auto fail = [&](const std::string& why) {
    return Error("line " + std::to_string(line_no) + ": " + why);
  };
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw fail(std::string("invalid JSON (") + e.what() + ")");
  }
  if (!j.is_object()) throw fail("record is not an object");
  const auto string_field = [&](const char* key, bool required) -> std::optional<std::string> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
      if (required) throw fail(std::string("missing key '") + key + "'");
      return std::nullopt;
    }
    if (!it->is_string()) throw fail(std::string("key '") + key + "' is not a string");
    return it->get<std::string>();
  };
  Document doc;
  doc.id = *string_field("id", true);
  try {
    doc.kind = parse_doc_kind(*string_field("kind", true));
  } catch (const Error& e) {
    throw fail(e.what());
  }
  doc.text = *string_field("text", true);
  doc.pair_text = string_field("pair_text", false);
  doc.lang = string_field("lang", false).value_or("");
  if (doc.id.empty()) throw fail("empty id");
  if (normalize(doc.text).empty()) throw fail("empty text for id '" + doc.id + "'");
  if (doc.pair_text && normalize(*doc.pair_text).empty())
    throw fail("empty pair_text for id '" + doc.id + "'");
  return doc;
}

template <typename Sink>
void for_each_record(std::string_view contents, Sink&& sink) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    std::size_t end = contents.find('\n', pos);
    if (end == std::string_view::npos) end = contents.size();
    std::string_view line = contents.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (normalize(line).empty()) continue;
    sink(parse_record(line, line_no), line_no);
  }
}

}  // namespace

std::string_view to_string(DocKind kind) { return kind == DocKind::code ? "code" : "summary"; }

DocKind parse_doc_kind(std::string_view s) {
  if (s == "code") return DocKind::code;
  if (s == "summary") return DocKind::summary;
  throw Error("unknown document kind '" + std::string(s) + "'");
}

DbKind db_kind_for(DocKind kind) { return kind == DocKind::code ? DbKind::code_db : DbKind::summary_db; }
DocKind doc_kind_for(DbKind kind) { return kind == DbKind::code_db ? DocKind::code : DocKind::summary; }

std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

void RetrievalDatabase::add(Document doc) {
  if (doc_kind_for(kind_) != doc.kind)
    throw Error("document '" + doc.id + "' has kind " + std::string(to_string(doc.kind)) +
                " but the database holds " + std::string(to_string(doc_kind_for(kind_))));
  std::string norm = normalize(doc.text);
  if (norm.empty()) throw Error("document '" + doc.id + "' has empty text");
  if (doc.pair_text && normalize(*doc.pair_text).empty())
    throw Error("document '" + doc.id + "' has empty pair_text");
  if (by_id_.contains(doc.id)) throw Error("duplicate id '" + doc.id + "'");
  const std::size_t ordinal = docs_.size();
  by_id_.emplace(doc.id, ordinal);
  by_text_[std::move(norm)].push_back(ordinal);
  docs_.push_back(std::move(doc));
}

std::optional<std::size_t> RetrievalDatabase::find_id(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> RetrievalDatabase::find_text(std::string_view text) const {
  auto it = by_text_.find(normalize(text));
  if (it == by_text_.end()) return {};
  return it->second;
}

RetrievalDatabase parse_database(std::string_view contents, DbKind kind) {
  RetrievalDatabase db(kind);
  for_each_record(contents, [&](Document doc, std::size_t line_no) {
    if (db.find_id(doc.id)) throw Error("line " + std::to_string(line_no) + ": duplicate id '" + doc.id + "'");
    if (doc.kind != doc_kind_for(kind))
      throw Error("line " + std::to_string(line_no) + ": kind " + std::string(to_string(doc.kind)) +
                  " does not match the database kind");
    db.add(std::move(doc));
  });
  return db;
}

RetrievalDatabase load_database(const std::filesystem::path& path, DbKind kind) {
  return parse_database(read_file(path), kind);
}

std::vector<Document> load_documents(const std::filesystem::path& path) {
  std::vector<Document> docs;
  std::unordered_set<std::string> seen;
  for_each_record(read_file(path), [&](Document doc, std::size_t line_no) {
    if (!seen.insert(doc.id).second)
      throw Error("line " + std::to_string(line_no) + ": duplicate id '" + doc.id + "'");
    docs.push_back(std::move(doc));
  });
  return docs;
}

std::string serialize_document(const Document& doc) {
  nlohmann::ordered_json j;
  j["id"] = doc.id;
  j["kind"] = to_string(doc.kind);
  j["text"] = doc.text;
  if (doc.pair_text) j["pair_text"] = *doc.pair_text;
  j["lang"] = doc.lang;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

void save_documents(std::span<const Document> docs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const Document& d : docs) out << serialize_document(d) << '\n';
}

void save_database(const RetrievalDatabase& db, const std::filesystem::path& path) {
  save_documents(db.documents(), path);
}

RetrievalDatabase deduplicate(const RetrievalDatabase& db) {
  RetrievalDatabase out(db.kind());
  std::unordered_set<std::string> seen;
  for (const Document& d : db.documents())
    if (seen.insert(normalize(d.text)).second) out.add(d);
  return out;
}

RetrievalDatabase exclude_targets(const RetrievalDatabase& db, std::span<const std::string> targets) {
  std::unordered_set<std::string> banned;
  for (const std::string& t : targets) banned.insert(normalize(t));
  RetrievalDatabase out(db.kind());
  for (const Document& d : db.documents())
    if (!banned.contains(normalize(d.text))) out.add(d);
  return out;
}

}  // namespace ragcode::corpus
