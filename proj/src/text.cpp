#include "ragcode/text.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>

namespace ragcode::text {

namespace {

constexpr std::array<std::string_view, kNumSpecials> kSpecials = {"[PAD]", "[BOS]", "[EOS]",
                                                                  "[UNK]", "[CSEP]", "[NSEP]"};

constexpr std::array<std::string_view, 13> kCompoundOps = {"==", "!=", "<=", ">=", "&&", "||", "->",
                                                           "++", "--", "+=", "-=", "*=", "/="};

bool is_ascii_space(unsigned char c) { return c == ' ' || (c >= '\t' && c <= '\r'); }
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }
bool is_upper(unsigned char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(unsigned char c) { return c >= 'a' && c <= 'z'; }
bool is_word_char(unsigned char c) { return c >= 0x80 || is_digit(c) || is_upper(c) || is_lower(c) || c == '_'; }
bool is_punct(unsigned char c) { return c < 0x80 && !is_ascii_space(c) && !is_word_char(c) && c >= 0x20 && c != 0x7f; }

void lower_in_place(std::string& s) {
  for (char& c : s)
    if (is_upper(static_cast<unsigned char>(c))) c = static_cast<char>(c - 'A' + 'a');
}

// Splits an identifier at underscores and case boundaries:
// "getMuxerStream" -> get, muxer, stream; "HTTPServer" -> http, server.
void split_identifier(std::string_view word, std::vector<std::string>& out) {
  std::string current;
  const auto flush = [&] {
    if (!current.empty()) {
      lower_in_place(current);
      out.push_back(std::move(current));
      current.clear();
    }
  };
  for (std::size_t i = 0; i < word.size(); ++i) {
    const auto c = static_cast<unsigned char>(word[i]);
    if (c == '_') {
      flush();
      continue;
    }
    if (is_upper(c) && !current.empty()) {
      const auto prev = static_cast<unsigned char>(current.back());
      const bool next_lower = i + 1 < word.size() && is_lower(static_cast<unsigned char>(word[i + 1]));
      if (is_lower(prev) || is_digit(prev) || (is_upper(prev) && next_lower)) flush();
    }
    current.push_back(static_cast<char>(c));
  }
  flush();
}

}  // namespace

std::span<const std::string_view> special_tokens() { return kSpecials; }

std::vector<std::string> tokenize_code(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_ascii_space(c) || c < 0x20 || c == 0x7f) {
      ++i;
      continue;
    }
    if (is_digit(c)) {
      std::size_t j = i;
      while (j < text.size() && is_digit(static_cast<unsigned char>(text[j]))) ++j;
      if (j + 1 < text.size() && text[j] == '.' && is_digit(static_cast<unsigned char>(text[j + 1]))) {
        ++j;
        while (j < text.size() && is_digit(static_cast<unsigned char>(text[j]))) ++j;
      }
      // A number glued to letters ("2d", "x86") is handled as one identifier.
      if (j < text.size() && is_word_char(static_cast<unsigned char>(text[j]))) {
        while (j < text.size() && is_word_char(static_cast<unsigned char>(text[j]))) ++j;
        split_identifier(text.substr(i, j - i), out);
      } else {
        out.emplace_back(text.substr(i, j - i));
      }
      i = j;
      continue;
    }
    if (is_word_char(c)) {
      std::size_t j = i;
      while (j < text.size() && is_word_char(static_cast<unsigned char>(text[j]))) ++j;
      split_identifier(text.substr(i, j - i), out);
      i = j;
      continue;
    }
    if (i + 1 < text.size()) {
      const std::string_view two = text.substr(i, 2);
      if (std::find(kCompoundOps.begin(), kCompoundOps.end(), two) != kCompoundOps.end()) {
        out.emplace_back(two);
        i += 2;
        continue;
      }
    }
    out.emplace_back(1, static_cast<char>(c));
    ++i;
  }
  return out;
}

std::vector<std::string> tokenize_nl(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  const auto flush = [&] {
    if (!current.empty()) {
      lower_in_place(current);
      out.push_back(std::move(current));
      current.clear();
    }
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_ascii_space(c) || c < 0x20 || c == 0x7f) {
      flush();
    } else if (is_punct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      current.push_back(ch);
    }
  }
  flush();
  return out;
}

std::vector<std::string> tokenize(std::string_view text, corpus::DocKind kind) {
  return kind == corpus::DocKind::code ? tokenize_code(text) : tokenize_nl(text);
}

std::string join(std::span<const std::string> tokens) {
  std::string out;
  for (const std::string& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (std::string_view s : kSpecials) push(std::string(s));
}

void Vocabulary::push(std::string token) {
  token_to_id_.emplace(token, static_cast<TokenId>(id_to_token_.size()));
  id_to_token_.push_back(std::move(token));
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return token_to_id_.contains(std::string(token)); }

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
    throw Error("token id " + std::to_string(id) + " out of range");
  return id_to_token_[static_cast<std::size_t>(id)];
}

TokenSequence Vocabulary::encode(std::span<const std::string> tokens) const {
  TokenSequence seq;
  seq.ids.reserve(tokens.size());
  for (const std::string& t : tokens) seq.ids.push_back(id(t));
  return seq;
}

std::vector<std::string> Vocabulary::decode(const TokenSequence& seq) const {
  std::vector<std::string> out;
  out.reserve(seq.ids.size());
  for (TokenId id : seq.ids) out.push_back(token(id));
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const std::string& t : id_to_token_) out << t << '\n';
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kNumSpecials) throw Error("vocabulary is missing the special tokens");
  for (std::size_t i = 0; i < kNumSpecials; ++i)
    if (tokens[i] != kSpecials[i]) throw Error("vocabulary special at id " + std::to_string(i) + " is wrong");
  Vocabulary v;
  for (std::size_t i = kNumSpecials; i < tokens.size(); ++i) {
    if (tokens[i].empty() || v.contains(tokens[i]))
      throw Error("vocabulary token at id " + std::to_string(i) + " is empty or repeated");
    v.push(std::move(tokens[i]));
  }
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::string> tokens;
  for (std::string line; std::getline(in, line);) tokens.push_back(line);
  return from_tokens(std::move(tokens));
}

Vocabulary build_vocab(std::span<const std::vector<std::string>> corpora, std::size_t max_size) {
  if (max_size < kNumSpecials) throw Error("vocabulary max_size must be at least 6");
  std::map<std::string, std::size_t> counts;
  for (const auto& tokens : corpora)
    for (const std::string& t : tokens)
      if (!t.empty()) ++counts[t];
  for (std::string_view s : kSpecials) counts.erase(std::string(s));
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // counts is already lexicographic, so a stable sort on frequency is enough
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens(kSpecials.begin(), kSpecials.end());
  for (auto& [tok, _] : ranked) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(tok);
  }
  return Vocabulary::from_tokens(std::move(tokens));
}

}  // namespace ragcode::text
