#pragma once
// Tokenizers and the shared code/NL vocabulary.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ragcode/corpus.hpp"

namespace ragcode::text {

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kCsep = 4;
inline constexpr TokenId kNsep = 5;
inline constexpr std::size_t kNumSpecials = 6;

/// Surface forms of the specials, indexed by id.
std::span<const std::string_view> special_tokens();

/// Whitespace/punctuation split, camelCase and underscore splitting,
/// lowercasing. A few two-character operators (==, !=, <=, >=, &&, ||, ->,
/// ++, --, +=, -=, *=, /=) and decimal literals stay whole. Bytes >= 0x80
/// are treated as word characters.
std::vector<std::string> tokenize_code(std::string_view text);

/// Lowercase, whitespace split, every punctuation character becomes its own
/// token.
std::vector<std::string> tokenize_nl(std::string_view text);

/// Code tokenizer for code documents, NL tokenizer for summaries.
std::vector<std::string> tokenize(std::string_view text, corpus::DocKind kind);

/// Tokens joined by single spaces: the space metrics and EM compare in.
std::string join(std::span<const std::string> tokens);

struct TokenSequence {
  std::vector<TokenId> ids;
  std::size_t length() const { return ids.size(); }
  bool operator==(const TokenSequence&) const = default;
};

class Vocabulary {
 public:
  /// Specials only.
  Vocabulary();

  std::size_t size() const { return id_to_token_.size(); }
  TokenId id(std::string_view token) const;  // kUnk when absent
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::span<const std::string> tokens() const { return id_to_token_; }

  TokenSequence encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(const TokenSequence& seq) const;

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  bool operator==(const Vocabulary& o) const { return id_to_token_ == o.id_to_token_; }

 private:
  void push(std::string token);

  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<std::string> id_to_token_;
};

/// Specials first, then tokens by descending frequency with lexicographic
/// tie-break, truncated to max_size. Throws Error if max_size < 6.
Vocabulary build_vocab(std::span<const std::vector<std::string>> corpora, std::size_t max_size);

}  // namespace ragcode::text
