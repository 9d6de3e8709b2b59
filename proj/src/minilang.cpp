#include "ragcode/minilang.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <unordered_map>

namespace ragcode::minilang {

namespace {

enum class Tok { Name, Number, String, Keyword, Punct, End };

struct Token {
  Tok type;
  std::string text;
};

bool is_alpha(unsigned char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

std::optional<std::vector<Token>> lex(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < src.size()) {
    const auto c = static_cast<unsigned char>(src[i]);
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      ++i;
    } else if (is_alpha(c)) {
      std::size_t j = i;
      while (j < src.size() && (is_alpha(static_cast<unsigned char>(src[j])) || is_digit(static_cast<unsigned char>(src[j])))) ++j;
      std::string word(src.substr(i, j - i));
      out.push_back({is_keyword(word) ? Tok::Keyword : Tok::Name, std::move(word)});
      i = j;
    } else if (is_digit(c)) {
      std::size_t j = i;
      while (j < src.size() && is_digit(static_cast<unsigned char>(src[j]))) ++j;
      if (j + 1 < src.size() && src[j] == '.' && is_digit(static_cast<unsigned char>(src[j + 1]))) {
        ++j;
        while (j < src.size() && is_digit(static_cast<unsigned char>(src[j]))) ++j;
      }
      out.push_back({Tok::Number, std::string(src.substr(i, j - i))});
      i = j;
    } else if (c == '"') {
      const std::size_t close = src.find('"', i + 1);
      if (close == std::string_view::npos) return std::nullopt;
      out.push_back({Tok::String, std::string(src.substr(i, close - i + 1))});
      i = close + 1;
    } else {
      const std::string_view two = src.substr(i, 2);
      if (two == "==" || two == "!=") {
        out.push_back({Tok::Punct, std::string(two)});
        i += 2;
        continue;
      }
      if (std::string_view("(){},;=+-*/<>").find(static_cast<char>(c)) == std::string_view::npos) return std::nullopt;
      out.push_back({Tok::Punct, std::string(1, static_cast<char>(c))});
      ++i;
    }
  }
  out.push_back({Tok::End, ""});
  return out;
}

struct SyntaxError {};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  AstNode program() {
    AstNode root{NodeKind::Program, "", {}};
    while (peek().type != Tok::End) {
      if (is(Tok::Keyword, "def")) root.children.push_back(funcdef());
      else root.children.push_back(stmt());
    }
    return root;
  }

 private:
  static constexpr int kMaxDepth = 200;

  const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
  bool is(Tok t, std::string_view text) const { return peek().type == t && peek().text == text; }
  bool is_punct(std::string_view text) const { return is(Tok::Punct, text); }

  Token take() {
    Token t = peek();
    if (pos_ < toks_.size() - 1) ++pos_;
    return t;
  }

  void expect(std::string_view punct) {
    if (!is_punct(punct)) throw SyntaxError{};
    take();
  }

  std::string name() {
    if (peek().type != Tok::Name) throw SyntaxError{};
    return take().text;
  }

  struct DepthGuard {
    explicit DepthGuard(int& d) : depth(d) {
      if (++depth > kMaxDepth) throw SyntaxError{};
    }
    ~DepthGuard() { --depth; }
    int& depth;
  };

  AstNode funcdef() {
    take();  // def
    AstNode fn{NodeKind::FuncDef, name(), {}};
    expect("(");
    if (!is_punct(")")) {
      fn.children.push_back({NodeKind::Param, name(), {}});
      while (is_punct(",")) {
        take();
        fn.children.push_back({NodeKind::Param, name(), {}});
      }
    }
    expect(")");
    fn.children.push_back(block());
    return fn;
  }

  AstNode block() {
    DepthGuard guard(depth_);
    expect("{");
    AstNode b{NodeKind::Block, "", {}};
    while (!is_punct("}")) {
      if (peek().type == Tok::End) throw SyntaxError{};
      b.children.push_back(stmt());
    }
    take();
    return b;
  }

  AstNode stmt() {
    if (is(Tok::Keyword, "return")) {
      take();
      AstNode r{NodeKind::Return, "", {expr()}};
      expect(";");
      return r;
    }
    if (is(Tok::Keyword, "if")) {
      take();
      expect("(");
      AstNode node{NodeKind::If, "", {expr()}};
      expect(")");
      node.children.push_back(block());
      if (is(Tok::Keyword, "else")) {
        take();
        node.children.push_back(block());
      }
      return node;
    }
    if (is(Tok::Keyword, "while")) {
      take();
      expect("(");
      AstNode node{NodeKind::While, "", {expr()}};
      expect(")");
      node.children.push_back(block());
      return node;
    }
    if (peek().type == Tok::Name && peek(1).type == Tok::Punct && peek(1).text == "=") {
      std::string target = take().text;
      take();  // =
      AstNode a{NodeKind::Assign, target, {}};
      a.children.push_back({NodeKind::Name, target, {}});
      a.children.push_back(expr());
      expect(";");
      return a;
    }
    AstNode e = expr();
    expect(";");
    return e;
  }

  AstNode expr() {
    DepthGuard guard(depth_);
    return binary(0);
  }

  static int precedence(const Token& t) {
    if (t.type != Tok::Punct) return -1;
    if (t.text == "==" || t.text == "!=" || t.text == "<" || t.text == ">") return 0;
    if (t.text == "+" || t.text == "-") return 1;
    if (t.text == "*" || t.text == "/") return 2;
    return -1;
  }

  AstNode binary(int min_prec) {
    AstNode lhs = min_prec > 2 ? atom() : binary(min_prec + 1);
    if (min_prec > 2) return lhs;
    while (precedence(peek()) == min_prec) {
      std::string op = take().text;
      AstNode rhs = binary(min_prec + 1);
      lhs = AstNode{NodeKind::BinOp, op, {std::move(lhs), std::move(rhs)}};
    }
    return lhs;
  }

  AstNode atom() {
    const Token& t = peek();
    if (t.type == Tok::Number) return {NodeKind::Number, take().text, {}};
    if (t.type == Tok::String) return {NodeKind::String, take().text, {}};
    if (t.type == Tok::Name) {
      std::string n = take().text;
      if (!is_punct("(")) return {NodeKind::Name, n, {}};
      take();
      AstNode call{NodeKind::Call, n, {}};
      if (!is_punct(")")) {
        call.children.push_back(expr());
        while (is_punct(",")) {
          take();
          call.children.push_back(expr());
        }
      }
      expect(")");
      return call;
    }
    if (is_punct("(")) {
      take();
      AstNode inner = expr();
      expect(")");
      return inner;
    }
    throw SyntaxError{};
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  int depth_ = 0;
};

// Data-flow extraction state for one scope.
struct Scope {
  std::map<std::string, std::size_t> var_index;
  std::map<std::string, int> last_def;
  int next_site = 0;

  std::size_t index_of(const std::string& v) {
    return var_index.emplace(v, var_index.size()).first->second;
  }
};

void collect_reads(const AstNode& e, std::vector<std::string>& out) {
  if (e.kind == NodeKind::Name) {
    out.push_back(e.token);
    return;
  }
  for (const AstNode& c : e.children) collect_reads(c, out);
}

void visit_stmt(const AstNode& s, std::size_t scope_id, Scope& scope, std::vector<DefUseEdge>& edges);

void visit_block(const AstNode& block, std::size_t scope_id, Scope& scope, std::vector<DefUseEdge>& edges) {
  for (const AstNode& s : block.children) visit_stmt(s, scope_id, scope, edges);
}

void visit_stmt(const AstNode& s, std::size_t scope_id, Scope& scope, std::vector<DefUseEdge>& edges) {
  const int site = scope.next_site++;
  std::vector<std::string> reads;
  const AstNode* written = nullptr;
  std::vector<const AstNode*> blocks;
  switch (s.kind) {
    case NodeKind::Assign:
      written = &s.children[0];
      scope.index_of(written->token);
      collect_reads(s.children[1], reads);
      break;
    case NodeKind::If:
    case NodeKind::While:
      collect_reads(s.children[0], reads);
      for (std::size_t i = 1; i < s.children.size(); ++i) blocks.push_back(&s.children[i]);
      break;
    default:
      collect_reads(s, reads);
      break;
  }
  for (const std::string& v : reads) {
    const std::size_t idx = scope.index_of(v);
    auto it = scope.last_def.find(v);
    if (it != scope.last_def.end()) edges.push_back({scope_id, idx, it->second, site});
  }
  if (written != nullptr) scope.last_def[written->token] = site;
  for (const AstNode* b : blocks) visit_block(*b, scope_id, scope, edges);
}

}  // namespace

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Program: return "Program";
    case NodeKind::FuncDef: return "FuncDef";
    case NodeKind::Param: return "Param";
    case NodeKind::Block: return "Block";
    case NodeKind::Assign: return "Assign";
    case NodeKind::If: return "If";
    case NodeKind::While: return "While";
    case NodeKind::Return: return "Return";
    case NodeKind::Call: return "Call";
    case NodeKind::BinOp: return "BinOp";
    case NodeKind::Name: return "Name";
    case NodeKind::Number: return "Number";
    case NodeKind::String: return "String";
  }
  return "?";
}

bool is_keyword(std::string_view word) {
  return std::find(std::begin(kKeywords), std::end(kKeywords), word) != std::end(kKeywords);
}

MiniAst parse_minilang(std::string_view code) {
  auto toks = lex(code);
  if (!toks) return {AstNode{NodeKind::Program, "", {}}, false};
  try {
    Parser parser(std::move(*toks));
    return {parser.program(), true};
  } catch (const SyntaxError&) {
    return {AstNode{NodeKind::Program, "", {}}, false};
  }
}

std::string serialize_shape(const AstNode& node) {
  std::string out;
  if (!node.children.empty()) out.push_back('(');
  out += to_string(node.kind);
  if (node.kind == NodeKind::BinOp) out += node.token;
  for (const AstNode& c : node.children) {
    out.push_back(' ');
    out += serialize_shape(c);
  }
  if (!node.children.empty()) out.push_back(')');
  return out;
}

std::vector<DefUseEdge> dataflow_edges(const MiniAst& ast) {
  std::vector<DefUseEdge> edges;
  if (!ast.parseable) return edges;
  std::optional<std::size_t> top_scope_id;
  Scope top;
  std::size_t next_scope = 0;
  for (const AstNode& item : ast.root.children) {
    if (item.kind == NodeKind::FuncDef) {
      const std::size_t id = next_scope++;
      Scope scope;
      for (const AstNode& c : item.children) {
        if (c.kind != NodeKind::Param) continue;
        scope.index_of(c.token);
        scope.last_def[c.token] = scope.next_site++;
      }
      visit_block(item.children.back(), id, scope, edges);
    } else {
      if (!top_scope_id) top_scope_id = next_scope++;
      visit_stmt(item, *top_scope_id, top, edges);
    }
  }
  return edges;
}

}  // namespace ragcode::minilang
