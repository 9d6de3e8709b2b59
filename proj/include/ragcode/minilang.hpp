#pragma once
// MiniLang: the small owned language the AST and data-flow matches parse.
//
//   program  := (funcdef | stmt)*
//   funcdef  := "def" NAME "(" params? ")" block
//   params   := NAME ("," NAME)*
//   block    := "{" stmt* "}"
//   stmt     := NAME "=" expr ";" | "return" expr ";"
//             | "if" "(" expr ")" block ("else" block)?
//             | "while" "(" expr ")" block | expr ";"
//   expr     := comparison; comparison := sum (("=="|"!="|"<"|">") sum)*
//   sum      := term (("+"|"-") term)*;  term := atom (("*"|"/") atom)*
//   atom     := NAME "(" args? ")" | NAME | NUMBER | STRING | "(" expr ")"
//
// Top-level statements and parenthesized expressions extend the function-only
// grammar so that statement snippets ("a = 1; b = a;") are measurable too.

#include <string>
#include <string_view>
#include <vector>

namespace ragcode::minilang {

enum class NodeKind { Program, FuncDef, Param, Block, Assign, If, While, Return, Call, BinOp, Name, Number, String };

std::string_view to_string(NodeKind kind);

/// FuncDef/Call carry their name, BinOp its operator, Param/Name/Number/
/// String their lexeme. Assign's children are the target Name then the value.
struct AstNode {
  NodeKind kind = NodeKind::Program;
  std::string token;
  std::vector<AstNode> children;
  bool operator==(const AstNode&) const = default;
};

struct MiniAst {
  AstNode root;
  bool parseable = true;
};

inline constexpr std::string_view kKeywords[] = {"def", "return", "if", "else", "while"};
bool is_keyword(std::string_view word);

/// Never throws: syntax errors produce a lone Program node with
/// parseable == false.
MiniAst parse_minilang(std::string_view code);

/// Canonical serialization with identifier and literal lexemes dropped
/// (operators are kept).
std::string serialize_shape(const AstNode& node);

struct DefUseEdge {
  std::size_t scope;  // order of appearance; all top-level statements share one scope
  std::size_t var;    // variable index by order of first appearance in the scope
  int def_site;
  int use_site;
  auto operator<=>(const DefUseEdge&) const = default;
};

/// Def-use edges: each variable read links to the last preceding write in
/// statement order. Parameters are definitions at sites 0..p-1, statements
/// are numbered after them in pre-order. Empty for unparseable trees.
std::vector<DefUseEdge> dataflow_edges(const MiniAst& ast);

}  // namespace ragcode::minilang
