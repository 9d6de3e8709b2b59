#include "ragcode/synthetic.hpp"

#include <algorithm>
#include <random>
#include <map>
#include <set>

#include "ragcode/minilang.hpp"

namespace ragcode::synthetic {

namespace {

using Rng = std::mt19937_64;

std::size_t uniform(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

// Pronounceable lowercase words, distinct from each other and from keywords.
class WordSource {
 public:
  explicit WordSource(Rng& rng) : rng_(rng) {}

  std::vector<std::string> take(std::size_t n) {
    static constexpr std::string_view kCons = "bdfgklmnprstvz";
    static constexpr std::string_view kVow = "aeiou";
    std::vector<std::string> out;
    while (out.size() < n) {
      const std::size_t syllables = 2 + uniform(rng_, 2);
      std::string w;
      for (std::size_t s = 0; s < syllables; ++s) {
        w.push_back(kCons[uniform(rng_, kCons.size())]);
        w.push_back(kVow[uniform(rng_, kVow.size())]);
      }
      if (minilang::is_keyword(w) || !used_.insert(w).second) continue;
      out.push_back(std::move(w));
    }
    return out;
  }

 private:
  Rng& rng_;
  std::set<std::string> used_;
};

struct Body {
  std::string p1, p2, v1;
  std::vector<std::string> body;  // tokens after "{", up to and including the closing "}"
};

std::string render_code(const std::string& name, const Body& b) {
  std::string out = "def " + name + " ( " + b.p1 + " , " + b.p2 + " ) {";
  for (const auto& t : b.body) out += " " + t;
  return out;
}

std::string render_summary(const std::string& name, const Body& b) {
  return "compute " + name + " from " + b.p1 + " and " + b.p2 + " via " + b.v1;
}

constexpr std::string_view kArith[] = {"+", "-", "*"};
constexpr std::string_view kCompare[] = {"<", ">", "==", "!="};

bool is_constant(const std::string& t) { return !t.empty() && t[0] >= '1' && t[0] <= '9'; }

// Random statement sequences over the three names, ending in a return.
// Tokens are emitted with canonical spacing so that tokenizing and re-joining
// the rendered code reproduces it exactly.
Body random_body(Rng& rng, const std::vector<std::string>& vars) {
  Body b;
  std::vector<std::size_t> pick;
  while (pick.size() < 3) {
    const std::size_t v = uniform(rng, vars.size());
    if (std::find(pick.begin(), pick.end(), v) == pick.end()) pick.push_back(v);
  }
  b.p1 = vars[pick[0]];
  b.p2 = vars[pick[1]];
  b.v1 = vars[pick[2]];
  auto& out = b.body;
  const auto atom = [&] {
    switch (uniform(rng, 4)) {
      case 0: out.push_back(b.p1); break;
      case 1: out.push_back(b.p2); break;
      case 2: out.push_back(b.v1); break;
      default: out.push_back(std::to_string(1 + uniform(rng, 9))); break;
    }
  };
  const auto expr = [&](std::size_t min_ops) {
    atom();
    for (std::size_t n = min_ops + uniform(rng, 3 - min_ops); n > 0; --n) {
      out.emplace_back(kArith[uniform(rng, 3)]);
      atom();
    }
  };
  const auto assign = [&](std::size_t min_ops) {
    out.insert(out.end(), {b.v1, "="});
    expr(min_ops);
    out.emplace_back(";");
  };
  assign(1);
  for (std::size_t n = 1 + uniform(rng, 2); n > 0; --n) {
    switch (uniform(rng, 3)) {
      case 0: assign(0); break;
      case 1:
        out.insert(out.end(), {"if", "(", b.v1});
        out.emplace_back(kCompare[uniform(rng, 4)]);
        atom();
        out.insert(out.end(), {")", "{"});
        assign(0);
        out.emplace_back("}");
        break;
      default:
        out.insert(out.end(), {"while", "(", b.v1, "<"});
        atom();
        out.insert(out.end(), {")", "{"});
        assign(0);
        out.emplace_back("}");
        break;
    }
  }
  out.emplace_back("return");
  expr(0);
  out.insert(out.end(), {";", "}"});
  return b;
}

// Changes one constant, or one arithmetic operator when there is none (the
// first assignment always has one).
void perturb_constant(Rng& rng, Body& b) {
  std::vector<std::size_t> slots;
  for (std::size_t i = 0; i < b.body.size(); ++i)
    if (is_constant(b.body[i])) slots.push_back(i);
  if (!slots.empty()) {
    auto& t = b.body[slots[uniform(rng, slots.size())]];
    const std::size_t c = static_cast<std::size_t>(t[0] - '1');
    t = std::to_string(1 + (c + 1 + uniform(rng, 8)) % 9);
    return;
  }
  for (std::size_t i = 0; i < b.body.size(); ++i)
    if (b.body[i] == "+" || b.body[i] == "-" || b.body[i] == "*") slots.push_back(i);
  auto& t = b.body[slots[uniform(rng, slots.size())]];
  t = t == "+" ? "-" : "+";
}

struct Item {
  std::string code;
  std::string summary;
};

void add_pair(SyntheticCorpus& out, const std::string& id, const Item& item, bool bimodal) {
  corpus::Document code{id, corpus::DocKind::code, item.code, std::nullopt, "minilang"};
  corpus::Document summ{id, corpus::DocKind::summary, item.summary, std::nullopt, "en"};
  if (bimodal) {
    code.pair_text = item.summary;
    summ.pair_text = item.code;
  }
  out.code_db.add(std::move(code));
  out.summary_db.add(std::move(summ));
}

corpus::Document query(const std::string& id, const Item& item) {
  return {id, corpus::DocKind::summary, item.summary, item.code, "en"};
}

std::string split_id(std::size_t i, std::size_t n_train, const char* what) {
  return (i < n_train ? std::string("train-") : std::string("test-")) + what +
         std::to_string(i < n_train ? i : i - n_train);
}

}  // namespace

Flavor parse_flavor(std::string_view s) {
  if (s == "aligned") return Flavor::aligned;
  if (s == "paraphrase") return Flavor::paraphrase;
  if (s == "near_copy") return Flavor::near_copy;
  throw Error("unknown synthetic flavor '" + std::string(s) + "' (expected aligned, paraphrase or near_copy)");
}

std::string_view to_string(Flavor f) {
  switch (f) {
    case Flavor::aligned: return "aligned";
    case Flavor::paraphrase: return "paraphrase";
    case Flavor::near_copy: return "near_copy";
  }
  return "aligned";
}

SyntheticCorpus make_synthetic(const SyntheticConfig& cfg) {
  if (cfg.train + cfg.test == 0) throw Error("synthetic corpus needs at least one query");
  if (cfg.near_copy_rate < 0.0 || cfg.near_copy_rate > 1.0) throw Error("near_copy_rate must lie in [0, 1]");
  if (cfg.bimodal_fraction < 0.0 || cfg.bimodal_fraction > 1.0) throw Error("bimodal_fraction must lie in [0, 1]");
  Rng rng(cfg.seed);
  WordSource words(rng);
  std::bernoulli_distribution bimodal(cfg.bimodal_fraction);
  SyntheticCorpus out;
  const std::size_t n = cfg.train + cfg.test;
  const auto push_query = [&](std::size_t i, const Item& item) {
    (i < cfg.train ? out.train : out.test).push_back(query(split_id(i, cfg.train, "q"), item));
  };

  if (cfg.flavor == Flavor::near_copy) {
    if (cfg.variants < 2) throw Error("near_copy needs at least two variants per family");
    // Small shared pools so every token shows up in training targets.
    const auto names = words.take(40);
    const auto vars = words.take(200);
    std::bernoulli_distribution exact(cfg.near_copy_rate);
    for (std::size_t f = 0; f < n; ++f) {
      const Body body = random_body(rng, vars);
      std::vector<std::size_t> chosen;
      while (chosen.size() < cfg.variants) {
        const std::size_t v = uniform(rng, names.size());
        if (std::find(chosen.begin(), chosen.end(), v) == chosen.end()) chosen.push_back(v);
      }
      const Item target{render_code(names[chosen[0]], body), render_summary(names[chosen[0]], body)};
      Body sibling_body = body;
      if (!exact(rng)) perturb_constant(rng, sibling_body);
      const std::string fam = split_id(f, cfg.train, "f");
      add_pair(out, fam + "-v0", target, bimodal(rng));
      for (std::size_t v = 1; v < cfg.variants; ++v) {
        const Item sib{render_code(names[chosen[v]], sibling_body), render_summary(names[chosen[v]], sibling_body)};
        add_pair(out, fam + "-v" + std::to_string(v), sib, bimodal(rng));
      }
      push_query(f, target);
    }
    return out;
  }

  const auto names = words.take(n);
  const auto vars = words.take(std::max<std::size_t>(24, n / 4));
  std::map<std::string, std::string> synonym;
  if (cfg.flavor == Flavor::paraphrase) {
    std::vector<std::string> all(names);
    all.insert(all.end(), vars.begin(), vars.end());
    const auto alt = words.take(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) synonym[all[i]] = alt[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Body body = random_body(rng, vars);
    Item item{render_code(names[i], body), render_summary(names[i], body)};
    if (cfg.flavor == Flavor::paraphrase) {
      Body para = body;
      para.p1 = synonym.at(body.p1);
      para.p2 = synonym.at(body.p2);
      para.v1 = synonym.at(body.v1);
      item.summary = render_summary(synonym.at(names[i]), para);
    }
    add_pair(out, "d" + std::to_string(i), item, bimodal(rng));
    push_query(i, item);
  }
  return out;
}

std::vector<corpus::Document> as_summarization_queries(const std::vector<corpus::Document>& queries) {
  std::vector<corpus::Document> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    if (!q.pair_text) throw Error("query '" + q.id + "' has no reference to swap in");
    corpus::Document d = q;
    d.kind = q.kind == corpus::DocKind::code ? corpus::DocKind::summary : corpus::DocKind::code;
    d.text = *q.pair_text;
    d.pair_text = q.text;
    d.lang = d.kind == corpus::DocKind::code ? "minilang" : "en";
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace ragcode::synthetic
