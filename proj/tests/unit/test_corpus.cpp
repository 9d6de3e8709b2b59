#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "ragcode/corpus.hpp"

using namespace ragcode;
using namespace ragcode::corpus;

namespace {

Document code(std::string id, std::string text) { return {std::move(id), DocKind::code, std::move(text), {}, "minilang"}; }

std::string record(const std::string& id, const std::string& text) {
  return R"({"id":")" + id + R"(","kind":"code","text":")" + text + R"(","lang":"minilang"})";
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "ragcode_unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Normalize, CollapsesAndTrims) {
  EXPECT_EQ(normalize("  a \t b\n\nc  "), "a b c");
  EXPECT_EQ(normalize("   "), "");
  EXPECT_EQ(normalize("A  a"), "A a");
}

TEST(LoadDatabase, ThreeLines) {
  const auto db = parse_database(record("a", "x") + "\n" + record("b", "y") + "\n" + record("c", "z") + "\n",
                                 DbKind::code_db);
  ASSERT_EQ(db.size(), 3u);
  EXPECT_EQ(db[0].id, "a");
  EXPECT_EQ(db[2].text, "z");
}

TEST(LoadDatabase, EmptyFile) {
  EXPECT_EQ(parse_database("", DbKind::code_db).size(), 0u);
  EXPECT_EQ(parse_database("\n\n", DbKind::summary_db).size(), 0u);
}

TEST(LoadDatabase, DuplicateIdNamesId) {
  std::string contents = record("d0", "a") + "\n" + record("d1", "b") + "\n" + record("d2", "c") + "\n" +
                         record("d3", "e") + "\n" + record("d1", "f") + "\n";
  const std::string msg = error_of([&] { parse_database(contents, DbKind::code_db); });
  EXPECT_NE(msg.find("'d1'"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 5"), std::string::npos) << msg;
}

TEST(LoadDatabase, MalformedRecordNamesLine) {
  for (const std::string bad : {R"({"id":"x","kind":"code"})", "not json", R"({"id":"x","kind":"weird","text":"t"})",
                                R"({"id":"x","kind":"code","text":"   "})", R"({"id":"x","kind":"code","text":"t","pair_text":""})",
                                R"({"id":"x","kind":"summary","text":"t"})", "[1,2]"}) {
    const std::string msg = error_of([&] { parse_database(record("a", "b") + "\n" + bad + "\n", DbKind::code_db); });
    EXPECT_NE(msg.find("line 2"), std::string::npos) << bad << " -> " << msg;
  }
}

TEST(LoadDatabase, UnknownKeysIgnored) {
  const auto db = parse_database(R"({"id":"a","kind":"code","text":"t","extra":5})", DbKind::code_db);
  EXPECT_EQ(db.size(), 1u);
}

TEST(RetrievalDatabase, AddValidates) {
  RetrievalDatabase db(DbKind::code_db);
  db.add(code("a", "x"));
  EXPECT_THROW(db.add(code("a", "y")), Error);
  EXPECT_THROW(db.add(code("b", " ")), Error);
  EXPECT_THROW(db.add({"c", DocKind::summary, "s", {}, "en"}), Error);
  EXPECT_THROW(db.add({"d", DocKind::code, "s", std::string(" "), "en"}), Error);
  EXPECT_EQ(db.size(), 1u);
}

TEST(Deduplicate, TrailingWhitespaceCollapses) {
  RetrievalDatabase db;
  db.add(code("a", "return x ;"));
  db.add(code("b", "return x ;   \n"));
  const auto out = deduplicate(db);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].id, "a");
}

TEST(Deduplicate, DistinctUnchanged) {
  RetrievalDatabase db;
  for (int i = 0; i < 5; ++i) db.add(code("d" + std::to_string(i), "t" + std::to_string(i)));
  const auto out = deduplicate(db);
  EXPECT_EQ(out.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(out[i], db[i]);
}

TEST(Deduplicate, ThousandWithTwoHundredCopies) {
  std::mt19937_64 rng(17);
  RetrievalDatabase db;
  std::vector<std::string> texts;
  for (int i = 0; i < 800; ++i) texts.push_back("def f" + std::to_string(i) + " ( ) { return " + std::to_string(i % 7) + " ; }");
  for (int i = 0; i < 200; ++i) {
    std::string t = texts[std::uniform_int_distribution<int>(0, 799)(rng)];
    texts.push_back(i % 2 ? "  " + t + "\n" : t);
  }
  std::shuffle(texts.begin() + 1, texts.end(), rng);
  for (std::size_t i = 0; i < texts.size(); ++i) db.add(code("d" + std::to_string(i), texts[i]));
  // Independent count: words re-joined by a single space.
  std::set<std::string> distinct;
  for (const auto& t : texts) {
    std::istringstream in(t);
    std::string w, joined;
    while (in >> w) joined += (joined.empty() ? "" : " ") + w;
    distinct.insert(joined);
  }
  ASSERT_EQ(distinct.size(), 800u);
  const auto out = deduplicate(db);
  EXPECT_EQ(out.size(), 800u);
  EXPECT_EQ(out.distinct_fingerprints(), out.size());
  EXPECT_EQ(deduplicate(out).documents().size(), out.size());
}

TEST(Deduplicate, Idempotent) {
  std::mt19937_64 rng(3);
  RetrievalDatabase db;
  for (int i = 0; i < 200; ++i)
    db.add(code("d" + std::to_string(i), "x" + std::to_string(std::uniform_int_distribution<int>(0, 50)(rng))));
  const auto once = deduplicate(db);
  const auto twice = deduplicate(once);
  ASSERT_EQ(once.size(), twice.size());
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(once[i], twice[i]);
}

TEST(ExcludeTargets, RemovesExactTarget) {
  RetrievalDatabase db;
  db.add(code("a", "return  1 ;"));
  db.add(code("b", "return 2 ;"));
  const std::vector<std::string> targets{" return 1 ;"};
  const auto out = exclude_targets(db, targets);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].id, "b");
  for (const auto& d : out.documents()) EXPECT_TRUE(out.find_text(targets[0]).empty()) << d.id;
}

TEST(ExcludeTargets, NoOverlapUnchanged) {
  RetrievalDatabase db;
  db.add(code("a", "x"));
  db.add(code("b", "y"));
  const std::vector<std::string> targets{"z"};
  EXPECT_EQ(exclude_targets(db, targets).size(), 2u);
}

TEST(ExcludeTargets, CommentDifferenceKeepsDocument) {
  RetrievalDatabase db;
  db.add(code("a", "x = 1 ; // set x"));
  const std::vector<std::string> targets{"x = 1 ;"};
  EXPECT_EQ(exclude_targets(db, targets).size(), 1u);
}

TEST(Persistence, RoundTripIsExact) {
  RetrievalDatabase db(DbKind::summary_db);
  db.add({"a", DocKind::summary, "tab\there \"quoted\" ünïcode", std::string("def f ( ) { }\n"), "en"});
  db.add({"b", DocKind::summary, "  spaced  ", std::nullopt, ""});
  const auto path = temp_file("roundtrip.jsonl");
  save_database(db, path);
  const auto back = load_database(path, DbKind::summary_db);
  ASSERT_EQ(back.size(), db.size());
  for (std::size_t i = 0; i < db.size(); ++i) EXPECT_EQ(back[i], db[i]);
  save_database(back, path.string() + ".2");
  std::ifstream a(path), b(path.string() + ".2");
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Persistence, MissingFileIsError) {
  EXPECT_THROW(load_database("/nonexistent/db.jsonl", DbKind::code_db), Error);
}
