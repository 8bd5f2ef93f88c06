#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "semlink/error.hpp"
#include "semlink/kb.hpp"
#include "test_support.hpp"

namespace semlink {
namespace {

KnowledgeBase parse(const std::string& text) {
  std::istringstream in(text);
  return KnowledgeBase::parse(in);
}

TEST(KnowledgeBase, CountsEntitiesRelationsTriples) {
  auto kb = parse("person\tuses\ttennis racket\nperson\twith\tanimals\n");
  EXPECT_EQ(kb.entities().size(), 3u);
  EXPECT_EQ(kb.relations().size(), 2u);
  EXPECT_EQ(kb.triples().size(), 2u);
  EXPECT_EQ(kb.entities(), (std::vector<std::string>{"person", "tennis racket", "animals"}));
}

TEST(KnowledgeBase, DuplicateLinesCollapse) {
  auto kb = parse("a\tr\tb\na\tr\tb\n");
  EXPECT_EQ(kb.triples().size(), 1u);
}

TEST(KnowledgeBase, EmptyInputIsValid) {
  auto kb = parse("");
  EXPECT_TRUE(kb.entities().empty());
  EXPECT_TRUE(kb.relations().empty());
  EXPECT_TRUE(kb.triples().empty());
}

TEST(KnowledgeBase, CommentsBlankLinesAndTrimming) {
  auto kb = parse("# header\n\n   \n  person \t uses\t tennis racket  \r\n");
  ASSERT_EQ(kb.triples().size(), 1u);
  EXPECT_EQ(kb.triples()[0], (Triple{"person", "uses", "tennis racket"}));
}

TEST(KnowledgeBase, MalformedLineReportsLineNumber) {
  try {
    parse("a\tr\tb\n\nonly\ttwo\n");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedLine);
    EXPECT_EQ(e.line(), 3u);
  }
  try {
    parse("a\tr\tb\textra\n");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedLine);
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(KnowledgeBase, EmptyFieldRejected) {
  try {
    parse("a\t \tb\n");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyField);
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(KnowledgeBase, MissingFile) {
  try {
    KnowledgeBase::load("/nonexistent/kb.tsv");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFileMissing);
  }
}

TEST(KnowledgeBase, ContainsIsDirectedAndClosedWorld) {
  auto kb = KnowledgeBase::load(testing::data_path("toy_kb.tsv"));
  EXPECT_TRUE(contains_triple(kb, {"person", "uses", "tennis racket"}));
  EXPECT_FALSE(contains_triple(kb, {"person", "likes", "tennis racket"}));
  EXPECT_FALSE(contains_triple(kb, {"tennis racket", "uses", "person"}));
}

TEST(KnowledgeBase, ContainsExactlyTheEnumeratedTriples) {
  auto kb = KnowledgeBase::load(testing::data_path("toy_kb.tsv"));
  std::size_t hits = 0;
  for (const auto& h : kb.entities()) {
    for (const auto& r : kb.relations()) {
      for (const auto& t : kb.entities()) {
        Triple tr{h, r, t};
        const bool listed = std::find(kb.triples().begin(), kb.triples().end(), tr) != kb.triples().end();
        EXPECT_EQ(kb.contains(tr), listed);
        hits += kb.contains(tr) ? 1 : 0;
      }
    }
  }
  EXPECT_EQ(hits, kb.triples().size());
}

TEST(KnowledgeBase, TriplesWithRelation) {
  auto kb = parse("a\tr\tb\nb\ts\tc\nc\tr\ta\n");
  auto rs = kb.triples_with_relation("r");
  ASSERT_EQ(rs.size(), 2u);
  EXPECT_EQ(rs[0], (Triple{"a", "r", "b"}));
  EXPECT_EQ(rs[1], (Triple{"c", "r", "a"}));
  EXPECT_TRUE(kb.triples_with_relation("zz").empty());
  EXPECT_TRUE(KnowledgeBase().triples_with_relation("r").empty());
}

TEST(KnowledgeBase, SaveLoadRoundTripPreservesOrder) {
  auto kb = KnowledgeBase::load(testing::data_path("toy_kb.tsv"));
  auto dir = testing::scratch_dir("kb_roundtrip");
  kb.save(dir / "kb.tsv");
  auto again = KnowledgeBase::load(dir / "kb.tsv");
  EXPECT_EQ(again.entities(), kb.entities());
  EXPECT_EQ(again.relations(), kb.relations());
  EXPECT_EQ(again.triples(), kb.triples());
}

KnowledgeBase ten_triples() {
  KnowledgeBase kb;
  for (int i = 0; i < 10; ++i) kb.add({"e" + std::to_string(i), "r", "e" + std::to_string(i + 1)});
  return kb;
}

TEST(SplitKb, Extremes) {
  auto kb = ten_triples();
  auto all = split_kb(kb, 1.0, 3);
  EXPECT_EQ(all.kept.size(), 10u);
  EXPECT_TRUE(all.held_out.empty());
  auto none = split_kb(kb, 0.0, 3);
  EXPECT_TRUE(none.kept.empty());
  EXPECT_EQ(none.held_out.size(), 10u);
}

TEST(SplitKb, SizesAndDeterminism) {
  auto kb = ten_triples();
  auto a = split_kb(kb, 0.8, 42);
  auto b = split_kb(kb, 0.8, 42);
  EXPECT_EQ(a.kept.size(), 8u);
  EXPECT_EQ(a.held_out.size(), 2u);
  EXPECT_EQ(a.kept, b.kept);
  EXPECT_EQ(a.held_out, b.held_out);
}

TEST(SplitKb, RejectsFractionOutsideUnitInterval) {
  auto kb = ten_triples();
  EXPECT_THROW(split_kb(kb, -0.1, 1), Error);
  EXPECT_THROW(split_kb(kb, 1.5, 1), Error);
}

TEST(SplitKb, PartitionsExactlyForRandomFractionsAndSeeds) {
  auto kb = ten_triples();
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const double f = rng.uniform();
    const auto seed = rng.next_u64();
    auto s = split_kb(kb, f, seed);
    std::unordered_set<Triple, TripleHash> kept(s.kept.begin(), s.kept.end());
    std::unordered_set<Triple, TripleHash> held(s.held_out.begin(), s.held_out.end());
    EXPECT_EQ(kept.size(), s.kept.size());
    EXPECT_EQ(held.size(), s.held_out.size());
    for (const auto& t : kept) EXPECT_FALSE(held.contains(t));
    EXPECT_EQ(kept.size() + held.size(), kb.triples().size());
    for (const auto& t : kb.triples()) EXPECT_TRUE(kept.contains(t) || held.contains(t));
    EXPECT_EQ(s.kept.size(), static_cast<std::size_t>(std::llround(f * 10)));
  }
}

}  // namespace
}  // namespace semlink
