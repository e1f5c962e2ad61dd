#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "glmkit/graph.hpp"
#include "glmkit/rng.hpp"
#include "test_util.hpp"

using namespace glmkit;
using testutil::menagerie;

TEST_CASE("from_triplets validates fields and duplicates") {
  CHECK_THROWS_AS(GraphOfTriplets::from_triplets({{"", "is a", "dog"}}), std::invalid_argument);
  CHECK_THROWS_AS(GraphOfTriplets::from_triplets({{"a", "  ", "b"}}), std::invalid_argument);
  CHECK_THROWS_AS(
      GraphOfTriplets::from_triplets({{"a", "r", "b"}, {"a", "r", "b"}}),
      std::invalid_argument);
  // Fields are trimmed before use.
  GraphOfTriplets g = GraphOfTriplets::from_triplets({{" dog ", " is a", "animal  "}});
  CHECK(g.triplets()[0].head == "dog");
  CHECK(g.triplets()[0].relation == "is a");
  CHECK(g.triplets()[0].tail == "animal");
}

TEST_CASE("to_levi on the menagerie graph: 4 concepts + 3 relations, 6 edges") {
  LeviGraph levi = to_levi(menagerie());
  CHECK(levi.concept_count() == 4);
  CHECK(levi.relation_count() == 3);
  CHECK(levi.edges.size() == 6);
  CHECK(levi.triplet_units.size() == 3);
  // Edge direction preserved: every relation unit has exactly one incoming
  // (head) and one outgoing (tail) edge.
  for (const auto& [h, r, t] : levi.triplet_units) {
    CHECK(std::count(levi.edges.begin(), levi.edges.end(), std::make_pair(h, r)) == 1);
    CHECK(std::count(levi.edges.begin(), levi.edges.end(), std::make_pair(r, t)) == 1);
    CHECK(levi.units[r].kind == LeviUnit::Kind::Relation);
  }
}

TEST_CASE("to_levi minimal and parallel-relation cases") {
  LeviGraph single = to_levi(GraphOfTriplets::from_triplets({{"A", "r", "B"}}));
  CHECK(single.concept_count() == 2);
  CHECK(single.relation_count() == 1);
  CHECK(single.edges.size() == 2);

  // Relations are NOT deduplicated; concepts are.
  LeviGraph parallel =
      to_levi(GraphOfTriplets::from_triplets({{"A", "r1", "B"}, {"A", "r2", "B"}}));
  CHECK(parallel.concept_count() == 2);
  CHECK(parallel.relation_count() == 2);
  CHECK(parallel.edges.size() == 4);

  CHECK_THROWS_AS(to_levi(GraphOfTriplets()), std::invalid_argument);
}

TEST_CASE("tokenize_levi: 11 tokens, spans in head ++ relation ++ tail order") {
  WhitespaceTokenizer tok;
  ExtendedLeviGraph elg = tokenize_levi(to_levi(menagerie()), tok);
  CHECK(elg.size() == 11);
  REQUIRE(elg.triplet_spans.size() == 3);

  auto surfaces = [&](const std::vector<std::size_t>& span) {
    std::vector<std::string> out;
    for (std::size_t i : span) out.push_back(elg.tokens[i].surface);
    return out;
  };
  CHECK(surfaces(elg.triplet_spans[0]) ==
        std::vector<std::string>{"black", "poodle", "is", "a", "dog"});
  CHECK(surfaces(elg.triplet_spans[1]) == std::vector<std::string>{"dog", "is", "a", "animal"});
  CHECK(surfaces(elg.triplet_spans[2]) == std::vector<std::string>{"cat", "is", "a", "animal"});

  // Offsets within a unit are 0..k-1 and contiguous.
  for (auto [first, last] : elg.unit_token_ranges) {
    for (std::size_t i = first; i < last; ++i) {
      CHECK(elg.tokens[i].offset == i - first);
    }
  }
}

TEST_CASE("tokenize_levi round-trip and shared-concept fan-in") {
  WhitespaceTokenizer tok;
  ExtendedLeviGraph elg = tokenize_levi(to_levi(menagerie()), tok);

  // Every token appears in at least one span; spans have no repeats.
  std::set<std::size_t> covered;
  for (const auto& span : elg.triplet_spans) {
    std::set<std::size_t> uniq(span.begin(), span.end());
    CHECK(uniq.size() == span.size());
    covered.insert(span.begin(), span.end());
  }
  CHECK(covered.size() == elg.size());

  // "animal" occurs in 2 triplets -> the SAME token id appears in exactly
  // those 2 spans (concept unit shared).
  std::size_t animal = testutil::token_index(elg, "animal");
  int spans_with_animal = 0;
  for (const auto& span : elg.triplet_spans) {
    spans_with_animal += std::count(span.begin(), span.end(), animal);
  }
  CHECK(spans_with_animal == 2);
  CHECK(testutil::all_token_indices(elg, "animal").size() == 1);

  // Relation units are per-triplet: three separate "is" tokens.
  CHECK(testutil::all_token_indices(elg, "is").size() == 3);
}

TEST_CASE("tokenize_levi single 1-token triplet and empty-unit error") {
  WhitespaceTokenizer tok;
  ExtendedLeviGraph elg =
      tokenize_levi(to_levi(GraphOfTriplets::from_triplets({{"A", "r", "B"}})), tok);
  CHECK(elg.size() == 3);
  REQUIRE(elg.triplet_spans.size() == 1);
  CHECK(elg.triplet_spans[0].size() == 3);
}

TEST_CASE("mask_target_relation replaces the relation with the first sentinel") {
  GraphOfTriplets g = mask_target_relation(menagerie(), 1);
  CHECK(g.target() == std::size_t{1});
  CHECK(g.triplets()[1].relation == "<extra_id_0>");
  CHECK(g.triplets()[0].relation == "is a");
  CHECK(g.triplets()[2].relation == "is a");

  // Sentinels tokenize to exactly one token.
  WhitespaceTokenizer tok;
  ExtendedLeviGraph elg = tokenize_levi(to_levi(g), tok);
  CHECK(elg.triplet_spans[1].size() == 3);  // dog ++ <extra_id_0> ++ animal
  auto ids = tok.mask_sentinel_ids();
  CHECK(elg.tokens[elg.triplet_spans[1][1]].id == ids[0]);

  CHECK_THROWS_AS(mask_target_relation(menagerie(), 5), std::out_of_range);
  CHECK_THROWS_AS(mask_target_relation(g, 1), std::invalid_argument);  // already masked
}

TEST_CASE("mask_subgraph masks breadth-first with distinct sentinels") {
  GraphOfTriplets g = mask_target_relation(menagerie(), 1);

  SUBCASE("m=0 is the identity beyond the target relation") {
    GraphOfTriplets m0 = mask_subgraph(g, 0);
    CHECK(m0.triplets() == g.triplets());
  }

  SUBCASE("m=1 masks head and tail concepts with distinct sentinels") {
    GraphOfTriplets m1 = mask_subgraph(g, 1);
    std::string dog = m1.triplets()[1].head;
    std::string animal = m1.triplets()[1].tail;
    CHECK(parse_mask_sentinel(dog).has_value());
    CHECK(parse_mask_sentinel(animal).has_value());
    CHECK(dog != animal);
    // The dog unit is shared: triplet 0's tail is the same sentinel.
    CHECK(m1.triplets()[0].tail == dog);
    CHECK(m1.triplets()[2].head == "cat");
    // Other relations untouched at m=1.
    CHECK(m1.triplets()[0].relation == "is a");
    CHECK(m1.triplets()[2].relation == "is a");
  }

  SUBCASE("m=2 additionally masks the two adjacent relation units") {
    GraphOfTriplets m2 = mask_subgraph(g, 2);
    CHECK(parse_mask_sentinel(m2.triplets()[0].relation).has_value());
    CHECK(parse_mask_sentinel(m2.triplets()[2].relation).has_value());
    CHECK(m2.triplets()[0].relation != m2.triplets()[2].relation);
    // Distance-3 concepts stay visible.
    CHECK(m2.triplets()[0].head == "black poodle");
    CHECK(m2.triplets()[2].head == "cat");
  }

  SUBCASE("all masked units carry pairwise distinct sentinels") {
    GraphOfTriplets m3 = mask_subgraph(g, 3);
    std::set<std::string> sentinels;
    for (const Triplet& t : m3.triplets()) {
      for (const std::string& field : {t.head, t.relation, t.tail}) {
        if (parse_mask_sentinel(field)) sentinels.insert(field);
      }
    }
    // target rel + 2 concepts + 2 relations + 2 far concepts = 7 distinct.
    CHECK(sentinels.size() == 7);
  }

  SUBCASE("no target -> error") {
    CHECK_THROWS_AS(mask_subgraph(menagerie(), 1), std::invalid_argument);
  }
}

TEST_CASE("mask_subgraph masked set is monotone in m") {
  SeededRng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    // Random chain-with-branches graph.
    std::vector<Triplet> ts;
    int n = 4 + static_cast<int>(rng.uniform_index(5));
    for (int i = 0; i < n; ++i) {
      ts.push_back({"e" + std::to_string(i), "r" + std::to_string(i),
                    "e" + std::to_string(i + 1)});
    }
    GraphOfTriplets g = mask_target_relation(GraphOfTriplets::from_triplets(ts),
                                             rng.uniform_index(ts.size()));
    auto masked_positions = [](const GraphOfTriplets& m) {
      std::set<std::pair<std::size_t, int>> out;  // (triplet, field)
      for (std::size_t i = 0; i < m.size(); ++i) {
        const Triplet& t = m.triplets()[i];
        if (parse_mask_sentinel(t.head)) out.insert({i, 0});
        if (parse_mask_sentinel(t.relation)) out.insert({i, 1});
        if (parse_mask_sentinel(t.tail)) out.insert({i, 2});
      }
      return out;
    };
    auto prev = masked_positions(mask_subgraph(g, 0));
    for (int m = 1; m <= 4; ++m) {
      auto cur = masked_positions(mask_subgraph(g, m));
      CHECK(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
      prev = cur;
    }
  }
}

TEST_CASE("mask_subgraph is sound against Levi distances") {
  // Units within distance m are masked, none beyond. Distances are computed
  // on the masked graph; masking preserves structure (distinct sentinels
  // never merge units).
  GraphOfTriplets g = mask_target_relation(menagerie(), 1);
  for (int m = 0; m <= 3; ++m) {
    GraphOfTriplets masked = mask_subgraph(g, m);
    LeviGraph levi = to_levi(masked);
    std::vector<int> dist = levi_distances_from_target(masked);
    REQUIRE(dist.size() == levi.units.size());
    for (std::size_t u = 0; u < levi.units.size(); ++u) {
      bool is_masked = parse_mask_sentinel(levi.units[u].text).has_value();
      bool within = dist[u] >= 0 && dist[u] <= m;
      CHECK(is_masked == within);
    }
  }
}

TEST_CASE("levi_distances_from_target on the menagerie graph") {
  GraphOfTriplets g = mask_target_relation(menagerie(), 1);
  LeviGraph levi = to_levi(g);
  std::vector<int> dist = levi_distances_from_target(g);
  auto unit_distance = [&](const std::string& text) {
    for (std::size_t u = 0; u < levi.units.size(); ++u) {
      if (levi.units[u].text == text) return dist[u];
    }
    return -2;
  };
  CHECK(unit_distance("<extra_id_0>") == 0);
  CHECK(unit_distance("dog") == 1);
  CHECK(unit_distance("animal") == 1);
  CHECK(unit_distance("black poodle") == 3);
  CHECK(unit_distance("cat") == 3);
  // The two surviving "is a" relation units sit at distance 2.
  for (std::size_t u = 0; u < levi.units.size(); ++u) {
    if (levi.units[u].text == "is a") CHECK(dist[u] == 2);
  }
}

TEST_CASE("verbalization templates") {
  CHECK(verbalize_relation("AtLocation") == "is in");
  CHECK(verbalize_relation("IsA") == "is a");
  CHECK(verbalize_relation("UsedFor") == "is used for");
  try {
    verbalize_relation("NoSuchRelation");
    FAIL("expected an error for an unknown relation");
  } catch (const std::invalid_argument& e) {
    // The error lists the known names.
    CHECK(std::string(e.what()).find("NoSuchRelation") != std::string::npos);
    CHECK(std::string(e.what()).find("IsA") != std::string::npos);
  }

  const auto& labels = relation_label_set();
  CHECK(labels.size() == 17);
  CHECK(labels.front() == "Antonym");
  CHECK(labels.back() == "UsedFor");

  // All templates resolvable and pairwise distinct.
  const auto& all = verbalizable_relations();
  CHECK(all.size() == 33);
  std::set<std::string> rendered;
  for (const auto& name : all) rendered.insert(verbalize_relation(name));
  CHECK(rendered.size() == all.size());
  for (const auto& name : labels) CHECK(has_verbalization(name));
}

TEST_CASE("whitespace tokenizer is deterministic with stable sentinel ids") {
  WhitespaceTokenizer tok;
  auto a = tok.tokenize("the black poodle");
  auto b = tok.tokenize("the black poodle");
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].text == b[i].text);
  }
  auto sentinels = tok.mask_sentinel_ids();
  REQUIRE(sentinels.size() == 100);
  CHECK(sentinels[0] == 0);
  CHECK(tok.tokenize("<extra_id_0>").size() == 1);
  CHECK(tok.tokenize("<extra_id_0>")[0].id == 0);
  CHECK(tok.eos_id() == 100);
  CHECK(tok.tokenize("the")[0].id >= 101);
}

TEST_CASE("TSV round trip") {
  std::string path = "test_graph_roundtrip.tsv";
  GraphOfTriplets g = menagerie();
  save_triplets_tsv(path, g.triplets());
  std::vector<Triplet> back = load_triplets_tsv(path);
  CHECK(back == g.triplets());
  std::remove(path.c_str());

  CHECK_THROWS(load_triplets_tsv("does_not_exist.tsv"));
}

TEST_CASE("graph JSON round trip carries target and mask level") {
  GraphOfTriplets g = mask_target_relation(menagerie(), 1);
  std::string path = "test_graph_roundtrip.json";
  {
    std::ofstream out(path);
    out << graph_to_json_string(g, 2);
  }
  GraphDocument doc = load_graph_json(path);
  CHECK(doc.graph.triplets() == g.triplets());
  CHECK(doc.graph.target() == std::size_t{1});
  CHECK(doc.mask_level == 2);
  std::remove(path.c_str());
}
