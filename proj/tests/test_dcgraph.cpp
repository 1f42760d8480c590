/*
 * Copyright 2026 The dcgrank Authors.
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing,
 *  software distributed under the License is distributed on an "AS
 *  IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either
 *  express or implied.  See the License for the specific language
 *  governing permissions and limitations under the License.
 */

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "dcgrank/dcgraph.hpp"
#include "support.hpp"

using namespace dcgrank;

namespace {

Corpus three_concepts() {
  std::istringstream docs(
      "{\"id\": \"d1\", \"abstract\": \"x\", \"concepts\": [\"c1\", \"c2\"]}\n"
      "{\"id\": \"d2\", \"abstract\": \"y\", \"concepts\": [\"c3\"]}\n");
  std::istringstream concepts("c1\talpha\nc2\tbeta gamma\nc3\tdelta\nc3\tdelta prime\n");
  return parse_corpus(docs, concepts);
}

using Ids = std::vector<std::size_t>;

}  // namespace

TEST_CASE("construction rule") {
  auto c = three_concepts();
  std::istringstream kb("c2\trelated_to\tc3\n");
  auto g = build_graph(c, kb);
  const auto c1 = *c.concept_index("c1"), c2 = *c.concept_index("c2"), c3 = *c.concept_index("c3");
  CHECK(g.doc_concepts(0) == Ids{c1, c2});
  CHECK(g.concept_neighbors(c2) == Ids{c3});
  CHECK(g.concept_neighbors(c3) == Ids{c2});
  CHECK(g.concept_neighbors(c1).empty());
  CHECK(g.num_containment_edges() == 3);
  CHECK(g.kb_edges().size() == 1);
  CHECK(g.kb_edges()[0].relation == "related_to");
}

TEST_CASE("duplicate and reversed kb lines collapse") {
  auto c = three_concepts();
  std::istringstream kb("c2\tr\tc3\nc2\tr\tc3\nc3\tother\tc2\nc1\tself\tc1\n");
  auto g = build_graph(c, kb);
  CHECK(g.kb_edges().size() == 1);
  CHECK(g.skipped_self_loops() == 1);
}

TEST_CASE("no kb edges") {
  auto c = three_concepts();
  auto g = build_graph(c);
  for (std::size_t i = 0; i < g.num_concepts(); ++i) CHECK(g.concept_neighbors(i).empty());
  CHECK(g.num_docs() == 2);
}

TEST_CASE("unknown kb concept") {
  auto c = three_concepts();
  std::istringstream kb("c1\tr\tnope\n");
  CHECK_THROWS_AS(build_graph(c, kb), IngestError);
  std::istringstream short_line("c1\tc2\n");
  CHECK_THROWS_AS(build_graph(c, short_line), ParseError);
}

TEST_CASE("symmetry, direction and order independence on random kbs") {
  auto fx = synth::load_fixture(synth::kb_fixture({}));
  const auto& corpus = fx.corpus;
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> pick(0, corpus.concepts.size() - 1);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<std::string> lines;
    for (int e = 0; e < 60; ++e) {
      lines.push_back(corpus.concepts[pick(rng)].id + "\trel\t" + corpus.concepts[pick(rng)].id);
    }
    auto build = [&](const std::vector<std::string>& ls) {
      std::string text;
      for (const auto& l : ls) text += l + "\n";
      std::istringstream in(text);
      return build_graph(corpus, in);
    };
    auto g = build(lines);
    for (std::size_t u = 0; u < g.num_concepts(); ++u) {
      for (auto v : g.concept_neighbors(u)) {
        const auto& back = g.concept_neighbors(v);
        CHECK(std::binary_search(back.begin(), back.end(), u));
        CHECK(v != u);
      }
    }
    // documents only ever appear as receivers: neighbour lists hold concept
    // indices and the doc lists match the corpus containment exactly
    for (std::size_t d = 0; d < g.num_docs(); ++d) CHECK(g.doc_concepts(d) == corpus.documents[d].concepts);
    auto shuffled = lines;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto g2 = build(shuffled);
    for (std::size_t u = 0; u < g.num_concepts(); ++u)
      CHECK(g.concept_neighbors(u) == g2.concept_neighbors(u));
    CHECK(build(lines) == g);
  }
}

TEST_CASE("graph save and load") {
  dcgrank::testing::TempDir dir("graph");
  auto c = three_concepts();
  std::istringstream kb("c1\tr\tc3\n");
  auto g = build_graph(c, kb);
  save_graph(g, c, dir.file("g.json"));
  CHECK(load_graph(c, dir.file("g.json")) == g);
  auto other = synth::load_fixture(synth::toy_fixture());
  CHECK_THROWS_AS(load_graph(other.corpus, dir.file("g.json")), FormatError);
}

TEST_CASE("match overlay") {
  auto c = three_concepts();
  auto g = build_graph(c);
  const auto c1 = *c.concept_index("c1"), c2 = *c.concept_index("c2");
  auto m = mark_matched(g, std::set<std::size_t>{c2});
  CHECK(m.edge_matched(0, c2));
  CHECK_FALSE(m.edge_matched(0, c1));
  CHECK(m.count() == 1);
  auto none = mark_matched(g, std::set<std::size_t>{});
  CHECK_FALSE(none.any());
  for (std::size_t d = 0; d < g.num_docs(); ++d)
    for (auto ci : g.doc_concepts(d)) CHECK_FALSE(none.edge_matched(d, ci));
  std::set<std::size_t> all;
  for (std::size_t i = 0; i < g.num_concepts(); ++i) all.insert(i);
  auto every = mark_matched(g, all);
  for (std::size_t d = 0; d < g.num_docs(); ++d)
    for (auto ci : g.doc_concepts(d)) CHECK(every.edge_matched(d, ci));
  CHECK_THROWS_AS(mark_matched(g, std::set<std::size_t>{99}), IndexError);
  CHECK(mark_matched(g, c, std::set<std::string>{"c1"}).edge_matched(0, c1));
  CHECK_THROWS_AS(mark_matched(g, c, std::set<std::string>{"zz"}), IngestError);
}

TEST_CASE("concept matching on token runs") {
  auto c = three_concepts();
  const auto c2 = *c.concept_index("c2"), c3 = *c.concept_index("c3");
  CHECK(concepts_matching(c, {{"the", "beta", "gamma", "x"}}) == std::set<std::size_t>{c2});
  CHECK(concepts_matching(c, {{"gamma", "beta"}}).empty());
  CHECK(concepts_matching(c, {{"beta"}, {"delta", "prime"}}) == std::set<std::size_t>{c3});
}
