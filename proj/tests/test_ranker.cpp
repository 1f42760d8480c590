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
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "dcgrank/gradcheck.hpp"
#include "dcgrank/ranker.hpp"
#include "dcgrank/trainer.hpp"
#include "support.hpp"

using namespace dcgrank;
using dcgrank::testing::random_tensor;

namespace {

std::vector<std::string> order_of(const std::vector<RunEntry>& run) {
  std::vector<std::string> out;
  for (const auto& e : run) out.push_back(e.doc);
  return out;
}

}  // namespace

TEST_CASE("score examples") {
  auto id = Tensor2::identity(2);
  CHECK(score(Tensor2::row({0.3, 0.7}), Tensor2::row({0.3, 0.7}), id, Norm::l2) == 0.0);
  CHECK(score(Tensor2::row({1, 0}), Tensor2::row({0, 1}), id, Norm::l2) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(score(Tensor2::row({1, 0}), Tensor2::row({0, 1}), id, Norm::l1) == 2.0);
  CHECK_THROWS_AS(score(Tensor2::row({1, 0}), Tensor2::row({0, 1, 2}), id, Norm::l2), DimensionError);
}

TEST_CASE("score is a distance") {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 100; ++rep) {
    auto p = random_tensor(1, 3, rng), w = random_tensor(3, 4, rng), d = random_tensor(1, 4, rng);
    for (Norm n : {Norm::l1, Norm::l2}) {
      CHECK(score(p, d, w, n) > 0.0);
      CHECK(score(p, matmul(p, w), w, n) == 0.0);
    }
  }
}

TEST_CASE("pair and rank losses") {
  CHECK(pair_loss(0.2, 0.5, 0.0) == 0.0);
  CHECK(pair_loss(0.5, 0.2, 0.0) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(pair_loss(0.2, 0.5, 0.4) == doctest::Approx(0.1).epsilon(1e-12));
  std::vector<ScoredPair> pairs{{0.2, 0.5}, {0.5, 0.2}};
  CHECK(rank_loss(pairs, 0.0) == doctest::Approx(0.15).epsilon(1e-12));
  std::vector<ScoredPair> fine{{0.1, 0.9}, {0.0, 3.0}};
  CHECK(rank_loss(fine, 0.0) == 0.0);
  CHECK_THROWS_AS(rank_loss(std::vector<ScoredPair>{}, 0.1), std::invalid_argument);
  // equal scores: the literal objective is already at its minimum
  std::vector<ScoredPair> equal{{0.4, 0.4}, {1.5, 1.5}};
  CHECK(rank_loss(equal, 0.0) == 0.0);
  CHECK(rank_loss(equal, 0.1) == 0.1);
}

TEST_CASE("total loss is linear in each term") {
  RankingConfig cfg;
  CHECK(total_loss(2.0, 1.0, cfg) == 1.5);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 5);
  for (int rep = 0; rep < 50; ++rep) {
    cfg.beta = u(rng);
    cfg.gamma = u(rng);
    const double g1 = u(rng), g2 = u(rng), r = u(rng);
    CHECK(total_loss(g1 + g2, r, cfg) == doctest::Approx(total_loss(g1, r, cfg) + cfg.beta * g2));
  }
  cfg = {};
  cfg.gamma = 0.0;
  CHECK(total_loss(2.0, 100.0, cfg) == 1.0);
  cfg = {};
  cfg.beta = 0.0;
  CHECK(total_loss(100.0, 3.0, cfg) == 1.5);
}

TEST_CASE("scoring gradients pass finite differences") {
  std::mt19937_64 rng(3);
  for (Norm n : {Norm::l1, Norm::l2}) {
    ParamStore ps;
    ps.add("p", random_tensor(1, 3, rng));
    ps.add("W", random_tensor(3, 4, rng));
    ps.add("d_good", random_tensor(1, 4, rng));
    ps.add("d_bad", random_tensor(1, 4, rng));
    Objective f = [&](ParamStore& p) {
      Tape tape(&p);
      Var fb = score(tape, tape.param("p"), tape.param("d_good"), tape.param("W"), n);
      Var fw = score(tape, tape.param("p"), tape.param("d_bad"), tape.param("W"), n);
      Var pl = pair_loss(tape, fb, fw, 10.0);  // wide margin keeps the hinge active
      std::vector<Var> losses{pl, pair_loss(tape, fw, fb, 10.0)};
      Var loss = rank_loss(tape, losses);
      tape.backward(loss);
      return tape.value(loss)[0];
    };
    CHECK(grad_check(f, ps, 1e-5).max_rel_error < 1e-4);
  }
}

TEST_CASE("tie rule and ordering") {
  CHECK(order_of(rank_by_distance({{"d2", 0.1}, {"d1", 0.1}, {"d3", 0.9}})) ==
        std::vector<std::string>{"d1", "d2", "d3"});
  auto single = rank_by_distance({{"only", 4.0}});
  REQUIRE(single.size() == 1);
  CHECK(single[0].score == -4.0);
  CHECK(order_of(rank_by_distance({{"a", 0.1}, {"b", 0.2}, {"c", 0.3}})) ==
        std::vector<std::string>{"a", "b", "c"});
  // monotone transforms do not change the order
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 3);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<std::pair<std::string, double>> d, t;
    for (int i = 0; i < 12; ++i) {
      const double s = std::round(u(rng) * 4) / 4;  // plenty of ties
      d.emplace_back("doc" + std::to_string(i), s);
      t.emplace_back("doc" + std::to_string(i), std::exp(2 * s) + 7);
    }
    CHECK(order_of(rank_by_distance(d)) == order_of(rank_by_distance(t)));
  }
}

TEST_CASE("pairs follow the partial order") {
  std::map<std::string, int> judged{{"a", 2}, {"b", 1}, {"c", 1}, {"z", 0}};
  std::vector<std::string> cands{"a", "b", "c", "x", "z"};
  std::mt19937_64 rng(5);
  auto all = make_pairs("q", judged, cands, 1000, rng);
  // a>b a>c a>x a>z, b>x b>z, c>x c>z
  CHECK(all.size() == 8);
  auto rel = [&](const std::string& d) { return judged.count(d) ? judged.at(d) : 0; };
  for (const auto& p : all) {
    CHECK(p.query == "q");
    CHECK(rel(p.better) > rel(p.worse));
  }
  std::mt19937_64 r1(6), r2(6);
  auto capped = make_pairs("q", judged, cands, 3, r1);
  CHECK(capped.size() == 3);
  std::set<std::pair<std::string, std::string>> distinct;
  for (const auto& p : capped) distinct.insert({p.better, p.worse});
  CHECK(distinct.size() == 3);
  auto again = make_pairs("q", judged, cands, 3, r2);
  for (std::size_t i = 0; i < 3; ++i) CHECK(capped[i].better == again[i].better);
  for (std::size_t i = 0; i < 3; ++i) CHECK(capped[i].worse == again[i].worse);
  std::map<std::string, int> flat{{"a", 1}, {"b", 1}};
  CHECK(make_pairs("q", flat, std::vector<std::string>{}, 10, rng).empty());
}

TEST_CASE("equal document vectors: margin decides the ranking loss") {
  auto fx = synth::load_fixture(synth::toy_fixture());
  auto cfg = dcgrank::testing::small_config();
  cfg.ranking.beta = 0.0;
  cfg.ranking.gamma = 1.0;
  for (double margin : {0.0, 0.1}) {
    cfg.ranking.margin = margin;
    auto model = Model::create(fx.corpus, fx.graph, cfg, 1);
    model.params().value(pname::kFuseW).fill(0.0);
    model.params().value(pname::kFuseB) = Tensor2::row({0.3, -0.1, 0.7, 0.2, 0.0});
    auto batch = dcgrank::testing::judged_examples(fx);
    auto loss = batch_objective(model, batch, 0.0, nullptr, false);
    CHECK(loss.rank == margin);
    CHECK(loss.total == margin);
  }
}

TEST_CASE("model ranking") {
  auto fx = synth::load_fixture(synth::containment_fixture({}));
  auto model = Model::create(fx.corpus, fx.graph, dcgrank::testing::small_config(), 9);
  const Query q = expand(fx.queries[0], fx.lexicon);
  auto full = model.rank_documents(q);
  CHECK(full.size() == fx.corpus.documents.size());
  for (std::size_t i = 1; i < full.size(); ++i) {
    CHECK(full[i - 1].score >= full[i].score);
    if (full[i - 1].score == full[i].score) CHECK(full[i - 1].doc < full[i].doc);
  }
  std::vector<Query> qs{q};
  auto run = model.rank_all(qs, 5);
  REQUIRE(run.at(q.id).size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(run.at(q.id)[i].doc == full[i].doc);
    CHECK(run.at(q.id)[i].score == doctest::Approx(full[i].score).epsilon(1e-12));
  }
  std::vector<std::string> some{fx.corpus.documents[3].id, fx.corpus.documents[1].id};
  CHECK(model.rank_documents(q, some).size() == 2);
  CHECK_THROWS_AS(model.rank_documents(q, std::vector<std::string>{"nope"}), std::out_of_range);
  auto r1 = model.rank_all(qs), r2 = model.rank_all(qs);
  for (std::size_t i = 0; i < r1.at(q.id).size(); ++i) {
    CHECK(r1.at(q.id)[i].doc == r2.at(q.id)[i].doc);
    CHECK(r1.at(q.id)[i].score == r2.at(q.id)[i].score);
  }
}

TEST_CASE("overlap candidates") {
  DocumentConceptGraph g(4, 3);
  g.add_containment(0, 0);
  g.add_containment(1, 0);
  g.add_containment(1, 1);
  g.add_containment(2, 2);
  g.add_containment(3, 1);
  auto m = mark_matched(g, std::set<std::size_t>{0, 1});
  CHECK(overlap_candidates(g, m, 10) == std::vector<std::size_t>{1, 0, 3, 2});
  CHECK(overlap_candidates(g, m, 2) == std::vector<std::size_t>{1, 0});
  auto fx = synth::load_fixture(synth::containment_fixture({}));
  auto model = Model::create(fx.corpus, fx.graph, dcgrank::testing::small_config(), 9);
  std::vector<Query> qs{expand(fx.queries[2], fx.lexicon)};
  auto limited = model.rank_all(qs, 0, 4);
  CHECK(limited.at(qs[0].id).size() == 4);
}
