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

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "dcgrank/docrep.hpp"
#include "dcgrank/trainer.hpp"
#include "support.hpp"

using namespace dcgrank;
using dcgrank::testing::bit_equal;
using dcgrank::testing::random_tensor;

namespace {

// Encoder/decoder parameters over a vocabulary of `vocab` rows.
ParamStore text_params(const DocRepConfig& cfg, std::size_t vocab, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto words = random_tensor(vocab, cfg.embed_dim, rng, -0.5, 0.5);
  for (std::size_t j = 0; j < cfg.embed_dim; ++j) words(Vocabulary::kPad, j) = 0.0;
  ParamStore ps;
  init_docrep_params(ps, cfg, words, Tensor2(0, cfg.embed_dim), rng);
  return ps;
}

DocRepConfig tiny_gcn(std::size_t layers, bool self_loops) {
  DocRepConfig cfg;
  cfg.embed_dim = 2;
  cfg.gcn_dim = 2;
  cfg.gcn_layers = layers;
  cfg.self_loops = self_loops;
  return cfg;
}

void add_identity_gcn(ParamStore& ps, std::size_t layers, bool self_loops) {
  for (std::size_t l = 0; l < layers; ++l) {
    ps.add(pname::gcn(l, "Wc"), Tensor2::identity(2));
    ps.add(pname::gcn(l, "Wd"), Tensor2::identity(2));
    if (self_loops) {
      ps.add(pname::gcn(l, "Wcs"), Tensor2::identity(2));
      ps.add(pname::gcn(l, "Wds"), Tensor2::identity(2));
    }
  }
}

Tensor2 sigmoid_t(const Tensor2& t) { return elementwise(Elementwise::sigmoid, t); }
Tensor2 tanh_t(const Tensor2& t) { return elementwise(Elementwise::tanh, t); }

Tensor2 cols(const Tensor2& t, std::size_t begin, std::size_t n) {
  Tensor2 out(1, n);
  for (std::size_t j = 0; j < n; ++j) out[j] = t[begin + j];
  return out;
}

Tensor2 hcat(const Tensor2& a, const Tensor2& b) {
  Tensor2 out(1, a.cols() + b.cols());
  for (std::size_t j = 0; j < a.cols(); ++j) out[j] = a[j];
  for (std::size_t j = 0; j < b.cols(); ++j) out[a.cols() + j] = b[j];
  return out;
}

Tensor2 plus(Tensor2 a, const Tensor2& b) {
  a += b;
  return a;
}

}  // namespace

TEST_CASE("encoder pooling") {
  DocRepConfig cfg;
  cfg.embed_dim = 3;
  cfg.hidden_dim = 4;
  cfg.encoder_layers = 2;
  cfg.gcn_dim = 4;
  cfg.doc_dim = 3;
  cfg.decoder_hidden = 3;
  auto ps = text_params(cfg, 12, 1);
  {
    Tape tape(&ps);
    std::vector<std::size_t> one{9};
    auto enc = encode(tape, one, cfg);
    REQUIRE(enc.states.size() == 1);
    CHECK(tape.value(enc.pooled) == tape.value(enc.states[0]));
  }
  {
    Tape tape(&ps);
    Var a = tape.constant(Tensor2::row({1, 1}));
    Var b = tape.constant(Tensor2::row({3, 3}));
    CHECK(tape.value(tape.mean(std::vector<Var>{a, b})) == Tensor2::row({2, 2}));
    std::vector<std::size_t> toks{8, 9, 10};
    auto enc = encode(tape, toks, cfg);
    Tensor2 mean(1, 4);
    for (auto s : enc.states) mean += tape.value(s);
    for (auto& v : mean.data()) v /= 3.0;
    for (std::size_t j = 0; j < 4; ++j) CHECK(tape.value(enc.pooled)[j] == doctest::Approx(mean[j]).epsilon(1e-14));
  }
  Tape tape(&ps);
  CHECK_THROWS_AS(encode(tape, std::vector<std::size_t>{}, cfg), std::invalid_argument);
}

TEST_CASE("encoder with all-zero parameters outputs zeros") {
  DocRepConfig cfg;
  cfg.embed_dim = 3;
  cfg.hidden_dim = 4;
  cfg.encoder_layers = 3;
  cfg.gcn_dim = 4;
  cfg.doc_dim = 3;
  cfg.decoder_hidden = 3;
  auto ps = text_params(cfg, 12, 2);
  for (auto& [name, p] : ps) p.value.fill(0.0);
  Tape tape(&ps);
  std::vector<std::size_t> toks{8, 9, 10, 11};
  auto enc = encode(tape, toks, cfg);
  for (auto v : tape.value(enc.pooled).data()) CHECK(v == 0.0);
}

TEST_CASE("bidirectional halves read only their own side") {
  DocRepConfig cfg;
  cfg.embed_dim = 3;
  cfg.hidden_dim = 4;
  cfg.encoder_layers = 1;
  cfg.gcn_dim = 4;
  cfg.doc_dim = 3;
  cfg.decoder_hidden = 3;
  auto ps = text_params(cfg, 14, 3);
  std::vector<std::size_t> full{8, 9, 10, 11, 12};
  Tape tape(&ps);
  auto whole = encode(tape, full, cfg);
  for (std::size_t t = 0; t < full.size(); ++t) {
    std::vector<std::size_t> prefix(full.begin(), full.begin() + t + 1);
    std::vector<std::size_t> suffix(full.begin() + t, full.end());
    auto p = encode(tape, prefix, cfg);
    auto s = encode(tape, suffix, cfg);
    CHECK(cols(tape.value(whole.states[t]), 0, 2) == cols(tape.value(p.states[t]), 0, 2));
    CHECK(cols(tape.value(whole.states[t]), 2, 2) == cols(tape.value(s.states[0]), 2, 2));
  }
}

TEST_CASE("graph convolution with identity weights") {
  auto cfg = tiny_gcn(1, false);
  DocumentConceptGraph g(1, 2);
  g.add_containment(0, 0);
  g.add_containment(0, 1);
  ParamStore ps;
  add_identity_gcn(ps, 1, false);
  const auto concepts = Tensor2::from_rows({{1, 0}, {0, 1}});
  const Tensor2 doc_init = Tensor2::from_rows({{5, 7}});

  auto plain = propagate(g, MatchOverlay{}, doc_init, concepts, ps, 1.6, cfg);
  CHECK(plain.docs[1] == Tensor2::from_rows({{1, 1}}));

  auto rewarded = propagate(g, mark_matched(g, std::set<std::size_t>{0}), doc_init, concepts, ps,
                            1.6, cfg);
  CHECK(rewarded.docs[1] == Tensor2::from_rows({{1.6, 1.0}}));

  DocumentConceptGraph lonely(1, 2);
  auto iso = propagate(lonely, MatchOverlay{}, doc_init, concepts, ps, 1.6, cfg);
  CHECK(iso.docs[1] == Tensor2::from_rows({{0, 0}}));

  CHECK_THROWS_AS(propagate(g, MatchOverlay{}, doc_init, concepts, ps, 0.5, cfg),
                  std::invalid_argument);
}

TEST_CASE("reward factor scales matched messages exactly") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    auto cfg = tiny_gcn(1, false);
    DocumentConceptGraph g(1, 3);
    for (std::size_t c = 0; c < 3; ++c) g.add_containment(0, c);
    ParamStore ps;
    add_identity_gcn(ps, 1, false);
    auto concepts = random_tensor(3, 2, rng, 0.1, 2.0);
    const std::size_t hit = rep % 3;
    auto out = propagate(g, mark_matched(g, std::set<std::size_t>{hit}), Tensor2(1, 2), concepts,
                         ps, 1.6, cfg);
    for (std::size_t j = 0; j < 2; ++j) {
      std::vector<double> msgs;
      for (std::size_t c = 0; c < 3; ++c) msgs.push_back(c == hit ? 1.6 * concepts(c, j) : concepts(c, j));
      CHECK(out.docs[1](0, j) == (msgs[0] + msgs[1]) + msgs[2]);
    }
  }
}

TEST_CASE("alpha of one equals the unmarked graph bit for bit") {
  auto fx = synth::load_fixture(synth::containment_fixture({}));
  auto cfg = dcgrank::testing::small_config();
  auto model = Model::create(fx.corpus, fx.graph, cfg, 7);
  std::mt19937_64 rng(8);
  auto doc_init = random_tensor(fx.graph.num_docs(), cfg.doc.gcn_dim, rng);
  auto concept_init = random_tensor(fx.graph.num_concepts(), cfg.doc.embed_dim, rng);
  std::set<std::size_t> all;
  for (std::size_t c = 0; c < fx.graph.num_concepts(); ++c) all.insert(c);
  auto marked = propagate(fx.graph, mark_matched(fx.graph, all), doc_init, concept_init,
                          model.params(), 1.0, cfg.doc);
  auto unmarked = propagate(fx.graph, MatchOverlay{}, doc_init, concept_init, model.params(), 1.6,
                            cfg.doc);
  REQUIRE(marked.docs.size() == unmarked.docs.size());
  for (std::size_t l = 0; l < marked.docs.size(); ++l) CHECK(bit_equal(marked.docs[l], unmarked.docs[l]));
  auto boosted = propagate(fx.graph, mark_matched(fx.graph, all), doc_init, concept_init,
                           model.params(), 1.6, cfg.doc);
  CHECK_FALSE(bit_equal(boosted.docs.back(), unmarked.docs.back()));
}

TEST_CASE("concepts never read documents") {
  auto fx = synth::load_fixture(synth::kb_fixture({}));
  auto cfg = dcgrank::testing::small_config();
  auto model = Model::create(fx.corpus, fx.graph, cfg, 3);
  std::mt19937_64 rng(5);
  auto doc_init = random_tensor(fx.graph.num_docs(), cfg.doc.gcn_dim, rng);
  auto concept_init = random_tensor(fx.graph.num_concepts(), cfg.doc.embed_dim, rng);
  auto base = propagate(fx.graph, MatchOverlay{}, doc_init, concept_init, model.params(), 1.6, cfg.doc);
  for (int rep = 0; rep < 10; ++rep) {
    auto perturbed = doc_init;
    std::uniform_int_distribution<std::size_t> pick(0, perturbed.size() - 1);
    perturbed[pick(rng)] += 10.0;
    auto out = propagate(fx.graph, MatchOverlay{}, perturbed, concept_init, model.params(), 1.6, cfg.doc);
    for (std::size_t l = 0; l < base.concepts.size(); ++l)
      CHECK(bit_equal(base.concepts[l], out.concepts[l]));
  }
}

TEST_CASE("receptive field grows one hop per layer") {
  // chain c0 - c1 - c2 - c3, document d holds c0 only
  DocumentConceptGraph g(1, 4);
  g.add_containment(0, 0);
  g.add_kb_edge(0, 1, "r");
  g.add_kb_edge(1, 2, "r");
  g.add_kb_edge(2, 3, "r");
  std::mt19937_64 rng(6);
  for (std::size_t layers = 1; layers <= 3; ++layers) {
    DocRepConfig cfg;
    cfg.embed_dim = 3;
    cfg.gcn_dim = 3;
    cfg.gcn_layers = layers;
    ParamStore ps;
    for (std::size_t l = 0; l < layers; ++l)
      for (const char* w : {"Wc", "Wd", "Wcs", "Wds"}) ps.add(pname::gcn(l, w), random_tensor(3, 3, rng, 0.1, 1.0));
    auto init = random_tensor(4, 3, rng, 0.1, 1.0);
    Tensor2 doc_init(1, 3, 0.5);
    auto base = propagate(g, MatchOverlay{}, doc_init, init, ps, 1.0, cfg);
    for (std::size_t c = 0; c < 4; ++c) {
      auto moved = init;
      for (std::size_t j = 0; j < 3; ++j) moved(c, j) += 0.75;
      auto out = propagate(g, MatchOverlay{}, doc_init, moved, ps, 1.0, cfg);
      const std::size_t distance = c + 1;  // hops from the document
      if (distance > layers) CHECK(bit_equal(out.docs.back(), base.docs.back()));
      else CHECK_FALSE(bit_equal(out.docs.back(), base.docs.back()));
    }
  }
}

TEST_CASE("fusion") {
  DocRepConfig cfg;
  cfg.hidden_dim = 2;
  cfg.gcn_dim = 2;
  cfg.doc_dim = 4;
  ParamStore ps;
  ps.add(pname::kFuseW, Tensor2::identity(4));
  ps.add(pname::kFuseB, Tensor2(1, 4));
  {
    Tape tape(&ps);
    Var v = fuse(tape, tape.constant(Tensor2::row({1, 2})), tape.constant(Tensor2::row({3, 4})), cfg);
    CHECK(tape.value(v) == Tensor2::row({1, 2, 3, 4}));
  }
  ps.value(pname::kFuseW).fill(0.0);
  ps.value(pname::kFuseB) = Tensor2::row({0.5, -1, 2, 3});
  {
    Tape tape(&ps);
    Var v = fuse(tape, tape.constant(Tensor2::row({9, 9})), tape.constant(Tensor2::row({-4, 1})), cfg);
    CHECK(tape.value(v) == Tensor2::row({0.5, -1, 2, 3}));
  }
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    ps.value(pname::kFuseW) = random_tensor(4, 4, rng);
    ps.value(pname::kFuseB) = random_tensor(1, 4, rng);
    auto enc = random_tensor(1, 2, rng), gcn = random_tensor(1, 2, rng);
    Tape tape(&ps);
    Var v = fuse(tape, tape.constant(enc), tape.constant(gcn), cfg);
    auto want = plus(matmul(hcat(enc, gcn), ps.value(pname::kFuseW)), ps.value(pname::kFuseB));
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(tape.value(v)[j] - want[j]) < 1e-12);
  }
  Tape tape(&ps);
  CHECK_THROWS_AS(fuse(tape, tape.constant(Tensor2::row({1})), tape.constant(Tensor2::row({1, 2})), cfg),
                  DimensionError);
}

TEST_CASE("graph ablation leaves only the text path") {
  auto fx = synth::load_fixture(synth::containment_fixture({}));
  auto cfg = dcgrank::testing::small_config();
  cfg.doc.use_graph = false;
  auto model = Model::create(fx.corpus, fx.graph, cfg, 2);
  std::vector<std::size_t> docs{0, 1, 2};
  auto before = model.doc_vectors(MatchOverlay{}, docs);
  for (auto& v : model.params().value(pname::kConceptEmbedding).data()) v += 1.0;
  for (auto& [name, p] : model.params())
    if (name.rfind("gcn.", 0) == 0) p.value.fill(3.0);
  auto after = model.doc_vectors(MatchOverlay{}, docs);
  for (std::size_t i = 0; i < docs.size(); ++i) CHECK(bit_equal(before[i], after[i]));
}

TEST_CASE("uniform decoder logits cost ln V per token") {
  DocRepConfig cfg;
  cfg.embed_dim = 4;
  cfg.hidden_dim = 4;
  cfg.gcn_dim = 4;
  cfg.doc_dim = 3;
  cfg.decoder_hidden = 5;
  auto ps = text_params(cfg, 1000, 9);
  ps.value("dec.out.W").fill(0.0);
  ps.value("dec.out.b").fill(0.0);
  Tape tape(&ps);
  std::vector<std::size_t> title{17, 400, 999};
  auto loss = decode_loss(tape, title, tape.constant(Tensor2::row({0.3, -0.2, 0.9})), cfg);
  REQUIRE(loss);
  CHECK(tape.value(*loss)[0] == doctest::Approx(std::log(1000.0)).epsilon(1e-12));
  CHECK_FALSE(decode_loss(tape, std::vector<std::size_t>{}, tape.constant(Tensor2(1, 3)), cfg));
}

TEST_CASE("a title that is only EOS is one cross-entropy step") {
  DocRepConfig cfg;
  cfg.embed_dim = 3;
  cfg.hidden_dim = 4;
  cfg.gcn_dim = 4;
  cfg.doc_dim = 3;
  cfg.decoder_hidden = 2;
  auto ps = text_params(cfg, 20, 10);
  const auto v = Tensor2::row({0.4, -0.7, 0.2});
  Tape tape(&ps);
  auto loss = decode_loss(tape, std::vector<std::size_t>{Vocabulary::kEos}, tape.constant(v), cfg);
  REQUIRE(loss);

  // hand-rolled: h0, c0 from v, one LSTM step on the EOS embedding
  auto h0 = tanh_t(plus(matmul(v, ps.value("dec.init_h.W")), ps.value("dec.init_h.b")));
  auto c0 = plus(matmul(v, ps.value("dec.init_c.W")), ps.value("dec.init_c.b"));
  Tensor2 x(1, 3);
  for (std::size_t j = 0; j < 3; ++j) x[j] = ps.value(pname::kWordEmbedding)(Vocabulary::kEos, j);
  auto z = plus(matmul(hcat(x, h0), ps.value("dec.lstm.W")), ps.value("dec.lstm.b"));
  auto i = sigmoid_t(cols(z, 0, 2)), f = sigmoid_t(cols(z, 2, 2)), o = sigmoid_t(cols(z, 4, 2));
  auto g = tanh_t(cols(z, 6, 2));
  auto c1 = plus(elementwise(Elementwise::mul, f, c0), elementwise(Elementwise::mul, i, g));
  auto h1 = elementwise(Elementwise::mul, o, tanh_t(c1));
  auto logits = plus(matmul(h1, ps.value("dec.out.W")), ps.value("dec.out.b"));
  CHECK(tape.value(*loss)[0] == doctest::Approx(softmax_xent(logits, Vocabulary::kEos)).epsilon(1e-12));
}

TEST_CASE("graph loss is the mean of per-document losses") {
  DocRepConfig cfg;
  cfg.embed_dim = 3;
  cfg.hidden_dim = 4;
  cfg.gcn_dim = 4;
  cfg.doc_dim = 3;
  cfg.decoder_hidden = 3;
  auto ps = text_params(cfg, 30, 11);
  Tape tape(&ps);
  Var a = tape.constant(Tensor2::row({0.1, 0.2, 0.3}));
  Var b = tape.constant(Tensor2::row({-0.5, 0.9, 0.0}));
  std::vector<std::size_t> ta{10, 11}, tb{12, 13, 14};
  const double la = tape.value(*decode_loss(tape, ta, a, cfg))[0];
  const double lb = tape.value(*decode_loss(tape, tb, b, cfg))[0];
  std::vector<std::vector<std::size_t>> titles{ta, tb};
  std::vector<Var> docs{a, b};
  CHECK(tape.value(graph_loss(tape, titles, docs, cfg))[0] == doctest::Approx((la + lb) / 2).epsilon(1e-14));

  std::vector<std::vector<std::size_t>> same{ta, ta, ta};
  std::vector<Var> same_docs{a, a, a};
  CHECK(tape.value(graph_loss(tape, same, same_docs, cfg))[0] == doctest::Approx(la).epsilon(1e-14));

  std::vector<std::vector<std::size_t>> with_empty{ta, {}};
  std::size_t skipped = 0;
  CHECK(tape.value(graph_loss(tape, with_empty, docs, cfg, &skipped))[0] == doctest::Approx(la).epsilon(1e-14));
  CHECK(skipped == 1);
  std::vector<std::vector<std::size_t>> all_empty{{}, {}};
  CHECK_THROWS_AS(graph_loss(tape, all_empty, docs, cfg), std::invalid_argument);
}

TEST_CASE("document objective gradients pass finite differences") {
  auto fx = synth::load_fixture(synth::toy_fixture());
  auto cfg = dcgrank::testing::small_config();
  cfg.ranking.beta = 1.0;
  cfg.ranking.gamma = 0.0;
  auto model = Model::create(fx.corpus, fx.graph, cfg, 4);
  auto batch = dcgrank::testing::judged_examples(fx);
  REQUIRE_FALSE(batch.empty());
  auto report = check_model_gradients(model, batch, 0.0, 1e-5);
  CHECK(report.max_rel_error < 1e-4);
  for (const auto& [name, err] : report.per_param) {
    INFO(name);
    CHECK(err < 1e-4);
  }
  // dropout with a pinned mask
  auto with_drop = check_model_gradients(model, batch, 0.3, 1e-5, {4, 1});
  CHECK(with_drop.max_rel_error < 1e-4);
}

TEST_CASE("decoder overfits three titles") {
  std::istringstream docs(
      R"({"id": "a", "title": "red fox jumps", "abstract": "alpha beta gamma delta"})" "\n"
      R"({"id": "b", "title": "blue whale sings", "abstract": "epsilon zeta eta"})" "\n"
      R"({"id": "c", "title": "green frog sits", "abstract": "theta iota kappa lambda mu"})" "\n");
  std::istringstream concepts("");
  auto corpus = parse_corpus(docs, concepts);
  auto graph = build_graph(corpus);
  ModelConfig mc = dcgrank::testing::small_config();
  mc.doc.embed_dim = 8;
  mc.doc.hidden_dim = 8;
  mc.doc.encoder_layers = 1;
  mc.doc.decoder_hidden = 12;
  mc.doc.doc_dim = 8;
  auto model = Model::create(corpus, graph, mc, 1);
  AdagradState opt;
  for (int step = 0; step < 500; ++step) {
    model.params().zero_grad();
    Tape tape(&model.params());
    auto layers = concept_forward(tape, graph, mc.doc);
    std::vector<std::vector<std::size_t>> titles;
    std::vector<Var> vecs;
    for (std::size_t d = 0; d < 3; ++d) {
      vecs.push_back(document_forward(tape, corpus, graph, MatchOverlay{}, d, layers, 1.0, mc.doc).doc);
      titles.push_back(corpus.documents[d].title_tokens);
    }
    tape.backward(graph_loss(tape, titles, vecs, mc.doc));
    adagrad_step(model.params(), opt, 0.05);
  }
  std::vector<std::size_t> all{0, 1, 2};
  auto vecs = model.doc_vectors(MatchOverlay{}, all);
  int exact = 0;
  for (std::size_t d = 0; d < 3; ++d)
    if (greedy_decode(model.params(), vecs[d], mc.doc) == corpus.documents[d].title_tokens) ++exact;
  CHECK(exact >= 2);
}
