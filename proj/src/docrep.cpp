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

#include "dcgrank/docrep.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dcgrank {

namespace pname {

std::string lstm_w(std::size_t layer, bool backward) {
  return "enc.l" + std::to_string(layer) + (backward ? ".bwd.W" : ".fwd.W");
}

std::string lstm_b(std::size_t layer, bool backward) {
  return "enc.l" + std::to_string(layer) + (backward ? ".bwd.b" : ".fwd.b");
}

std::string gcn(std::size_t layer, const char* which) {
  return "gcn.l" + std::to_string(layer) + "." + which;
}

}  // namespace pname

namespace {

constexpr const char* kDecInitHW = "dec.init_h.W";
constexpr const char* kDecInitHB = "dec.init_h.b";
constexpr const char* kDecInitCW = "dec.init_c.W";
constexpr const char* kDecInitCB = "dec.init_c.b";
constexpr const char* kDecLstmW = "dec.lstm.W";
constexpr const char* kDecLstmB = "dec.lstm.b";
constexpr const char* kDecOutW = "dec.out.W";
constexpr const char* kDecOutB = "dec.out.b";

Tensor2 lstm_bias(std::size_t hidden) {
  Tensor2 b(1, 4 * hidden);
  for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;
  return b;
}

Var maybe_dropout(Tape& tape, Var v, const DropoutContext& dropout) {
  if (!dropout.active()) return v;
  return tape.dropout(v, dropout.rate, *dropout.rng);
}

void check_config(const DocRepConfig& c) {
  if (c.hidden_dim == 0 || c.hidden_dim % 2 != 0) {
    throw std::invalid_argument("hidden_dim must be even and positive");
  }
  if (c.encoder_layers == 0) throw std::invalid_argument("encoder_layers must be >= 1");
}

// Runs one direction of one LSTM layer.
std::vector<Var> run_direction(Tape& tape, std::span<const Var> inputs, std::size_t layer,
                               bool backward, std::size_t half) {
  Var w = tape.param(pname::lstm_w(layer, backward));
  Var b = tape.param(pname::lstm_b(layer, backward));
  Var h = tape.zeros(1, half);
  Var c = tape.zeros(1, half);
  std::vector<Var> out(inputs.size());
  for (std::size_t step = 0; step < inputs.size(); ++step) {
    const std::size_t t = backward ? inputs.size() - 1 - step : step;
    Var hc = tape.lstm_cell(inputs[t], h, c, w, b);
    h = tape.slice(hc, 0, half);
    c = tape.slice(hc, half, half);
    out[t] = h;
  }
  return out;
}

}  // namespace

Tensor2 glorot(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor2 w(fan_in, fan_out);
  for (auto& v : w.data()) v = u(rng);
  return w;
}

void init_docrep_params(ParamStore& params, const DocRepConfig& config,
                        const Tensor2& word_embeddings, const Tensor2& concept_embeddings,
                        std::mt19937_64& rng) {
  check_config(config);
  if (word_embeddings.cols() != config.embed_dim ||
      (concept_embeddings.rows() > 0 && concept_embeddings.cols() != config.embed_dim)) {
    throw DimensionError("init_docrep_params: embedding width does not match embed_dim");
  }
  const std::size_t E = config.embed_dim;
  const std::size_t H = config.hidden_dim;
  const std::size_t half = H / 2;
  const std::size_t G = config.gcn_dim;
  const std::size_t D = config.doc_dim;
  const std::size_t Hd = config.decoder_hidden;
  const std::size_t V = word_embeddings.rows();

  params.add(pname::kWordEmbedding, word_embeddings);
  params.add(pname::kConceptEmbedding, concept_embeddings.rows() > 0
                                           ? concept_embeddings
                                           : Tensor2(0, E));

  for (std::size_t l = 0; l < config.encoder_layers; ++l) {
    const std::size_t in = l == 0 ? E : H;
    for (bool bwd : {false, true}) {
      params.add(pname::lstm_w(l, bwd), glorot(in + half, 4 * half, rng));
      params.add(pname::lstm_b(l, bwd), lstm_bias(half));
    }
  }
  if (H != G) params.add(pname::kBridge, glorot(H, G, rng));
  for (std::size_t l = 0; l < config.gcn_layers; ++l) {
    const std::size_t in_c = l == 0 ? E : G;
    params.add(pname::gcn(l, "Wc"), glorot(in_c, G, rng));
    params.add(pname::gcn(l, "Wd"), glorot(in_c, G, rng));
    if (config.self_loops) {
      params.add(pname::gcn(l, "Wcs"), glorot(in_c, G, rng));
      params.add(pname::gcn(l, "Wds"), glorot(G, G, rng));
    }
  }
  params.add(pname::kFuseW, glorot(H + G, D, rng));
  params.add(pname::kFuseB, Tensor2(1, D));

  params.add(kDecInitHW, glorot(D, Hd, rng));
  params.add(kDecInitHB, Tensor2(1, Hd));
  params.add(kDecInitCW, glorot(D, Hd, rng));
  params.add(kDecInitCB, Tensor2(1, Hd));
  const std::size_t dec_in = E + (config.decoder_feed_doc ? D : 0);
  params.add(kDecLstmW, glorot(dec_in + Hd, 4 * Hd, rng));
  params.add(kDecLstmB, lstm_bias(Hd));
  params.add(kDecOutW, glorot(Hd, V, rng));
  params.add(kDecOutB, Tensor2(1, V));
}

Var embed_token(Tape& tape, std::size_t token) {
  if (token == Vocabulary::kPad) {
    return tape.zeros(1, tape.params().value(pname::kWordEmbedding).cols());
  }
  return tape.param_row(pname::kWordEmbedding, token);
}

EncoderStates encode(Tape& tape, std::span<const std::size_t> tokens, const DocRepConfig& config,
                     const DropoutContext& dropout) {
  check_config(config);
  if (tokens.empty()) throw std::invalid_argument("encode: empty token sequence");
  const std::size_t half = config.hidden_dim / 2;

  std::vector<Var> layer_in;
  layer_in.reserve(tokens.size());
  for (auto t : tokens) layer_in.push_back(embed_token(tape, t));

  for (std::size_t l = 0; l < config.encoder_layers; ++l) {
    if (l > 0) {
      for (auto& v : layer_in) v = maybe_dropout(tape, v, dropout);
    }
    auto fwd = run_direction(tape, layer_in, l, false, half);
    auto bwd = run_direction(tape, layer_in, l, true, half);
    for (std::size_t t = 0; t < tokens.size(); ++t) layer_in[t] = tape.concat({fwd[t], bwd[t]});
  }
  EncoderStates out;
  out.states = std::move(layer_in);
  out.pooled = out.states.size() == 1 ? out.states[0] : tape.mean(out.states);
  return out;
}

std::vector<std::vector<Var>> propagate_concepts(Tape& tape, const DocumentConceptGraph& graph,
                                                 std::span<const Var> concept_init,
                                                 const DocRepConfig& config) {
  if (concept_init.size() != graph.num_concepts()) {
    throw DimensionError("propagate: " + std::to_string(concept_init.size()) +
                         " concept states for " + std::to_string(graph.num_concepts()) +
                         " concept nodes");
  }
  std::vector<std::vector<Var>> layers;
  layers.emplace_back(concept_init.begin(), concept_init.end());
  for (std::size_t l = 0; l < config.gcn_layers; ++l) {
    const auto& prev = layers.back();
    Var wc = tape.param(pname::gcn(l, "Wc"));
    const std::size_t in_dim = tape.value(wc).rows();
    std::optional<Var> wcs;
    if (config.self_loops) wcs = tape.param(pname::gcn(l, "Wcs"));
    std::vector<Var> next(graph.num_concepts());
    for (std::size_t c = 0; c < graph.num_concepts(); ++c) {
      if (tape.value(prev[c]).cols() != in_dim) {
        throw DimensionError("propagate: concept state " + tape.value(prev[c]).shape() +
                             " does not match GCN input width " + std::to_string(in_dim));
      }
      std::vector<Var> terms;
      const auto& nbrs = graph.concept_neighbors(c);
      if (!nbrs.empty()) {
        std::vector<Var> msgs;
        msgs.reserve(nbrs.size());
        for (auto j : nbrs) msgs.push_back(prev[j]);
        Var agg = config.mean_aggregation ? tape.mean(msgs) : tape.sum(msgs);
        terms.push_back(tape.matmul(agg, wc));
      }
      if (wcs) terms.push_back(tape.matmul(prev[c], *wcs));
      next[c] = terms.empty() ? tape.zeros(1, config.gcn_dim) : tape.relu(tape.sum(terms));
    }
    layers.push_back(std::move(next));
  }
  return layers;
}

std::vector<Var> propagate_document(Tape& tape, const DocumentConceptGraph& graph,
                                    const MatchOverlay& overlay, std::size_t doc, Var doc_init,
                                    std::span<const std::vector<Var>> concept_layers, double alpha,
                                    const DocRepConfig& config) {
  if (alpha < 1.0) throw std::invalid_argument("propagate: alpha must be >= 1");
  if (concept_layers.size() < config.gcn_layers + 1) {
    throw DimensionError("propagate: missing concept layers");
  }
  std::vector<Var> states{doc_init};
  const auto& incoming = graph.doc_concepts(doc);
  for (std::size_t l = 0; l < config.gcn_layers; ++l) {
    Var wd = tape.param(pname::gcn(l, "Wd"));
    std::vector<Var> terms;
    if (!incoming.empty()) {
      std::vector<Var> msgs;
      msgs.reserve(incoming.size());
      for (auto c : incoming) {
        Var g = concept_layers[l][c];
        if (alpha != 1.0 && overlay.edge_matched(doc, c)) g = tape.scale(g, alpha);
        msgs.push_back(g);
      }
      Var agg = config.mean_aggregation ? tape.mean(msgs) : tape.sum(msgs);
      terms.push_back(tape.matmul(agg, wd));
    }
    if (config.self_loops) {
      Var wds = tape.param(pname::gcn(l, "Wds"));
      if (tape.value(states.back()).cols() != tape.value(wds).rows()) {
        throw DimensionError("propagate: document state " + tape.value(states.back()).shape() +
                             " does not match GCN width " +
                             std::to_string(tape.value(wds).rows()));
      }
      terms.push_back(tape.matmul(states.back(), wds));
    }
    states.push_back(terms.empty() ? tape.zeros(1, config.gcn_dim) : tape.relu(tape.sum(terms)));
  }
  return states;
}

GraphStates propagate(Tape& tape, const DocumentConceptGraph& graph, const MatchOverlay& overlay,
                      std::span<const std::pair<std::size_t, Var>> doc_init,
                      std::span<const Var> concept_init, double alpha,
                      const DocRepConfig& config) {
  GraphStates out;
  out.concepts = propagate_concepts(tape, graph, concept_init, config);
  out.docs.assign(config.gcn_layers + 1, std::vector<Var>(graph.num_docs()));
  out.has_doc.assign(graph.num_docs(), false);
  for (const auto& [doc, init] : doc_init) {
    auto states = propagate_document(tape, graph, overlay, doc, init, out.concepts, alpha, config);
    for (std::size_t l = 0; l < states.size(); ++l) out.docs[l][doc] = states[l];
    out.has_doc[doc] = true;
  }
  return out;
}

GraphStateValues propagate(const DocumentConceptGraph& graph, const MatchOverlay& overlay,
                           const Tensor2& doc_init, const Tensor2& concept_init,
                           ParamStore& params, double alpha, const DocRepConfig& config) {
  if (doc_init.rows() != graph.num_docs() || concept_init.rows() != graph.num_concepts()) {
    throw DimensionError("propagate: initial state rows do not match graph node counts");
  }
  Tape tape(&params);
  std::vector<Var> cinit;
  for (std::size_t c = 0; c < concept_init.rows(); ++c) {
    cinit.push_back(tape.constant(Tensor2::row(concept_init.row_span(c))));
  }
  std::vector<std::pair<std::size_t, Var>> dinit;
  for (std::size_t d = 0; d < doc_init.rows(); ++d) {
    dinit.emplace_back(d, tape.constant(Tensor2::row(doc_init.row_span(d))));
  }
  auto states = propagate(tape, graph, overlay, dinit, cinit, alpha, config);

  auto stack = [&](const std::vector<Var>& vars) {
    if (vars.empty()) return Tensor2();
    Tensor2 m(vars.size(), tape.value(vars[0]).cols());
    for (std::size_t i = 0; i < vars.size(); ++i) {
      const auto row = tape.value(vars[i]).data();
      std::copy(row.begin(), row.end(), m.row_span(i).begin());
    }
    return m;
  };
  GraphStateValues out;
  for (const auto& layer : states.docs) out.docs.push_back(stack(layer));
  for (const auto& layer : states.concepts) out.concepts.push_back(stack(layer));
  return out;
}

Var initial_doc_state(Tape& tape, Var enc, const DocRepConfig& config) {
  if (config.hidden_dim == config.gcn_dim) return enc;
  return tape.matmul(enc, tape.param(pname::kBridge));
}

Var fuse(Tape& tape, Var enc, Var gcn, const DocRepConfig& /*config*/) {
  Var w = tape.param(pname::kFuseW);
  const std::size_t in = tape.value(enc).cols() + tape.value(gcn).cols();
  if (tape.value(w).rows() != in) {
    throw DimensionError("fuse: input width " + std::to_string(in) + " does not match W_f " +
                         tape.value(w).shape());
  }
  return tape.add(tape.matmul(tape.concat({enc, gcn}), w), tape.param(pname::kFuseB));
}

std::vector<std::vector<Var>> concept_forward(Tape& tape, const DocumentConceptGraph& graph,
                                              const DocRepConfig& config) {
  std::vector<Var> init;
  init.reserve(graph.num_concepts());
  for (std::size_t c = 0; c < graph.num_concepts(); ++c) {
    init.push_back(tape.param_row(pname::kConceptEmbedding, c));
  }
  return propagate_concepts(tape, graph, init, config);
}

DocForward document_forward(Tape& tape, const Corpus& corpus, const DocumentConceptGraph& graph,
                            const MatchOverlay& overlay, std::size_t doc,
                            std::span<const std::vector<Var>> concept_layers, double alpha,
                            const DocRepConfig& config, const DropoutContext& dropout) {
  DocForward out;
  out.encoder = encode(tape, corpus.documents.at(doc).tokens, config, dropout);
  out.enc = maybe_dropout(tape, out.encoder.pooled, dropout);
  if (config.use_graph) {
    Var init = initial_doc_state(tape, out.enc, config);
    auto states =
        propagate_document(tape, graph, overlay, doc, init, concept_layers, alpha, config);
    out.gcn = states.back();
  } else {
    out.gcn = tape.zeros(1, config.gcn_dim);
  }
  out.doc = maybe_dropout(tape, fuse(tape, out.enc, out.gcn, config), dropout);
  return out;
}

namespace {

struct DecoderStart {
  Var h, c;
};

DecoderStart decoder_start(Tape& tape, Var doc) {
  Var h = tape.tanh(tape.add(tape.matmul(doc, tape.param(kDecInitHW)), tape.param(kDecInitHB)));
  Var c = tape.add(tape.matmul(doc, tape.param(kDecInitCW)), tape.param(kDecInitCB));
  return {h, c};
}

Var decoder_input(Tape& tape, std::size_t token, Var doc, const DocRepConfig& config) {
  Var x = embed_token(tape, token);
  return config.decoder_feed_doc ? tape.concat({x, doc}) : x;
}

}  // namespace

std::optional<Var> decode_loss(Tape& tape, std::span<const std::size_t> title, Var doc,
                               const DocRepConfig& config) {
  if (title.empty()) return std::nullopt;
  std::vector<std::size_t> targets(title.begin(), title.end());
  if (targets.back() != Vocabulary::kEos) targets.push_back(Vocabulary::kEos);

  const std::size_t hd = config.decoder_hidden;
  auto [h, c] = decoder_start(tape, doc);
  Var w = tape.param(kDecLstmW);
  Var b = tape.param(kDecLstmB);
  Var wo = tape.param(kDecOutW);
  Var bo = tape.param(kDecOutB);
  std::vector<Var> losses;
  losses.reserve(targets.size());
  std::size_t prev = Vocabulary::kEos;  // EOS doubles as the start symbol
  for (auto target : targets) {
    Var hc = tape.lstm_cell(decoder_input(tape, prev, doc, config), h, c, w, b);
    h = tape.slice(hc, 0, hd);
    c = tape.slice(hc, hd, hd);
    Var logits = tape.add(tape.matmul(h, wo), bo);
    losses.push_back(tape.softmax_xent(logits, target));
    prev = target;
  }
  return losses.size() == 1 ? losses[0] : tape.mean(losses);
}

Var graph_loss(Tape& tape, std::span<const std::vector<std::size_t>> titles,
               std::span<const Var> docs, const DocRepConfig& config, std::size_t* skipped) {
  if (titles.size() != docs.size()) throw DimensionError("graph_loss: titles/docs size mismatch");
  if (titles.empty()) throw std::invalid_argument("graph_loss: empty batch");
  std::vector<Var> per_doc;
  std::size_t n_skipped = 0;
  for (std::size_t i = 0; i < titles.size(); ++i) {
    if (auto l = decode_loss(tape, titles[i], docs[i], config)) {
      per_doc.push_back(*l);
    } else {
      ++n_skipped;
    }
  }
  if (skipped) *skipped = n_skipped;
  if (per_doc.empty()) throw std::invalid_argument("graph_loss: every title in the batch is empty");
  return per_doc.size() == 1 ? per_doc[0] : tape.mean(per_doc);
}

std::vector<std::size_t> greedy_decode(ParamStore& params, const Tensor2& doc,
                                       const DocRepConfig& config) {
  Tape tape(&params);
  Var d = tape.constant(doc);
  const std::size_t hd = config.decoder_hidden;
  auto [h, c] = decoder_start(tape, d);
  Var w = tape.param(kDecLstmW);
  Var b = tape.param(kDecLstmB);
  Var wo = tape.param(kDecOutW);
  Var bo = tape.param(kDecOutB);
  std::vector<std::size_t> out;
  std::size_t prev = Vocabulary::kEos;
  for (std::size_t step = 0; step < config.max_title_len; ++step) {
    Var hc = tape.lstm_cell(decoder_input(tape, prev, d, config), h, c, w, b);
    h = tape.slice(hc, 0, hd);
    c = tape.slice(hc, hd, hd);
    const auto logits = tape.value(tape.add(tape.matmul(h, wo), bo)).data();
    const auto best = static_cast<std::size_t>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (best == Vocabulary::kEos) break;
    out.push_back(best);
    prev = best;
  }
  return out;
}

}  // namespace dcgrank
