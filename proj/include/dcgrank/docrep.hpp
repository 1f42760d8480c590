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

// Document representation: a stacked bidirectional LSTM over the abstract,
// a restricted graph convolution over the document-concept graph, a linear
// fusion of the two, and an LSTM decoder that regenerates the title from
// the fused vector.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dcgrank/corpus.hpp"
#include "dcgrank/dcgraph.hpp"
#include "dcgrank/numkit.hpp"
#include "dcgrank/tape.hpp"

namespace dcgrank {

struct DocRepConfig {
  std::size_t embed_dim = 100;
  std::size_t hidden_dim = 64;  // BiLSTM output width, split evenly between directions
  std::size_t encoder_layers = 3;
  std::size_t gcn_dim = 64;
  std::size_t gcn_layers = 2;
  std::size_t doc_dim = 64;  // fused v_d width
  std::size_t decoder_hidden = 64;
  std::size_t max_title_len = 30;
  bool self_loops = true;
  bool mean_aggregation = false;
  bool use_graph = true;           // false: GCN half of the fusion input is zeros
  bool decoder_feed_doc = false;   // also concatenate v_d to every decoder input
  double dropout = 0.5;
};

// Dropout context. Disabled (rate 0 or no generator) at evaluation time.
struct DropoutContext {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;
  bool active() const { return rate > 0.0 && rng != nullptr; }
};

// Creates every document-side parameter, including the shared word and
// concept embedding tables (copied from the arguments). Weight matrices are
// drawn from U[-b, b] with b = sqrt(6 / (fan_in + fan_out)); biases start
// at zero except the LSTM forget gates, which start at 1.
void init_docrep_params(ParamStore& params, const DocRepConfig& config,
                        const Tensor2& word_embeddings, const Tensor2& concept_embeddings,
                        std::mt19937_64& rng);

// Glorot-uniform matrix, shared with the query side.
Tensor2 glorot(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

// Parameter names, so callers do not spell them out.
namespace pname {
inline constexpr const char* kWordEmbedding = "embed.word";
inline constexpr const char* kConceptEmbedding = "embed.concept";
std::string lstm_w(std::size_t layer, bool backward);
std::string lstm_b(std::size_t layer, bool backward);
std::string gcn(std::size_t layer, const char* which);  // which: Wc, Wcs, Wd, Wds
inline constexpr const char* kBridge = "gcn.bridge.W";
inline constexpr const char* kFuseW = "fuse.W";
inline constexpr const char* kFuseB = "fuse.b";
}  // namespace pname

// Embedding lookup that keeps the PAD row a constant zero.
Var embed_token(Tape& tape, std::size_t token);

struct EncoderStates {
  std::vector<Var> states;  // top-layer [forward | backward] per token
  Var pooled;               // mean of states
};

// Throws std::invalid_argument on an empty token sequence.
EncoderStates encode(Tape& tape, std::span<const std::size_t> tokens, const DocRepConfig& config,
                     const DropoutContext& dropout = {});

struct GraphStates {
  // layer -> node -> 1 x dim state. Document slots that were not requested
  // are left empty (Var id 0 with has_doc false).
  std::vector<std::vector<Var>> concepts;
  std::vector<std::vector<Var>> docs;
  std::vector<bool> has_doc;
};

// Concept states for layers 0..L. Depends only on concept embeddings and
// the concept-concept adjacency.
std::vector<std::vector<Var>> propagate_concepts(Tape& tape, const DocumentConceptGraph& graph,
                                                 std::span<const Var> concept_init,
                                                 const DocRepConfig& config);

// States g_d^(0..L) for one document given precomputed concept layers.
// alpha multiplies messages on matched edges.
std::vector<Var> propagate_document(Tape& tape, const DocumentConceptGraph& graph,
                                    const MatchOverlay& overlay, std::size_t doc, Var doc_init,
                                    std::span<const std::vector<Var>> concept_layers, double alpha,
                                    const DocRepConfig& config);

// Full bulk-synchronous propagation over the requested documents.
GraphStates propagate(Tape& tape, const DocumentConceptGraph& graph, const MatchOverlay& overlay,
                      std::span<const std::pair<std::size_t, Var>> doc_init,
                      std::span<const Var> concept_init, double alpha,
                      const DocRepConfig& config);

// Value-level propagation for inspection and tests: `doc_init` has one row
// per document, `concept_init` one row per concept. Returns per layer the
// stacked document and concept states.
struct GraphStateValues {
  std::vector<Tensor2> docs;      // layer -> num_docs x dim
  std::vector<Tensor2> concepts;  // layer -> num_concepts x dim
};
GraphStateValues propagate(const DocumentConceptGraph& graph, const MatchOverlay& overlay,
                           const Tensor2& doc_init, const Tensor2& concept_init,
                           ParamStore& params, double alpha, const DocRepConfig& config);

// g_d^(0): the bridge map applied to Enc(d) when widths differ.
Var initial_doc_state(Tape& tape, Var enc, const DocRepConfig& config);

// v_d = [enc | gcn] * W_f + b_f
Var fuse(Tape& tape, Var enc, Var gcn, const DocRepConfig& config);

struct DocForward {
  EncoderStates encoder;
  Var enc;  // pooled encoder output after dropout
  Var gcn;  // g_d^(L), or zeros when the graph is ablated
  Var doc;  // v_d after dropout
};

// Encoder + graph + fusion for one document given concept layers computed
// on the same tape.
DocForward document_forward(Tape& tape, const Corpus& corpus, const DocumentConceptGraph& graph,
                            const MatchOverlay& overlay, std::size_t doc,
                            std::span<const std::vector<Var>> concept_layers, double alpha,
                            const DocRepConfig& config, const DropoutContext& dropout = {});

// Concept layers 0..L for the whole graph on `tape`.
std::vector<std::vector<Var>> concept_forward(Tape& tape, const DocumentConceptGraph& graph,
                                              const DocRepConfig& config);

// Teacher-forced title loss: mean token cross-entropy over the title
// followed by EOS. Returns nullopt (no loss, no gradient) for an empty title.
std::optional<Var> decode_loss(Tape& tape, std::span<const std::size_t> title, Var doc,
                               const DocRepConfig& config);

// Mean over documents of per-document mean token cross-entropy. Documents
// with empty titles are skipped and counted in `skipped`. Throws
// std::invalid_argument when the batch is empty or every title is empty.
Var graph_loss(Tape& tape, std::span<const std::vector<std::size_t>> titles,
               std::span<const Var> docs, const DocRepConfig& config,
               std::size_t* skipped = nullptr);

// Greedy free-running decode from v_d; stops at EOS or max_title_len. The
// returned sequence excludes EOS.
std::vector<std::size_t> greedy_decode(ParamStore& params, const Tensor2& doc,
                                       const DocRepConfig& config);

}  // namespace dcgrank
