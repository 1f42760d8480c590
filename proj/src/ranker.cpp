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

#include "dcgrank/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace dcgrank {

namespace {

void check_score_shapes(const Tensor2& q, const Tensor2& d, const Tensor2& w) {
  if (q.rows() != 1 || d.rows() != 1 || w.rows() != q.cols() || w.cols() != d.cols()) {
    throw DimensionError("score: W " + w.shape() + " does not map query " + q.shape() +
                         " onto document " + d.shape());
  }
}

std::vector<Tensor2> encode_all(Model& model, std::span<const std::size_t> docs) {
  std::vector<Tensor2> out;
  out.reserve(docs.size());
  for (auto d : docs) {
    Tape tape(&model.params());
    auto enc = encode(tape, model.corpus().documents.at(d).tokens, model.config().doc);
    out.push_back(tape.value(enc.pooled));
  }
  return out;
}

// Evaluation-mode v_d for each doc, given cached encoder outputs.
std::vector<Tensor2> fuse_from_enc(Model& model, const MatchOverlay& overlay,
                                   std::span<const std::size_t> docs,
                                   std::span<const Tensor2> enc) {
  const auto& cfg = model.config().doc;
  Tape tape(&model.params());
  std::vector<std::vector<Var>> concepts;
  if (cfg.use_graph) concepts = concept_forward(tape, model.graph(), cfg);
  std::vector<Tensor2> out;
  out.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    Var e = tape.constant(enc[i]);
    Var g;
    if (cfg.use_graph) {
      Var init = initial_doc_state(tape, e, cfg);
      g = propagate_document(tape, model.graph(), overlay, docs[i], init, concepts,
                             model.config().alpha, cfg)
              .back();
    } else {
      g = tape.zeros(1, cfg.gcn_dim);
    }
    out.push_back(tape.value(fuse(tape, e, g, cfg)));
  }
  return out;
}

std::vector<std::size_t> resolve(const Corpus& corpus, std::span<const std::string> ids) {
  std::vector<std::size_t> out;
  if (ids.empty()) {
    out.resize(corpus.documents.size());
    std::iota(out.begin(), out.end(), 0);
    return out;
  }
  for (const auto& id : ids) {
    auto d = corpus.doc_index(id);
    if (!d) throw std::out_of_range("unknown document id \"" + id + "\"");
    out.push_back(*d);
  }
  return out;
}

}  // namespace

double score(const Tensor2& query_vec, const Tensor2& doc_vec, const Tensor2& w, Norm norm) {
  check_score_shapes(query_vec, doc_vec, w);
  const Tensor2 proj = matmul(query_vec, w);
  double s = 0.0;
  for (std::size_t i = 0; i < proj.size(); ++i) {
    const double diff = proj[i] - doc_vec[i];
    s += norm == Norm::l2 ? diff * diff : std::abs(diff);
  }
  return norm == Norm::l2 ? std::sqrt(s) : s;
}

Var score(Tape& tape, Var query_vec, Var doc_vec, Var w, Norm norm) {
  check_score_shapes(tape.value(query_vec), tape.value(doc_vec), tape.value(w));
  Var diff = tape.sub(tape.matmul(query_vec, w), doc_vec);
  return norm == Norm::l2 ? tape.norm_l2(diff) : tape.norm_l1(diff);
}

double pair_loss(double f_better, double f_worse, double margin) {
  return std::max(0.0, margin + (f_better - f_worse));
}

Var pair_loss(Tape& tape, Var f_better, Var f_worse, double margin) {
  Var diff = tape.sub(f_better, f_worse);
  if (margin != 0.0) diff = tape.add(diff, tape.constant(Tensor2(1, 1, margin)));
  return tape.hinge(diff);
}

double rank_loss(std::span<const ScoredPair> pairs, double margin) {
  if (pairs.empty()) throw std::invalid_argument("rank_loss: empty batch");
  // same shifted mean as Tape::mean
  const double first = pair_loss(pairs[0].f_better, pairs[0].f_worse, margin);
  double dev = 0.0;
  for (const auto& p : pairs) dev += pair_loss(p.f_better, p.f_worse, margin) - first;
  return first + dev / static_cast<double>(pairs.size());
}

Var rank_loss(Tape& tape, std::span<const Var> pair_losses) {
  if (pair_losses.empty()) throw std::invalid_argument("rank_loss: empty batch");
  return pair_losses.size() == 1 ? pair_losses[0] : tape.mean(pair_losses);
}

double total_loss(double graph_loss, double rank_loss, const RankingConfig& config) {
  return config.beta * graph_loss + config.gamma * rank_loss;
}

std::vector<TrainPair> make_pairs(const std::string& query,
                                  const std::map<std::string, int>& judgments,
                                  std::span<const std::string> candidates, std::size_t cap,
                                  std::mt19937_64& rng) {
  // Docs grouped by grade; candidates without a judgment join grade 0.
  std::map<int, std::vector<std::string>, std::greater<>> by_grade;
  for (const auto& [doc, rel] : judgments) by_grade[rel].push_back(doc);
  for (const auto& doc : candidates) {
    if (!judgments.count(doc)) by_grade[0].push_back(doc);
  }
  for (auto& [_, docs] : by_grade) {
    std::sort(docs.begin(), docs.end());
    docs.erase(std::unique(docs.begin(), docs.end()), docs.end());
  }

  // (better, worse) enumerated lazily through prefix counts.
  std::vector<const std::vector<std::string>*> grades;
  for (auto& [_, docs] : by_grade) grades.push_back(&docs);
  std::vector<std::size_t> below(grades.size(), 0);  // docs with strictly lower grade
  for (std::size_t g = grades.size(); g-- > 0;) {
    below[g] = g + 1 < grades.size() ? below[g + 1] + grades[g + 1]->size() : 0;
  }
  std::size_t total = 0;
  for (std::size_t g = 0; g < grades.size(); ++g) total += grades[g]->size() * below[g];

  auto pair_at = [&](std::size_t k) {
    for (std::size_t g = 0; g < grades.size(); ++g) {
      const std::size_t block = grades[g]->size() * below[g];
      if (k >= block) {
        k -= block;
        continue;
      }
      const auto& better = (*grades[g])[k / below[g]];
      std::size_t j = k % below[g];
      for (std::size_t h = g + 1; h < grades.size(); ++h) {
        if (j < grades[h]->size()) return TrainPair{query, better, (*grades[h])[j]};
        j -= grades[h]->size();
      }
    }
    throw std::logic_error("make_pairs: index out of range");
  };

  std::vector<std::size_t> chosen;
  if (total <= cap) {
    chosen.resize(total);
    std::iota(chosen.begin(), chosen.end(), 0);
  } else {
    std::set<std::size_t> picked;
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    while (picked.size() < cap) picked.insert(pick(rng));
    chosen.assign(picked.begin(), picked.end());
  }
  std::vector<TrainPair> out;
  out.reserve(chosen.size());
  for (auto k : chosen) out.push_back(pair_at(k));
  return out;
}

std::vector<RunEntry> rank_by_distance(std::vector<std::pair<std::string, double>> distances) {
  std::sort(distances.begin(), distances.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second < b.second;
    return a.first < b.first;
  });
  std::vector<RunEntry> out;
  out.reserve(distances.size());
  for (auto& [doc, d] : distances) out.push_back({std::move(doc), -d + 0.0});
  return out;
}

// ---------------------------------------------------------------------------
// Model

Model::Model(const Corpus& corpus, const DocumentConceptGraph& graph, ModelConfig config,
             ParamStore params)
    : corpus_(&corpus), graph_(&graph), config_(std::move(config)), params_(std::move(params)) {
  if (graph.num_docs() != corpus.documents.size() ||
      graph.num_concepts() != corpus.concepts.size()) {
    throw std::invalid_argument("Model: graph does not match corpus");
  }
  if (config_.alpha < 1.0) throw std::invalid_argument("Model: alpha must be >= 1");
}

Model Model::create(const Corpus& corpus, const DocumentConceptGraph& graph, ModelConfig config,
                    std::uint64_t seed, const Tensor2* word_embeddings) {
  const Tensor2 words = word_embeddings
                            ? *word_embeddings
                            : init_embeddings(corpus.vocab, config.doc.embed_dim, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  ParamStore params;
  init_docrep_params(params, config.doc, words, concept_embeddings(corpus, words), rng);
  init_queryrep_params(params, config.query, config.doc.embed_dim, rng);
  params.add(kRankW, glorot(config.query.query_dim, config.doc.doc_dim, rng));
  return Model(corpus, graph, std::move(config), std::move(params));
}

Tensor2 Model::query_vector(const Query& query) {
  return encode_query(query, corpus_->vocab, params_, config_.query);
}

std::vector<Tensor2> Model::doc_vectors(const MatchOverlay& overlay,
                                        std::span<const std::size_t> docs) {
  const auto enc = encode_all(*this, docs);
  return fuse_from_enc(*this, overlay, docs, enc);
}

MatchOverlay Model::overlay_for(std::span<const Query> queries) const {
  std::vector<std::vector<std::string>> flat;
  for (const auto& q : queries) flat.push_back(flatten_query(q));
  return mark_matched(*graph_, concepts_matching(*corpus_, flat));
}

std::vector<RunEntry> Model::rank_documents(const Query& query,
                                            std::span<const std::string> candidates) {
  const auto docs = resolve(*corpus_, candidates);
  if (docs.empty()) throw std::invalid_argument("rank_documents: no candidates");
  const auto overlay = overlay_for(std::span<const Query>(&query, 1));
  const auto vecs = doc_vectors(overlay, docs);
  const Tensor2 qv = query_vector(query);
  const Tensor2& w = params_.value(kRankW);
  std::vector<std::pair<std::string, double>> dist;
  dist.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    dist.emplace_back(corpus_->documents[docs[i]].id, score(qv, vecs[i], w, config_.ranking.norm));
  }
  return rank_by_distance(std::move(dist));
}

RunList Model::rank_all(std::span<const Query> queries, std::size_t depth,
                        std::size_t candidate_limit) {
  std::vector<std::size_t> all(corpus_->documents.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<Tensor2> enc;
  if (candidate_limit == 0) enc = encode_all(*this, all);
  const Tensor2& w = params_.value(kRankW);
  RunList run;
  for (const auto& q : queries) {
    const auto overlay = overlay_for(std::span<const Query>(&q, 1));
    std::vector<Tensor2> vecs;
    std::vector<std::size_t> docs;
    if (candidate_limit == 0) {
      docs = all;
      vecs = fuse_from_enc(*this, overlay, docs, enc);
    } else {
      docs = overlap_candidates(*graph_, overlay, candidate_limit);
      vecs = doc_vectors(overlay, docs);
    }
    const Tensor2 qv = query_vector(q);
    std::vector<std::pair<std::string, double>> dist;
    dist.reserve(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
      dist.emplace_back(corpus_->documents[docs[i]].id, score(qv, vecs[i], w, config_.ranking.norm));
    }
    auto ranked = rank_by_distance(std::move(dist));
    if (depth > 0 && ranked.size() > depth) ranked.resize(depth);
    run[q.id] = std::move(ranked);
  }
  return run;
}

std::vector<std::size_t> overlap_candidates(const DocumentConceptGraph& graph,
                                            const MatchOverlay& matched, std::size_t limit) {
  std::vector<std::pair<std::size_t, std::size_t>> scored;  // (overlap, doc)
  scored.reserve(graph.num_docs());
  for (std::size_t d = 0; d < graph.num_docs(); ++d) {
    std::size_t overlap = 0;
    for (auto c : graph.doc_concepts(d)) overlap += matched.edge_matched(d, c) ? 1 : 0;
    scored.emplace_back(overlap, d);
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  if (limit > 0 && scored.size() > limit) scored.resize(limit);
  std::vector<std::size_t> out;
  out.reserve(scored.size());
  for (const auto& [_, d] : scored) out.push_back(d);
  return out;
}

}  // namespace dcgrank
