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

// Distance scoring between query and document vectors, the pairwise margin
// objective, and the assembled ranking model.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dcgrank/corpus.hpp"
#include "dcgrank/dcgraph.hpp"
#include "dcgrank/docrep.hpp"
#include "dcgrank/metrics.hpp"
#include "dcgrank/numkit.hpp"
#include "dcgrank/queryrep.hpp"
#include "dcgrank/tape.hpp"

namespace dcgrank {

enum class Norm { l1, l2 };

struct RankingConfig {
  Norm norm = Norm::l2;
  double margin = 0.1;
  double beta = 0.5;   // weight of the title loss
  double gamma = 0.5;  // weight of the ranking loss
};

// Smaller is more relevant: || v_p * W - v_d || in the configured norm.
double score(const Tensor2& query_vec, const Tensor2& doc_vec, const Tensor2& w, Norm norm);
Var score(Tape& tape, Var query_vec, Var doc_vec, Var w, Norm norm);

// max(0, margin + f_better - f_worse)
double pair_loss(double f_better, double f_worse, double margin);
Var pair_loss(Tape& tape, Var f_better, Var f_worse, double margin);

struct ScoredPair {
  double f_better = 0.0;
  double f_worse = 0.0;
};

// Mean pair loss over the batch; throws std::invalid_argument when empty.
double rank_loss(std::span<const ScoredPair> pairs, double margin);
Var rank_loss(Tape& tape, std::span<const Var> pair_losses);

double total_loss(double graph_loss, double rank_loss, const RankingConfig& config);

struct TrainPair {
  std::string query;
  std::string better;
  std::string worse;
};

// Partial-order pairs (a, b) with rel(a) > rel(b) for one query. `candidates`
// supplies documents without a judgment (relevance 0). When more than `cap`
// pairs exist, `cap` distinct pairs are drawn uniformly; the result is
// sorted so it does not depend on draw order.
std::vector<TrainPair> make_pairs(const std::string& query,
                                  const std::map<std::string, int>& judgments,
                                  std::span<const std::string> candidates, std::size_t cap,
                                  std::mt19937_64& rng);

// Ascending score, ties broken by ascending doc id. The RunEntry score is
// the negated distance so that larger is better, as TREC tools expect.
std::vector<RunEntry> rank_by_distance(std::vector<std::pair<std::string, double>> distances);

enum class MatchScope { batch, query };

struct ModelConfig {
  DocRepConfig doc;
  QueryRepConfig query;
  RankingConfig ranking;
  double alpha = 1.6;
  MatchScope match_scope = MatchScope::batch;
};

// The full ranking model: parameters plus the read-only corpus and graph
// they were built for.
class Model {
 public:
  Model(const Corpus& corpus, const DocumentConceptGraph& graph, ModelConfig config,
        ParamStore params);

  // Fresh parameters. `word_embeddings` defaults to uniform initialization
  // with the same seed.
  static Model create(const Corpus& corpus, const DocumentConceptGraph& graph,
                      ModelConfig config, std::uint64_t seed,
                      const Tensor2* word_embeddings = nullptr);

  const Corpus& corpus() const { return *corpus_; }
  const DocumentConceptGraph& graph() const { return *graph_; }
  const ModelConfig& config() const { return config_; }
  ModelConfig& config() { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // Evaluation-mode (dropout-free) vectors.
  Tensor2 query_vector(const Query& query);
  std::vector<Tensor2> doc_vectors(const MatchOverlay& overlay,
                                   std::span<const std::size_t> docs);

  // Concepts matched by a set of already expanded queries.
  MatchOverlay overlay_for(std::span<const Query> queries) const;

  // Ranks candidate documents (all documents when `candidates` is empty).
  // Unknown doc ids throw std::out_of_range.
  std::vector<RunEntry> rank_documents(const Query& query,
                                       std::span<const std::string> candidates = {});

  // Ranks every query. With `candidate_limit` > 0 only the documents with
  // the largest concept overlap with the query (ties by ascending id) are
  // scored. `depth` > 0 truncates each list.
  RunList rank_all(std::span<const Query> queries, std::size_t depth = 0,
                   std::size_t candidate_limit = 0);

 private:
  const Corpus* corpus_;
  const DocumentConceptGraph* graph_;
  ModelConfig config_;
  ParamStore params_;
};

inline constexpr const char* kRankW = "rank.W";

// Documents sharing the most concepts with `matched`, ties by ascending
// document index, at most `limit` of them.
std::vector<std::size_t> overlap_candidates(const DocumentConceptGraph& graph,
                                            const MatchOverlay& matched, std::size_t limit);

}  // namespace dcgrank
