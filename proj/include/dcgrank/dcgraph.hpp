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

#pragma once

#include <cstddef>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "dcgrank/corpus.hpp"

namespace dcgrank {

// Document nodes receive messages from the concepts they contain; concept
// nodes receive from their knowledge-base neighbours. Nothing flows from a
// document to a concept, and documents are never adjacent to each other.
class DocumentConceptGraph {
 public:
  struct KbEdge {
    std::size_t a;
    std::size_t b;
    std::string relation;  // metadata only
  };

  DocumentConceptGraph() = default;
  DocumentConceptGraph(std::size_t num_docs, std::size_t num_concepts);

  std::size_t num_docs() const { return doc_concepts_.size(); }
  std::size_t num_concepts() const { return concept_neighbors_.size(); }

  // M_d: concepts sending to document d, sorted ascending.
  const std::vector<std::size_t>& doc_concepts(std::size_t doc) const {
    return doc_concepts_.at(doc);
  }
  // N_c: symmetric concept neighbourhood, sorted ascending.
  const std::vector<std::size_t>& concept_neighbors(std::size_t c) const {
    return concept_neighbors_.at(c);
  }
  const std::vector<KbEdge>& kb_edges() const { return kb_edges_; }
  std::size_t num_containment_edges() const;
  std::size_t skipped_self_loops() const { return skipped_self_loops_; }

  void add_containment(std::size_t doc, std::size_t c);
  // Returns false if the undirected edge already existed.
  bool add_kb_edge(std::size_t a, std::size_t b, std::string relation);
  void note_self_loop() { ++skipped_self_loops_; }

  friend bool operator==(const DocumentConceptGraph&, const DocumentConceptGraph&);

 private:
  std::vector<std::vector<std::size_t>> doc_concepts_;
  std::vector<std::vector<std::size_t>> concept_neighbors_;
  std::vector<KbEdge> kb_edges_;
  std::size_t skipped_self_loops_ = 0;
};

// kb file: TSV rows "concept_id<TAB>relation<TAB>concept_id". Duplicate
// pairs (in either direction) collapse to one edge; self-loops are dropped
// and counted. Unknown concept ids throw IngestError naming the id.
DocumentConceptGraph build_graph(const Corpus& corpus, std::istream& kb_edges,
                                 const std::string& kb_name = "kb");
DocumentConceptGraph build_graph(const Corpus& corpus, const std::string& kb_path);
DocumentConceptGraph build_graph(const Corpus& corpus);  // no kb edges

void save_graph(const DocumentConceptGraph& graph, const Corpus& corpus, const std::string& path);
DocumentConceptGraph load_graph(const Corpus& corpus, const std::string& path);

// Per-edge match flags layered over an immutable graph. An edge (d <- c) is
// flagged iff c is in the matched set; the overlay only stores that set.
class MatchOverlay {
 public:
  MatchOverlay() = default;
  explicit MatchOverlay(std::vector<bool> matched) : matched_(std::move(matched)) {}

  bool edge_matched(std::size_t /*doc*/, std::size_t concept_index) const {
    return concept_index < matched_.size() && matched_[concept_index];
  }
  bool any() const;
  std::size_t count() const;
  const std::vector<bool>& concepts() const { return matched_; }

 private:
  std::vector<bool> matched_;
};

MatchOverlay mark_matched(const DocumentConceptGraph& graph,
                          const std::set<std::size_t>& matched_concepts);
MatchOverlay mark_matched(const DocumentConceptGraph& graph, const Corpus& corpus,
                          const std::set<std::string>& matched_concept_ids);

// A concept matches when one of its surface forms occurs as a contiguous
// token run inside any of the given token sequences.
std::set<std::size_t> concepts_matching(const Corpus& corpus,
                                        const std::vector<std::vector<std::string>>& queries);

}  // namespace dcgrank
