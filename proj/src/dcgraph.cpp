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

#include "dcgrank/dcgraph.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace dcgrank {

using json = nlohmann::json;

namespace {

bool sorted_insert(std::vector<std::size_t>& v, std::size_t x) {
  auto it = std::lower_bound(v.begin(), v.end(), x);
  if (it != v.end() && *it == x) return false;
  v.insert(it, x);
  return true;
}

}  // namespace

DocumentConceptGraph::DocumentConceptGraph(std::size_t num_docs, std::size_t num_concepts)
    : doc_concepts_(num_docs), concept_neighbors_(num_concepts) {}

std::size_t DocumentConceptGraph::num_containment_edges() const {
  std::size_t n = 0;
  for (const auto& m : doc_concepts_) n += m.size();
  return n;
}

void DocumentConceptGraph::add_containment(std::size_t doc, std::size_t c) {
  if (doc >= num_docs() || c >= num_concepts()) {
    throw IndexError("add_containment: node out of range");
  }
  sorted_insert(doc_concepts_[doc], c);
}

bool DocumentConceptGraph::add_kb_edge(std::size_t a, std::size_t b, std::string relation) {
  if (a >= num_concepts() || b >= num_concepts()) {
    throw IndexError("add_kb_edge: concept out of range");
  }
  if (a == b) throw std::invalid_argument("add_kb_edge: self-loop");
  if (!sorted_insert(concept_neighbors_[a], b)) return false;
  sorted_insert(concept_neighbors_[b], a);
  kb_edges_.push_back(KbEdge{std::min(a, b), std::max(a, b), std::move(relation)});
  return true;
}

bool operator==(const DocumentConceptGraph& x, const DocumentConceptGraph& y) {
  return x.doc_concepts_ == y.doc_concepts_ && x.concept_neighbors_ == y.concept_neighbors_;
}

DocumentConceptGraph build_graph(const Corpus& corpus) {
  DocumentConceptGraph g(corpus.documents.size(), corpus.concepts.size());
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    for (auto c : corpus.documents[d].concepts) g.add_containment(d, c);
  }
  return g;
}

DocumentConceptGraph build_graph(const Corpus& corpus, std::istream& kb_edges,
                                 const std::string& kb_name) {
  DocumentConceptGraph g = build_graph(corpus);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(kb_edges, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() != 3) {
      throw ParseError(kb_name, line_no, "expected concept_id<TAB>relation<TAB>concept_id");
    }
    auto a = corpus.concept_index(cols[0]);
    if (!a) throw IngestError(kb_name + ":" + std::to_string(line_no) + ": unknown concept \"" + cols[0] + "\"");
    auto b = corpus.concept_index(cols[2]);
    if (!b) throw IngestError(kb_name + ":" + std::to_string(line_no) + ": unknown concept \"" + cols[2] + "\"");
    if (*a == *b) {
      g.note_self_loop();
      continue;
    }
    g.add_kb_edge(*a, *b, cols[1]);
  }
  return g;
}

DocumentConceptGraph build_graph(const Corpus& corpus, const std::string& kb_path) {
  std::ifstream in(kb_path);
  if (!in) throw std::runtime_error("cannot open " + kb_path);
  return build_graph(corpus, in, kb_path);
}

void save_graph(const DocumentConceptGraph& graph, const Corpus& corpus, const std::string& path) {
  json j;
  j["num_docs"] = graph.num_docs();
  j["num_concepts"] = graph.num_concepts();
  j["containment_edges"] = graph.num_containment_edges();
  j["skipped_self_loops"] = graph.skipped_self_loops();
  j["kb_edges"] = json::array();
  for (const auto& e : graph.kb_edges()) {
    j["kb_edges"].push_back({corpus.concepts[e.a].id, e.relation, corpus.concepts[e.b].id});
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << j.dump(1) << '\n';
}

DocumentConceptGraph load_graph(const Corpus& corpus, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  if (j.value("num_docs", std::size_t{0}) != corpus.documents.size() ||
      j.value("num_concepts", std::size_t{0}) != corpus.concepts.size()) {
    throw FormatError(path + ": graph does not belong to this corpus");
  }
  DocumentConceptGraph g = build_graph(corpus);
  for (const auto& e : j.at("kb_edges")) {
    auto a = corpus.concept_index(e.at(0).get<std::string>());
    auto b = corpus.concept_index(e.at(2).get<std::string>());
    if (!a || !b) throw FormatError(path + ": unknown concept in kb edge");
    g.add_kb_edge(*a, *b, e.at(1).get<std::string>());
  }
  for (std::size_t i = 0; i < j.value("skipped_self_loops", std::size_t{0}); ++i) g.note_self_loop();
  return g;
}

bool MatchOverlay::any() const {
  return std::find(matched_.begin(), matched_.end(), true) != matched_.end();
}

std::size_t MatchOverlay::count() const {
  return static_cast<std::size_t>(std::count(matched_.begin(), matched_.end(), true));
}

MatchOverlay mark_matched(const DocumentConceptGraph& graph,
                          const std::set<std::size_t>& matched_concepts) {
  std::vector<bool> flags(graph.num_concepts(), false);
  for (auto c : matched_concepts) {
    if (c >= graph.num_concepts()) {
      throw IndexError("mark_matched: unknown concept index " + std::to_string(c));
    }
    flags[c] = true;
  }
  return MatchOverlay(std::move(flags));
}

MatchOverlay mark_matched(const DocumentConceptGraph& graph, const Corpus& corpus,
                          const std::set<std::string>& matched_concept_ids) {
  std::set<std::size_t> idx;
  for (const auto& id : matched_concept_ids) {
    auto c = corpus.concept_index(id);
    if (!c) throw IngestError("mark_matched: unknown concept \"" + id + "\"");
    idx.insert(*c);
  }
  return mark_matched(graph, idx);
}

std::set<std::size_t> concepts_matching(const Corpus& corpus,
                                        const std::vector<std::vector<std::string>>& queries) {
  std::set<std::size_t> out;
  for (std::size_t c = 0; c < corpus.concepts.size(); ++c) {
    for (const auto& form : corpus.concepts[c].surface_forms) {
      const auto needle = tokenize(form);
      if (needle.empty()) continue;
      const bool hit = std::any_of(queries.begin(), queries.end(), [&](const auto& q) {
        return std::search(q.begin(), q.end(), needle.begin(), needle.end()) != q.end();
      });
      if (hit) {
        out.insert(c);
        break;
      }
    }
  }
  return out;
}

}  // namespace dcgrank
