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

// Synthetic corpora for verification runs. Everything is produced as file
// text and then read back through the regular parsers.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dcgrank/corpus.hpp"
#include "dcgrank/dcgraph.hpp"
#include "dcgrank/metrics.hpp"
#include "dcgrank/queryrep.hpp"

namespace dcgrank::synth {

struct FixtureText {
  std::string docs;      // JSON lines
  std::string concepts;  // TSV
  std::string kb;        // TSV, may be empty
  std::string queries;   // JSON lines
  std::string qrels;
  std::string lexicon;   // TSV

  // Writes docs.jsonl, concepts.tsv, kb.tsv, queries.jsonl, qrels.txt and
  // lexicon.tsv into `dir` (created if needed).
  void write(const std::string& dir) const;
};

struct Fixture {
  Corpus corpus;
  DocumentConceptGraph graph{0, 0};
  std::vector<Query> queries;  // not expanded
  QRels qrels;
  ExpansionLexicon lexicon;
};

Fixture load_fixture(const FixtureText& text);

// Each document mentions 2-3 concepts in its abstract, title and indexing
// terms. Query q asks for concept q; documents that contain it are relevant
// (grade 2 when it is their first concept, else 1).
struct ContainmentSpec {
  std::size_t num_docs = 50;
  std::size_t num_concepts = 20;
  std::size_t num_queries = 10;
  std::size_t abstract_len = 14;
  std::size_t filler_words = 40;
  std::uint64_t seed = 1;
};
FixtureText containment_fixture(const ContainmentSpec& spec);

// Concepts come in pairs (query-side A_i, document-side B_i) joined by a kb
// edge. Documents mention exactly one B concept; query i names A_i only, so
// relevance is reachable only through the kb edge.
struct KbSpec {
  std::size_t pairs = 20;
  std::size_t docs_per_pair = 3;
  std::size_t abstract_len = 10;
  std::size_t filler_words = 30;
  std::uint64_t seed = 1;
};
FixtureText kb_fixture(const KbSpec& spec);

// Five documents, four concepts, one kb edge and two queries.
FixtureText toy_fixture();

}  // namespace dcgrank::synth
