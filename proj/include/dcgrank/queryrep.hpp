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

// Structured query expansion and the convolutional query encoder.

#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dcgrank/corpus.hpp"
#include "dcgrank/numkit.hpp"
#include "dcgrank/tape.hpp"

namespace dcgrank {

enum class QueryField { disease, gene, variant, demographic, mesh };

struct Query {
  std::string id;
  std::string disease;
  std::string gene;
  std::string variant;
  std::string demographic;
  std::vector<std::string> mesh;  // indexing-term queries; empty for clinical topics

  // Normalized alternative strings per field, ordered lexicographically.
  std::map<QueryField, std::set<std::string>> expansions;

  bool has_content() const;
};

// category -> normalized term -> normalized synonyms. Terms and synonyms are
// normalized with tokenize() and joined by single spaces, so lookups are
// case-insensitive. A synonym equal to its own term is dropped.
class ExpansionLexicon {
 public:
  void add(const std::string& category, const std::string& term, const std::string& synonym);
  // Empty set when nothing is known.
  std::set<std::string> lookup(const std::string& category, const std::string& term) const;
  // Union over all categories.
  std::set<std::string> lookup_any(const std::string& term) const;
  std::size_t size() const;

 private:
  std::map<std::string, std::map<std::string, std::set<std::string>>> entries_;
};

// TSV rows "category<TAB>term<TAB>synonym".
ExpansionLexicon parse_lexicon(std::istream& in, const std::string& name = "lexicon");
ExpansionLexicon load_lexicon(const std::string& path);

// JSON lines: clinical {"id", "disease", "gene", "variant", "demographic"}
// or indexing-term {"id", "mesh": [...]}.
std::vector<Query> parse_queries(std::istream& in, const std::string& name = "queries");
std::vector<Query> load_queries(const std::string& path);

// Populates expansions for disease, gene, variant and each mesh term.
// Demographics are never expanded. Originals stay untouched.
Query expand(Query query, const ExpansionLexicon& lexicon);

// Demographic text to tokens: "<n>-year-old" and "<n> year(s) old" become a
// decade bucket ("48" -> "40s"); man/woman/boy/girl/male/female become
// "male"/"female".
std::vector<std::string> normalize_demographic(const std::string& text);

// Flattened token sequence: for each non-empty field in the order disease,
// gene, variant, demographic, then each mesh term in sorted order, a field
// separator token followed by the field tokens and its sorted expansions.
std::vector<std::string> flatten_query(const Query& query);

struct QueryRepConfig {
  std::vector<std::size_t> filter_widths{2, 3};
  std::size_t filters = 64;  // per width
  std::size_t query_dim = 64;
};

void init_queryrep_params(ParamStore& params, const QueryRepConfig& config,
                          std::size_t embed_dim, std::mt19937_64& rng);

// Token ids of a flattened query. Separators map to their reserved ids,
// everything else through the vocabulary (UNK when missing).
std::vector<std::size_t> query_token_ids(const Query& query, const Vocabulary& vocab);

// Convolution with masked max-over-time pooling: PAD ids are removed before
// windowing and a sequence shorter than the widest filter is right-padded
// with PAD to that width. Throws std::invalid_argument on an empty sequence.
Var encode_query(Tape& tape, std::span<const std::size_t> tokens, const QueryRepConfig& config);

Tensor2 encode_query(const Query& query, const Vocabulary& vocab, ParamStore& params,
                     const QueryRepConfig& config);
Tensor2 encode_mesh_query(const std::vector<std::string>& mesh_terms,
                          const ExpansionLexicon& lexicon, const Vocabulary& vocab,
                          ParamStore& params, const QueryRepConfig& config);

// Query holding only the given indexing terms, expanded.
Query mesh_query(const std::string& id, const std::vector<std::string>& mesh_terms,
                 const ExpansionLexicon& lexicon);

}  // namespace dcgrank
