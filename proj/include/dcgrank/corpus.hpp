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
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dcgrank/numkit.hpp"

namespace dcgrank {

class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Lowercases ASCII letters, splits on whitespace, and peels leading and
// trailing ASCII punctuation off each chunk as single-character tokens.
// Inner punctuation ("48-year-old", "v600e") is preserved.
std::vector<std::string> tokenize(std::string_view text);
std::string join_tokens(const std::vector<std::string>& tokens);

// Token <-> index bijection. The first indices are reserved:
//   0 <pad>   1 <unk>   2 <eos>
//   3..7 query field separators (<disease> <gene> <variant> <demographic> <mesh>)
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kEos = 2;
  static constexpr std::size_t kDiseaseSep = 3;
  static constexpr std::size_t kGeneSep = 4;
  static constexpr std::size_t kVariantSep = 5;
  static constexpr std::size_t kDemographicSep = 6;
  static constexpr std::size_t kMeshSep = 7;
  static constexpr std::size_t kReserved = 8;

  Vocabulary();

  std::size_t add(const std::string& token);
  std::optional<std::size_t> find(std::string_view token) const;
  // Unknown tokens map to kUnk.
  std::size_t index(std::string_view token) const;
  const std::string& token(std::size_t i) const;
  std::size_t size() const { return tokens_.size(); }

  std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<std::size_t>& ids) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Concept {
  std::string id;
  std::vector<std::string> surface_forms;  // normalized (tokenized, space-joined)
};

struct Document {
  std::string id;
  std::vector<std::size_t> tokens;        // abstract, encoder input
  std::vector<std::size_t> title_tokens;  // decoder target, EOS not included
  std::vector<std::size_t> concepts;      // sorted indices into Corpus::concepts
  std::vector<std::string> mesh;          // indexing terms, may be empty
};

struct Corpus {
  std::vector<Document> documents;
  std::vector<Concept> concepts;
  Vocabulary vocab;

  std::optional<std::size_t> doc_index(std::string_view id) const;
  std::optional<std::size_t> concept_index(std::string_view id) const;
  // Rebuilds the id lookup tables after documents/concepts change.
  void reindex();

 private:
  std::unordered_map<std::string, std::size_t> doc_ids_;
  std::unordered_map<std::string, std::size_t> concept_ids_;
};

// docs: JSON lines {"id", "title", "abstract", "concepts": [...], "mesh": [...]}
// concepts: TSV rows "concept_id<TAB>surface_form", repeated per form.
Corpus load_corpus(const std::string& docs_path, const std::string& concepts_path);
Corpus parse_corpus(std::istream& docs, std::istream& concepts,
                    const std::string& docs_name = "docs",
                    const std::string& concepts_name = "concepts");

// Whole-corpus bundle (vocabulary, concepts, encoded documents) as JSON.
void save_corpus_bundle(const Corpus& corpus, const std::string& path);
Corpus load_corpus_bundle(const std::string& path);

using EmbeddingTable = std::unordered_map<std::string, std::vector<double>>;

// Text format: "token v1 v2 ... vdim" per line. Tokens are normalized with
// tokenize() casing rules on lookup, so "Cancer" in the file matches
// "cancer" in the vocabulary.
EmbeddingTable load_embedding_file(const std::string& path);
EmbeddingTable parse_embeddings(std::istream& in, const std::string& name = "embeddings");

// Bound of the uniform initializer: sqrt(3 / dim).
double embedding_init_bound(std::size_t dim);

struct EmbeddingInitStats {
  std::size_t pretrained_hits = 0;
  std::size_t random_rows = 0;
};

// V x dim word embeddings. Rows are drawn from U[-b, b], b = sqrt(3/dim),
// with a generator seeded by `seed`; rows found in `pretrained` are copied
// instead. The PAD row is zero.
Tensor2 init_embeddings(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed,
                        const EmbeddingTable* pretrained = nullptr,
                        EmbeddingInitStats* stats = nullptr);

// Concept rows are the mean of their surface-form token embeddings.
Tensor2 concept_embeddings(const Corpus& corpus, const Tensor2& word_embeddings);

}  // namespace dcgrank
