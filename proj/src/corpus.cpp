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

#include "dcgrank/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace dcgrank {

using json = nlohmann::json;

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_punct(unsigned char c) { return c < 128 && std::ispunct(c) != 0; }

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

std::string trim_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> string_list(const json& obj, const char* key, const std::string& src,
                                     std::size_t line) {
  std::vector<std::string> out;
  if (!obj.contains(key)) return out;
  const auto& arr = obj.at(key);
  if (!arr.is_array()) throw ParseError(src, line, std::string("\"") + key + "\" must be an array");
  for (const auto& v : arr) {
    if (!v.is_string()) {
      throw ParseError(src, line, std::string("\"") + key + "\" must contain strings");
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::string string_field(const json& obj, const char* key, const std::string& src,
                         std::size_t line, bool required) {
  if (!obj.contains(key)) {
    if (required) throw ParseError(src, line, std::string("missing \"") + key + "\"");
    return {};
  }
  if (!obj.at(key).is_string()) {
    throw ParseError(src, line, std::string("\"") + key + "\" must be a string");
  }
  return obj.at(key).get<std::string>();
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(static_cast<unsigned char>(text[j]))) ++j;
    if (j == i) break;
    std::string_view chunk = text.substr(i, j - i);
    i = j;

    std::size_t lead = 0;
    while (lead < chunk.size() && is_punct(static_cast<unsigned char>(chunk[lead]))) {
      out.emplace_back(1, chunk[lead]);
      ++lead;
    }
    std::size_t end = chunk.size();
    while (end > lead && is_punct(static_cast<unsigned char>(chunk[end - 1]))) --end;
    if (end > lead) {
      std::string word(chunk.substr(lead, end - lead));
      for (auto& ch : word) {
        if (static_cast<unsigned char>(ch) < 128) {
          ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        }
      }
      out.push_back(std::move(word));
    }
    for (std::size_t k = end; k < chunk.size(); ++k) out.emplace_back(1, chunk[k]);
  }
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  for (const char* t : {"<pad>", "<unk>", "<eos>", "<disease>", "<gene>", "<variant>",
                        "<demographic>", "<mesh>"}) {
    add(t);
  }
}

std::size_t Vocabulary::add(const std::string& token) {
  auto [it, inserted] = index_.emplace(token, tokens_.size());
  if (inserted) tokens_.push_back(token);
  return it->second;
}

std::optional<std::size_t> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::index(std::string_view token) const { return find(token).value_or(kUnk); }

const std::string& Vocabulary::token(std::size_t i) const {
  if (i >= tokens_.size()) {
    throw IndexError("Vocabulary: index " + std::to_string(i) + " out of range");
  }
  return tokens_[i];
}

std::vector<std::size_t> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(index(t));
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<std::size_t>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto i : ids) out.push_back(token(i));
  return out;
}

// ---------------------------------------------------------------------------
// Corpus

std::optional<std::size_t> Corpus::doc_index(std::string_view id) const {
  auto it = doc_ids_.find(std::string(id));
  if (it == doc_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Corpus::concept_index(std::string_view id) const {
  auto it = concept_ids_.find(std::string(id));
  if (it == concept_ids_.end()) return std::nullopt;
  return it->second;
}

void Corpus::reindex() {
  doc_ids_.clear();
  concept_ids_.clear();
  for (std::size_t i = 0; i < documents.size(); ++i) {
    if (!doc_ids_.emplace(documents[i].id, i).second) {
      throw IngestError("duplicate document id \"" + documents[i].id + "\"");
    }
  }
  for (std::size_t i = 0; i < concepts.size(); ++i) {
    if (!concept_ids_.emplace(concepts[i].id, i).second) {
      throw IngestError("duplicate concept id \"" + concepts[i].id + "\"");
    }
  }
}

Corpus parse_corpus(std::istream& docs, std::istream& concepts, const std::string& docs_name,
                    const std::string& concepts_name) {
  Corpus corpus;

  // Concepts first, in first-appearance order; surface forms deduplicated.
  std::map<std::string, std::size_t> concept_pos;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(concepts, line)) {
    ++line_no;
    line = trim_cr(line);
    if (line.empty() || line[0] == '#') continue;
    auto cols = split_tabs(line);
    if (cols.size() != 2 || cols[0].empty()) {
      throw ParseError(concepts_name, line_no, "expected concept_id<TAB>surface_form");
    }
    auto form = join_tokens(tokenize(cols[1]));
    if (form.empty()) throw ParseError(concepts_name, line_no, "empty surface form");
    auto [it, inserted] = concept_pos.emplace(cols[0], corpus.concepts.size());
    if (inserted) corpus.concepts.push_back(Concept{cols[0], {}});
    auto& forms = corpus.concepts[it->second].surface_forms;
    if (std::find(forms.begin(), forms.end(), form) == forms.end()) forms.push_back(form);
  }

  struct RawDoc {
    std::string id;
    std::vector<std::string> tokens, title;
    std::vector<std::string> concepts, mesh;
    std::size_t line;
  };
  std::vector<RawDoc> raw;
  std::set<std::string> seen;
  line_no = 0;
  while (std::getline(docs, line)) {
    ++line_no;
    line = trim_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(docs_name, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(docs_name, line_no, "expected a JSON object");
    RawDoc d;
    d.line = line_no;
    d.id = string_field(obj, "id", docs_name, line_no, true);
    if (d.id.empty()) throw ParseError(docs_name, line_no, "empty document id");
    if (!seen.insert(d.id).second) {
      throw IngestError(docs_name + ":" + std::to_string(line_no) + ": duplicate document id \"" +
                        d.id + "\"");
    }
    d.title = tokenize(string_field(obj, "title", docs_name, line_no, false));
    d.tokens = tokenize(string_field(obj, "abstract", docs_name, line_no, true));
    if (d.tokens.empty()) throw IngestError("document \"" + d.id + "\" has an empty abstract");
    d.concepts = string_list(obj, "concepts", docs_name, line_no);
    d.mesh = string_list(obj, "mesh", docs_name, line_no);
    raw.push_back(std::move(d));
  }

  std::set<std::string> unresolved;
  for (const auto& d : raw) {
    for (const auto& c : d.concepts) {
      if (!concept_pos.count(c)) unresolved.insert(c);
    }
  }
  if (!unresolved.empty()) {
    std::string msg = "unresolved concept ids:";
    for (const auto& c : unresolved) msg += " " + c;
    throw IngestError(msg);
  }

  // Vocabulary: abstract tokens, then titles, then concept surface forms,
  // each in order of first appearance.
  for (const auto& d : raw) {
    for (const auto& t : d.tokens) corpus.vocab.add(t);
  }
  for (const auto& d : raw) {
    for (const auto& t : d.title) corpus.vocab.add(t);
  }
  for (const auto& c : corpus.concepts) {
    for (const auto& f : c.surface_forms) {
      for (const auto& t : tokenize(f)) corpus.vocab.add(t);
    }
  }

  for (auto& d : raw) {
    Document doc;
    doc.id = std::move(d.id);
    doc.tokens = corpus.vocab.encode(d.tokens);
    doc.title_tokens = corpus.vocab.encode(d.title);
    for (const auto& c : d.concepts) doc.concepts.push_back(concept_pos.at(c));
    std::sort(doc.concepts.begin(), doc.concepts.end());
    doc.concepts.erase(std::unique(doc.concepts.begin(), doc.concepts.end()), doc.concepts.end());
    doc.mesh = std::move(d.mesh);
    corpus.documents.push_back(std::move(doc));
  }
  corpus.reindex();
  return corpus;
}

Corpus load_corpus(const std::string& docs_path, const std::string& concepts_path) {
  auto docs = open_input(docs_path);
  auto concepts = open_input(concepts_path);
  return parse_corpus(docs, concepts, docs_path, concepts_path);
}

void save_corpus_bundle(const Corpus& corpus, const std::string& path) {
  json j;
  std::vector<std::string> vocab;
  for (std::size_t i = 0; i < corpus.vocab.size(); ++i) vocab.push_back(corpus.vocab.token(i));
  j["vocab"] = vocab;
  j["concepts"] = json::array();
  for (const auto& c : corpus.concepts) {
    j["concepts"].push_back({{"id", c.id}, {"surface_forms", c.surface_forms}});
  }
  j["documents"] = json::array();
  for (const auto& d : corpus.documents) {
    j["documents"].push_back({{"id", d.id},
                              {"tokens", d.tokens},
                              {"title_tokens", d.title_tokens},
                              {"concepts", d.concepts},
                              {"mesh", d.mesh}});
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << j.dump() << '\n';
}

Corpus load_corpus_bundle(const std::string& path) {
  auto in = open_input(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  Corpus corpus;
  try {
    const auto vocab = j.at("vocab").get<std::vector<std::string>>();
    Vocabulary fresh;
    if (vocab.size() < Vocabulary::kReserved) throw FormatError(path + ": vocabulary too short");
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      if (i < Vocabulary::kReserved) {
        if (fresh.token(i) != vocab[i]) throw FormatError(path + ": reserved token mismatch");
        continue;
      }
      if (fresh.add(vocab[i]) != i) throw FormatError(path + ": duplicate vocabulary token");
    }
    corpus.vocab = std::move(fresh);
    for (const auto& c : j.at("concepts")) {
      corpus.concepts.push_back(
          Concept{c.at("id").get<std::string>(),
                  c.at("surface_forms").get<std::vector<std::string>>()});
    }
    for (const auto& d : j.at("documents")) {
      Document doc;
      doc.id = d.at("id").get<std::string>();
      doc.tokens = d.at("tokens").get<std::vector<std::size_t>>();
      doc.title_tokens = d.at("title_tokens").get<std::vector<std::size_t>>();
      doc.concepts = d.at("concepts").get<std::vector<std::size_t>>();
      doc.mesh = d.at("mesh").get<std::vector<std::string>>();
      for (auto t : doc.tokens) {
        if (t >= corpus.vocab.size()) throw FormatError(path + ": token id out of range");
      }
      for (auto t : doc.title_tokens) {
        if (t >= corpus.vocab.size()) throw FormatError(path + ": token id out of range");
      }
      for (auto c : doc.concepts) {
        if (c >= corpus.concepts.size()) throw FormatError(path + ": concept index out of range");
      }
      corpus.documents.push_back(std::move(doc));
    }
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  corpus.reindex();
  return corpus;
}

// ---------------------------------------------------------------------------
// Embeddings

EmbeddingTable parse_embeddings(std::istream& in, const std::string& name) {
  EmbeddingTable table;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    std::vector<double> vec;
    std::string num;
    while (fields >> num) {
      double v = 0.0;
      const auto* first = num.data();
      const auto* last = num.data() + num.size();
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
        throw ParseError(name, line_no, "invalid number \"" + num + "\"");
      }
      vec.push_back(v);
    }
    if (vec.empty()) throw ParseError(name, line_no, "token without vector");
    if (dim == 0) dim = vec.size();
    if (vec.size() != dim) {
      throw ParseError(name, line_no,
                       "expected " + std::to_string(dim) + " values, got " +
                           std::to_string(vec.size()));
    }
    auto key = join_tokens(tokenize(token));
    table.emplace(key.empty() ? token : key, std::move(vec));
  }
  return table;
}

EmbeddingTable load_embedding_file(const std::string& path) {
  auto in = open_input(path);
  return parse_embeddings(in, path);
}

double embedding_init_bound(std::size_t dim) {
  return std::sqrt(3.0 / static_cast<double>(dim));
}

Tensor2 init_embeddings(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed,
                        const EmbeddingTable* pretrained, EmbeddingInitStats* stats) {
  if (dim == 0) throw std::invalid_argument("init_embeddings: dim must be >= 1");
  const double bound = embedding_init_bound(dim);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-bound, bound);
  Tensor2 out(vocab.size(), dim);
  // Every row consumes its random draws so pretrained hits do not shift the
  // stream for later rows.
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (auto& v : out.row_span(r)) v = uniform(rng);
  }
  EmbeddingInitStats local;
  for (std::size_t r = Vocabulary::kReserved; r < out.rows() && pretrained; ++r) {
    auto it = pretrained->find(vocab.token(r));
    if (it == pretrained->end()) continue;
    if (it->second.size() != dim) {
      throw DimensionError("init_embeddings: pretrained vector for \"" + vocab.token(r) +
                           "\" has dim " + std::to_string(it->second.size()) + ", expected " +
                           std::to_string(dim));
    }
    std::copy(it->second.begin(), it->second.end(), out.row_span(r).begin());
    ++local.pretrained_hits;
  }
  if (pretrained && local.pretrained_hits == 0) {
    throw IngestError("pretrained embeddings cover no vocabulary token");
  }
  for (auto& v : out.row_span(Vocabulary::kPad)) v = 0.0;
  local.random_rows = out.rows() - 1 - local.pretrained_hits;
  if (stats) *stats = local;
  return out;
}

Tensor2 concept_embeddings(const Corpus& corpus, const Tensor2& word_embeddings) {
  const std::size_t dim = word_embeddings.cols();
  Tensor2 out(corpus.concepts.size(), dim);
  for (std::size_t c = 0; c < corpus.concepts.size(); ++c) {
    std::size_t n = 0;
    auto row = out.row_span(c);
    for (const auto& form : corpus.concepts[c].surface_forms) {
      for (const auto& tok : tokenize(form)) {
        const auto src = word_embeddings.row_span(corpus.vocab.index(tok));
        for (std::size_t j = 0; j < dim; ++j) row[j] += src[j];
        ++n;
      }
    }
    if (n > 0) {
      for (auto& v : row) v /= static_cast<double>(n);
    }
  }
  return out;
}

}  // namespace dcgrank
