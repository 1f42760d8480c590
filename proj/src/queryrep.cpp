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

#include "dcgrank/queryrep.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

#include "dcgrank/docrep.hpp"
#include "json.hpp"

namespace dcgrank {

using json = nlohmann::json;

namespace {

std::string normalize(const std::string& s) { return join_tokens(tokenize(s)); }

std::string conv_w(std::size_t width) { return "query.conv" + std::to_string(width) + ".W"; }
std::string conv_b(std::size_t width) { return "query.conv" + std::to_string(width) + ".b"; }
constexpr const char* kOutW = "query.out.W";
constexpr const char* kOutB = "query.out.b";

const char* separator_token(QueryField f) {
  switch (f) {
    case QueryField::disease:
      return "<disease>";
    case QueryField::gene:
      return "<gene>";
    case QueryField::variant:
      return "<variant>";
    case QueryField::demographic:
      return "<demographic>";
    case QueryField::mesh:
      return "<mesh>";
  }
  return "<unk>";
}

void append(std::vector<std::string>& out, const std::vector<std::string>& tokens) {
  out.insert(out.end(), tokens.begin(), tokens.end());
}

std::string decade(const std::string& digits) {
  const long age = std::stol(digits);
  return std::to_string(age / 10 * 10) + "s";
}

}  // namespace

bool Query::has_content() const {
  return !disease.empty() || !gene.empty() || !variant.empty() || !demographic.empty() ||
         !mesh.empty();
}

void ExpansionLexicon::add(const std::string& category, const std::string& term,
                           const std::string& synonym) {
  auto t = normalize(term);
  auto s = normalize(synonym);
  if (t.empty() || s.empty() || t == s) return;
  entries_[normalize(category)][t].insert(s);
}

std::set<std::string> ExpansionLexicon::lookup(const std::string& category,
                                               const std::string& term) const {
  auto cat = entries_.find(normalize(category));
  if (cat == entries_.end()) return {};
  auto it = cat->second.find(normalize(term));
  if (it == cat->second.end()) return {};
  return it->second;
}

std::set<std::string> ExpansionLexicon::lookup_any(const std::string& term) const {
  std::set<std::string> out;
  const auto key = normalize(term);
  for (const auto& [_, terms] : entries_) {
    if (auto it = terms.find(key); it != terms.end()) out.insert(it->second.begin(), it->second.end());
  }
  return out;
}

std::size_t ExpansionLexicon::size() const {
  std::size_t n = 0;
  for (const auto& [_, terms] : entries_) {
    for (const auto& [__, syn] : terms) n += syn.size();
  }
  return n;
}

ExpansionLexicon parse_lexicon(std::istream& in, const std::string& name) {
  ExpansionLexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() != 3) throw ParseError(name, line_no, "expected category<TAB>term<TAB>synonym");
    lex.add(cols[0], cols[1], cols[2]);
  }
  return lex;
}

ExpansionLexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_lexicon(in, path);
}

std::vector<Query> parse_queries(std::istream& in, const std::string& name) {
  std::vector<Query> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(name, line_no, std::string("invalid JSON: ") + e.what());
    }
    try {
      Query q;
      q.id = obj.at("id").get<std::string>();
      q.disease = obj.value("disease", std::string());
      q.gene = obj.value("gene", std::string());
      q.variant = obj.value("variant", std::string());
      q.demographic = obj.value("demographic", std::string());
      if (obj.contains("mesh")) q.mesh = obj.at("mesh").get<std::vector<std::string>>();
      if (q.id.empty()) throw ParseError(name, line_no, "empty query id");
      if (!q.has_content()) throw ParseError(name, line_no, "query has no non-empty field");
      out.push_back(std::move(q));
    } catch (const json::exception& e) {
      throw ParseError(name, line_no, e.what());
    }
  }
  return out;
}

std::vector<Query> load_queries(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_queries(in, path);
}

Query expand(Query query, const ExpansionLexicon& lexicon) {
  query.expansions.clear();
  if (!query.disease.empty()) query.expansions[QueryField::disease] = lexicon.lookup("disease", query.disease);
  if (!query.gene.empty()) query.expansions[QueryField::gene] = lexicon.lookup("gene", query.gene);
  if (!query.variant.empty()) query.expansions[QueryField::variant] = lexicon.lookup("variant", query.variant);
  if (!query.mesh.empty()) {
    auto& out = query.expansions[QueryField::mesh];
    for (const auto& term : query.mesh) {
      auto syn = lexicon.lookup_any(term);
      out.insert(syn.begin(), syn.end());
    }
  }
  return query;
}

std::vector<std::string> normalize_demographic(const std::string& text) {
  static const std::regex hyphenated(R"(^(\d+)-years?-old$)");
  static const std::regex number(R"(^\d+$)");
  const auto tokens = tokenize(text);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    std::smatch m;
    if (std::regex_match(t, m, hyphenated)) {
      out.push_back(decade(m[1]));
    } else if (std::regex_match(t, number) && i + 1 < tokens.size() &&
               (tokens[i + 1] == "year" || tokens[i + 1] == "years")) {
      out.push_back(decade(t));
      ++i;
      if (i + 1 < tokens.size() && tokens[i + 1] == "old") ++i;
    } else if (t == "male" || t == "man" || t == "boy") {
      out.push_back("male");
    } else if (t == "female" || t == "woman" || t == "girl") {
      out.push_back("female");
    } else {
      out.push_back(t);
    }
  }
  return out;
}

std::vector<std::string> flatten_query(const Query& query) {
  std::vector<std::string> out;
  auto field = [&](QueryField f, const std::string& text) {
    if (text.empty()) return;
    out.push_back(separator_token(f));
    append(out, tokenize(text));
    if (auto it = query.expansions.find(f); it != query.expansions.end()) {
      for (const auto& e : it->second) append(out, tokenize(e));
    }
  };
  field(QueryField::disease, query.disease);
  field(QueryField::gene, query.gene);
  field(QueryField::variant, query.variant);
  if (!query.demographic.empty()) {
    out.push_back(separator_token(QueryField::demographic));
    append(out, normalize_demographic(query.demographic));
  }
  if (!query.mesh.empty()) {
    std::vector<std::string> terms;
    for (const auto& t : query.mesh) {
      auto n = normalize(t);
      if (!n.empty()) terms.push_back(std::move(n));
    }
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
    for (const auto& t : terms) {
      out.push_back(separator_token(QueryField::mesh));
      append(out, tokenize(t));
    }
    if (auto it = query.expansions.find(QueryField::mesh); it != query.expansions.end()) {
      for (const auto& e : it->second) append(out, tokenize(e));
    }
  }
  return out;
}

void init_queryrep_params(ParamStore& params, const QueryRepConfig& config,
                          std::size_t embed_dim, std::mt19937_64& rng) {
  if (config.filter_widths.empty() || config.filters == 0) {
    throw std::invalid_argument("query encoder needs at least one filter width and filter");
  }
  for (auto w : config.filter_widths) {
    if (w == 0) throw std::invalid_argument("filter width must be >= 1");
    params.add(conv_w(w), glorot(w * embed_dim, config.filters, rng));
    params.add(conv_b(w), Tensor2(1, config.filters));
  }
  params.add(kOutW, glorot(config.filters * config.filter_widths.size(), config.query_dim, rng));
  params.add(kOutB, Tensor2(1, config.query_dim));
}

std::vector<std::size_t> query_token_ids(const Query& query, const Vocabulary& vocab) {
  return vocab.encode(flatten_query(query));
}

Var encode_query(Tape& tape, std::span<const std::size_t> tokens, const QueryRepConfig& config) {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (auto t : tokens) {
    if (t != Vocabulary::kPad) ids.push_back(t);
  }
  if (ids.empty()) throw std::invalid_argument("encode_query: empty token sequence");
  const std::size_t widest =
      *std::max_element(config.filter_widths.begin(), config.filter_widths.end());
  const std::size_t n_valid = ids.size();
  while (ids.size() < widest) ids.push_back(Vocabulary::kPad);

  std::vector<Var> emb;
  emb.reserve(ids.size());
  for (auto t : ids) emb.push_back(embed_token(tape, t));

  std::vector<Var> pools;
  for (auto w : config.filter_widths) {
    Var W = tape.param(conv_w(w));
    Var b = tape.param(conv_b(w));
    // Windows lie over real tokens only; a sequence shorter than the filter
    // gets a single window filled out with PAD.
    const std::size_t windows = n_valid >= w ? n_valid - w + 1 : 1;
    std::vector<Var> acts;
    for (std::size_t s = 0; s < windows; ++s) {
      Var x = w == 1 ? emb[s] : tape.concat(std::span<const Var>(emb.data() + s, w));
      acts.push_back(tape.relu(tape.add(tape.matmul(x, W), b)));
    }
    pools.push_back(acts.size() == 1 ? acts[0] : tape.max_pool(acts));
  }
  Var pooled = pools.size() == 1 ? pools[0] : tape.concat(pools);
  return tape.add(tape.matmul(pooled, tape.param(kOutW)), tape.param(kOutB));
}

Tensor2 encode_query(const Query& query, const Vocabulary& vocab, ParamStore& params,
                     const QueryRepConfig& config) {
  Tape tape(&params);
  const auto ids = query_token_ids(query, vocab);
  return tape.value(encode_query(tape, ids, config));
}

Query mesh_query(const std::string& id, const std::vector<std::string>& mesh_terms,
                 const ExpansionLexicon& lexicon) {
  if (mesh_terms.empty()) throw std::invalid_argument("mesh query needs at least one term");
  Query q;
  q.id = id;
  q.mesh = mesh_terms;
  return expand(std::move(q), lexicon);
}

Tensor2 encode_mesh_query(const std::vector<std::string>& mesh_terms,
                          const ExpansionLexicon& lexicon, const Vocabulary& vocab,
                          ParamStore& params, const QueryRepConfig& config) {
  return encode_query(mesh_query("", mesh_terms, lexicon), vocab, params, config);
}

}  // namespace dcgrank
