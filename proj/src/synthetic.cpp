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

#include "dcgrank/synthetic.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

namespace dcgrank::synth {

namespace {

using nlohmann::json;

std::string id_of(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%03zu", prefix, i);
  return buf;
}

std::string filler(std::size_t i) { return "w" + std::to_string(i); }

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

// Filler text of length `len` with each mention placed at a random slot.
std::vector<std::string> text_with(const std::vector<std::string>& mentions, std::size_t len,
                                   std::size_t filler_words, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> word(0, filler_words - 1);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < len; ++i) out.push_back(filler(word(rng)));
  for (const auto& m : mentions) {
    std::uniform_int_distribution<std::size_t> at(0, out.size());
    out.insert(out.begin() + static_cast<std::ptrdiff_t>(at(rng)), m);
  }
  return out;
}

std::string doc_line(const std::string& id, const std::string& title, const std::string& abstract,
                     const std::vector<std::string>& concepts, const std::vector<std::string>& mesh) {
  json j = {{"id", id}, {"title", title}, {"abstract", abstract}, {"concepts", concepts},
            {"mesh", mesh}};
  return j.dump() + "\n";
}

}  // namespace

void FixtureText::write(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  auto put = [&](const char* name, const std::string& text) {
    std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
    out << text;
  };
  put("docs.jsonl", docs);
  put("concepts.tsv", concepts);
  put("kb.tsv", kb);
  put("queries.jsonl", queries);
  put("qrels.txt", qrels);
  put("lexicon.tsv", lexicon);
}

Fixture load_fixture(const FixtureText& text) {
  Fixture f;
  std::istringstream docs(text.docs), concepts(text.concepts), kb(text.kb),
      queries(text.queries), qrels(text.qrels), lexicon(text.lexicon);
  f.corpus = parse_corpus(docs, concepts);
  f.graph = build_graph(f.corpus, kb, "kb");
  f.queries = parse_queries(queries);
  f.qrels = parse_qrels(qrels);
  f.lexicon = parse_lexicon(lexicon);
  return f;
}

FixtureText containment_fixture(const ContainmentSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  FixtureText t;
  auto form = [](std::size_t c) { return "conc" + std::to_string(c); };
  for (std::size_t c = 0; c < spec.num_concepts; ++c) {
    t.concepts += id_of("C", c) + "\t" + form(c) + "\n";
    t.concepts += id_of("C", c) + "\tsyn" + std::to_string(c) + "\n";
    t.lexicon += "disease\t" + form(c) + "\tsyn" + std::to_string(c) + "\n";
  }
  std::vector<std::vector<std::size_t>> doc_concepts(spec.num_docs);
  std::uniform_int_distribution<std::size_t> extra(1, 2);
  std::uniform_int_distribution<std::size_t> pick(0, spec.num_concepts - 1);
  for (std::size_t d = 0; d < spec.num_docs; ++d) {
    auto& cs = doc_concepts[d];
    cs.push_back(d % spec.num_concepts);
    const std::size_t want = 1 + extra(rng);
    while (cs.size() < want) {
      const auto c = pick(rng);
      if (std::find(cs.begin(), cs.end(), c) == cs.end()) cs.push_back(c);
    }
    std::vector<std::string> mentions, ids, mesh;
    for (auto c : cs) {
      mentions.push_back(form(c));
      ids.push_back(id_of("C", c));
      mesh.push_back(form(c));
    }
    const auto abstract = text_with(mentions, spec.abstract_len, spec.filler_words, rng);
    const auto title = text_with(mentions, 1, spec.filler_words, rng);
    t.docs += doc_line(id_of("D", d), join(title), join(abstract), ids, mesh);
  }
  for (std::size_t q = 0; q < spec.num_queries; ++q) {
    const auto qid = id_of("Q", q);
    t.queries += json({{"id", qid}, {"disease", form(q)}}).dump() + "\n";
    for (std::size_t d = 0; d < spec.num_docs; ++d) {
      const auto& cs = doc_concepts[d];
      auto it = std::find(cs.begin(), cs.end(), q);
      if (it == cs.end()) continue;
      t.qrels += qid + " 0 " + id_of("D", d) + " " + (it == cs.begin() ? "2" : "1") + "\n";
    }
  }
  return t;
}

FixtureText kb_fixture(const KbSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  FixtureText t;
  auto qform = [](std::size_t i) { return "qside" + std::to_string(i); };
  auto dform = [](std::size_t i) { return "dside" + std::to_string(i); };
  for (std::size_t i = 0; i < spec.pairs; ++i) {
    t.concepts += id_of("A", i) + "\t" + qform(i) + "\n";
    t.concepts += id_of("B", i) + "\t" + dform(i) + "\n";
    t.kb += id_of("A", i) + "\trelated_to\t" + id_of("B", i) + "\n";
  }
  std::size_t d = 0;
  std::vector<std::vector<std::string>> relevant(spec.pairs);
  for (std::size_t i = 0; i < spec.pairs; ++i) {
    for (std::size_t k = 0; k < spec.docs_per_pair; ++k, ++d) {
      const auto abstract = text_with({dform(i)}, spec.abstract_len, spec.filler_words, rng);
      const auto title = text_with({dform(i)}, 1, spec.filler_words, rng);
      t.docs += doc_line(id_of("D", d), join(title), join(abstract), {id_of("B", i)}, {dform(i)});
      relevant[i].push_back(id_of("D", d));
    }
  }
  for (std::size_t i = 0; i < spec.pairs; ++i) {
    const auto qid = id_of("Q", i);
    t.queries += json({{"id", qid}, {"disease", qform(i)}}).dump() + "\n";
    for (const auto& doc : relevant[i]) t.qrels += qid + " 0 " + doc + " 1\n";
  }
  return t;
}

FixtureText toy_fixture() {
  FixtureText t;
  t.concepts =
      "C1\tbrca1\n"
      "C2\tbreast cancer\n"
      "C3\tegfr\n"
      "C4\tlung cancer\n";
  t.kb = "C1\tassociated_with\tC2\nC3\tassociated_with\tC4\n";
  t.docs = doc_line("D1", "brca1 in breast cancer", "brca1 mutation drives breast cancer risk .",
                    {"C1", "C2"}, {"brca1", "breast cancer"}) +
           doc_line("D2", "egfr and lung cancer", "egfr inhibitors in lung cancer trials .",
                    {"C3", "C4"}, {"egfr", "lung cancer"}) +
           doc_line("D3", "breast cancer care", "screening for breast cancer in women .", {"C2"},
                    {"breast cancer"}) +
           doc_line("D4", "egfr signalling", "egfr signalling in cells .", {"C3"}, {"egfr"}) +
           doc_line("D5", "cancer genes", "brca1 and egfr in lung cancer and breast cancer .",
                    {"C1", "C2", "C3", "C4"}, {"brca1", "egfr"});
  t.queries =
      "{\"id\": \"T1\", \"disease\": \"breast cancer\", \"gene\": \"BRCA1\"}\n"
      "{\"id\": \"T2\", \"disease\": \"lung cancer\", \"gene\": \"EGFR\", \"demographic\": \"58-year-old woman\"}\n";
  t.qrels = "T1 0 D1 2\nT1 0 D3 1\nT1 0 D2 0\nT2 0 D2 2\nT2 0 D4 1\n";
  t.lexicon = "gene\tbrca1\tbrca 1\ndisease\tlung cancer\tnsclc\n";
  return t;
}

}  // namespace dcgrank::synth
