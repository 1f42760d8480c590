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

#include "dcgrank/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "dcgrank/corpus.hpp"

namespace dcgrank {

namespace {

std::vector<std::string> fields_of(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string f;
  while (ss >> f) out.push_back(f);
  return out;
}

bool parse_int(const std::string& s, long long& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_double(const std::string& s, double& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

int relevance_of(const std::map<std::string, int>& judgments, const std::string& doc) {
  auto it = judgments.find(doc);
  return it == judgments.end() ? 0 : it->second;
}

std::size_t count_relevant(const std::map<std::string, int>& judgments) {
  return static_cast<std::size_t>(std::count_if(judgments.begin(), judgments.end(),
                                                [](const auto& kv) { return kv.second > 0; }));
}

}  // namespace

double dcg(std::span<const double> rels, std::size_t n) {
  if (n == 0) throw std::invalid_argument("dcg: n must be >= 1");
  double s = 0.0;
  const std::size_t k = std::min(n, rels.size());
  for (std::size_t i = 0; i < k; ++i) s += rels[i] / std::log2(static_cast<double>(i) + 2.0);
  return s;
}

std::vector<double> run_relevance(const std::vector<RunEntry>& ranked,
                                  const std::map<std::string, int>& judgments) {
  std::vector<double> out;
  out.reserve(ranked.size());
  for (const auto& e : ranked) out.push_back(relevance_of(judgments, e.doc));
  return out;
}

std::vector<std::pair<std::string, int>> ideal_ranking(const std::map<std::string, int>& judgments) {
  std::vector<std::pair<std::string, int>> out(judgments.begin(), judgments.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

std::optional<double> ndcg_query(const std::vector<RunEntry>& ranked,
                                 const std::map<std::string, int>& judgments, std::size_t n) {
  std::vector<double> ideal;
  for (const auto& [_, rel] : ideal_ranking(judgments)) ideal.push_back(rel);
  const double idcg = dcg(ideal, n);
  if (idcg <= 0.0) return std::nullopt;
  return dcg(run_relevance(ranked, judgments), n) / idcg;
}

std::optional<double> average_precision(const std::vector<RunEntry>& ranked,
                                        const std::map<std::string, int>& judgments,
                                        bool graded) {
  double denom = 0.0;
  for (const auto& [_, rel] : judgments) {
    if (rel > 0) denom += graded ? rel : 1.0;
  }
  if (denom <= 0.0) return std::nullopt;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const int rel = relevance_of(judgments, ranked[i].doc);
    if (rel <= 0) continue;
    ++hits;
    const double precision = static_cast<double>(hits) / static_cast<double>(i + 1);
    sum += graded ? rel * precision : precision;
  }
  return sum / denom;
}

double reciprocal_rank(const std::vector<RunEntry>& ranked,
                       const std::map<std::string, int>& judgments) {
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (relevance_of(judgments, ranked[i].doc) > 0) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

double precision_at_query(const std::vector<RunEntry>& ranked,
                          const std::map<std::string, int>& judgments, std::size_t n) {
  if (n == 0) throw std::invalid_argument("precision_at: n must be >= 1");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(n, ranked.size()); ++i) {
    if (relevance_of(judgments, ranked[i].doc) > 0) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

MetricResult evaluate(Metric metric, const RunList& run, const QRels& qrels,
                      const MetricOptions& options) {
  MetricResult result;
  for (const auto& [qid, _] : run) {
    if (!qrels.count(qid)) ++result.skipped_unjudged;
  }
  static const std::vector<RunEntry> kEmpty;
  double total = 0.0;
  for (const auto& [qid, judgments] : qrels) {
    if (count_relevant(judgments) == 0) {
      ++result.skipped_no_relevant;
      continue;
    }
    auto it = run.find(qid);
    if (it == run.end()) ++result.missing_from_run;
    // Tied scores are ordered by ascending doc id whatever the list order.
    auto ranked = it == run.end() ? kEmpty : it->second;
    sort_run_entries(ranked);
    double v = 0.0;
    switch (metric) {
      case Metric::ndcg:
        v = ndcg_query(ranked, judgments, options.n).value_or(0.0);
        break;
      case Metric::map:
        v = average_precision(ranked, judgments, options.graded_ap).value_or(0.0);
        break;
      case Metric::mrr:
        v = reciprocal_rank(ranked, judgments);
        break;
      case Metric::precision:
        v = precision_at_query(ranked, judgments, options.n);
        break;
    }
    result.per_query.push_back({qid, v});
    total += v;
  }
  if (!result.per_query.empty()) result.mean = total / static_cast<double>(result.per_query.size());
  return result;
}

MetricResult ndcg(const RunList& run, const QRels& qrels, std::size_t n) {
  return evaluate(Metric::ndcg, run, qrels, {n, false});
}

MetricResult mean_average_precision(const RunList& run, const QRels& qrels, bool graded) {
  return evaluate(Metric::map, run, qrels, {20, graded});
}

MetricResult mrr(const RunList& run, const QRels& qrels) {
  return evaluate(Metric::mrr, run, qrels);
}

MetricResult precision_at(const RunList& run, const QRels& qrels, std::size_t n) {
  return evaluate(Metric::precision, run, qrels, {n, false});
}

void sort_run_entries(std::vector<RunEntry>& entries) {
  std::sort(entries.begin(), entries.end(), [](const RunEntry& a, const RunEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc < b.doc;
  });
}

// ---------------------------------------------------------------------------
// File formats

QRels parse_qrels(std::istream& in, const std::string& name) {
  QRels qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto f = fields_of(line);
    if (f.empty()) continue;
    if (f.size() != 4) throw ParseError(name, line_no, "expected 4 fields");
    long long iter = 0;
    long long rel = 0;
    if (!parse_int(f[1], iter)) throw ParseError(name, line_no, "iteration must be an integer");
    if (!parse_int(f[3], rel)) throw ParseError(name, line_no, "relevance must be an integer");
    // Negative grades (e.g. -2 spam) are clamped to not relevant.
    const int grade = static_cast<int>(std::max(0LL, rel));
    auto [it, inserted] = qrels[f[0]].emplace(f[2], grade);
    if (!inserted) throw ParseError(name, line_no, "duplicate judgment for " + f[0] + "/" + f[2]);
  }
  return qrels;
}

QRels load_qrels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_qrels(in, path);
}

void write_qrels(std::ostream& os, const QRels& qrels) {
  for (const auto& [qid, docs] : qrels) {
    for (const auto& [doc, rel] : docs) os << qid << " 0 " << doc << ' ' << rel << '\n';
  }
}

RunList parse_run(std::istream& in, const std::string& name) {
  RunList run;
  std::map<std::string, std::set<std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = fields_of(line);
    if (f.size() != 6) throw ParseError(name, line_no, "expected 6 fields");
    if (f[1] != "Q0") throw ParseError(name, line_no, "second field must be Q0");
    long long rank = 0;
    double score = 0.0;
    if (!parse_int(f[3], rank) || rank < 1) throw ParseError(name, line_no, "bad rank");
    if (!parse_double(f[4], score)) throw ParseError(name, line_no, "bad score");
    auto& list = run[f[0]];
    if (static_cast<std::size_t>(rank) != list.size() + 1) {
      throw ParseError(name, line_no, "rank " + f[3] + " is not contiguous for query " + f[0]);
    }
    if (!seen[f[0]].insert(f[2]).second) {
      throw ParseError(name, line_no, "duplicate document " + f[2] + " for query " + f[0]);
    }
    if (!list.empty()) {
      const auto& prev = list.back();
      if (score > prev.score || (score == prev.score && f[2] < prev.doc)) {
        throw ParseError(name, line_no, "entries out of order for query " + f[0]);
      }
    }
    list.push_back({f[2], score});
  }
  return run;
}

RunList load_run(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_run(in, path);
}

void write_run(std::ostream& os, const RunList& run, const std::string& tag) {
  if (tag.empty() || tag.find_first_of(" \t\n") != std::string::npos) {
    throw std::invalid_argument("run tag must be a non-empty single word");
  }
  const auto flags = os.flags();
  const auto prec = os.precision();
  os << std::setprecision(17);
  for (const auto& [qid, list] : run) {
    auto entries = list;
    sort_run_entries(entries);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      os << qid << " Q0 " << entries[i].doc << ' ' << (i + 1) << ' ' << entries[i].score << ' '
         << tag << '\n';
    }
  }
  os.flags(flags);
  os.precision(prec);
}

}  // namespace dcgrank
