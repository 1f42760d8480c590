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

// Ranked-retrieval metrics over TREC-style runs and graded judgments, plus
// readers and writers for both file formats.

#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcgrank/corpus.hpp"  // ParseError

namespace dcgrank {

// query id -> doc id -> graded relevance (>= 0). Unjudged docs count as 0.
using QRels = std::map<std::string, std::map<std::string, int>>;

struct RunEntry {
  std::string doc;
  double score = 0.0;
};

// query id -> ranked entries, rank 1 first.
using RunList = std::map<std::string, std::vector<RunEntry>>;

// Sum over i = 1..min(n, len) of rel_i / log2(i + 1).
double dcg(std::span<const double> rels, std::size_t n);

// Relevance labels of a ranked list; unjudged docs are 0.
std::vector<double> run_relevance(const std::vector<RunEntry>& ranked,
                                  const std::map<std::string, int>& judgments);

// Ideal ordering: descending relevance, then ascending doc id.
std::vector<std::pair<std::string, int>> ideal_ranking(const std::map<std::string, int>& judgments);

// Per-query NDCG@n; nullopt when the ideal DCG is zero.
std::optional<double> ndcg_query(const std::vector<RunEntry>& ranked,
                                 const std::map<std::string, int>& judgments, std::size_t n);

// Binary AP by default: relevant means rel > 0, and the denominator is the
// number of relevant documents in the judgments. With `graded`, each hit's
// precision is weighted by its relevance grade and the sum is divided by
// the total grade mass of the judgments. nullopt when nothing is relevant.
std::optional<double> average_precision(const std::vector<RunEntry>& ranked,
                                        const std::map<std::string, int>& judgments,
                                        bool graded = false);

// 1 / rank of the first doc with rel > 0; 0 when none is retrieved.
double reciprocal_rank(const std::vector<RunEntry>& ranked,
                       const std::map<std::string, int>& judgments);

// (# docs with rel > 0 in the top n) / n.
double precision_at_query(const std::vector<RunEntry>& ranked,
                          const std::map<std::string, int>& judgments, std::size_t n);

enum class Metric { ndcg, map, mrr, precision };

struct QueryScore {
  std::string query;
  double value = 0.0;
};

struct MetricResult {
  double mean = 0.0;
  std::vector<QueryScore> per_query;
  // Judged queries with nothing relevant; excluded from the mean.
  std::size_t skipped_no_relevant = 0;
  // Run queries absent from qrels, and judged queries absent from the run.
  std::size_t skipped_unjudged = 0;
  std::size_t missing_from_run = 0;
};

struct MetricOptions {
  std::size_t n = 20;    // cutoff for ndcg and precision
  bool graded_ap = false;
};

// Means over judged queries that have at least one relevant document. A
// judged query that is missing from the run contributes 0 (its ranking is
// empty). Each list is first put in canonical order: descending score, ties
// by ascending doc id.
MetricResult evaluate(Metric metric, const RunList& run, const QRels& qrels,
                      const MetricOptions& options = {});

MetricResult ndcg(const RunList& run, const QRels& qrels, std::size_t n);
MetricResult mean_average_precision(const RunList& run, const QRels& qrels, bool graded = false);
MetricResult mrr(const RunList& run, const QRels& qrels);
MetricResult precision_at(const RunList& run, const QRels& qrels, std::size_t n);

// Orders entries by descending score with ties broken by ascending doc id.
void sort_run_entries(std::vector<RunEntry>& entries);

// qrels: "<query_id> <iteration> <doc_id> <relevance>" per line.
QRels parse_qrels(std::istream& in, const std::string& name = "qrels");
QRels load_qrels(const std::string& path);
void write_qrels(std::ostream& os, const QRels& qrels);

// run: "<query_id> Q0 <doc_id> <rank> <score> <tag>" per line. The reader is
// strict: exactly six fields, literal Q0, ranks contiguous from 1 within a
// query, no duplicate doc per query, finite scores that do not increase
// with rank.
RunList parse_run(std::istream& in, const std::string& name = "run");
RunList load_run(const std::string& path);
// Entries are written in canonical order (descending score, ties by doc id).
void write_run(std::ostream& os, const RunList& run, const std::string& tag);

}  // namespace dcgrank
