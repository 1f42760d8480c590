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

// Hand-evaluated (run, qrels) cases. Expected values are spelled out as the
// arithmetic of the definitions so they can be checked by eye.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dcgrank/metrics.hpp"

namespace dcgrank::testing {

struct MetricCase {
  std::string name;
  std::vector<RunEntry> run;  // list order as given, not necessarily canonical
  std::map<std::string, int> judgments;
  bool in_run = true;         // false: the query is absent from the run
  std::size_t p_cutoff;
  double ndcg20, ap, rr, p_at;
  double graded_ap;
};

inline std::vector<RunEntry> ranked(std::initializer_list<const char*> docs) {
  std::vector<RunEntry> out;
  double s = 100.0;
  for (const char* d : docs) out.push_back({d, s--});
  return out;
}

inline std::vector<MetricCase> metric_cases() {
  const double l3 = std::log2(3.0), l5 = std::log2(5.0);
  std::vector<MetricCase> cs;

  // rels [1,0,1], ideal [1,1,0]
  cs.push_back({"binary_gap", ranked({"a", "b", "c"}), {{"a", 1}, {"b", 0}, {"c", 1}}, true, 2,
                (1 + 1 / 2.0) / (1 + 1 / l3), (1 / 1.0 + 2 / 3.0) / 2, 1.0, 0.5,
                (1 / 1.0 + 2 / 3.0) / 2});

  // rels [3,2,3], ideal [3,3,2]
  cs.push_back({"graded", ranked({"a", "b", "c"}), {{"a", 3}, {"b", 2}, {"c", 3}}, true, 3,
                (3 + 2 / l3 + 3 / 2.0) / (3 + 3 / l3 + 2 / 2.0), 1.0, 1.0, 1.0,
                (3 * 1.0 + 2 * 1.0 + 3 * 1.0) / 8});

  // single relevant at rank 4
  cs.push_back({"rank_four", ranked({"a", "b", "c", "d"}), {{"a", 0}, {"d", 1}}, true, 4,
                (1 / l5) / 1.0, 0.25, 0.25, 0.25, 0.25});

  // nothing relevant retrieved
  cs.push_back({"miss", ranked({"a", "b"}), {{"z", 1}}, true, 2, 0.0, 0.0, 0.0, 0.0, 0.0});

  // d1 and d2 tie; the tie rule puts d1 first, so the relevant d2 is rank 2
  cs.push_back({"tie", {{"d2", 0.5}, {"d1", 0.5}, {"d3", 0.1}}, {{"d2", 1}}, true, 1, 1 / l3, 0.5,
                0.5, 0.0, 0.5});

  // 25 docs, relevant at ranks 1 and 21; cutoff 20 drops the second
  {
    std::vector<RunEntry> run;
    for (int i = 1; i <= 25; ++i) run.push_back({"r" + std::to_string(100 + i), 50.0 - i});
    cs.push_back({"cutoff", run, {{"r101", 1}, {"r121", 1}}, true, 20, 1 / (1 + 1 / l3),
                  (1 + 2 / 21.0) / 2, 1.0, 1 / 20.0, (1 + 2 / 21.0) / 2});
  }

  // unjudged top doc, one relevant doc never retrieved
  cs.push_back({"unjudged", ranked({"x", "a", "b"}), {{"a", 2}, {"b", 1}, {"c", 2}}, true, 3,
                (2 / l3 + 1 / 2.0) / (2 + 2 / l3 + 1 / 2.0), (1 / 2.0 + 2 / 3.0) / 3, 0.5,
                2 / 3.0, (2 * (1 / 2.0) + 1 * (2 / 3.0)) / 5});

  // every relevant doc on top
  cs.push_back({"perfect", ranked({"a", "b", "c", "d"}), {{"a", 1}, {"b", 1}}, true, 2, 1.0, 1.0,
                1.0, 1.0, 1.0});

  // judged query missing from the run
  cs.push_back({"absent", {}, {{"a", 1}}, false, 5, 0.0, 0.0, 0.0, 0.0, 0.0});

  // 7 relevant in the top 10 (ranks 1,2,3,5,6,8,10) and one more unretrieved
  {
    auto run = ranked({"d00", "d01", "d02", "d03", "d04", "d05", "d06", "d07", "d08", "d09"});
    std::map<std::string, int> j{{"d00", 1}, {"d01", 1}, {"d02", 1}, {"d04", 1},
                                 {"d05", 1}, {"d07", 1}, {"d09", 1}, {"d99", 1}};
    double dcg = 0, idcg = 0;
    for (int r : {1, 2, 3, 5, 6, 8, 10}) dcg += 1 / std::log2(r + 1.0);
    for (int r = 1; r <= 8; ++r) idcg += 1 / std::log2(r + 1.0);
    const double ap = (1 / 1.0 + 2 / 2.0 + 3 / 3.0 + 4 / 5.0 + 5 / 6.0 + 6 / 8.0 + 7 / 10.0) / 8;
    cs.push_back({"seven_of_ten", run, j, true, 10, dcg / idcg, ap, 1.0, 0.7, ap});
  }
  return cs;
}

}  // namespace dcgrank::testing
