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

// Direct-from-definition metric oracles and a random instance generator,
// shared by the metric unit tests and the acceptance run.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "dcgrank/metrics.hpp"

namespace dcgrank::testing {

// Straight-from-the-definition versions over a list of grades.
inline long double oracle_dcg(const std::vector<int>& g, std::size_t n) {
  long double s = 0;
  for (std::size_t i = 0; i < g.size() && i < n; ++i) s += g[i] / std::log2(static_cast<long double>(i + 2));
  return s;
}

inline std::vector<int> grades(const std::vector<RunEntry>& run, const std::map<std::string, int>& j) {
  std::vector<int> g;
  for (const auto& e : run) g.push_back(j.count(e.doc) ? j.at(e.doc) : 0);
  return g;
}

inline double oracle_ndcg(const std::vector<RunEntry>& run, const std::map<std::string, int>& j, std::size_t n) {
  std::vector<int> ideal;
  for (const auto& [d, r] : j) ideal.push_back(r);
  std::sort(ideal.rbegin(), ideal.rend());
  const long double id = oracle_dcg(ideal, n);
  return id > 0 ? static_cast<double>(oracle_dcg(grades(run, j), n) / id) : 0.0;
}

inline double oracle_ap(const std::vector<RunEntry>& run, const std::map<std::string, int>& j) {
  long double total = 0;
  for (const auto& [d, r] : j) total += r > 0;
  if (total == 0) return 0;
  long double s = 0;
  auto g = grades(run, j);
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (g[k] <= 0) continue;
    long double hits = 0;
    for (std::size_t i = 0; i <= k; ++i) hits += g[i] > 0;
    s += hits / (k + 1);
  }
  return static_cast<double>(s / total);
}

inline double oracle_rr(const std::vector<RunEntry>& run, const std::map<std::string, int>& j) {
  auto g = grades(run, j);
  auto it = std::find_if(g.begin(), g.end(), [](int r) { return r > 0; });
  return it == g.end() ? 0.0 : 1.0 / static_cast<double>(it - g.begin() + 1);
}

struct Instance {
  std::vector<RunEntry> run;
  std::map<std::string, int> judgments;
};

inline Instance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(0, 30), grade(0, 3), coin(0, 2);
  Instance in;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) {
    const std::string d = "doc" + std::to_string(1000 + i);
    in.run.push_back({d, static_cast<double>(n - i)});
    if (coin(rng)) in.judgments[d] = grade(rng);
  }
  for (int i = 0; i < coin(rng) * 3; ++i) in.judgments["extra" + std::to_string(i)] = grade(rng);
  std::shuffle(in.run.begin(), in.run.end(), rng);
  for (std::size_t i = 0; i < in.run.size(); ++i) in.run[i].score = static_cast<double>(in.run.size() - i);
  return in;
}

}  // namespace dcgrank::testing
