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

#include "dcgrank/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace dcgrank {

namespace {

double evaluate(const Objective& f, ParamStore& params) {
  params.zero_grad();
  const double loss = f(params);
  if (!std::isfinite(loss)) throw EvaluationError("grad_check: non-finite loss");
  return loss;
}

std::vector<std::size_t> pick_coords(const Tensor2& analytic, std::size_t limit,
                                     std::mt19937_64& rng) {
  std::vector<std::size_t> all(analytic.size());
  std::iota(all.begin(), all.end(), 0);
  if (limit == 0 || limit >= all.size()) return all;
  // Half the budget on the largest gradients, the rest uniformly.
  std::stable_sort(all.begin(), all.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(analytic[a]) > std::abs(analytic[b]);
  });
  const std::size_t top = limit / 2;
  std::vector<std::size_t> out(all.begin(), all.begin() + static_cast<long>(top));
  std::vector<std::size_t> rest(all.begin() + static_cast<long>(top), all.end());
  std::shuffle(rest.begin(), rest.end(), rng);
  out.insert(out.end(), rest.begin(), rest.begin() + static_cast<long>(limit - top));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

GradCheckReport grad_check(const Objective& f, ParamStore& params, double eps,
                           const GradCheckOptions& options) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");
  evaluate(f, params);
  std::map<std::string, Tensor2> analytic;
  for (const auto& [name, p] : params) analytic.emplace(name, p.grad);

  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  for (const auto& name : params.names()) {
    const Tensor2& a = analytic.at(name);
    double worst = 0.0;
    for (std::size_t i : pick_coords(a, options.max_coords_per_param, rng)) {
      double& x = params.value(name)[i];
      const double saved = x;
      x = saved + eps;
      const double up = evaluate(f, params);
      x = saved - eps;
      const double down = evaluate(f, params);
      x = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double denom = std::max({1.0, std::abs(a[i]), std::abs(numeric)});
      worst = std::max(worst, std::abs(a[i] - numeric) / denom);
      ++report.coords_checked;
    }
    report.per_param[name] = worst;
    report.max_rel_error = std::max(report.max_rel_error, worst);
  }
  // Leave the store holding the analytic gradient at the unperturbed point.
  evaluate(f, params);
  return report;
}

}  // namespace dcgrank
