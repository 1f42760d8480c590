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
#include <functional>
#include <map>
#include <string>

#include "dcgrank/numkit.hpp"

namespace dcgrank {

// Evaluates a scalar loss at the current parameter values and adds its
// analytic gradient into the store's gradient buffers. Must be
// deterministic.
using Objective = std::function<double(ParamStore&)>;

struct GradCheckOptions {
  // Coordinates checked per parameter tensor; 0 checks all of them.
  // Sampled coordinates always include those with the largest analytic
  // gradient magnitude, then uniformly chosen others.
  std::size_t max_coords_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::map<std::string, double> per_param;  // name -> max relative error
  std::size_t coords_checked = 0;
};

// Central finite differences per coordinate. Relative error for one
// coordinate is |analytic - numeric| / max(1, |analytic|, |numeric|).
// Throws EvaluationError if any loss evaluation is non-finite.
GradCheckReport grad_check(const Objective& f, ParamStore& params, double eps,
                           const GradCheckOptions& options = {});

}  // namespace dcgrank
