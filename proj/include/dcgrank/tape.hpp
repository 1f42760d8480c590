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
#include <functional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dcgrank/numkit.hpp"

namespace dcgrank {

struct Var {
  std::size_t id = 0;
};

// Records a forward computation so that backward() can replay the local
// derivatives in reverse creation order. Every op has a hand-written
// backward; there is no general graph rewriting.
//
// Parameter leaves obtained through param()/param_row() deposit their
// gradients into the bound ParamStore when backward() finishes. Gradients
// are added, never overwritten.
class Tape {
 public:
  explicit Tape(ParamStore* params = nullptr) : params_(params) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor2 value);
  Var zeros(std::size_t rows, std::size_t cols) { return constant(Tensor2(rows, cols)); }
  Var param(const std::string& name);
  // Row `row` of a parameter matrix as a 1 x cols leaf (embedding lookup).
  Var param_row(const std::string& name, std::size_t row);

  const Tensor2& value(Var v) const { return nodes_[v.id].value; }
  const Tensor2& grad(Var v) const { return nodes_[v.id].grad; }
  std::size_t size() const { return nodes_.size(); }
  const ParamStore& params() const { return *params_; }

  // Seeds d(loss)/d(loss) = 1 for a 1 x 1 node and propagates.
  void backward(Var loss);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double k);
  Var relu(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var elementwise(Elementwise op, Var a);
  Var elementwise(Elementwise op, Var a, Var b);

  // Column-wise concatenation of 1-row (or equal-row) tensors.
  Var concat(std::span<const Var> parts);
  Var concat(std::initializer_list<Var> parts) {
    return concat(std::span<const Var>(parts.begin(), parts.size()));
  }
  Var slice(Var a, std::size_t col_begin, std::size_t col_count);
  Var sum(std::span<const Var> parts);
  Var mean(std::span<const Var> parts);
  // Elementwise maximum across equally shaped inputs; ties go to the
  // earliest input.
  Var max_pool(std::span<const Var> parts);

  Var softmax_xent(Var logits, std::size_t target);
  Var norm_l2(Var a);
  Var norm_l1(Var a);
  Var hinge(Var a);  // max(0, a)

  // Inverted dropout: kept entries are scaled by 1 / (1 - rate).
  Var dropout(Var a, double rate, std::mt19937_64& rng);

  // One LSTM step. W is (in + H) x 4H with gate blocks ordered
  // [input, forget, output, candidate]; b is 1 x 4H. Returns the 1 x 2H row
  // [h', c'].
  Var lstm_cell(Var x, Var h, Var c, Var w, Var b);

 private:
  using Backward = std::function<void(Tape&, const Tensor2&)>;
  struct Node {
    Tensor2 value;
    Tensor2 grad;
    Backward backward;
  };
  struct Leaf {
    std::size_t node;
    std::string name;
    std::ptrdiff_t row;  // -1: whole tensor
  };

  Var push(Tensor2 value, Backward backward = nullptr);
  void accumulate(std::size_t id, const Tensor2& g);
  Tensor2& grad_buffer(std::size_t id);
  ParamStore& store();

  ParamStore* params_;
  std::vector<Node> nodes_;
  std::vector<Leaf> leaves_;
  std::unordered_map<std::string, std::size_t> param_nodes_;
};

}  // namespace dcgrank
