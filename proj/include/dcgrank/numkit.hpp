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

// Dense row-major matrices, a named parameter store with gradient buffers,
// and a small reverse-mode tape covering exactly the operations the model
// needs. Vectors are 1 x n rows; a linear map is x * W with W stored in x out.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcgrank {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor2 row(std::initializer_list<double> values);
  static Tensor2 row(std::span<const double> values);
  static Tensor2 from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor2 identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row_span(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row_span(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::string shape() const;
  bool same_shape(const Tensor2& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;
  void fill(double v);
  Tensor2& operator+=(const Tensor2& other);

  friend bool operator==(const Tensor2& a, const Tensor2& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class Elementwise { relu, tanh, sigmoid, add, mul };

Tensor2 matmul(const Tensor2& a, const Tensor2& b);
// a^T * b and a * b^T, used by backward passes.
Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b);
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);
Tensor2 elementwise(Elementwise op, const Tensor2& a);
Tensor2 elementwise(Elementwise op, const Tensor2& a, const Tensor2& b);

// Numerically stable -log softmax(logits)[target] for a 1 x V row.
double softmax_xent(const Tensor2& logits, std::size_t target);
Tensor2 softmax(const Tensor2& logits);

struct Param {
  Tensor2 value;
  Tensor2 grad;
};

// Parameters keyed by name. Iteration and the flat view are ordered
// lexicographically by name, then row-major within each tensor.
class ParamStore {
 public:
  Tensor2& add(const std::string& name, Tensor2 value);
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  Tensor2& value(const std::string& name);
  const Tensor2& value(const std::string& name) const;
  Tensor2& grad(const std::string& name);
  const Tensor2& grad(const std::string& name) const;

  std::vector<std::string> names() const;
  std::size_t flat_size() const;
  std::vector<double> flat_values() const;
  std::vector<double> flat_grads() const;
  void assign_flat(std::span<const double> values);

  void zero_grad();
  bool grads_finite() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t count() const { return params_.size(); }

  // Values only; gradients are not compared.
  friend bool operator==(const ParamStore& a, const ParamStore& b);

 private:
  Param& entry(const std::string& name);
  const Param& entry(const std::string& name) const;
  std::map<std::string, Param> params_;
};

// Binary archive of named tensors plus string metadata.
//
//   magic    "DCGRTA01"                      8 bytes
//   n_meta   u64, then n_meta x (key, value) length-prefixed strings
//   n_tensor u64, then n_tensor records:
//            name (u64 length + bytes), rows u64, cols u64, rows*cols f64
//
// Integers and doubles are little-endian; doubles are stored as their raw
// IEEE-754 bit patterns so a save/load round trip is bit-exact. Tensor
// records appear in lexicographic name order.
struct TensorArchive {
  std::map<std::string, std::string> metadata;
  std::map<std::string, Tensor2> tensors;

  void save(const std::string& path) const;
  static TensorArchive load(const std::string& path);
};

void save_params(const ParamStore& params, TensorArchive& archive,
                 const std::string& prefix = "");
void load_params(ParamStore& params, const TensorArchive& archive,
                 const std::string& prefix = "");

}  // namespace dcgrank
