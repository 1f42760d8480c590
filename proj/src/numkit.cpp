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

#include "dcgrank/numkit.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dcgrank {

namespace {

void require_same_shape(const Tensor2& a, const Tensor2& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": shape mismatch " + a.shape() + " vs " +
                         b.shape());
  }
}

double apply_unary(Elementwise op, double x) {
  switch (op) {
    case Elementwise::relu:
      return x > 0.0 ? x : 0.0;
    case Elementwise::tanh:
      return std::tanh(x);
    case Elementwise::sigmoid:
      // Split on sign so exp() never overflows.
      if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
      {
        const double e = std::exp(x);
        return e / (1.0 + e);
      }
    default:
      throw std::invalid_argument("elementwise: binary op used as unary");
  }
}

}  // namespace

Tensor2::Tensor2(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("Tensor2: data length " + std::to_string(data_.size()) +
                         " does not match " + shape());
  }
}

Tensor2 Tensor2::row(std::initializer_list<double> values) {
  return Tensor2(1, values.size(), std::vector<double>(values));
}

Tensor2 Tensor2::row(std::span<const double> values) {
  return Tensor2(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Tensor2 Tensor2::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("Tensor2::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor2(r, c, std::move(data));
}

Tensor2 Tensor2::identity(std::size_t n) {
  Tensor2 t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

std::string Tensor2::shape() const {
  return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

bool Tensor2::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor2::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor2& Tensor2::operator+=(const Tensor2& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: shape mismatch " + a.shape() + " x " + b.shape());
  }
  Tensor2 out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row_span(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto b_row = b.row_span(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn: shape mismatch " + a.shape() + "^T x " + b.shape());
  }
  Tensor2 out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto b_row = b.row_span(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      auto out_row = out.row_span(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aki * b_row[j];
    }
  }
  return out;
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: shape mismatch " + a.shape() + " x " + b.shape() + "^T");
  }
  Tensor2 out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto a_row = a.row_span(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto b_row = b.row_span(j);
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a_row[k] * b_row[k];
      out(i, j) = s;
    }
  }
  return out;
}

Tensor2 elementwise(Elementwise op, const Tensor2& a) {
  Tensor2 out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply_unary(op, a[i]);
  return out;
}

Tensor2 elementwise(Elementwise op, const Tensor2& a, const Tensor2& b) {
  require_same_shape(a, b, "elementwise");
  Tensor2 out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) {
    switch (op) {
      case Elementwise::add:
        out[i] = a[i] + b[i];
        break;
      case Elementwise::mul:
        out[i] = a[i] * b[i];
        break;
      default:
        throw std::invalid_argument("elementwise: unary op used as binary");
    }
  }
  return out;
}

double softmax_xent(const Tensor2& logits, std::size_t target) {
  if (logits.rows() != 1 || logits.cols() == 0) {
    throw DimensionError("softmax_xent: expected 1xV logits, got " + logits.shape());
  }
  if (target >= logits.cols()) {
    throw IndexError("softmax_xent: target " + std::to_string(target) +
                     " out of range for V=" + std::to_string(logits.cols()));
  }
  const auto z = logits.data();
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return -(z[target] - m - std::log(s));
}

Tensor2 softmax(const Tensor2& logits) {
  Tensor2 out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto z = logits.row_span(r);
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      out(r, j) = std::exp(z[j] - m);
      s += out(r, j);
    }
    for (std::size_t j = 0; j < z.size(); ++j) out(r, j) /= s;
  }
  return out;
}

// ---------------------------------------------------------------------------
// ParamStore

Tensor2& ParamStore::add(const std::string& name, Tensor2 value) {
  if (contains(name)) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
  Tensor2 grad(value.rows(), value.cols());
  auto& p = params_[name];
  p.value = std::move(value);
  p.grad = std::move(grad);
  return p.value;
}

Param& ParamStore::entry(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw IndexError("ParamStore: unknown parameter " + name);
  return it->second;
}

const Param& ParamStore::entry(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw IndexError("ParamStore: unknown parameter " + name);
  return it->second;
}

Tensor2& ParamStore::value(const std::string& name) { return entry(name).value; }
const Tensor2& ParamStore::value(const std::string& name) const { return entry(name).value; }
Tensor2& ParamStore::grad(const std::string& name) { return entry(name).grad; }
const Tensor2& ParamStore::grad(const std::string& name) const { return entry(name).grad; }

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, _] : params_) out.push_back(name);
  return out;
}

std::size_t ParamStore::flat_size() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

std::vector<double> ParamStore::flat_values() const {
  std::vector<double> out;
  out.reserve(flat_size());
  for (const auto& [_, p] : params_) out.insert(out.end(), p.value.data().begin(), p.value.data().end());
  return out;
}

std::vector<double> ParamStore::flat_grads() const {
  std::vector<double> out;
  out.reserve(flat_size());
  for (const auto& [_, p] : params_) out.insert(out.end(), p.grad.data().begin(), p.grad.data().end());
  return out;
}

void ParamStore::assign_flat(std::span<const double> values) {
  if (values.size() != flat_size()) {
    throw DimensionError("ParamStore::assign_flat: got " + std::to_string(values.size()) +
                         " values for " + std::to_string(flat_size()) + " coordinates");
  }
  std::size_t off = 0;
  for (auto& [_, p] : params_) {
    auto dst = p.value.data();
    std::copy(values.begin() + off, values.begin() + off + dst.size(), dst.begin());
    off += dst.size();
  }
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) p.grad.fill(0.0);
}

bool ParamStore::grads_finite() const {
  return std::all_of(params_.begin(), params_.end(),
                     [](const auto& kv) { return kv.second.grad.all_finite(); });
}

bool operator==(const ParamStore& a, const ParamStore& b) {
  if (a.params_.size() != b.params_.size()) return false;
  auto ia = a.params_.begin();
  auto ib = b.params_.begin();
  for (; ia != a.params_.end(); ++ia, ++ib) {
    if (ia->first != ib->first || !(ia->second.value == ib->second.value)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// TensorArchive

namespace {

constexpr char kMagic[8] = {'D', 'C', 'G', 'R', 'T', 'A', '0', '1'};

static_assert(std::endian::native == std::endian::little,
              "TensorArchive assumes a little-endian host");

void put_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_str(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint64_t get_u64(std::istream& is, const std::string& path) {
  std::uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw FormatError(path + ": truncated archive");
  }
  return v;
}

std::string get_str(std::istream& is, const std::string& path) {
  const auto n = get_u64(is, path);
  if (n > (1ull << 32)) throw FormatError(path + ": implausible string length");
  std::string s(n, '\0');
  if (!is.read(s.data(), static_cast<std::streamsize>(n))) {
    throw FormatError(path + ": truncated archive");
  }
  return s;
}

}  // namespace

void TensorArchive::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.write(kMagic, sizeof kMagic);
  put_u64(os, metadata.size());
  for (const auto& [k, v] : metadata) {
    put_str(os, k);
    put_str(os, v);
  }
  put_u64(os, tensors.size());
  for (const auto& [name, t] : tensors) {
    put_str(os, name);
    put_u64(os, t.rows());
    put_u64(os, t.cols());
    os.write(reinterpret_cast<const char*>(t.data().data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

TensorArchive TensorArchive::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  char magic[sizeof kMagic];
  if (!is.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, kMagic)) {
    throw FormatError(path + ": not a tensor archive");
  }
  TensorArchive ar;
  const auto n_meta = get_u64(is, path);
  for (std::uint64_t i = 0; i < n_meta; ++i) {
    auto k = get_str(is, path);
    ar.metadata[k] = get_str(is, path);
  }
  const auto n_tensor = get_u64(is, path);
  for (std::uint64_t i = 0; i < n_tensor; ++i) {
    auto name = get_str(is, path);
    const auto rows = get_u64(is, path);
    const auto cols = get_u64(is, path);
    if (rows * cols > (1ull << 34)) throw FormatError(path + ": implausible tensor size");
    std::vector<double> data(rows * cols);
    if (!is.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(data.size() * sizeof(double)))) {
      throw FormatError(path + ": truncated tensor " + name);
    }
    ar.tensors.emplace(std::move(name), Tensor2(rows, cols, std::move(data)));
  }
  return ar;
}

void save_params(const ParamStore& params, TensorArchive& archive, const std::string& prefix) {
  for (const auto& [name, p] : params) archive.tensors[prefix + name] = p.value;
}

void load_params(ParamStore& params, const TensorArchive& archive, const std::string& prefix) {
  for (auto& [name, p] : params) {
    auto it = archive.tensors.find(prefix + name);
    if (it == archive.tensors.end()) throw FormatError("archive lacks parameter " + prefix + name);
    if (!it->second.same_shape(p.value)) {
      throw DimensionError("archive parameter " + name + " has shape " + it->second.shape() +
                           ", expected " + p.value.shape());
    }
    p.value = it->second;
  }
}

}  // namespace dcgrank
