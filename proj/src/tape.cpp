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

#include "dcgrank/tape.hpp"

#include <algorithm>
#include <cmath>

namespace dcgrank {

namespace {

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

ParamStore& Tape::store() {
  if (params_ == nullptr) throw std::logic_error("Tape: no ParamStore bound");
  return *params_;
}

Var Tape::push(Tensor2 value, Backward backward) {
  nodes_.push_back(Node{std::move(value), Tensor2(), std::move(backward)});
  return Var{nodes_.size() - 1};
}

Tensor2& Tape::grad_buffer(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor2(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Tensor2& g) { grad_buffer(id) += g; }

Var Tape::constant(Tensor2 value) { return push(std::move(value)); }

Var Tape::param(const std::string& name) {
  if (auto it = param_nodes_.find(name); it != param_nodes_.end()) return Var{it->second};
  Var v = push(store().value(name));
  param_nodes_.emplace(name, v.id);
  leaves_.push_back(Leaf{v.id, name, -1});
  return v;
}

Var Tape::param_row(const std::string& name, std::size_t row) {
  const Tensor2& m = store().value(name);
  if (row >= m.rows()) {
    throw IndexError("param_row: row " + std::to_string(row) + " out of range for " + name +
                     " " + m.shape());
  }
  Var v = push(Tensor2::row(m.row_span(row)));
  leaves_.push_back(Leaf{v.id, name, static_cast<std::ptrdiff_t>(row)});
  return v;
}

void Tape::backward(Var loss) {
  if (value(loss).size() != 1) {
    throw DimensionError("backward: loss must be 1x1, got " + value(loss).shape());
  }
  grad_buffer(loss.id)[0] += 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(*this, n.grad);
  }
  if (params_ == nullptr) return;
  for (const auto& leaf : leaves_) {
    const Tensor2& g = nodes_[leaf.node].grad;
    if (g.empty()) continue;
    Tensor2& dst = params_->grad(leaf.name);
    if (leaf.row < 0) {
      dst += g;
    } else {
      auto row = dst.row_span(static_cast<std::size_t>(leaf.row));
      for (std::size_t j = 0; j < row.size(); ++j) row[j] += g[j];
    }
  }
}

Var Tape::matmul(Var a, Var b) {
  Tensor2 out = dcgrank::matmul(value(a), value(b));
  return push(std::move(out), [a, b](Tape& t, const Tensor2& g) {
    t.accumulate(a.id, matmul_nt(g, t.value(b)));
    t.accumulate(b.id, matmul_tn(t.value(a), g));
  });
}

Var Tape::add(Var a, Var b) {
  Tensor2 out = dcgrank::elementwise(Elementwise::add, value(a), value(b));
  return push(std::move(out), [a, b](Tape& t, const Tensor2& g) {
    t.accumulate(a.id, g);
    t.accumulate(b.id, g);
  });
}

Var Tape::sub(Var a, Var b) {
  const Tensor2& va = value(a);
  const Tensor2& vb = value(b);
  if (!va.same_shape(vb)) {
    throw DimensionError("sub: shape mismatch " + va.shape() + " vs " + vb.shape());
  }
  Tensor2 out(va.rows(), va.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] - vb[i];
  return push(std::move(out), [a, b](Tape& t, const Tensor2& g) {
    t.accumulate(a.id, g);
    Tensor2& gb = t.grad_buffer(b.id);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
  });
}

Var Tape::mul(Var a, Var b) {
  Tensor2 out = dcgrank::elementwise(Elementwise::mul, value(a), value(b));
  return push(std::move(out), [a, b](Tape& t, const Tensor2& g) {
    t.accumulate(a.id, dcgrank::elementwise(Elementwise::mul, g, t.value(b)));
    t.accumulate(b.id, dcgrank::elementwise(Elementwise::mul, g, t.value(a)));
  });
}

Var Tape::scale(Var a, double k) {
  Tensor2 out = value(a);
  for (auto& v : out.data()) v *= k;
  return push(std::move(out), [a, k](Tape& t, const Tensor2& g) {
    Tensor2& ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += k * g[i];
  });
}

Var Tape::relu(Var a) {
  Tensor2 out = dcgrank::elementwise(Elementwise::relu, value(a));
  return push(std::move(out), [a](Tape& t, const Tensor2& g) {
    const Tensor2& x = t.value(a);
    Tensor2& ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > 0.0) ga[i] += g[i];
    }
  });
}

Var Tape::tanh(Var a) {
  Tensor2 out = dcgrank::elementwise(Elementwise::tanh, value(a));
  const std::size_t self = nodes_.size();
  return push(std::move(out), [a, self](Tape& t, const Tensor2& g) {
    const Tensor2& y = t.nodes_[self].value;
    Tensor2& ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var Tape::sigmoid(Var a) {
  Tensor2 out = dcgrank::elementwise(Elementwise::sigmoid, value(a));
  const std::size_t self = nodes_.size();
  return push(std::move(out), [a, self](Tape& t, const Tensor2& g) {
    const Tensor2& y = t.nodes_[self].value;
    Tensor2& ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var Tape::elementwise(Elementwise op, Var a) {
  switch (op) {
    case Elementwise::relu:
      return relu(a);
    case Elementwise::tanh:
      return tanh(a);
    case Elementwise::sigmoid:
      return sigmoid(a);
    default:
      throw std::invalid_argument("elementwise: binary op used as unary");
  }
}

Var Tape::elementwise(Elementwise op, Var a, Var b) {
  switch (op) {
    case Elementwise::add:
      return add(a, b);
    case Elementwise::mul:
      return mul(a, b);
    default:
      throw std::invalid_argument("elementwise: unary op used as binary");
  }
}

Var Tape::concat(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const std::size_t rows = value(parts[0]).rows();
  std::size_t cols = 0;
  for (Var p : parts) {
    if (value(p).rows() != rows) {
      throw DimensionError("concat: row mismatch " + value(parts[0]).shape() + " vs " +
                           value(p).shape());
    }
    cols += value(p).cols();
  }
  Tensor2 out(rows, cols);
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor2& v = value(p);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < v.cols(); ++c) out(r, off + c) = v(r, c);
    }
    off += v.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push(std::move(out), [inputs](Tape& t, const Tensor2& g) {
    std::size_t off = 0;
    for (Var p : inputs) {
      Tensor2& gp = t.grad_buffer(p.id);
      for (std::size_t r = 0; r < gp.rows(); ++r) {
        for (std::size_t c = 0; c < gp.cols(); ++c) gp(r, c) += g(r, off + c);
      }
      off += gp.cols();
    }
  });
}

Var Tape::slice(Var a, std::size_t col_begin, std::size_t col_count) {
  const Tensor2& v = value(a);
  if (col_begin + col_count > v.cols()) {
    throw DimensionError("slice: columns [" + std::to_string(col_begin) + ", " +
                         std::to_string(col_begin + col_count) + ") out of " + v.shape());
  }
  Tensor2 out(v.rows(), col_count);
  for (std::size_t r = 0; r < v.rows(); ++r) {
    for (std::size_t c = 0; c < col_count; ++c) out(r, c) = v(r, col_begin + c);
  }
  return push(std::move(out), [a, col_begin](Tape& t, const Tensor2& g) {
    Tensor2& ga = t.grad_buffer(a.id);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < g.cols(); ++c) ga(r, col_begin + c) += g(r, c);
    }
  });
}

Var Tape::sum(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("sum: no inputs");
  Tensor2 out = value(parts[0]);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if (!value(parts[i]).same_shape(out)) {
      throw DimensionError("sum: shape mismatch " + out.shape() + " vs " +
                           value(parts[i]).shape());
    }
    out += value(parts[i]);
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push(std::move(out), [inputs](Tape& t, const Tensor2& g) {
    for (Var p : inputs) t.accumulate(p.id, g);
  });
}

// Shifted form x0 + sum(xi - x0) / n: returns the common value exactly
// when all inputs are equal.
Var Tape::mean(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("mean: no inputs");
  const Tensor2& first = value(parts[0]);
  Tensor2 dev(first.rows(), first.cols());
  for (std::size_t p = 1; p < parts.size(); ++p) {
    const Tensor2& v = value(parts[p]);
    if (!v.same_shape(first)) {
      throw DimensionError("mean: shape mismatch " + first.shape() + " vs " + v.shape());
    }
    for (std::size_t i = 0; i < v.size(); ++i) dev[i] += v[i] - first[i];
  }
  const double n = static_cast<double>(parts.size());
  Tensor2 out = first;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += dev[i] / n;
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push(std::move(out), [inputs, n](Tape& t, const Tensor2& g) {
    Tensor2 share = g;
    for (auto& v : share.data()) v /= n;
    for (Var p : inputs) t.accumulate(p.id, share);
  });
}

Var Tape::max_pool(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("max_pool: no inputs");
  const Tensor2& first = value(parts[0]);
  Tensor2 out = first;
  std::vector<std::size_t> argmax(first.size(), 0);
  for (std::size_t p = 1; p < parts.size(); ++p) {
    const Tensor2& v = value(parts[p]);
    if (!v.same_shape(first)) {
      throw DimensionError("max_pool: shape mismatch " + first.shape() + " vs " + v.shape());
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] > out[i]) {
        out[i] = v[i];
        argmax[i] = p;
      }
    }
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push(std::move(out), [inputs, argmax](Tape& t, const Tensor2& g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g[i] != 0.0) t.grad_buffer(inputs[argmax[i]].id)[i] += g[i];
    }
  });
}

Var Tape::softmax_xent(Var logits, std::size_t target) {
  const double loss = dcgrank::softmax_xent(value(logits), target);
  return push(Tensor2(1, 1, loss), [logits, target](Tape& t, const Tensor2& g) {
    Tensor2 p = dcgrank::softmax(t.value(logits));
    p[target] -= 1.0;
    Tensor2& gl = t.grad_buffer(logits.id);
    for (std::size_t i = 0; i < p.size(); ++i) gl[i] += g[0] * p[i];
  });
}

Var Tape::norm_l2(Var a) {
  const Tensor2& v = value(a);
  double s = 0.0;
  for (double x : v.data()) s += x * x;
  const double n = std::sqrt(s);
  return push(Tensor2(1, 1, n), [a, n](Tape& t, const Tensor2& g) {
    // Subgradient 0 at the origin.
    if (n == 0.0) return;
    const Tensor2& x = t.value(a);
    Tensor2& ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[0] * x[i] / n;
  });
}

Var Tape::norm_l1(Var a) {
  double s = 0.0;
  for (double x : value(a).data()) s += std::abs(x);
  return push(Tensor2(1, 1, s), [a](Tape& t, const Tensor2& g) {
    const Tensor2& x = t.value(a);
    Tensor2& ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] > 0.0) ga[i] += g[0];
      else if (x[i] < 0.0) ga[i] -= g[0];
    }
  });
}

Var Tape::hinge(Var a) { return relu(a); }

Var Tape::dropout(Var a, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return a;
  const Tensor2& v = value(a);
  Tensor2 mask(v.rows(), v.cols());
  std::bernoulli_distribution keep(1.0 - rate);
  const double k = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = keep(rng) ? k : 0.0;
  return mul(a, constant(std::move(mask)));
}

Var Tape::lstm_cell(Var x, Var h, Var c, Var w, Var b) {
  const Tensor2& vx = value(x);
  const Tensor2& vh = value(h);
  const Tensor2& vc = value(c);
  const Tensor2& vw = value(w);
  const Tensor2& vb = value(b);
  const std::size_t in = vx.cols();
  const std::size_t hd = vh.cols();
  if (vc.cols() != hd || vw.rows() != in + hd || vw.cols() != 4 * hd || vb.cols() != 4 * hd ||
      vx.rows() != 1 || vh.rows() != 1 || vc.rows() != 1 || vb.rows() != 1) {
    throw DimensionError("lstm_cell: incompatible shapes x" + vx.shape() + " h" + vh.shape() +
                         " c" + vc.shape() + " W" + vw.shape() + " b" + vb.shape());
  }

  Tensor2 xh(1, in + hd);
  std::copy(vx.data().begin(), vx.data().end(), xh.data().begin());
  std::copy(vh.data().begin(), vh.data().end(), xh.data().begin() + static_cast<long>(in));
  Tensor2 z = dcgrank::matmul(xh, vw);
  z += vb;

  // gates: [i | f | o | g] activated in place
  Tensor2 gates(1, 4 * hd);
  Tensor2 out(1, 2 * hd);
  std::vector<double> tanh_c(hd);
  for (std::size_t j = 0; j < hd; ++j) {
    const double gi = sigmoid_scalar(z[j]);
    const double gf = sigmoid_scalar(z[hd + j]);
    const double go = sigmoid_scalar(z[2 * hd + j]);
    const double gg = std::tanh(z[3 * hd + j]);
    gates[j] = gi;
    gates[hd + j] = gf;
    gates[2 * hd + j] = go;
    gates[3 * hd + j] = gg;
    const double cn = gf * vc[j] + gi * gg;
    tanh_c[j] = std::tanh(cn);
    out[j] = go * tanh_c[j];
    out[hd + j] = cn;
  }

  return push(std::move(out), [x, h, c, w, b, in, hd, gates = std::move(gates),
                               tanh_c = std::move(tanh_c),
                               xh = std::move(xh)](Tape& t, const Tensor2& g) {
    const Tensor2& vc = t.value(c);
    Tensor2 dz(1, 4 * hd);
    Tensor2 dc_prev(1, hd);
    for (std::size_t j = 0; j < hd; ++j) {
      const double gi = gates[j];
      const double gf = gates[hd + j];
      const double go = gates[2 * hd + j];
      const double gg = gates[3 * hd + j];
      const double dh = g[j];
      const double dc = g[hd + j] + dh * go * (1.0 - tanh_c[j] * tanh_c[j]);
      dz[j] = dc * gg * gi * (1.0 - gi);
      dz[hd + j] = dc * vc[j] * gf * (1.0 - gf);
      dz[2 * hd + j] = dh * tanh_c[j] * go * (1.0 - go);
      dz[3 * hd + j] = dc * gi * (1.0 - gg * gg);
      dc_prev[j] = dc * gf;
    }
    t.accumulate(w.id, matmul_tn(xh, dz));
    t.accumulate(b.id, dz);
    t.accumulate(c.id, dc_prev);
    Tensor2 dxh = matmul_nt(dz, t.value(w));
    Tensor2& gx = t.grad_buffer(x.id);
    for (std::size_t j = 0; j < in; ++j) gx[j] += dxh[j];
    Tensor2& gh = t.grad_buffer(h.id);
    for (std::size_t j = 0; j < hd; ++j) gh[j] += dxh[in + j];
  });
}

}  // namespace dcgrank
