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

// Finite-difference checks for every tape operation on random small inputs.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "doctest.h"
#include "dcgrank/gradcheck.hpp"
#include "dcgrank/tape.hpp"
#include "support.hpp"

using namespace dcgrank;
using dcgrank::testing::random_tensor;

namespace {

using Build = std::function<Var(Tape&, const std::vector<Var>&)>;

// loss = sum(op(params) .* R) for a fixed random R.
double op_error(const std::vector<Tensor2>& inputs, const Build& build, std::uint64_t seed = 1) {
  ParamStore ps;
  for (std::size_t i = 0; i < inputs.size(); ++i) ps.add("p" + std::to_string(i), inputs[i]);
  Tensor2 weights;
  Objective f = [&](ParamStore& p) {
    Tape tape(&p);
    std::vector<Var> vars;
    for (std::size_t i = 0; i < inputs.size(); ++i) vars.push_back(tape.param("p" + std::to_string(i)));
    Var y = build(tape, vars);
    const auto& yv = tape.value(y);
    if (weights.empty()) {
      std::mt19937_64 rng(seed);
      weights = random_tensor(yv.rows(), yv.cols(), rng);
    }
    Var weighted = tape.mul(y, tape.constant(weights));
    Var left = tape.constant(Tensor2(1, yv.rows(), 1.0));
    Var right = tape.constant(Tensor2(yv.cols(), 1, 1.0));
    Var loss = tape.matmul(tape.matmul(left, weighted), right);
    tape.backward(loss);
    return tape.value(loss)[0];
  };
  return grad_check(f, ps, 1e-5).max_rel_error;
}

// Entries bounded away from zero so kinks are not straddled.
Tensor2 away_from_zero(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  auto t = random_tensor(r, c, rng, 0.2, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (auto& v : t.data())
    if (sign(rng)) v = -v;
  return t;
}

}  // namespace

TEST_CASE("per-op gradients match finite differences") {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 3; ++rep) {
    auto a23 = random_tensor(2, 3, rng);
    auto b23 = random_tensor(2, 3, rng);
    auto b34 = random_tensor(3, 4, rng);
    auto r14 = random_tensor(1, 4, rng);
    auto s14 = random_tensor(1, 4, rng);
    auto u14 = random_tensor(1, 4, rng);
    auto nz = away_from_zero(2, 3, rng);
    const double tol = 1e-4;

    CHECK(op_error({a23, b34}, [](Tape& t, const auto& v) { return t.matmul(v[0], v[1]); }) < tol);
    CHECK(op_error({a23, b23}, [](Tape& t, const auto& v) { return t.add(v[0], v[1]); }) < tol);
    CHECK(op_error({a23, b23}, [](Tape& t, const auto& v) { return t.sub(v[0], v[1]); }) < tol);
    CHECK(op_error({a23, b23}, [](Tape& t, const auto& v) { return t.mul(v[0], v[1]); }) < tol);
    CHECK(op_error({a23}, [](Tape& t, const auto& v) { return t.scale(v[0], -1.7); }) < tol);
    CHECK(op_error({nz}, [](Tape& t, const auto& v) { return t.relu(v[0]); }) < tol);
    CHECK(op_error({a23}, [](Tape& t, const auto& v) { return t.tanh(v[0]); }) < tol);
    CHECK(op_error({a23}, [](Tape& t, const auto& v) { return t.sigmoid(v[0]); }) < tol);
    CHECK(op_error({r14, s14}, [](Tape& t, const auto& v) { return t.concat({v[0], v[1]}); }) < tol);
    CHECK(op_error({r14}, [](Tape& t, const auto& v) { return t.slice(v[0], 1, 2); }) < tol);
    CHECK(op_error({r14, s14, u14}, [](Tape& t, const auto& v) {
            return t.sum(std::span<const Var>(v));
          }) < tol);
    CHECK(op_error({r14, s14, u14}, [](Tape& t, const auto& v) {
            return t.mean(std::span<const Var>(v));
          }) < tol);
    CHECK(op_error({r14, s14, u14}, [](Tape& t, const auto& v) {
            return t.max_pool(std::span<const Var>(v));
          }) < tol);
    CHECK(op_error({r14}, [](Tape& t, const auto& v) { return t.softmax_xent(v[0], 2); }) < tol);
    CHECK(op_error({r14}, [](Tape& t, const auto& v) { return t.norm_l2(v[0]); }) < tol);
    CHECK(op_error({nz}, [](Tape& t, const auto& v) { return t.norm_l1(v[0]); }) < tol);
    CHECK(op_error({nz}, [](Tape& t, const auto& v) { return t.hinge(v[0]); }) < tol);
    CHECK(op_error({a23}, [](Tape& t, const auto& v) {
            std::mt19937_64 drop(42);  // same mask on every evaluation
            return t.dropout(v[0], 0.4, drop);
          }) < tol);
    // lstm cell: x 1x3, h 1x2, c 1x2, W 5x8, b 1x8
    auto x = random_tensor(1, 3, rng), h = random_tensor(1, 2, rng), c = random_tensor(1, 2, rng);
    auto w = random_tensor(5, 8, rng), b = random_tensor(1, 8, rng);
    CHECK(op_error({x, h, c, w, b}, [](Tape& t, const auto& v) {
            return t.lstm_cell(v[0], v[1], v[2], v[3], v[4]);
          }) < tol);
  }
}

TEST_CASE("param_row gathers into its row only") {
  ParamStore ps;
  ps.add("E", Tensor2::from_rows({{1, 2}, {3, 4}, {5, 6}}));
  Tape tape(&ps);
  Var r = tape.param_row("E", 1);
  CHECK(tape.value(r) == Tensor2::row({3, 4}));
  Var again = tape.param_row("E", 1);
  Var loss = tape.matmul(tape.add(r, again), tape.constant(Tensor2::from_rows({{1}, {10}})));
  tape.backward(loss);
  CHECK(ps.grad("E") == Tensor2::from_rows({{0, 0}, {2, 20}, {0, 0}}));
  // accumulation is additive across tapes
  Tape second(&ps);
  Var r2 = second.param_row("E", 0);
  second.backward(second.matmul(r2, second.constant(Tensor2::from_rows({{1}, {1}}))));
  CHECK(ps.grad("E") == Tensor2::from_rows({{1, 1}, {2, 20}, {0, 0}}));
}

TEST_CASE("lstm cell forward matches the gate equations") {
  std::mt19937_64 rng(2);
  auto x = random_tensor(1, 2, rng), h = random_tensor(1, 2, rng), c = random_tensor(1, 2, rng);
  auto w = random_tensor(4, 8, rng), b = random_tensor(1, 8, rng);
  Tape tape;
  Var out = tape.lstm_cell(tape.constant(x), tape.constant(h), tape.constant(c), tape.constant(w),
                           tape.constant(b));
  const auto& o = tape.value(out);
  REQUIRE(o.cols() == 4);
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (std::size_t j = 0; j < 2; ++j) {
    double z[4];
    for (int g = 0; g < 4; ++g) {
      const std::size_t col = g * 2 + j;
      z[g] = b[col] + x[0] * w(0, col) + x[1] * w(1, col) + h[0] * w(2, col) + h[1] * w(3, col);
    }
    const double cn = sig(z[1]) * c[j] + sig(z[0]) * std::tanh(z[3]);
    const double hn = sig(z[2]) * std::tanh(cn);
    CHECK(o[j] == doctest::Approx(hn).epsilon(1e-12));
    CHECK(o[2 + j] == doctest::Approx(cn).epsilon(1e-12));
  }
}

TEST_CASE("dropout keeps expectation and zero rate is identity") {
  Tape tape;
  std::mt19937_64 rng(1);
  Var a = tape.constant(Tensor2(1, 20000, 1.0));
  Var d = tape.dropout(a, 0.5, rng);
  double s = 0.0;
  std::size_t zeros = 0;
  for (auto v : tape.value(d).data()) {
    s += v;
    if (v == 0.0) ++zeros;
    else CHECK(v == 2.0);
  }
  CHECK(s / 20000 == doctest::Approx(1.0).epsilon(0.03));
  CHECK(zeros > 9000);
  CHECK(zeros < 11000);
  Var same = tape.dropout(a, 0.0, rng);
  CHECK(tape.value(same) == tape.value(a));
}

TEST_CASE("ops reject mismatched shapes") {
  Tape tape;
  Var a = tape.constant(Tensor2(1, 2));
  Var b = tape.constant(Tensor2(1, 3));
  CHECK_THROWS_AS(tape.add(a, b), DimensionError);
  CHECK_THROWS_AS(tape.matmul(a, b), DimensionError);
  CHECK_THROWS(tape.slice(a, 1, 2));
  CHECK_THROWS(tape.backward(a));  // not a scalar
}

TEST_CASE("mean of equal inputs is exact") {
  for (std::size_t n = 1; n < 200; ++n) {
    Tape tape;
    std::vector<Var> parts(n, tape.constant(Tensor2::row({0.1, 1.0 / 3.0})));
    CHECK(tape.value(tape.mean(parts)) == Tensor2::row({0.1, 1.0 / 3.0}));
  }
}
