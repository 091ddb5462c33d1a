// Copyright 2026 The RefPrompt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "refprompt/graph.hpp"

#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "refprompt/params.hpp"
#include "refprompt/rng.hpp"

namespace nn = refprompt::nn;
using refprompt::Rng;

namespace {

// Central-difference gradient check: builds the scalar expression twice per
// perturbed entry and compares against the tape's accumulated parameter
// gradients. `build` must construct the full expression from graph inputs.
void check_gradients(
    nn::ParameterStore& store,
    const std::function<nn::Tensor(nn::Graph&)>& build,
    double rel_tol = 1e-6, double abs_floor = 1e-8) {
  std::vector<double> analytic;
  {
    nn::Graph g;
    store.zero_grads();
    nn::Tensor root = build(g);
    REQUIRE(root.shape().rows == 1);
    REQUIRE(root.shape().cols == 1);
    g.backward(root);
    for (const nn::Parameter* p : store.all()) {
      if (!p->trainable) continue;
      for (double gk : p->grad) analytic.push_back(gk);
    }
  }
  const double h = 1e-6;
  std::size_t cursor = 0;
  for (nn::Parameter* p : store.all()) {
    if (!p->trainable) continue;
    for (std::size_t k = 0; k < p->value.size(); ++k, ++cursor) {
      const double saved = p->value[k];
      p->value[k] = saved + h;
      nn::Graph gp;
      const double fp = build(gp).value(0, 0);
      p->value[k] = saved - h;
      nn::Graph gm;
      const double fm = build(gm).value(0, 0);
      p->value[k] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double got = analytic[cursor];
      const double denom =
          std::max({std::abs(numeric), std::abs(got), abs_floor});
      INFO("param ", p->name, " entry ", k, ": analytic ", got, " numeric ",
           numeric);
      CHECK(std::abs(numeric - got) / denom < rel_tol);
    }
  }
  CHECK(cursor == analytic.size());
}

nn::Parameter& seeded(nn::ParameterStore& store, const std::string& name,
                      int rows, int cols, std::uint64_t seed,
                      double lo = -1.0, double hi = 1.0) {
  nn::Parameter& p = store.create(name, {rows, cols}, /*trainable=*/true);
  Rng rng(Rng::derive(seed, name));
  for (double& v : p.value) v = rng.uniform(lo, hi);
  return p;
}

}  // namespace

TEST_CASE("matmul forward and gradient") {
  nn::ParameterStore store;
  seeded(store, "a", 3, 4, 1);
  seeded(store, "b", 4, 2, 2);
  check_gradients(store, [&](nn::Graph& g) {
    return g.sum(g.matmul(g.input(store.at("a")), g.input(store.at("b"))));
  }, 1e-5);
}

TEST_CASE("matmul values match a hand example") {
  nn::Graph g;
  const nn::Tensor a = g.constant({2, 2}, std::vector<double>{1, 2, 3, 4});
  const nn::Tensor b = g.constant({2, 2}, std::vector<double>{5, 6, 7, 8});
  const nn::Tensor c = g.matmul(a, b);
  CHECK(c.value(0, 0) == doctest::Approx(19).epsilon(1e-12));
  CHECK(c.value(0, 1) == doctest::Approx(22).epsilon(1e-12));
  CHECK(c.value(1, 0) == doctest::Approx(43).epsilon(1e-12));
  CHECK(c.value(1, 1) == doctest::Approx(50).epsilon(1e-12));
}

TEST_CASE("elementwise binary op gradients") {
  nn::ParameterStore store;
  seeded(store, "x", 2, 3, 3, 0.2, 1.5);
  seeded(store, "y", 2, 3, 4, 0.2, 1.5);
  auto x = [&](nn::Graph& g) { return g.input(store.at("x")); };
  auto y = [&](nn::Graph& g) { return g.input(store.at("y")); };
  check_gradients(store,
                  [&](nn::Graph& g) { return g.sum(g.add(x(g), y(g))); });
  check_gradients(store,
                  [&](nn::Graph& g) { return g.sum(g.sub(x(g), y(g))); });
  check_gradients(store,
                  [&](nn::Graph& g) { return g.sum(g.mul(x(g), y(g))); },
                  1e-5);
  check_gradients(store,
                  [&](nn::Graph& g) { return g.sum(g.div(x(g), y(g))); },
                  1e-5);
}

TEST_CASE("min and max tie subgradients go to the first argument") {
  nn::ParameterStore store;
  nn::Parameter& x = store.create("x", {1, 1}, true);
  nn::Parameter& y = store.create("y", {1, 1}, true);
  x.value[0] = 0.7;
  y.value[0] = 0.7;

  nn::Graph g;
  nn::Tensor out = g.sum(g.maximum(g.input(x), g.input(y)));
  store.zero_grads();
  g.backward(out);
  CHECK(x.grad[0] == 1.0);
  CHECK(y.grad[0] == 0.0);

  nn::Graph g2;
  out = g2.sum(g2.minimum(g2.input(x), g2.input(y)));
  store.zero_grads();
  g2.backward(out);
  CHECK(x.grad[0] == 1.0);
  CHECK(y.grad[0] == 0.0);
}

TEST_CASE("unary op gradients") {
  nn::ParameterStore store;
  seeded(store, "x", 2, 4, 5, -2.0, 2.0);
  auto x = [&](nn::Graph& g) { return g.input(store.at("x")); };
  check_gradients(store,
                  [&](nn::Graph& g) { return g.sum(g.relu(x(g))); }, 1e-5);
  check_gradients(store,
                  [&](nn::Graph& g) { return g.sum(g.sigmoid(x(g))); }, 1e-5);
  check_gradients(store,
                  [&](nn::Graph& g) { return g.sum(g.abs(x(g))); }, 1e-5);
  check_gradients(store,
                  [&](nn::Graph& g) { return g.sum(g.sin(x(g))); }, 1e-5);
  check_gradients(store,
                  [&](nn::Graph& g) { return g.sum(g.cos(x(g))); }, 1e-5);
  check_gradients(store, [&](nn::Graph& g) {
    return g.sum(g.scale(g.add_scalar(x(g), 0.3), -1.7));
  }, 1e-5);
}

TEST_CASE("abs subgradient is 0 at 0 and relu subgradient is 0 at 0") {
  nn::ParameterStore store;
  nn::Parameter& x = store.create("x", {1, 2}, true);
  x.value = {0.0, 0.0};
  nn::Graph g;
  nn::Tensor root = g.sum(g.add(g.abs(g.input(x)), g.relu(g.input(x))));
  store.zero_grads();
  g.backward(root);
  CHECK(x.grad[0] == 0.0);
  CHECK(x.grad[1] == 0.0);
}

TEST_CASE("transpose, slice, concat, gather gradients") {
  nn::ParameterStore store;
  seeded(store, "x", 3, 5, 6);
  auto x = [&](nn::Graph& g) { return g.input(store.at("x")); };
  check_gradients(store,
                  [&](nn::Graph& g) { return g.sum(g.transpose(x(g))); });
  check_gradients(store, [&](nn::Graph& g) {
    return g.sum(g.slice_cols(x(g), 1, 4));
  });
  check_gradients(store, [&](nn::Graph& g) {
    const nn::Tensor a = g.slice_cols(x(g), 0, 2);
    const nn::Tensor b = g.slice_cols(x(g), 2, 5);
    const std::vector<nn::Tensor> parts = {b, a};
    return g.sum(g.concat_cols(parts));
  });
  check_gradients(store, [&](nn::Graph& g) {
    return g.sum(g.gather_rows(x(g), {2, 0, 2}));
  });
}

TEST_CASE("add_row broadcast gradient") {
  nn::ParameterStore store;
  seeded(store, "m", 4, 3, 7);
  seeded(store, "r", 1, 3, 8);
  check_gradients(store, [&](nn::Graph& g) {
    return g.sum(g.add_row(g.input(store.at("m")), g.input(store.at("r"))));
  });
}

TEST_CASE("reductions gradients") {
  nn::ParameterStore store;
  seeded(store, "x", 2, 6, 9, 0.1, 1.0);
  auto x = [&](nn::Graph& g) { return g.input(store.at("x")); };
  check_gradients(store, [&](nn::Graph& g) { return g.sum(x(g)); });
  check_gradients(store, [&](nn::Graph& g) { return g.mean(x(g)); });
}

TEST_CASE("l2_norm gradient on a row vector") {
  nn::ParameterStore store;
  seeded(store, "v", 1, 6, 9, 0.1, 1.0);
  check_gradients(store,
                  [&](nn::Graph& g) { return g.l2_norm(g.input(store.at("v"))); },
                  1e-5);
}

TEST_CASE("l2_norm gradient at the zero vector is zero") {
  nn::ParameterStore store;
  nn::Parameter& x = store.create("x", {1, 3}, true);
  x.value = {0.0, 0.0, 0.0};
  nn::Graph g;
  nn::Tensor root = g.l2_norm(g.input(x));
  store.zero_grads();
  g.backward(root);
  for (double gk : x.grad) CHECK(gk == 0.0);
}

TEST_CASE("softmax_rows gradient without mask") {
  nn::ParameterStore store;
  seeded(store, "x", 3, 4, 10, -2.0, 2.0);
  check_gradients(store, [&](nn::Graph& g) {
    const nn::Tensor y = g.softmax_rows(g.input(store.at("x")));
    const nn::Tensor w = g.constant(
        {3, 4}, std::vector<double>{1, -2, 3, 0.5, 2, 0, 1, -1, 0.3, 0.7, -0.2,
                                    1.1});
    return g.sum(g.mul(y, w));
  }, 1e-5);
}

TEST_CASE("softmax_rows with keep mask zeroes masked columns") {
  nn::ParameterStore store;
  seeded(store, "x", 2, 4, 11, -1.0, 1.0);
  const std::vector<std::uint8_t> keep = {1, 0, 1, 1};
  {
    nn::Graph g;
    const nn::Tensor y = g.softmax_rows(g.input(store.at("x")), &keep);
    for (int r = 0; r < 2; ++r) {
      CHECK(y.value(r, 1) == 0.0);
      double row = 0.0;
      for (int c = 0; c < 4; ++c) row += y.value(r, c);
      CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  check_gradients(store, [&](nn::Graph& g) {
    const nn::Tensor y = g.softmax_rows(g.input(store.at("x")), &keep);
    const nn::Tensor w =
        g.constant({2, 4}, std::vector<double>{1, 9, -1, 0.5, 2, 9, 0.3, -2});
    return g.sum(g.mul(y, w));
  }, 1e-5);
}

TEST_CASE("softmax_rows throws when every column is masked") {
  nn::Graph g;
  const nn::Tensor x = g.constant({1, 2}, std::vector<double>{1.0, 2.0});
  const std::vector<std::uint8_t> keep = {0, 0};
  CHECK_THROWS_AS((void)g.softmax_rows(x, &keep), std::invalid_argument);
}

TEST_CASE("layer_norm_rows forward properties and gradient") {
  nn::ParameterStore store;
  seeded(store, "x", 2, 6, 12, -3.0, 3.0);
  seeded(store, "gain", 1, 6, 13, 0.5, 1.5);
  seeded(store, "bias", 1, 6, 14, -0.5, 0.5);
  {
    nn::Graph g;
    nn::Parameter& gain = store.at("gain");
    nn::Parameter& bias = store.at("bias");
    const std::vector<double> saved_g = gain.value;
    const std::vector<double> saved_b = bias.value;
    std::fill(gain.value.begin(), gain.value.end(), 1.0);
    std::fill(bias.value.begin(), bias.value.end(), 0.0);
    const nn::Tensor y =
        g.layer_norm_rows(g.input(store.at("x")), g.input(gain),
                          g.input(bias));
    for (int r = 0; r < 2; ++r) {
      double mean = 0.0;
      double var = 0.0;
      for (int c = 0; c < 6; ++c) mean += y.value(r, c);
      mean /= 6.0;
      for (int c = 0; c < 6; ++c) {
        var += (y.value(r, c) - mean) * (y.value(r, c) - mean);
      }
      CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
      CHECK(var / 6.0 == doctest::Approx(1.0).epsilon(1e-4));
    }
    gain.value = saved_g;
    bias.value = saved_b;
  }
  check_gradients(store, [&](nn::Graph& g) {
    const nn::Tensor y =
        g.layer_norm_rows(g.input(store.at("x")), g.input(store.at("gain")),
                          g.input(store.at("bias")));
    const nn::Tensor w = g.constant(
        {2, 6}, std::vector<double>{1, -1, 2, 0.5, -0.3, 1.2, 0.2, 0.8, -1.5,
                                    0.9, 1.1, -0.4});
    return g.sum(g.mul(y, w));
  }, 1e-4);
}

TEST_CASE("bce_with_logits_mean value and gradient") {
  nn::ParameterStore store;
  seeded(store, "x", 4, 1, 15, -3.0, 3.0);
  {
    nn::Graph g;
    const nn::Tensor x = g.constant({2, 1}, std::vector<double>{0.0, 0.0});
    const nn::Tensor out = g.bce_with_logits_mean(x, {1.0, 0.0});
    CHECK(out.value(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  check_gradients(store, [&](nn::Graph& g) {
    return g.bce_with_logits_mean(g.input(store.at("x")),
                                  {1.0, 0.0, 1.0, 0.0});
  }, 1e-5);
}

TEST_CASE("bce_with_logits_mean is stable at extreme logits") {
  nn::Graph g;
  const nn::Tensor x =
      g.constant({2, 1}, std::vector<double>{5000.0, -5000.0});
  const nn::Tensor out = g.bce_with_logits_mean(x, {1.0, 0.0});
  CHECK(std::isfinite(out.value(0, 0)));
  CHECK(out.value(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("frozen tensors never accumulate gradients") {
  nn::ParameterStore store;
  nn::Parameter& w = store.create("w", {1, 2}, /*trainable=*/false);
  w.value = {2.0, 3.0};
  nn::Parameter& x = store.create("x", {1, 2}, /*trainable=*/true);
  x.value = {1.0, 1.0};
  nn::Graph g;
  const nn::Tensor root = g.sum(g.mul(g.frozen(w), g.input(x)));
  store.zero_grads();
  g.backward(root);
  CHECK(x.grad[0] == 2.0);
  CHECK(x.grad[1] == 3.0);
  for (double gk : w.grad) CHECK(gk == 0.0);
}

TEST_CASE("gradients accumulate across multiple uses of one input") {
  nn::ParameterStore store;
  nn::Parameter& x = store.create("x", {1, 1}, true);
  x.value = {3.0};
  nn::Graph g;
  const nn::Tensor t = g.input(x);
  const nn::Tensor root = g.sum(g.mul(t, t));  // d/dx x^2 = 2x
  store.zero_grads();
  g.backward(root);
  CHECK(x.grad[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("backward requires a scalar root") {
  nn::Graph g;
  const nn::Tensor x = g.constant({1, 2}, std::vector<double>{1.0, 2.0});
  CHECK_THROWS_AS(g.backward(x), std::logic_error);
}

TEST_CASE("a deep composite expression matches finite differences") {
  nn::ParameterStore store;
  seeded(store, "w1", 4, 6, 20, -0.5, 0.5);
  seeded(store, "w2", 6, 3, 21, -0.5, 0.5);
  seeded(store, "x", 2, 4, 22, -1.0, 1.0);
  seeded(store, "gain", 1, 6, 23, 0.8, 1.2);
  seeded(store, "bias", 1, 6, 24, -0.1, 0.1);
  check_gradients(store, [&](nn::Graph& g) {
    nn::Tensor h = g.matmul(g.input(store.at("x")), g.input(store.at("w1")));
    h = g.layer_norm_rows(h, g.input(store.at("gain")),
                          g.input(store.at("bias")));
    h = g.relu(h);
    h = g.softmax_rows(h);
    h = g.matmul(h, g.input(store.at("w2")));
    h = g.sigmoid(h);
    return g.mean(h);
  }, 1e-4);
}
