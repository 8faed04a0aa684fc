// Copyright 2026 The fedpad-sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <string>

#include "doctest.h"
#include "fedpad/autodiff.hpp"
#include "fedpad/error.hpp"
#include "fedpad/nn.hpp"
#include "gradient_cases.hpp"
#include "support.hpp"

using namespace fedpad;

namespace {

double eval(ad::Graph& g, ad::NodeId n) { return g.value(n)[0]; }

double cls(std::initializer_list<double> p, std::initializer_list<double> y) {
  ad::Graph g;
  return eval(g, ad::loss_cls(g, g.constant(Tensor::vector(p)), g.constant(Tensor::vector(y))));
}

double diff(const Tensor& zi, const Tensor& zs) {
  ad::Graph g;
  return eval(g, ad::loss_diff(g, g.constant(zi), g.constant(zs)));
}

}  // namespace

TEST_CASE("loss_cls examples") {
  CHECK(cls({0.5}, {1}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(cls({1 - ad::kProbEpsilon}, {1}) == doctest::Approx(0).epsilon(1e-6));
  CHECK(cls({0.8}, {0}) == doctest::Approx(-std::log(0.2)).epsilon(1e-12));
  CHECK(cls({0.0}, {0}) >= 0.0);
  CHECK(std::isfinite(cls({0.0}, {1})));
  CHECK_THROWS_AS(cls({0.5}, {2}), LabelError);
  CHECK_THROWS_AS(cls({0.5, 0.5}, {1}), DimensionError);
}

TEST_CASE("loss_depth examples") {
  ad::Graph g;
  const Tensor t = Tensor::matrix({{0.2, 0.4}});
  CHECK(eval(g, ad::loss_depth(g, g.constant(t), g.constant(t))) == 0.0);
  CHECK(eval(g, ad::loss_depth(g, g.constant(Tensor::matrix({{1, 1}})),
                               g.constant(Tensor::matrix({{0, 0}})))) == 2.0);
  // Spoof rows have an all-zero target: the loss is ||pred||^2 / batch.
  const Tensor pred = Tensor::matrix({{1, 2}, {3, 0}});
  CHECK(eval(g, ad::loss_depth(g, g.constant(pred), g.constant(Tensor({2, 2})))) ==
        doctest::Approx(frobenius_sq(pred) / 2));
  CHECK_THROWS_AS(ad::loss_depth(g, g.constant(Tensor({1, 2})), g.constant(Tensor({1, 3}))),
                  DimensionError);
}

TEST_CASE("loss_rec examples") {
  ad::Graph g;
  Rng rng(1, 1);
  const Tensor x = draw(rng, Uniform{0, 1}, {3, 2, 2, 6});
  CHECK(eval(g, ad::loss_rec(g, g.constant(x), g.constant(x))) == 0.0);
  Tensor shifted = x;
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += 1.0;
  CHECK(eval(g, ad::loss_rec(g, g.constant(shifted), g.constant(x))) ==
        doctest::Approx(24.0).epsilon(1e-12));
  CHECK(eval(g, ad::loss_rec(g, g.constant(Tensor({2, 3})), g.constant(Tensor({2, 3})))) == 0.0);
}

TEST_CASE("loss_diff examples") {
  CHECK(diff(Tensor::matrix({{1, 0}}), Tensor::matrix({{0, 1}})) == 1.0);
  CHECK(diff(Tensor::matrix({{1, 0}}), Tensor({1, 2})) == 0.0);
  CHECK(diff(Tensor::matrix({{1, 0}}), Tensor::matrix({{2, 0}})) == 4.0);
  CHECK_THROWS_AS(diff(Tensor({2, 3}), Tensor({3, 3})), DimensionError);
}

TEST_CASE("loss_diff is invariant to a shared row permutation and nonnegative") {
  Rng rng(21, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t b = 2 + rng.below(6);
    const Tensor zi = draw(rng, Normal{0, 1}, {b, 4});
    const Tensor zs = draw(rng, Normal{0, 1}, {b, 3});
    const auto perm = rng.permutation(b);
    Tensor pi({b, 4}), ps({b, 3});
    for (std::size_t r = 0; r < b; ++r) {
      for (std::size_t c = 0; c < 4; ++c) pi[r * 4 + c] = zi[perm[r] * 4 + c];
      for (std::size_t c = 0; c < 3; ++c) ps[r * 3 + c] = zs[perm[r] * 3 + c];
    }
    const double base = diff(zi, zs);
    CHECK(base >= 0.0);
    CHECK(diff(pi, ps) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("loss_diff vanishes on column-orthogonal features") {
  // Zi lives on samples 0-1, Zs on samples 2-3: every column pair is orthogonal.
  const Tensor zi = Tensor::matrix({{1.5, -2}, {0.3, 4}, {0, 0}, {0, 0}});
  const Tensor zs = Tensor::matrix({{0, 0, 0}, {0, 0, 0}, {2, 1, -1}, {7, 0, 3}});
  CHECK(diff(zi, zs) <= 1e-12);
  // Orthogonal directions within each sample are not enough.
  CHECK(diff(Tensor::matrix({{1, 0}, {1, 0}}), Tensor::matrix({{0, 1}, {0, 1}})) > 0.0);
}

TEST_CASE("backward examples") {
  ad::Graph g;
  ParameterSet ps;
  ps.add("w", Tensor::vector({3}));
  const auto w = g.parameter("w", ps.get("w"));
  g.backward(ad::frobenius_sq(g, w));
  CHECK(g.grad(w) == Tensor::vector({6}));

  ad::Graph g2;
  ps.add("unused", Tensor::vector({1, 2}));
  const auto w2 = g2.parameter("w", ps.get("w"));
  g2.parameter("unused", ps.get("unused"));
  g2.backward(ad::square(g2, w2));
  const ParameterSet grads = g2.parameter_grads(ps);
  CHECK(grads.get("unused") == Tensor({2}));
  CHECK(grads.get("w") == Tensor::vector({6}));
}

TEST_CASE("backward rejects non-scalar targets") {
  ad::Graph g;
  const auto x = g.parameter("x", Tensor({2}));
  CHECK_THROWS_AS(g.backward(x), ContractError);
}

TEST_CASE("graph inputs are strictly older") {
  ad::Graph g;
  const auto a = g.constant(Tensor({1}));
  CHECK_THROWS_AS(g.push("bad", {a + 1}, Tensor({1}), nullptr), ContractError);
  const auto b = ad::scale(g, a, 2.0);
  for (ad::NodeId in : g.inputs(b)) CHECK(in < b);
}

TEST_CASE("forward examples") {
  const nn::Stack identity{nn::dense("d", 2, 2)};
  ParameterSet ps;
  ps.add("d.weight", Tensor::matrix({{1, 0}, {0, 1}}));
  ps.add("d.bias", Tensor({2}));
  ad::Graph g;
  CHECK(g.value(nn::forward(identity, ps, g.constant(Tensor::matrix({{1, 2}})), g)) ==
        Tensor::matrix({{1, 2}}));

  const nn::Stack with_relu{nn::dense("d", 2, 2), nn::relu()};
  ParameterSet ps2;
  ps2.add("d.weight", Tensor::matrix({{-1, 0}, {0, 5}}));
  ps2.add("d.bias", Tensor({2}));
  ad::Graph g2;  // a graph keeps the first value registered under a name
  CHECK(g2.value(nn::forward(with_relu, ps2, g2.constant(Tensor::matrix({{1, 1}})), g2)) ==
        Tensor::matrix({{0, 5}}));

  const nn::Stack conv{nn::conv3x3("c", 2, 3)};
  ParameterSet ps3;
  ps3.add("c.weight", Tensor({3, 2, 3, 3}));
  ps3.add("c.bias", Tensor::vector({0.5, -1, 2}));
  Rng rng(4, 4);
  const Tensor out = g.value(nn::forward(conv, ps3, g.constant(draw(rng, Normal{0, 1}, {2, 4, 4, 2})), g));
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == ps3.get("c.bias")[i % 3]);
}

TEST_CASE("forward shape mismatch names the layer index") {
  const nn::Stack s{nn::dense("a", 3, 4), nn::dense("b", 5, 1)};
  ParameterSet ps;
  Rng rng(1, 1);
  nn::init_params(s, rng, Partition::kInvariant, ps);
  ad::Graph g;
  try {
    nn::forward(s, ps, g.constant(Tensor({2, 3})), g);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
  }
  CHECK_THROWS_AS(nn::output_shape(s, {2, 3}), DimensionError);
}

TEST_CASE("init_params shapes and statistics") {
  const nn::Stack s{nn::conv3x3("c", 4, 8), nn::dense("d", 50, 40)};
  ParameterSet ps;
  Rng rng(3, 3);
  nn::init_params(s, rng, Partition::kSpecific, ps);
  CHECK(ps.get("c.weight").shape() == Shape{8, 4, 3, 3});
  CHECK(ps.get("d.weight").shape() == Shape{50, 40});
  CHECK(ps.get("d.bias") == Tensor({40}));
  CHECK(ps.partition("c.bias") == Partition::kSpecific);
  CHECK(nn::count_params(s) == ps.num_values());
  const Tensor& w = ps.get("d.weight");
  CHECK(std::sqrt(frobenius_sq(w) / w.size()) == doctest::Approx(std::sqrt(2.0 / 50)).epsilon(0.1));
}

TEST_CASE("every layer kind and loss matches finite differences") {
  const auto cases = testing::gradient_cases(2026, 5);
  CHECK(cases.size() >= 50);
  for (const auto& c : cases) {
    CAPTURE(c.name);
    CHECK(c.params.num_values() <= 200);
    const auto r = testing::check_gradients(c.params, c.build);
    CHECK(r.numeric_norm > 0.0);
    CHECK(r.rel_error <= 1e-5);
  }
}

TEST_CASE("sgd examples") {
  nn::Optimizer opt(nn::SgdSpec{0.1});
  ParameterSet p, g;
  p.add("w", Tensor::vector({1}));
  g.add("w", Tensor::vector({1}));
  opt.step(p, g);
  CHECK(p.get("w")[0] == doctest::Approx(0.9).epsilon(1e-15));
  opt.step(p, g.zeros_like());
  CHECK(p.get("w")[0] == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("adam first step moves by about lr") {
  nn::Optimizer opt(nn::AdamSpec{});
  ParameterSet p, g;
  p.add("w", Tensor::vector({1, -2}));
  g.add("w", Tensor::vector({1, 1}));
  opt.step(p, g);
  CHECK(p.get("w")[0] == doctest::Approx(1 - 0.001).epsilon(1e-8));
  CHECK(p.get("w")[1] == doctest::Approx(-2 - 0.001).epsilon(1e-8));
  CHECK(opt.step_count() == 1);
  CHECK(opt.first_moment().same_layout(p));
  CHECK(opt.second_moment().same_layout(p));
}

TEST_CASE("adam with zero gradients is a fixed point") {
  nn::Optimizer opt(nn::AdamSpec{0.01});
  ParameterSet p;
  Rng rng(6, 6);
  p.add("a", draw(rng, Normal{0, 1}, {3, 2}));
  p.add("b", draw(rng, Normal{0, 1}, {4}));
  const ParameterSet before = p;
  for (int i = 0; i < 25; ++i) opt.step(p, p.zeros_like());
  CHECK(p == before);
}

TEST_CASE("optimizer rejects mismatched gradient keys") {
  nn::Optimizer opt(nn::SgdSpec{0.1});
  ParameterSet p, g;
  p.add("w", Tensor({1}));
  g.add("v", Tensor({1}));
  CHECK_THROWS_AS(opt.step(p, g), ParameterError);
  ParameterSet g2;
  g2.add("w", Tensor({2}));
  CHECK_THROWS_AS(opt.step(p, g2), ParameterError);
}
