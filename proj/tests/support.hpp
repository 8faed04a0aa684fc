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

// Shared helpers for the unit and acceptance tests.

#ifndef FEDPAD_TESTS_SUPPORT_HPP_
#define FEDPAD_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cmath>
#include <functional>

#include "fedpad/autodiff.hpp"
#include "fedpad/parameter_set.hpp"
#include "fedpad/tensor.hpp"

namespace fedpad::testing {

/// Records a scalar loss over `params` in `graph`. Must register every
/// parameter through Graph::parameter so it receives a gradient.
using LossBuilder = std::function<ad::NodeId(ad::Graph&, const ParameterSet&)>;

struct GradCheck {
  double rel_error = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  double numeric_norm = 0.0;
  std::size_t checked = 0;
};

inline double eval_loss(const ParameterSet& params, const LossBuilder& build) {
  ad::Graph g;
  return g.value(build(g, params))[0];
}

/// Reverse-mode gradients against central differences with step h.
inline GradCheck check_gradients(const ParameterSet& params, const LossBuilder& build,
                                 double h = 1e-5) {
  ad::Graph g;
  const ad::NodeId loss = build(g, params);
  g.backward(loss);
  const ParameterSet analytic = g.parameter_grads(params);

  ParameterSet probe = params;
  double err2 = 0.0, a2 = 0.0, n2 = 0.0;
  GradCheck out;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    Tensor& v = probe.entries()[k].value;
    const Tensor& ga = analytic.entries()[k].value;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double orig = v[i];
      v[i] = orig + h;
      const double up = eval_loss(probe, build);
      v[i] = orig - h;
      const double down = eval_loss(probe, build);
      v[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      err2 += (ga[i] - numeric) * (ga[i] - numeric);
      a2 += ga[i] * ga[i];
      n2 += numeric * numeric;
      ++out.checked;
    }
  }
  out.numeric_norm = std::sqrt(n2);
  out.rel_error = std::sqrt(err2) / std::max({std::sqrt(a2), out.numeric_norm, 1e-12});
  return out;
}

/// Inverse of rgb_to_hsv for [h x w x 3] tensors.
inline Tensor hsv_to_rgb(const Tensor& hsv) {
  Tensor out(hsv.shape());
  for (std::size_t p = 0; p + 2 < hsv.size(); p += 3) {
    const double h = hsv[p] * 6.0, s = hsv[p + 1], v = hsv[p + 2];
    const double sector = std::floor(h);
    const double f = h - sector;
    const double a = v * (1 - s), b = v * (1 - s * f), c = v * (1 - s * (1 - f));
    double r = v, gg = c, bb = a;
    switch (static_cast<int>(sector) % 6) {
      case 0: r = v; gg = c; bb = a; break;
      case 1: r = b; gg = v; bb = a; break;
      case 2: r = a; gg = v; bb = c; break;
      case 3: r = a; gg = b; bb = v; break;
      case 4: r = c; gg = a; bb = v; break;
      default: r = v; gg = a; bb = b; break;
    }
    out[p] = r;
    out[p + 1] = gg;
    out[p + 2] = bb;
  }
  return out;
}

}  // namespace fedpad::testing

#endif  // FEDPAD_TESTS_SUPPORT_HPP_
