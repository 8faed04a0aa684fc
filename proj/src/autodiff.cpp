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

#include "fedpad/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "fedpad/error.hpp"

namespace fedpad::ad {

NodeId Graph::constant(Tensor value) {
  return push("constant", {}, std::move(value), nullptr);
}

NodeId Graph::parameter(const std::string& name, const Tensor& value) {
  if (auto it = params_.find(name); it != params_.end()) return it->second;
  const NodeId id = push("param:" + name, {}, value, nullptr);
  nodes_[id].needs_grad = true;
  params_.emplace(name, id);
  return id;
}

NodeId Graph::push(std::string tag, std::vector<NodeId> inputs, Tensor value,
                   BackwardFn fn) {
  const NodeId id = nodes_.size();
  bool needs = false;
  for (NodeId in : inputs) {
    if (in >= id) throw ContractError("graph input id " + std::to_string(in) + " is not older than node " + std::to_string(id));
    needs = needs || nodes_[in].needs_grad;
  }
  Node n;
  n.tag = std::move(tag);
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  n.needs_grad = needs && static_cast<bool>(fn);
  if (n.needs_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return id;
}

Tensor Graph::grad(NodeId id) const {
  const Node& n = nodes_.at(id);
  if (n.grad.empty()) return Tensor(n.value.shape());
  return n.grad;
}

Tensor& Graph::grad_slot(NodeId id) {
  Node& n = nodes_.at(id);
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Graph::backward(NodeId loss) {
  if (loss >= nodes_.size()) throw ContractError("backward: unknown node");
  if (nodes_[loss].value.size() != 1) {
    throw ContractError("backward: loss node must be scalar, got shape " +
                        shape_str(nodes_[loss].value.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  if (!nodes_[loss].needs_grad) return;
  grad_slot(loss)[0] = 1.0;
  for (NodeId id = loss + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, id);
  }
}

ParameterSet Graph::parameter_grads(const ParameterSet& params) const {
  ParameterSet out;
  for (const auto& e : params.entries()) {
    auto it = params_.find(e.name);
    if (it == params_.end()) {
      out.add(e.name, Tensor(e.value.shape()), e.partition);
    } else {
      out.add(e.name, grad(it->second), e.partition);
    }
  }
  return out;
}

namespace {

const Tensor& val(const Graph& g, NodeId id) { return g.value(id); }

void require_same(const Graph& g, NodeId a, NodeId b, const char* op) {
  if (val(g, a).shape() != val(g, b).shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(val(g, a).shape()) + " vs " +
                         shape_str(val(g, b).shape()));
  }
}

void accumulate(Graph& g, NodeId id, const Tensor& delta, double c = 1.0) {
  if (!g.needs_grad(id)) return;
  Tensor& slot = g.grad_slot(id);
  for (std::size_t i = 0; i < delta.size(); ++i) slot[i] += c * delta[i];
}

void require_nhwc(const Tensor& t, const char* op) {
  if (t.rank() != 4) {
    throw DimensionError(std::string(op) + ": expected [batch x h x w x c] input, got " +
                         shape_str(t.shape()));
  }
}

}  // namespace

NodeId add(Graph& g, NodeId a, NodeId b) {
  require_same(g, a, b, "add");
  return g.push("add", {a, b}, fedpad::add(val(g, a), val(g, b)), [a, b](Graph& gr, NodeId self) {
    const Tensor go = gr.grad(self);
    accumulate(gr, a, go);
    accumulate(gr, b, go);
  });
}

NodeId sub(Graph& g, NodeId a, NodeId b) {
  require_same(g, a, b, "sub");
  return g.push("sub", {a, b}, fedpad::sub(val(g, a), val(g, b)), [a, b](Graph& gr, NodeId self) {
    const Tensor go = gr.grad(self);
    accumulate(gr, a, go);
    accumulate(gr, b, go, -1.0);
  });
}

NodeId mul(Graph& g, NodeId a, NodeId b) {
  require_same(g, a, b, "mul");
  return g.push("mul", {a, b}, fedpad::mul(val(g, a), val(g, b)), [a, b](Graph& gr, NodeId self) {
    const Tensor go = gr.grad(self);
    accumulate(gr, a, fedpad::mul(go, gr.value(b)));
    accumulate(gr, b, fedpad::mul(go, gr.value(a)));
  });
}

NodeId scale(Graph& g, NodeId a, double c) {
  return g.push("scale", {a}, fedpad::scale(val(g, a), c), [a, c](Graph& gr, NodeId self) {
    accumulate(gr, a, gr.grad(self), c);
  });
}

NodeId relu(Graph& g, NodeId a) {
  return g.push("relu", {a}, fedpad::relu(val(g, a)), [a](Graph& gr, NodeId self) {
    if (!gr.needs_grad(a)) return;
    const Tensor& x = gr.value(a);
    const Tensor go = gr.grad(self);
    Tensor& gi = gr.grad_slot(a);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] > 0.0) gi[i] += go[i];
    }
  });
}

NodeId sigmoid(Graph& g, NodeId a) {
  return g.push("sigmoid", {a}, fedpad::sigmoid(val(g, a)), [a](Graph& gr, NodeId self) {
    if (!gr.needs_grad(a)) return;
    const Tensor& s = gr.value(self);
    const Tensor go = gr.grad(self);
    Tensor& gi = gr.grad_slot(a);
    for (std::size_t i = 0; i < s.size(); ++i) gi[i] += go[i] * s[i] * (1.0 - s[i]);
  });
}

NodeId square(Graph& g, NodeId a) {
  return g.push("square", {a}, fedpad::square(val(g, a)), [a](Graph& gr, NodeId self) {
    if (!gr.needs_grad(a)) return;
    const Tensor& x = gr.value(a);
    const Tensor go = gr.grad(self);
    Tensor& gi = gr.grad_slot(a);
    for (std::size_t i = 0; i < x.size(); ++i) gi[i] += 2.0 * x[i] * go[i];
  });
}

NodeId sum(Graph& g, NodeId a) {
  return g.push("sum", {a}, Tensor::scalar(fedpad::sum(val(g, a))), [a](Graph& gr, NodeId self) {
    if (!gr.needs_grad(a)) return;
    const double go = gr.grad(self)[0];
    Tensor& gi = gr.grad_slot(a);
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += go;
  });
}

NodeId frobenius_sq(Graph& g, NodeId a) {
  return g.push("frobenius_sq", {a}, Tensor::scalar(fedpad::frobenius_sq(val(g, a))),
                [a](Graph& gr, NodeId self) {
                  if (!gr.needs_grad(a)) return;
                  const double go = gr.grad(self)[0];
                  const Tensor& x = gr.value(a);
                  Tensor& gi = gr.grad_slot(a);
                  for (std::size_t i = 0; i < x.size(); ++i) gi[i] += 2.0 * x[i] * go;
                });
}

NodeId weighted_sum(Graph& g, const std::vector<NodeId>& terms,
                    const std::vector<double>& weights) {
  if (terms.size() != weights.size()) {
    throw DimensionError("weighted_sum: " + std::to_string(terms.size()) + " terms but " +
                         std::to_string(weights.size()) + " weights");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (val(g, terms[i]).size() != 1) throw DimensionError("weighted_sum: terms must be scalars");
    total += weights[i] * val(g, terms[i])[0];
  }
  return g.push("weighted_sum", terms, Tensor::scalar(total),
                [terms, weights](Graph& gr, NodeId self) {
                  const double go = gr.grad(self)[0];
                  for (std::size_t i = 0; i < terms.size(); ++i) {
                    if (weights[i] != 0.0 && gr.needs_grad(terms[i])) {
                      gr.grad_slot(terms[i])[0] += weights[i] * go;
                    }
                  }
                });
}

NodeId matmul(Graph& g, NodeId a, NodeId b) {
  const Tensor& av = val(g, a);
  const Tensor& bv = val(g, b);
  Tensor out = fedpad::matmul(av, bv);
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  return g.push("matmul", {a, b}, std::move(out), [a, b, m, k, n](Graph& gr, NodeId self) {
    const Tensor go = gr.grad(self);
    if (gr.needs_grad(a)) {
      kernel::gemm_nt(go.raw(), gr.value(b).raw(), gr.grad_slot(a).raw(), m, n, k);
    }
    if (gr.needs_grad(b)) {
      kernel::gemm_tn(gr.value(a).raw(), go.raw(), gr.grad_slot(b).raw(), k, m, n);
    }
  });
}

NodeId add_bias(Graph& g, NodeId x, NodeId bias) {
  const Tensor& xv = val(g, x);
  const Tensor& bv = val(g, bias);
  if (bv.rank() != 1 || xv.shape().back() != bv.dim(0)) {
    throw DimensionError("add_bias: bias " + shape_str(bv.shape()) +
                         " does not match last axis of " + shape_str(xv.shape()));
  }
  const std::size_t c = bv.dim(0);
  Tensor out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % c];
  return g.push("add_bias", {x, bias}, std::move(out), [x, bias, c](Graph& gr, NodeId self) {
    const Tensor go = gr.grad(self);
    accumulate(gr, x, go);
    if (gr.needs_grad(bias)) {
      Tensor& gb = gr.grad_slot(bias);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i % c] += go[i];
    }
  });
}

NodeId reshape(Graph& g, NodeId x, Shape shape) {
  Tensor out = val(g, x).reshaped(std::move(shape));
  return g.push("reshape", {x}, std::move(out), [x](Graph& gr, NodeId self) {
    accumulate(gr, x, gr.grad(self));
  });
}

NodeId conv3x3(Graph& g, NodeId x, NodeId kernel, NodeId bias) {
  const Tensor& xv = val(g, x);
  const Tensor& kv = val(g, kernel);
  const Tensor& bv = val(g, bias);
  require_nhwc(xv, "conv3x3");
  if (kv.rank() != 4 || kv.dim(2) != 3 || kv.dim(3) != 3 || kv.dim(1) != xv.dim(3)) {
    throw DimensionError("conv3x3: kernel " + shape_str(kv.shape()) +
                         " incompatible with input " + shape_str(xv.shape()));
  }
  const std::size_t B = xv.dim(0), H = xv.dim(1), W = xv.dim(2), I = xv.dim(3);
  const std::size_t O = kv.dim(0);
  if (bv.rank() != 1 || bv.dim(0) != O) {
    throw DimensionError("conv3x3: bias " + shape_str(bv.shape()) + " needs " +
                         std::to_string(O) + " entries");
  }
  // Kernel rearranged to [dy][dx][in][out] so the inner loop is contiguous.
  auto to_taps = [O, I](const Tensor& k) {
    std::vector<double> t(9 * I * O);
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t i = 0; i < I; ++i)
        for (std::size_t tap = 0; tap < 9; ++tap) t[(tap * I + i) * O + o] = k[(o * I + i) * 9 + tap];
    return t;
  };
  const std::vector<double> taps = to_taps(kv);
  Tensor out(Shape{B, H, W, O});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t xx = 0; xx < W; ++xx) {
        double* op = out.raw() + ((b * H + y) * W + xx) * O;
        for (std::size_t o = 0; o < O; ++o) op[o] = bv[o];
        for (std::size_t dy = 0; dy < 3; ++dy) {
          if (y + dy < 1 || y + dy > H) continue;
          const std::size_t sy = y + dy - 1;
          for (std::size_t dx = 0; dx < 3; ++dx) {
            if (xx + dx < 1 || xx + dx > W) continue;
            const std::size_t sx = xx + dx - 1;
            const double* ip = xv.raw() + ((b * H + sy) * W + sx) * I;
            const double* tp = taps.data() + (dy * 3 + dx) * I * O;
            for (std::size_t i = 0; i < I; ++i) {
              const double v = ip[i];
              const double* row = tp + i * O;
              for (std::size_t o = 0; o < O; ++o) op[o] += v * row[o];
            }
          }
        }
      }
    }
  }
  require_finite(out, "conv3x3");
  return g.push(
      "conv3x3", {x, kernel, bias}, std::move(out),
      [x, kernel, bias, B, H, W, I, O, taps](Graph& gr, NodeId self) {
        const Tensor go = gr.grad(self);
        const Tensor& xin = gr.value(x);
        const bool want_x = gr.needs_grad(x);
        const bool want_k = gr.needs_grad(kernel);
        std::vector<double> gtaps(want_k ? 9 * I * O : 0, 0.0);
        double* gx = want_x ? gr.grad_slot(x).raw() : nullptr;
        for (std::size_t b = 0; b < B; ++b) {
          for (std::size_t y = 0; y < H; ++y) {
            for (std::size_t xx = 0; xx < W; ++xx) {
              const double* gp = go.raw() + ((b * H + y) * W + xx) * O;
              for (std::size_t dy = 0; dy < 3; ++dy) {
                if (y + dy < 1 || y + dy > H) continue;
                const std::size_t sy = y + dy - 1;
                for (std::size_t dx = 0; dx < 3; ++dx) {
                  if (xx + dx < 1 || xx + dx > W) continue;
                  const std::size_t sx = xx + dx - 1;
                  const std::size_t in_off = ((b * H + sy) * W + sx) * I;
                  const std::size_t tap_off = (dy * 3 + dx) * I * O;
                  for (std::size_t i = 0; i < I; ++i) {
                    const double* row = taps.data() + tap_off + i * O;
                    if (want_x) {
                      double s = 0.0;
                      for (std::size_t o = 0; o < O; ++o) s += gp[o] * row[o];
                      gx[in_off + i] += s;
                    }
                    if (want_k) {
                      const double v = xin[in_off + i];
                      double* grow = gtaps.data() + tap_off + i * O;
                      for (std::size_t o = 0; o < O; ++o) grow[o] += v * gp[o];
                    }
                  }
                }
              }
            }
          }
        }
        if (want_k) {
          Tensor& gk = gr.grad_slot(kernel);
          for (std::size_t o = 0; o < O; ++o)
            for (std::size_t i = 0; i < I; ++i)
              for (std::size_t tap = 0; tap < 9; ++tap)
                gk[(o * I + i) * 9 + tap] += gtaps[(tap * I + i) * O + o];
        }
        if (gr.needs_grad(bias)) {
          Tensor& gb = gr.grad_slot(bias);
          for (std::size_t i = 0; i < go.size(); ++i) gb[i % O] += go[i];
        }
      });
}

NodeId avgpool2x2(Graph& g, NodeId x) {
  const Tensor& xv = val(g, x);
  require_nhwc(xv, "avgpool2x2");
  const std::size_t B = xv.dim(0), H = xv.dim(1), W = xv.dim(2), C = xv.dim(3);
  if (H % 2 != 0 || W % 2 != 0) {
    throw DimensionError("avgpool2x2: spatial size must be even, got " + shape_str(xv.shape()));
  }
  const std::size_t h = H / 2, w = W / 2;
  Tensor out(Shape{B, h, w, C});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx)
        for (std::size_t c = 0; c < C; ++c) {
          auto at = [&](std::size_t yy, std::size_t xq) {
            return xv[((b * H + yy) * W + xq) * C + c];
          };
          out[((b * h + y) * w + xx) * C + c] =
              0.25 * (at(2 * y, 2 * xx) + at(2 * y, 2 * xx + 1) + at(2 * y + 1, 2 * xx) +
                      at(2 * y + 1, 2 * xx + 1));
        }
  return g.push("avgpool2x2", {x}, std::move(out), [x, B, H, W, C](Graph& gr, NodeId self) {
    if (!gr.needs_grad(x)) return;
    const Tensor go = gr.grad(self);
    Tensor& gi = gr.grad_slot(x);
    const std::size_t h = H / 2, w = W / 2;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t xx = 0; xx < W; ++xx)
          for (std::size_t c = 0; c < C; ++c)
            gi[((b * H + y) * W + xx) * C + c] += 0.25 * go[((b * h + y / 2) * w + xx / 2) * C + c];
  });
}

NodeId upsample2x(Graph& g, NodeId x) {
  const Tensor& xv = val(g, x);
  require_nhwc(xv, "upsample2x");
  const std::size_t B = xv.dim(0), h = xv.dim(1), w = xv.dim(2), C = xv.dim(3);
  const std::size_t H = 2 * h, W = 2 * w;
  Tensor out(Shape{B, H, W, C});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t xx = 0; xx < W; ++xx)
        for (std::size_t c = 0; c < C; ++c)
          out[((b * H + y) * W + xx) * C + c] = xv[((b * h + y / 2) * w + xx / 2) * C + c];
  return g.push("upsample2x", {x}, std::move(out), [x, B, h, w, C](Graph& gr, NodeId self) {
    if (!gr.needs_grad(x)) return;
    const Tensor go = gr.grad(self);
    Tensor& gi = gr.grad_slot(x);
    const std::size_t H = 2 * h, W = 2 * w;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t xx = 0; xx < W; ++xx)
          for (std::size_t c = 0; c < C; ++c)
            gi[((b * h + y / 2) * w + xx / 2) * C + c] += go[((b * H + y) * W + xx) * C + c];
  });
}

NodeId loss_cls(Graph& g, NodeId prob, NodeId labels) {
  const Tensor& p = val(g, prob);
  const Tensor& y = val(g, labels);
  if (p.size() != y.size() || p.dim(0) != y.dim(0)) {
    throw DimensionError("loss_cls: probabilities " + shape_str(p.shape()) +
                         " vs labels " + shape_str(y.shape()));
  }
  for (double v : y.data()) {
    if (v != 0.0 && v != 1.0) throw LabelError("loss_cls: label must be 0 or 1, got " + std::to_string(v));
  }
  const std::size_t n = p.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = std::clamp(p[i], kProbEpsilon, 1.0 - kProbEpsilon);
    total -= y[i] * std::log(q) + (1.0 - y[i]) * std::log(1.0 - q);
  }
  return g.push("loss_cls", {prob, labels}, Tensor::scalar(total / static_cast<double>(n)),
                [prob, labels, n](Graph& gr, NodeId self) {
                  if (!gr.needs_grad(prob)) return;
                  const double go = gr.grad(self)[0] / static_cast<double>(n);
                  const Tensor& pv = gr.value(prob);
                  const Tensor& yv = gr.value(labels);
                  Tensor& gp = gr.grad_slot(prob);
                  for (std::size_t i = 0; i < n; ++i) {
                    const double q = pv[i];
                    // Clamped region is flat.
                    if (q < kProbEpsilon || q > 1.0 - kProbEpsilon) continue;
                    gp[i] += go * (-(yv[i] / q) + (1.0 - yv[i]) / (1.0 - q));
                  }
                });
}

namespace {

NodeId mean_sq_distance(Graph& g, NodeId pred, NodeId target, const char* tag) {
  const Tensor& a = val(g, pred);
  const Tensor& b = val(g, target);
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(tag) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
  const double batch = static_cast<double>(a.dim(0));
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r = a[i] - b[i];
    total += r * r;
  }
  return g.push(tag, {pred, target}, Tensor::scalar(total / batch),
                [pred, target, batch](Graph& gr, NodeId self) {
                  const double go = gr.grad(self)[0] * 2.0 / batch;
                  const Tensor& av = gr.value(pred);
                  const Tensor& bv = gr.value(target);
                  if (gr.needs_grad(pred)) {
                    Tensor& ga = gr.grad_slot(pred);
                    for (std::size_t i = 0; i < av.size(); ++i) ga[i] += go * (av[i] - bv[i]);
                  }
                  if (gr.needs_grad(target)) {
                    Tensor& gb = gr.grad_slot(target);
                    for (std::size_t i = 0; i < av.size(); ++i) gb[i] -= go * (av[i] - bv[i]);
                  }
                });
}

}  // namespace

NodeId loss_depth(Graph& g, NodeId pred, NodeId target) {
  return mean_sq_distance(g, pred, target, "loss_depth");
}

NodeId loss_rec(Graph& g, NodeId reconstruction, NodeId x) {
  return mean_sq_distance(g, reconstruction, x, "loss_rec");
}

NodeId loss_diff(Graph& g, NodeId zi, NodeId zs) {
  const Tensor& a = val(g, zi);
  const Tensor& b = val(g, zs);
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) {
    throw DimensionError("loss_diff: batch mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  const std::size_t B = a.dim(0), dI = a.dim(1), dS = b.dim(1);
  // cross = Zi^T Zs, [dI x dS]
  std::vector<double> cross(dI * dS, 0.0);
  kernel::gemm_tn(a.raw(), b.raw(), cross.data(), dI, B, dS);
  double total = 0.0;
  for (double v : cross) total += v * v;
  const double batch = static_cast<double>(B);
  return g.push("loss_diff", {zi, zs}, Tensor::scalar(total / batch),
                [zi, zs, B, dI, dS, batch, cross](Graph& gr, NodeId self) {
                  const double go = gr.grad(self)[0] * 2.0 / batch;
                  std::vector<double> c = cross;
                  for (double& v : c) v *= go;
                  if (gr.needs_grad(zi)) {
                    // dZi = Zs * C^T
                    kernel::gemm_nt(gr.value(zs).raw(), c.data(), gr.grad_slot(zi).raw(), B, dS, dI);
                  }
                  if (gr.needs_grad(zs)) {
                    // dZs = Zi * C
                    kernel::gemm_nn(gr.value(zi).raw(), c.data(), gr.grad_slot(zs).raw(), B, dI, dS);
                  }
                });
}

}  // namespace fedpad::ad
