// Copyright 2026 The hcc Authors
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

#include "hcc/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hcc {

std::uint64_t& mac_counter() {
  thread_local std::uint64_t count = 0;
  return count;
}

std::uint64_t& backward_counter() {
  thread_local std::uint64_t count = 0;
  return count;
}

const Tensor& Var::value() const { return graph_->value(*this); }
bool Var::requires_grad() const { return graph_->requires_grad(*this); }

// ---------------------------------------------------------------------------
// Graph

const Graph::Node& Graph::node(Var v) const {
  if (v.graph_ != this || v.id_ < 0 || static_cast<std::size_t>(v.id_) >= nodes_.size()) {
    throw std::logic_error("variable does not belong to this graph");
  }
  return nodes_[static_cast<std::size_t>(v.id_)];
}

Graph::Node& Graph::node(Var v) { return const_cast<Node&>(std::as_const(*this).node(v)); }

Var Graph::leaf(Tensor value, bool requires_grad) {
  value.check_finite("leaf");
  nodes_.push_back(Node{std::move(value), {}, requires_grad && grad_enabled_, {}});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Graph::record(Tensor value, std::span<const Var> inputs, BackwardFn fn, const char* name) {
  value.check_finite(name);
  bool needs = false;
  if (grad_enabled_) {
    for (const Var& in : inputs) {
      if (in.graph_ != this) throw std::logic_error(std::string(name) + ": input from another graph");
      needs = needs || node(in).requires_grad;
    }
  }
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(fn) : BackwardFn{}});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Graph::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn, const char* name) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn), name);
}

Tensor& Graph::grad_buffer(Var v) {
  Node& n = node(v);
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

void Graph::backward(Var loss) {
  const Node& root = node(loss);
  if (root.value.size() != 1) {
    throw ShapeError("backward requires a scalar loss, got shape " + shape_str(root.value.shape()));
  }
  if (!root.requires_grad) throw std::logic_error("backward: loss does not depend on any trainable leaf");
  ++backward_counter();
  for (auto& n : nodes_) n.grad = Tensor();
  grad_buffer(loss)[0] = 1.0;
  for (int i = loss.id_; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad);
  }
}

// ---------------------------------------------------------------------------
// Elementwise

namespace {

void require_same_shape(Var a, Var b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

template <typename F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

bool wants(Graph& g, Var v) { return g.requires_grad(v); }

}  // namespace

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  const auto& x = a.value();
  const auto& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return a.graph()->record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& go) {
    for (Var v : {a, b}) {
      if (!wants(g, v)) continue;
      auto& gv = g.grad_buffer(v);
      for (std::size_t i = 0; i < go.size(); ++i) gv[i] += go[i];
    }
  }, "add");
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  const auto& x = a.value();
  const auto& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return a.graph()->record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& go) {
    if (wants(g, a)) {
      auto& ga = g.grad_buffer(a);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    }
    if (wants(g, b)) {
      auto& gb = g.grad_buffer(b);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
    }
  }, "sub");
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  const auto& x = a.value();
  const auto& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return a.graph()->record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& go) {
    const auto& x = a.value();
    const auto& y = b.value();
    if (wants(g, a)) {
      auto& ga = g.grad_buffer(a);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * y[i];
    }
    if (wants(g, b)) {
      auto& gb = g.grad_buffer(b);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * x[i];
    }
  }, "mul");
}

Var scale(Var a, double s) {
  return a.graph()->record(map(a.value(), [s](double v) { return v * s; }), {a}, [a, s](Graph& g, const Tensor& go) {
    auto& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * s;
  }, "scale");
}

Var add_scalar(Var a, double s) {
  return a.graph()->record(map(a.value(), [s](double v) { return v + s; }), {a}, [a](Graph& g, const Tensor& go) {
    auto& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
  }, "add_scalar");
}

Var square(Var a) {
  return a.graph()->record(map(a.value(), [](double v) { return v * v; }), {a}, [a](Graph& g, const Tensor& go) {
    const auto& x = a.value();
    auto& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += 2.0 * x[i] * go[i];
  }, "square");
}

Var relu(Var a) {
  return a.graph()->record(map(a.value(), [](double v) { return v > 0.0 ? v : 0.0; }), {a},
                           [a](Graph& g, const Tensor& go) {
                             const auto& x = a.value();
                             auto& ga = g.grad_buffer(a);
                             for (std::size_t i = 0; i < go.size(); ++i) {
                               if (x[i] > 0.0) ga[i] += go[i];
                             }
                           }, "relu");
}

Var exp(Var a) {
  return a.graph()->record(map(a.value(), [](double v) { return std::exp(v); }), {a},
                           [a](Graph& g, const Tensor& go) {
                             const auto& x = a.value();
                             auto& ga = g.grad_buffer(a);
                             for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * std::exp(x[i]);
                           }, "exp");
}

Var clamp(Var a, double lo, double hi) {
  return a.graph()->record(map(a.value(), [lo, hi](double v) { return std::clamp(v, lo, hi); }), {a},
                           [a, lo, hi](Graph& g, const Tensor& go) {
                             const auto& x = a.value();
                             auto& ga = g.grad_buffer(a);
                             for (std::size_t i = 0; i < go.size(); ++i) {
                               if (x[i] >= lo && x[i] <= hi) ga[i] += go[i];
                             }
                           }, "clamp");
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.graph()->record(Tensor::scalar(s), {a}, [a](Graph& g, const Tensor& go) {
    auto& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[0];
  }, "sum");
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var mse(Var a, Var b) { return mean(square(sub(a, b))); }

// ---------------------------------------------------------------------------
// Structural

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.graph()->record(std::move(out), {a}, [a](Graph& g, const Tensor& go) {
    auto& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
  }, "reshape");
}

Var slice(Var a, std::size_t offset, Shape shape) {
  const std::size_t n = shape_numel(shape);
  if (offset + n > a.value().size()) {
    throw ShapeError("slice [" + std::to_string(offset) + ", " + std::to_string(offset + n) + ") out of range for " +
                     shape_str(a.shape()));
  }
  const auto src = a.value().data();
  Tensor out(std::move(shape), std::vector<double>(src.begin() + static_cast<std::ptrdiff_t>(offset),
                                                   src.begin() + static_cast<std::ptrdiff_t>(offset + n)));
  return a.graph()->record(std::move(out), {a}, [a, offset](Graph& g, const Tensor& go) {
    auto& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[offset + i] += go[i];
  }, "slice");
}

Var stack(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("stack of zero tensors");
  const Shape inner = parts[0].shape();
  for (const Var& p : parts) {
    if (p.shape() != inner) throw ShapeError("stack: mismatched shapes " + shape_str(inner) + " vs " + shape_str(p.shape()));
  }
  Shape shape{parts.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  Tensor out(shape);
  const std::size_t n = shape_numel(inner);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    std::copy(parts[i].value().data().begin(), parts[i].value().data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return parts[0].graph()->record(std::move(out), parts, [ins, n](Graph& g, const Tensor& go) {
    for (std::size_t i = 0; i < ins.size(); ++i) {
      if (!wants(g, ins[i])) continue;
      auto& gi = g.grad_buffer(ins[i]);
      for (std::size_t j = 0; j < n; ++j) gi[j] += go[i * n + j];
    }
  }, "stack");
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  std::size_t total = 0;
  for (const Var& p : parts) total += p.value().size();
  Tensor out(Shape{total});
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    offsets.push_back(off);
    std::copy(p.value().data().begin(), p.value().data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(off));
    off += p.value().size();
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return parts[0].graph()->record(std::move(out), parts, [ins, offsets](Graph& g, const Tensor& go) {
    for (std::size_t i = 0; i < ins.size(); ++i) {
      if (!wants(g, ins[i])) continue;
      auto& gi = g.grad_buffer(ins[i]);
      for (std::size_t j = 0; j < gi.size(); ++j) gi[j] += go[offsets[i] + j];
    }
  }, "concat");
}

Var crop(Var a, std::size_t h, std::size_t w) {
  const auto& x = a.value();
  if (x.rank() != 3 || h > x.dim(1) || w > x.dim(2)) {
    throw ShapeError("crop to (" + std::to_string(h) + "," + std::to_string(w) + ") from " + shape_str(x.shape()));
  }
  const std::size_t c = x.dim(0);
  Tensor out(Shape{c, h, w});
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) out.at(k, y, xx) = x.at(k, y, xx);
  return a.graph()->record(std::move(out), {a}, [a, h, w](Graph& g, const Tensor& go) {
    auto& ga = g.grad_buffer(a);
    for (std::size_t k = 0; k < go.dim(0); ++k)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t xx = 0; xx < w; ++xx) ga.at(k, y, xx) += go.at(k, y, xx);
  }, "crop");
}

Var column(Var a, std::size_t j) {
  const auto& x = a.value();
  if (x.rank() != 2 || j >= x.dim(1)) throw ShapeError("column " + std::to_string(j) + " of " + shape_str(x.shape()));
  const std::size_t m = x.dim(0), k = x.dim(1);
  Tensor out(Shape{m});
  for (std::size_t i = 0; i < m; ++i) out[i] = x[i * k + j];
  return a.graph()->record(std::move(out), {a}, [a, j, k](Graph& g, const Tensor& go) {
    auto& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i * k + j] += go[i];
  }, "column");
}

// ---------------------------------------------------------------------------
// Convolutions

namespace {

// Zero-padded copy of [C,H,W].
Tensor pad_zero(const Tensor& x, std::size_t pad) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor out(Shape{c, h + 2 * pad, w + 2 * pad});
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) out.at(k, y + pad, xx + pad) = x.at(k, y, xx);
  return out;
}

}  // namespace

Var conv2d(Var input, Var kernel, std::optional<Var> bias, std::size_t stride, std::size_t pad) {
  const auto& x = input.value();
  const auto& k = kernel.value();
  if (x.rank() != 3) throw ShapeError("conv2d: input must be [C,H,W], got " + shape_str(x.shape()));
  if (k.rank() != 4 || k.dim(2) != k.dim(3)) {
    throw ShapeError("conv2d: kernel must be [C_out,C_in,k,k], got " + shape_str(k.shape()));
  }
  if (k.dim(1) != x.dim(0)) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(k.dim(1)) + " input channels, input " +
                     shape_str(x.shape()) + " has " + std::to_string(x.dim(0)));
  }
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  const std::size_t cin = x.dim(0), cout = k.dim(0), ks = k.dim(2);
  const std::size_t hp = x.dim(1) + 2 * pad, wp = x.dim(2) + 2 * pad;
  if (hp < ks || wp < ks) {
    throw ShapeError("conv2d: kernel " + std::to_string(ks) + " larger than padded input " + shape_str(x.shape()));
  }
  const std::size_t ho = (hp - ks) / stride + 1, wo = (wp - ks) / stride + 1;
  if (bias && (bias->value().rank() != 1 || bias->value().dim(0) != cout)) {
    throw ShapeError("conv2d: bias shape " + shape_str(bias->value().shape()) + " for " + std::to_string(cout) +
                     " output channels");
  }

  Tensor xp = pad_zero(x, pad);
  Tensor out(Shape{cout, ho, wo});
  for (std::size_t co = 0; co < cout; ++co) {
    double* o = &out[co * ho * wo];
    if (bias) std::fill(o, o + ho * wo, bias->value()[co]);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double* src = &xp[ci * hp * wp];
      for (std::size_t ky = 0; ky < ks; ++ky) {
        for (std::size_t kx = 0; kx < ks; ++kx) {
          const double wgt = k[((co * cin + ci) * ks + ky) * ks + kx];
          for (std::size_t oy = 0; oy < ho; ++oy) {
            const double* row = src + (oy * stride + ky) * wp + kx;
            double* orow = o + oy * wo;
            for (std::size_t ox = 0; ox < wo; ++ox) orow[ox] += wgt * row[ox * stride];
          }
        }
      }
    }
  }
  const std::uint64_t macs = static_cast<std::uint64_t>(cout * cin * ks * ks * ho * wo);
  mac_counter() += macs;

  std::vector<Var> ins{input, kernel};
  if (bias) ins.push_back(*bias);
  return input.graph()->record(
      std::move(out), ins,
      [input, kernel, bias, stride, pad, xp = std::move(xp), macs](Graph& g, const Tensor& go) {
        const auto& k = kernel.value();
        const std::size_t cin = xp.dim(0), hp = xp.dim(1), wp = xp.dim(2);
        const std::size_t cout = go.dim(0), ho = go.dim(1), wo = go.dim(2), ks = k.dim(2);
        if (bias && wants(g, *bias)) {
          auto& gb = g.grad_buffer(*bias);
          for (std::size_t co = 0; co < cout; ++co) {
            double s = 0.0;
            for (std::size_t i = 0; i < ho * wo; ++i) s += go[co * ho * wo + i];
            gb[co] += s;
          }
        }
        if (wants(g, kernel)) {
          auto& gk = g.grad_buffer(kernel);
          for (std::size_t co = 0; co < cout; ++co) {
            const double* gorow0 = &go[co * ho * wo];
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const double* src = &xp[ci * hp * wp];
              for (std::size_t ky = 0; ky < ks; ++ky) {
                for (std::size_t kx = 0; kx < ks; ++kx) {
                  double s = 0.0;
                  for (std::size_t oy = 0; oy < ho; ++oy) {
                    const double* row = src + (oy * stride + ky) * wp + kx;
                    const double* gorow = gorow0 + oy * wo;
                    for (std::size_t ox = 0; ox < wo; ++ox) s += gorow[ox] * row[ox * stride];
                  }
                  gk[((co * cin + ci) * ks + ky) * ks + kx] += s;
                }
              }
            }
          }
          mac_counter() += macs;
        }
        if (wants(g, input)) {
          Tensor gxp(xp.shape());
          for (std::size_t co = 0; co < cout; ++co) {
            const double* gorow0 = &go[co * ho * wo];
            for (std::size_t ci = 0; ci < cin; ++ci) {
              double* dst = &gxp[ci * hp * wp];
              for (std::size_t ky = 0; ky < ks; ++ky) {
                for (std::size_t kx = 0; kx < ks; ++kx) {
                  const double wgt = k[((co * cin + ci) * ks + ky) * ks + kx];
                  for (std::size_t oy = 0; oy < ho; ++oy) {
                    double* row = dst + (oy * stride + ky) * wp + kx;
                    const double* gorow = gorow0 + oy * wo;
                    for (std::size_t ox = 0; ox < wo; ++ox) row[ox * stride] += wgt * gorow[ox];
                  }
                }
              }
            }
          }
          mac_counter() += macs;
          auto& gx = g.grad_buffer(input);
          const std::size_t h = gx.dim(1), w = gx.dim(2);
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t y = 0; y < h; ++y)
              for (std::size_t xx = 0; xx < w; ++xx) gx.at(ci, y, xx) += gxp.at(ci, y + pad, xx + pad);
        }
      },
      "conv2d");
}

namespace {

// Input padded by one pixel on each side (zero or replicated edge).
Tensor pad_one(const Tensor& x, EdgeMode edge) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor out(Shape{c, h + 2, w + 2});
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t y = 0; y < h + 2; ++y) {
      for (std::size_t xx = 0; xx < w + 2; ++xx) {
        const bool inside = y >= 1 && y <= h && xx >= 1 && xx <= w;
        if (inside) {
          out.at(k, y, xx) = x.at(k, y - 1, xx - 1);
        } else if (edge == EdgeMode::kReplicate) {
          const std::size_t sy = std::clamp<std::size_t>(y, 1, h) - 1;
          const std::size_t sx = std::clamp<std::size_t>(xx, 1, w) - 1;
          out.at(k, y, xx) = x.at(k, sy, sx);
        }
      }
    }
  }
  return out;
}

// Output index j of the cropped stride-2 transposed convolution over the
// one-pixel-padded input reads padded rows i = (j + 3 - t) / 2 for the two
// kernel taps t with t == (j + 3) mod 2.
constexpr std::size_t kTconvOffset = 3;

}  // namespace

Var transposed_conv2d(Var input, Var kernel, EdgeMode edge) {
  const auto& x = input.value();
  const auto& k = kernel.value();
  if (x.rank() != 3) throw ShapeError("transposed_conv2d: input must be [C,H,W], got " + shape_str(x.shape()));
  if (k.rank() != 4 || k.dim(2) != k.dim(3)) {
    throw ShapeError("transposed_conv2d: kernel must be square [C_in,C_out,k,k], got " + shape_str(k.shape()));
  }
  if (k.dim(2) != 4) throw ShapeError("transposed_conv2d: kernel size must be 4, got " + std::to_string(k.dim(2)));
  if (k.dim(0) != x.dim(0)) {
    throw ShapeError("transposed_conv2d: kernel expects " + std::to_string(k.dim(0)) + " input channels, got " +
                     std::to_string(x.dim(0)));
  }
  const std::size_t cin = x.dim(0), cout = k.dim(1), h = x.dim(1), w = x.dim(2);
  const std::size_t ho = 2 * h, wo = 2 * w, wp = w + 2, hp = h + 2;
  Tensor xp = pad_one(x, edge);
  Tensor out(Shape{cout, ho, wo});
  for (std::size_t ci = 0; ci < cin; ++ci) {
    for (std::size_t co = 0; co < cout; ++co) {
      const double* kk = &k[(ci * cout + co) * 16];
      const double* src = &xp[ci * hp * wp];
      double* dst = &out[co * ho * wo];
      for (std::size_t oy = 0; oy < ho; ++oy) {
        const std::size_t ty0 = (oy + kTconvOffset) % 2;
        for (std::size_t ox = 0; ox < wo; ++ox) {
          const std::size_t tx0 = (ox + kTconvOffset) % 2;
          double s = 0.0;
          for (std::size_t ty = ty0; ty < 4; ty += 2) {
            const std::size_t iy = (oy + kTconvOffset - ty) / 2;
            for (std::size_t tx = tx0; tx < 4; tx += 2) {
              const std::size_t ix = (ox + kTconvOffset - tx) / 2;
              s += kk[ty * 4 + tx] * src[iy * wp + ix];
            }
          }
          dst[oy * wo + ox] += s;
        }
      }
    }
  }
  const std::uint64_t macs = static_cast<std::uint64_t>(4 * cin * cout * ho * wo);
  mac_counter() += macs;

  return input.graph()->record(
      std::move(out), {input, kernel},
      [input, kernel, edge, xp = std::move(xp), macs](Graph& g, const Tensor& go) {
        const auto& k = kernel.value();
        const std::size_t cin = xp.dim(0), hp = xp.dim(1), wp = xp.dim(2);
        const std::size_t cout = go.dim(0), ho = go.dim(1), wo = go.dim(2);
        const bool want_k = wants(g, kernel), want_x = wants(g, input);
        Tensor gxp(xp.shape());
        Tensor* gk = want_k ? &g.grad_buffer(kernel) : nullptr;
        for (std::size_t ci = 0; ci < cin; ++ci) {
          for (std::size_t co = 0; co < cout; ++co) {
            const double* kk = &k[(ci * cout + co) * 16];
            const double* src = &xp[ci * hp * wp];
            double* gsrc = &gxp[ci * hp * wp];
            const double* gdst = &go[co * ho * wo];
            for (std::size_t oy = 0; oy < ho; ++oy) {
              const std::size_t ty0 = (oy + kTconvOffset) % 2;
              for (std::size_t ox = 0; ox < wo; ++ox) {
                const std::size_t tx0 = (ox + kTconvOffset) % 2;
                const double gv = gdst[oy * wo + ox];
                for (std::size_t ty = ty0; ty < 4; ty += 2) {
                  const std::size_t iy = (oy + kTconvOffset - ty) / 2;
                  for (std::size_t tx = tx0; tx < 4; tx += 2) {
                    const std::size_t ix = (ox + kTconvOffset - tx) / 2;
                    if (want_k) (*gk)[(ci * cout + co) * 16 + ty * 4 + tx] += gv * src[iy * wp + ix];
                    if (want_x) gsrc[iy * wp + ix] += gv * kk[ty * 4 + tx];
                  }
                }
              }
            }
          }
        }
        if (want_k) mac_counter() += macs;
        if (want_x) {
          mac_counter() += macs;
          auto& gx = g.grad_buffer(input);
          const std::size_t h = gx.dim(1), w = gx.dim(2);
          for (std::size_t c = 0; c < cin; ++c) {
            for (std::size_t y = 0; y < hp; ++y) {
              for (std::size_t xx = 0; xx < wp; ++xx) {
                const bool inside = y >= 1 && y <= h && xx >= 1 && xx <= w;
                if (!inside && edge == EdgeMode::kZero) continue;
                const std::size_t sy = std::clamp<std::size_t>(y, 1, h) - 1;
                const std::size_t sx = std::clamp<std::size_t>(xx, 1, w) - 1;
                gx.at(c, sy, sx) += gxp.at(c, y, xx);
              }
            }
          }
        }
      },
      "transposed_conv2d");
}

Var linear(Var input, Var weight, Var bias) {
  const auto& x = input.value();
  const auto& wt = weight.value();
  const auto& b = bias.value();
  if (wt.rank() != 2) throw ShapeError("linear: weight must be [D_out,D_in], got " + shape_str(wt.shape()));
  const std::size_t dout = wt.dim(0), din = wt.dim(1);
  if (b.rank() != 1 || b.dim(0) != dout) throw ShapeError("linear: bias " + shape_str(b.shape()) + " for D_out " + std::to_string(dout));
  if (x.rank() == 0 || x.shape().back() != din) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " does not end in D_in " + std::to_string(din));
  }
  const std::size_t m = x.size() / din;
  Shape oshape = x.shape();
  oshape.back() = dout;
  Tensor out(oshape);
  for (std::size_t r = 0; r < m; ++r) {
    const double* xr = &x[r * din];
    double* orow = &out[r * dout];
    for (std::size_t o = 0; o < dout; ++o) {
      const double* wr = &wt[o * din];
      double s = b[o];
      for (std::size_t d = 0; d < din; ++d) s += wr[d] * xr[d];
      orow[o] = s;
    }
  }
  const std::uint64_t macs = static_cast<std::uint64_t>(m * din * dout);
  mac_counter() += macs;
  return input.graph()->record(std::move(out), {input, weight, bias},
                               [input, weight, bias, m, din, dout, macs](Graph& g, const Tensor& go) {
                                 const auto& x = input.value();
                                 const auto& wt = weight.value();
                                 if (wants(g, bias)) {
                                   auto& gb = g.grad_buffer(bias);
                                   for (std::size_t r = 0; r < m; ++r)
                                     for (std::size_t o = 0; o < dout; ++o) gb[o] += go[r * dout + o];
                                 }
                                 if (wants(g, weight)) {
                                   auto& gw = g.grad_buffer(weight);
                                   for (std::size_t r = 0; r < m; ++r) {
                                     const double* xr = &x[r * din];
                                     for (std::size_t o = 0; o < dout; ++o) {
                                       const double gv = go[r * dout + o];
                                       double* gwr = &gw[o * din];
                                       for (std::size_t d = 0; d < din; ++d) gwr[d] += gv * xr[d];
                                     }
                                   }
                                   mac_counter() += macs;
                                 }
                                 if (wants(g, input)) {
                                   auto& gx = g.grad_buffer(input);
                                   for (std::size_t r = 0; r < m; ++r) {
                                     double* gxr = &gx[r * din];
                                     for (std::size_t o = 0; o < dout; ++o) {
                                       const double gv = go[r * dout + o];
                                       const double* wr = &wt[o * din];
                                       for (std::size_t d = 0; d < din; ++d) gxr[d] += gv * wr[d];
                                     }
                                   }
                                   mac_counter() += macs;
                                 }
                               },
                               "linear");
}

Var avg_pool(Var input, std::size_t factor) {
  const auto& x = input.value();
  if (x.rank() != 3) throw ShapeError("avg_pool: input must be [C,H,W], got " + shape_str(x.shape()));
  if (factor == 0) throw ShapeError("avg_pool: factor must be positive");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t ho = (h + factor - 1) / factor, wo = (w + factor - 1) / factor;
  Tensor out(Shape{c, ho, wo});
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const std::size_t y1 = std::min(h, (oy + 1) * factor), x1 = std::min(w, (ox + 1) * factor);
        double s = 0.0;
        for (std::size_t y = oy * factor; y < y1; ++y)
          for (std::size_t xx = ox * factor; xx < x1; ++xx) s += x.at(k, y, xx);
        out.at(k, oy, ox) = s / static_cast<double>((y1 - oy * factor) * (x1 - ox * factor));
      }
    }
  }
  return input.graph()->record(std::move(out), {input}, [input, factor](Graph& g, const Tensor& go) {
    auto& gx = g.grad_buffer(input);
    const std::size_t h = gx.dim(1), w = gx.dim(2);
    for (std::size_t k = 0; k < go.dim(0); ++k) {
      for (std::size_t oy = 0; oy < go.dim(1); ++oy) {
        for (std::size_t ox = 0; ox < go.dim(2); ++ox) {
          const std::size_t y1 = std::min(h, (oy + 1) * factor), x1 = std::min(w, (ox + 1) * factor);
          const double share =
              go.at(k, oy, ox) / static_cast<double>((y1 - oy * factor) * (x1 - ox * factor));
          for (std::size_t y = oy * factor; y < y1; ++y)
            for (std::size_t xx = ox * factor; xx < x1; ++xx) gx.at(k, y, xx) += share;
        }
      }
    }
  }, "avg_pool");
}

Var global_mean_pool(Var input) {
  const auto& x = input.value();
  if (x.rank() != 3) throw ShapeError("global_mean_pool: input must be [C,H,W], got " + shape_str(x.shape()));
  const std::size_t c = x.dim(0), n = x.dim(1) * x.dim(2);
  Tensor out(Shape{c});
  for (std::size_t k = 0; k < c; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[k * n + i];
    out[k] = s / static_cast<double>(n);
  }
  return input.graph()->record(std::move(out), {input}, [input, n](Graph& g, const Tensor& go) {
    auto& gx = g.grad_buffer(input);
    for (std::size_t k = 0; k < go.size(); ++k)
      for (std::size_t i = 0; i < n; ++i) gx[k * n + i] += go[k] / static_cast<double>(n);
  }, "global_mean_pool");
}

Var gather_context(Var grid) {
  const auto& x = grid.value();
  if (x.rank() != 2) throw ShapeError("gather_context: grid must be [h,w], got " + shape_str(x.shape()));
  const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(x.dim(0)), w = static_cast<std::ptrdiff_t>(x.dim(1));
  Tensor out(Shape{x.size(), static_cast<std::size_t>(kContextSize)});
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t xx = 0; xx < w; ++xx) {
      double* row = &out[static_cast<std::size_t>((y * w + xx) * kContextSize)];
      for (int c = 0; c < kContextSize; ++c) {
        const std::ptrdiff_t yy = y + kContextOffsets[c][0], xc = xx + kContextOffsets[c][1];
        row[c] = (yy >= 0 && yy < h && xc >= 0 && xc < w) ? x[static_cast<std::size_t>(yy * w + xc)] : 0.0;
      }
    }
  }
  return grid.graph()->record(std::move(out), {grid}, [grid, h, w](Graph& g, const Tensor& go) {
    auto& gx = g.grad_buffer(grid);
    for (std::ptrdiff_t y = 0; y < h; ++y) {
      for (std::ptrdiff_t xx = 0; xx < w; ++xx) {
        const double* row = &go[static_cast<std::size_t>((y * w + xx) * kContextSize)];
        for (int c = 0; c < kContextSize; ++c) {
          const std::ptrdiff_t yy = y + kContextOffsets[c][0], xc = xx + kContextOffsets[c][1];
          if (yy >= 0 && yy < h && xc >= 0 && xc < w) gx[static_cast<std::size_t>(yy * w + xc)] += row[c];
        }
      }
    }
  }, "gather_context");
}

// ---------------------------------------------------------------------------
// Laplace box probability

namespace {

struct LogProb {
  double value;
  double d_mu;
  double d_b;
};

// Unclamped log P(y) and its partial derivatives; d/dy == -d/dmu.
LogProb laplace_box(double y, double mu, double b) {
  const double u = y + 0.5, l = y - 0.5;
  const double inv_b = 1.0 / b, inv_b2 = inv_b * inv_b;
  if (l >= mu || u <= mu) {
    // Both edges in one tail: P = 1/2 exp(-|edge - mu| / b) (1 - exp(-1/b)).
    const double one_minus_e = -std::expm1(-inv_b);
    const double log_1me = std::log(one_minus_e);
    const double e_ratio = std::exp(-inv_b) / one_minus_e;
    if (l >= mu) {
      return {std::log(0.5) - (l - mu) * inv_b + log_1me, inv_b, (l - mu) * inv_b2 - e_ratio * inv_b2};
    }
    return {std::log(0.5) + (u - mu) * inv_b + log_1me, -inv_b, -(u - mu) * inv_b2 - e_ratio * inv_b2};
  }
  const double a = std::exp(-(u - mu) * inv_b);
  const double c = std::exp((l - mu) * inv_b);
  const double p = 1.0 - 0.5 * a - 0.5 * c;
  const double dp_mu = (-0.5 * a + 0.5 * c) * inv_b;
  const double dp_b = (-0.5 * a * (u - mu) + 0.5 * c * (l - mu)) * inv_b2;
  return {std::log(p), dp_mu / p, dp_b / p};
}

}  // namespace

double laplace_box_mass(double y, double mu, double b) {
  const double u = y + 0.5, l = y - 0.5;
  if (l >= mu) return 0.5 * std::exp(-(l - mu) / b) * -std::expm1(-1.0 / b);
  if (u <= mu) return 0.5 * std::exp((u - mu) / b) * -std::expm1(-1.0 / b);
  return 1.0 - 0.5 * std::exp(-(u - mu) / b) - 0.5 * std::exp((l - mu) / b);
}

double laplace_log_prob_box(double y, double mu, double b) {
  return std::max(laplace_box(y, mu, b).value, kLogProbFloor);
}

Var laplace_log_prob_box(Var y, Var mu, Var b) {
  require_same_shape(y, mu, "laplace_log_prob_box");
  require_same_shape(y, b, "laplace_log_prob_box");
  const auto& yv = y.value();
  const auto& mv = mu.value();
  const auto& bv = b.value();
  const std::size_t n = yv.size();
  Tensor out(yv.shape());
  std::vector<double> d_mu(n), d_b(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(bv[i] > 0.0)) throw std::domain_error("laplace_log_prob_box: scale must be positive");
    const LogProb lp = laplace_box(yv[i], mv[i], bv[i]);
    if (lp.value < kLogProbFloor) {
      out[i] = kLogProbFloor;
    } else {
      out[i] = lp.value;
      d_mu[i] = lp.d_mu;
      d_b[i] = lp.d_b;
    }
  }
  return y.graph()->record(std::move(out), {y, mu, b},
                           [y, mu, b, d_mu = std::move(d_mu), d_b = std::move(d_b)](Graph& g, const Tensor& go) {
                             if (wants(g, y)) {
                               auto& gy = g.grad_buffer(y);
                               for (std::size_t i = 0; i < go.size(); ++i) gy[i] -= go[i] * d_mu[i];
                             }
                             if (wants(g, mu)) {
                               auto& gm = g.grad_buffer(mu);
                               for (std::size_t i = 0; i < go.size(); ++i) gm[i] += go[i] * d_mu[i];
                             }
                             if (wants(g, b)) {
                               auto& gb = g.grad_buffer(b);
                               for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * d_b[i];
                             }
                           },
                           "laplace_log_prob_box");
}

// ---------------------------------------------------------------------------
// Quantization surrogates

Var quantize_noise(Var y, Rng& rng) {
  Tensor out(y.shape());
  const auto& x = y.value();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + (rng.uniform() - 0.5);
  return y.graph()->record(std::move(out), {y}, [y](Graph& g, const Tensor& go) {
    auto& gy = g.grad_buffer(y);
    for (std::size_t i = 0; i < go.size(); ++i) gy[i] += go[i];
  }, "quantize_noise");
}

Var quantize_ste(Var y) {
  return y.graph()->record(map(y.value(), [](double v) { return std::round(v); }), {y},
                           [y](Graph& g, const Tensor& go) {
                             auto& gy = g.grad_buffer(y);
                             for (std::size_t i = 0; i < go.size(); ++i) gy[i] += go[i];
                           },
                           "quantize_ste");
}

}  // namespace hcc
