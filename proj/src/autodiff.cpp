#include "diagfuse/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>

#include "diagfuse/errors.hpp"

namespace diagfuse::ad {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using CMapVec = Eigen::Map<const Eigen::VectorXd>;

CMapMat cmat(const Tensor& t, std::size_t rows, std::size_t cols) {
  return CMapMat(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
MapMat mmat(Tensor& t, std::size_t rows, std::size_t cols) {
  return MapMat(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
CMapVec cvec(const Tensor& t) { return CMapVec(t.data(), static_cast<Eigen::Index>(t.size())); }
MapVec mvec(Tensor& t) { return MapVec(t.data(), static_cast<Eigen::Index>(t.size())); }

[[noreturn]] void shape_fail(OpKind kind, const std::string& what) {
  throw ShapeError(std::string(op_name(kind)) + ": " + what);
}

[[noreturn]] void shape_fail(OpKind kind, const Shape& a, const Shape& b) {
  shape_fail(kind, "incompatible dims " + shape_string(a) + " and " + shape_string(b));
}

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw Error("autodiff: handle without tape");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw Error("autodiff: operands on different tapes");
  return tape_of(a);
}

void require_rank(OpKind kind, Var x, std::size_t rank) {
  if (x.value().rank() != rank) {
    shape_fail(kind, "expected rank " + std::to_string(rank) + ", got " +
                         shape_string(x.dims()));
  }
}

// Layout helper for reductions along one axis.
struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_axis(OpKind kind, const Shape& dims, std::size_t axis) {
  if (axis >= dims.size()) {
    shape_fail(kind, "axis " + std::to_string(axis) + " out of range for " + shape_string(dims));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= dims[i];
  s.n = dims[axis];
  for (std::size_t i = axis + 1; i < dims.size(); ++i) s.inner *= dims[i];
  return s;
}

// Probability clamp inside bce.
constexpr double kEps = 1e-12;

enum class Elementwise { kAdd, kSub, kMul };

Var binary(OpKind kind, Elementwise op, Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool same = av.dims() == bv.dims();
  const bool a_scalar = av.size() == 1 && !same;
  const bool b_scalar = bv.size() == 1 && !same;
  if (!same && !a_scalar && !b_scalar) shape_fail(kind, av.dims(), bv.dims());

  Tensor out(a_scalar ? bv.dims() : av.dims());
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a_scalar ? av[0] : av[i];
    const double y = b_scalar ? bv[0] : bv[i];
    switch (op) {
      case Elementwise::kAdd: out[i] = x + y; break;
      case Elementwise::kSub: out[i] = x - y; break;
      case Elementwise::kMul: out[i] = x * y; break;
    }
  }
  const Var in[] = {a, b};
  return tape.push(kind, in, std::move(out),
                   [op, a_scalar, b_scalar](const Tape& t, const Node& self, const Tensor& g,
                                            std::span<Tensor* const> grads) {
                     const Tensor& av = t.node(self.inputs[0]).value;
                     const Tensor& bv = t.node(self.inputs[1]).value;
                     const std::size_t n = g.size();
                     if (Tensor* ga = grads[0]) {
                       for (std::size_t i = 0; i < n; ++i) {
                         double d = g[i];
                         if (op == Elementwise::kMul) d *= b_scalar ? bv[0] : bv[i];
                         (*ga)[a_scalar ? 0 : i] += d;
                       }
                     }
                     if (Tensor* gb = grads[1]) {
                       for (std::size_t i = 0; i < n; ++i) {
                         double d = g[i];
                         if (op == Elementwise::kSub) d = -d;
                         if (op == Elementwise::kMul) d *= a_scalar ? av[0] : av[i];
                         (*gb)[b_scalar ? 0 : i] += d;
                       }
                     }
                   });
}

template <typename Deriv>
Var unary_with_output(OpKind kind, Var x, Tensor out, Deriv deriv_from_output) {
  Tape& tape = tape_of(x);
  const Var in[] = {x};
  return tape.push(kind, in, std::move(out),
                   [deriv_from_output](const Tape&, const Node& self, const Tensor& g,
                                       std::span<Tensor* const> grads) {
                     if (Tensor* gx = grads[0]) {
                       const Tensor& y = self.value;
                       for (std::size_t i = 0; i < g.size(); ++i)
                         (*gx)[i] += g[i] * deriv_from_output(y[i]);
                     }
                   });
}

template <typename Fwd, typename Deriv>
Var unary(OpKind kind, Var x, Fwd fwd, Deriv deriv_from_output) {
  Tensor out(x.dims());
  const Tensor& xv = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  return unary_with_output(kind, x, std::move(out), deriv_from_output);
}

struct ConvGeom {
  std::size_t c, h, w, o, k, ho, wo, pad;
  int stride;
};

void im2col(const Tensor& in, const ConvGeom& g, Tensor& col) {
  const std::size_t npix = g.ho * g.wo;
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        double* row = col.data() + ((c * g.k + ky) * g.k + kx) * npix;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy) * g.stride - static_cast<long>(g.pad) +
                          static_cast<long>(ky);
          double* dst = row + oy * g.wo;
          if (iy < 0 || iy >= static_cast<long>(g.h)) {
            std::fill(dst, dst + g.wo, 0.0);
            continue;
          }
          const double* src = in.data() + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox) * g.stride - static_cast<long>(g.pad) +
                            static_cast<long>(kx);
            dst[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? 0.0
                                                                : src[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

void col2im_add(const RowMat& dcol, const ConvGeom& g, Tensor& din) {
  const std::size_t npix = g.ho * g.wo;
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const double* row = dcol.data() + ((c * g.k + ky) * g.k + kx) * npix;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy) * g.stride - static_cast<long>(g.pad) +
                          static_cast<long>(ky);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          double* dst = din.data() + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          const double* src = row + oy * g.wo;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox) * g.stride - static_cast<long>(g.pad) +
                            static_cast<long>(kx);
            if (ix >= 0 && ix < static_cast<long>(g.w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

Var conv_impl(Var input, Var weight, const Var* bias, int stride) {
  constexpr OpKind kind = OpKind::kConv2d;
  Tape& tape = tape_of(input, weight);
  require_rank(kind, input, 3);
  require_rank(kind, weight, 4);
  if (stride != 1 && stride != 2) shape_fail(kind, "stride must be 1 or 2");
  const Shape& id = input.dims();
  const Shape& wd = weight.dims();
  if (wd[1] != id[0] || wd[2] != wd[3] || wd[2] % 2 == 0) shape_fail(kind, id, wd);
  if (bias != nullptr) {
    tape_of(input, *bias);
    if (bias->dims() != Shape{wd[0]}) shape_fail(kind, wd, bias->dims());
  }
  ConvGeom g{id[0], id[1], id[2], wd[0], wd[2], id[1] / stride, id[2] / stride, wd[2] / 2,
             stride};
  if (g.ho == 0 || g.wo == 0) shape_fail(kind, "input " + shape_string(id) + " too small");

  const std::size_t ckk = g.c * g.k * g.k;
  const std::size_t npix = g.ho * g.wo;
  auto col = std::make_shared<Tensor>(Shape{ckk, npix});
  im2col(input.value(), g, *col);

  Tensor out({g.o, g.ho, g.wo});
  auto om = mmat(out, g.o, npix);
  om.noalias() = cmat(weight.value(), g.o, ckk) * cmat(*col, ckk, npix);
  if (bias != nullptr) {
    const Tensor& bv = bias->value();
    for (std::size_t o = 0; o < g.o; ++o) om.row(static_cast<Eigen::Index>(o)).array() += bv[o];
  }

  std::vector<Var> in{input, weight};
  if (bias != nullptr) in.push_back(*bias);
  return tape.push(kind, in, std::move(out),
                   [g, col](const Tape& t, const Node& self, const Tensor& grad,
                            std::span<Tensor* const> grads) {
                     const std::size_t ckk = g.c * g.k * g.k;
                     const std::size_t npix = g.ho * g.wo;
                     auto gm = cmat(grad, g.o, npix);
                     if (Tensor* gw = grads[1]) {
                       mmat(*gw, g.o, ckk).noalias() += gm * cmat(*col, ckk, npix).transpose();
                     }
                     if (grads.size() > 2 && grads[2] != nullptr) {
                       mvec(*grads[2]) += gm.rowwise().sum();
                     }
                     if (Tensor* gi = grads[0]) {
                       const Tensor& wv = t.node(self.inputs[1]).value;
                       RowMat dcol = cmat(wv, g.o, ckk).transpose() * gm;
                       col2im_add(dcol, g, *gi);
                     }
                   });
}

// Cosine/sine tables for e^{2 pi i a b / n}.
struct Twiddle {
  std::vector<double> cos, sin;
  std::size_t cols;
};

Twiddle twiddle(std::size_t rows, std::size_t cols, std::size_t n) {
  Twiddle t{std::vector<double>(rows * cols), std::vector<double>(rows * cols), cols};
  for (std::size_t a = 0; a < rows; ++a) {
    for (std::size_t b = 0; b < cols; ++b) {
      const double ang = 2.0 * std::numbers::pi * static_cast<double>((a * b) % n) /
                         static_cast<double>(n);
      t.cos[a * cols + b] = std::cos(ang);
      t.sin[a * cols + b] = std::sin(ang);
    }
  }
  return t;
}

}  // namespace

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kRelu: return "relu";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kConcat: return "concat";
    case OpKind::kAvgPool: return "avg_pool";
    case OpKind::kGlobalMean: return "global_mean";
    case OpKind::kBce: return "bce";
    case OpKind::kBilinear: return "bilinear";
    case OpKind::kSumAxis: return "sum_axis";
    case OpKind::kMean: return "mean";
    case OpKind::kReshape: return "reshape";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kBiasAdd: return "bias_add";
    case OpKind::kUpsample: return "upsample";
    case OpKind::kInverseRdft2: return "inverse_rdft2";
  }
  return "unknown";
}

const Tensor& Var::value() const {
  if (tape == nullptr) throw Error("autodiff: handle without tape");
  return tape->node(id).value;
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw NumericError("leaf: non-finite value");
  Node n;
  n.kind = OpKind::kLeaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::push(OpKind kind, std::span<const Var> inputs, Tensor value,
               Node::BackwardFn backward) {
  if (!value.all_finite()) {
    throw NumericError(std::string(op_name(kind)) + ": non-finite output " +
                       shape_string(value.dims()));
  }
  Node n;
  n.kind = kind;
  n.value = std::move(value);
  n.backward = std::move(backward);
  for (const Var& v : inputs) {
    if (v.tape != this) throw Error("autodiff: input from another tape");
    n.inputs.push_back(v.id);
    n.requires_grad = n.requires_grad || nodes_[v.id].requires_grad;
  }
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Gradients Tape::backprop(Var loss) const {
  if (loss.tape != this) throw Error("backprop: loss from another tape");
  const Tensor& lv = nodes_.at(loss.id).value;
  if (lv.size() != 1) throw ShapeError("backprop: loss must be scalar, got " + shape_string(lv.dims()));

  Gradients out;
  auto& grads = out.grads_;
  grads.resize(nodes_.size());
  grads[loss.id] = Tensor(lv.dims(), 1.0);
  std::vector<Tensor*> ptrs;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.requires_grad || grads[id].empty() || n.kind == OpKind::kLeaf) continue;
    ptrs.assign(n.inputs.size(), nullptr);
    for (std::size_t j = 0; j < n.inputs.size(); ++j) {
      const std::size_t in = n.inputs[j];
      if (!nodes_[in].requires_grad) continue;
      if (grads[in].empty()) grads[in] = Tensor(nodes_[in].value.dims(), 0.0);
      ptrs[j] = &grads[in];
    }
    n.backward(*this, n, grads[id], ptrs);
  }
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].kind == OpKind::kLeaf && grads[id].empty()) {
      grads[id] = Tensor(nodes_[id].value.dims(), 0.0);
    }
  }
  return out;
}

const Tensor& Gradients::of(std::size_t id) const {
  const Tensor& g = grads_.at(id);
  if (g.empty()) throw Error("gradients: node " + std::to_string(id) + " was not reached");
  return g;
}

Var add(Var a, Var b) { return binary(OpKind::kAdd, Elementwise::kAdd, a, b); }
Var sub(Var a, Var b) { return binary(OpKind::kSub, Elementwise::kSub, a, b); }
Var mul(Var a, Var b) { return binary(OpKind::kMul, Elementwise::kMul, a, b); }

Var matmul(Var a, Var b) {
  constexpr OpKind kind = OpKind::kMatMul;
  Tape& tape = tape_of(a, b);
  require_rank(kind, a, 2);
  require_rank(kind, b, 2);
  const std::size_t m = a.dims()[0], k = a.dims()[1], n = b.dims()[1];
  if (b.dims()[0] != k) shape_fail(kind, a.dims(), b.dims());
  Tensor out({m, n});
  mmat(out, m, n).noalias() = cmat(a.value(), m, k) * cmat(b.value(), k, n);
  const Var in[] = {a, b};
  return tape.push(kind, in, std::move(out),
                   [m, k, n](const Tape& t, const Node& self, const Tensor& g,
                             std::span<Tensor* const> grads) {
                     auto gm = cmat(g, m, n);
                     if (Tensor* ga = grads[0]) {
                       mmat(*ga, m, k).noalias() +=
                           gm * cmat(t.node(self.inputs[1]).value, k, n).transpose();
                     }
                     if (Tensor* gb = grads[1]) {
                       mmat(*gb, k, n).noalias() +=
                           cmat(t.node(self.inputs[0]).value, m, k).transpose() * gm;
                     }
                   });
}

Var conv2d(Var input, Var weight, int stride) { return conv_impl(input, weight, nullptr, stride); }
Var conv2d(Var input, Var weight, Var bias, int stride) {
  return conv_impl(input, weight, &bias, stride);
}

Var relu(Var x) {
  return unary(
      OpKind::kRelu, x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double y) { return y > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var x) {
  // 1 - 2 / (e^{2x} + 1) through Eigen's vectorized exp; |x| > 20 saturates
  // to +-1 in double precision anyway.
  Tensor out(x.dims());
  const auto e = (2.0 * cvec(x.value()).array().max(-20.0).min(20.0)).exp();
  mvec(out).array() = 1.0 - 2.0 / (e + 1.0);
  return unary_with_output(OpKind::kTanh, x, std::move(out),
                           [](double y) { return 1.0 - y * y; });
}

Var sigmoid(Var x) {
  return unary(
      OpKind::kSigmoid, x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double y) { return y * (1.0 - y); });
}

Var softmax(Var x, std::size_t axis) {
  constexpr OpKind kind = OpKind::kSoftmax;
  Tape& tape = tape_of(x);
  const AxisSplit s = split_axis(kind, x.dims(), axis);
  const Tensor& xv = x.value();
  Tensor out(x.dims());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.n * s.inner + i;
      double mx = xv[base];
      for (std::size_t k = 1; k < s.n; ++k) mx = std::max(mx, xv[base + k * s.inner]);
      double sum = 0.0;
      for (std::size_t k = 0; k < s.n; ++k) {
        const double e = std::exp(xv[base + k * s.inner] - mx);
        out[base + k * s.inner] = e;
        sum += e;
      }
      for (std::size_t k = 0; k < s.n; ++k) out[base + k * s.inner] /= sum;
    }
  }
  const Var in[] = {x};
  return tape.push(kind, in, std::move(out),
                   [s](const Tape&, const Node& self, const Tensor& g,
                       std::span<Tensor* const> grads) {
                     Tensor* gx = grads[0];
                     if (gx == nullptr) return;
                     const Tensor& y = self.value;
                     for (std::size_t o = 0; o < s.outer; ++o) {
                       for (std::size_t i = 0; i < s.inner; ++i) {
                         const std::size_t base = o * s.n * s.inner + i;
                         double dot = 0.0;
                         for (std::size_t k = 0; k < s.n; ++k)
                           dot += g[base + k * s.inner] * y[base + k * s.inner];
                         for (std::size_t k = 0; k < s.n; ++k) {
                           const std::size_t j = base + k * s.inner;
                           (*gx)[j] += y[j] * (g[j] - dot);
                         }
                       }
                     }
                   });
}

Var concat(std::span<const Var> parts) {
  constexpr OpKind kind = OpKind::kConcat;
  if (parts.empty()) shape_fail(kind, "no inputs");
  Tape& tape = tape_of(parts[0]);
  Shape rest(parts[0].dims().begin() + 1, parts[0].dims().end());
  std::size_t lead = 0;
  for (const Var& p : parts) {
    tape_of(parts[0], p);
    Shape r(p.dims().begin() + 1, p.dims().end());
    if (r != rest) shape_fail(kind, parts[0].dims(), p.dims());
    lead += p.dims()[0];
  }
  Shape dims = parts[0].dims();
  dims[0] = lead;
  Tensor out(dims);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    offsets.push_back(off);
    std::copy(p.value().values().begin(), p.value().values().end(), out.data() + off);
    off += p.value().size();
  }
  return tape.push(kind, parts, std::move(out),
                   [offsets](const Tape& t, const Node& self, const Tensor& g,
                             std::span<Tensor* const> grads) {
                     for (std::size_t j = 0; j < grads.size(); ++j) {
                       if (Tensor* gp = grads[j]) {
                         const std::size_t n = t.node(self.inputs[j]).value.size();
                         for (std::size_t i = 0; i < n; ++i) (*gp)[i] += g[offsets[j] + i];
                       }
                     }
                   });
}

Var avg_pool2(Var x) {
  constexpr OpKind kind = OpKind::kAvgPool;
  Tape& tape = tape_of(x);
  require_rank(kind, x, 3);
  const std::size_t c = x.dims()[0], h = x.dims()[1], w = x.dims()[2];
  const std::size_t ho = h / 2, wo = w / 2;
  if (ho == 0 || wo == 0) shape_fail(kind, "input " + shape_string(x.dims()) + " too small");
  const Tensor& xv = x.value();
  Tensor out({c, ho, wo});
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < ho; ++y)
      for (std::size_t z = 0; z < wo; ++z)
        out.at(k, y, z) = 0.25 * (xv.at(k, 2 * y, 2 * z) + xv.at(k, 2 * y, 2 * z + 1) +
                                  xv.at(k, 2 * y + 1, 2 * z) + xv.at(k, 2 * y + 1, 2 * z + 1));
  const Var in[] = {x};
  return tape.push(kind, in, std::move(out),
                   [c, ho, wo](const Tape&, const Node&, const Tensor& g,
                               std::span<Tensor* const> grads) {
                     Tensor* gx = grads[0];
                     if (gx == nullptr) return;
                     for (std::size_t k = 0; k < c; ++k)
                       for (std::size_t y = 0; y < ho; ++y)
                         for (std::size_t z = 0; z < wo; ++z) {
                           const double d = 0.25 * g.at(k, y, z);
                           gx->at(k, 2 * y, 2 * z) += d;
                           gx->at(k, 2 * y, 2 * z + 1) += d;
                           gx->at(k, 2 * y + 1, 2 * z) += d;
                           gx->at(k, 2 * y + 1, 2 * z + 1) += d;
                         }
                   });
}

Var global_mean(Var x) {
  constexpr OpKind kind = OpKind::kGlobalMean;
  Tape& tape = tape_of(x);
  require_rank(kind, x, 3);
  const std::size_t c = x.dims()[0], hw = x.dims()[1] * x.dims()[2];
  Tensor out({c});
  auto xm = cmat(x.value(), c, hw);
  mvec(out) = xm.rowwise().mean();
  const Var in[] = {x};
  return tape.push(kind, in, std::move(out),
                   [c, hw](const Tape&, const Node&, const Tensor& g,
                           std::span<Tensor* const> grads) {
                     if (Tensor* gx = grads[0]) {
                       auto gm = mmat(*gx, c, hw);
                       for (std::size_t k = 0; k < c; ++k)
                         gm.row(static_cast<Eigen::Index>(k)).array() +=
                             g[k] / static_cast<double>(hw);
                     }
                   });
}

Var bce(Var prob, Var target) {
  constexpr OpKind kind = OpKind::kBce;
  Tape& tape = tape_of(prob, target);
  if (prob.dims() != target.dims()) shape_fail(kind, prob.dims(), target.dims());
  const Tensor& p = prob.value();
  const Tensor& y = target.value();
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(p[i], kEps, 1.0 - kEps);
    sum -= y[i] * std::log(pc) + (1.0 - y[i]) * std::log1p(-pc);
  }
  const double count = static_cast<double>(p.size());
  const Var in[] = {prob, target};
  return tape.push(kind, in, Tensor::scalar(sum / count),
                   [count](const Tape& t, const Node& self, const Tensor& g,
                           std::span<Tensor* const> grads) {
                     const Tensor& p = t.node(self.inputs[0]).value;
                     const Tensor& y = t.node(self.inputs[1]).value;
                     const double scale = g[0] / count;
                     for (std::size_t i = 0; i < p.size(); ++i) {
                       const double pc = std::clamp(p[i], kEps, 1.0 - kEps);
                       if (grads[0] != nullptr)
                         (*grads[0])[i] -= scale * (y[i] / pc - (1.0 - y[i]) / (1.0 - pc));
                       if (grads[1] != nullptr)
                         (*grads[1])[i] -= scale * (std::log(pc) - std::log1p(-pc));
                     }
                   });
}

Var bilinear_resample(Var x, SampleGrid grid) {
  constexpr OpKind kind = OpKind::kBilinear;
  Tape& tape = tape_of(x);
  require_rank(kind, x, 3);
  const std::size_t npix = grid.out_h * grid.out_w;
  if (npix == 0 || grid.ys.size() != npix || grid.xs.size() != npix) {
    shape_fail(kind, "sample grid size does not match " + std::to_string(grid.out_h) + "x" +
                         std::to_string(grid.out_w));
  }
  const std::size_t c = x.dims()[0], h = x.dims()[1], w = x.dims()[2];

  // Precomputed taps: four source offsets and weights per output pixel.
  struct Tap {
    std::size_t i00, i01, i10, i11;
    double w00, w01, w10, w11;
  };
  auto taps = std::make_shared<std::vector<Tap>>(npix);
  for (std::size_t p = 0; p < npix; ++p) {
    const double yy = std::clamp(grid.ys[p], 0.0, static_cast<double>(h - 1));
    const double xx = std::clamp(grid.xs[p], 0.0, static_cast<double>(w - 1));
    const std::size_t y0 = static_cast<std::size_t>(std::floor(yy));
    const std::size_t x0 = static_cast<std::size_t>(std::floor(xx));
    const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
    const double fy = yy - static_cast<double>(y0), fx = xx - static_cast<double>(x0);
    (*taps)[p] = Tap{y0 * w + x0,           y0 * w + x1,           y1 * w + x0,
                     y1 * w + x1,           (1 - fy) * (1 - fx), (1 - fy) * fx,
                     fy * (1 - fx),         fy * fx};
  }
  const Tensor& xv = x.value();
  Tensor out({c, grid.out_h, grid.out_w});
  for (std::size_t k = 0; k < c; ++k) {
    const double* src = xv.data() + k * h * w;
    double* dst = out.data() + k * npix;
    for (std::size_t p = 0; p < npix; ++p) {
      const Tap& t = (*taps)[p];
      dst[p] = t.w00 * src[t.i00] + t.w01 * src[t.i01] + t.w10 * src[t.i10] + t.w11 * src[t.i11];
    }
  }
  const Var in[] = {x};
  return tape.push(kind, in, std::move(out),
                   [taps, c, h, w, npix](const Tape&, const Node&, const Tensor& g,
                                         std::span<Tensor* const> grads) {
                     Tensor* gx = grads[0];
                     if (gx == nullptr) return;
                     for (std::size_t k = 0; k < c; ++k) {
                       double* dst = gx->data() + k * h * w;
                       const double* src = g.data() + k * npix;
                       for (std::size_t p = 0; p < npix; ++p) {
                         const Tap& t = (*taps)[p];
                         dst[t.i00] += t.w00 * src[p];
                         dst[t.i01] += t.w01 * src[p];
                         dst[t.i10] += t.w10 * src[p];
                         dst[t.i11] += t.w11 * src[p];
                       }
                     }
                   });
}

Var sum_axis(Var x, std::size_t axis) {
  constexpr OpKind kind = OpKind::kSumAxis;
  Tape& tape = tape_of(x);
  const AxisSplit s = split_axis(kind, x.dims(), axis);
  Shape dims = x.dims();
  dims.erase(dims.begin() + static_cast<std::ptrdiff_t>(axis));
  if (dims.empty()) dims.push_back(1);
  Tensor out(dims);
  const Tensor& xv = x.value();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t k = 0; k < s.n; ++k)
      for (std::size_t i = 0; i < s.inner; ++i)
        out[o * s.inner + i] += xv[(o * s.n + k) * s.inner + i];
  const Var in[] = {x};
  return tape.push(kind, in, std::move(out),
                   [s](const Tape&, const Node&, const Tensor& g,
                       std::span<Tensor* const> grads) {
                     if (Tensor* gx = grads[0]) {
                       for (std::size_t o = 0; o < s.outer; ++o)
                         for (std::size_t k = 0; k < s.n; ++k)
                           for (std::size_t i = 0; i < s.inner; ++i)
                             (*gx)[(o * s.n + k) * s.inner + i] += g[o * s.inner + i];
                     }
                   });
}

Var mean(Var x) {
  Tape& tape = tape_of(x);
  const double n = static_cast<double>(x.value().size());
  const Var in[] = {x};
  return tape.push(OpKind::kMean, in, Tensor::scalar(cvec(x.value()).sum() / n),
                   [n](const Tape&, const Node&, const Tensor& g,
                       std::span<Tensor* const> grads) {
                     if (Tensor* gx = grads[0]) mvec(*gx).array() += g[0] / n;
                   });
}

Var reshape(Var x, Shape dims) {
  Tape& tape = tape_of(x);
  if (shape_size(dims) != x.value().size()) shape_fail(OpKind::kReshape, x.dims(), dims);
  const Var in[] = {x};
  return tape.push(OpKind::kReshape, in, x.value().reshaped(std::move(dims)),
                   [](const Tape&, const Node&, const Tensor& g,
                      std::span<Tensor* const> grads) {
                     if (Tensor* gx = grads[0]) mvec(*gx) += cvec(g);
                   });
}

Var transpose(Var x) {
  constexpr OpKind kind = OpKind::kTranspose;
  Tape& tape = tape_of(x);
  require_rank(kind, x, 2);
  const std::size_t r = x.dims()[0], c = x.dims()[1];
  Tensor out({c, r});
  mmat(out, c, r) = cmat(x.value(), r, c).transpose();
  const Var in[] = {x};
  return tape.push(kind, in, std::move(out),
                   [r, c](const Tape&, const Node&, const Tensor& g,
                          std::span<Tensor* const> grads) {
                     if (Tensor* gx = grads[0]) mmat(*gx, r, c) += cmat(g, c, r).transpose();
                   });
}

Var bias_add(Var x, Var bias) {
  constexpr OpKind kind = OpKind::kBiasAdd;
  Tape& tape = tape_of(x, bias);
  require_rank(kind, x, 2);
  const std::size_t n = x.dims()[0], c = x.dims()[1];
  if (bias.dims() != Shape{c}) shape_fail(kind, x.dims(), bias.dims());
  Tensor out = x.value();
  mmat(out, n, c).rowwise() += cvec(bias.value()).transpose();
  const Var in[] = {x, bias};
  return tape.push(kind, in, std::move(out),
                   [n, c](const Tape&, const Node&, const Tensor& g,
                          std::span<Tensor* const> grads) {
                     if (Tensor* gx = grads[0]) mvec(*gx) += cvec(g);
                     if (Tensor* gb = grads[1]) mvec(*gb) += cmat(g, n, c).colwise().sum().transpose();
                   });
}

Var upsample2(Var x) {
  constexpr OpKind kind = OpKind::kUpsample;
  Tape& tape = tape_of(x);
  require_rank(kind, x, 3);
  const std::size_t c = x.dims()[0], h = x.dims()[1], w = x.dims()[2];
  const Tensor& xv = x.value();
  Tensor out({c, 2 * h, 2 * w});
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < 2 * h; ++y)
      for (std::size_t z = 0; z < 2 * w; ++z) out.at(k, y, z) = xv.at(k, y / 2, z / 2);
  const Var in[] = {x};
  return tape.push(kind, in, std::move(out),
                   [c, h, w](const Tape&, const Node&, const Tensor& g,
                             std::span<Tensor* const> grads) {
                     if (Tensor* gx = grads[0]) {
                       for (std::size_t k = 0; k < c; ++k)
                         for (std::size_t y = 0; y < 2 * h; ++y)
                           for (std::size_t z = 0; z < 2 * w; ++z)
                             gx->at(k, y / 2, z / 2) += g.at(k, y, z);
                     }
                   });
}

Var inverse_rdft2(Var re, Var im, std::size_t width) {
  constexpr OpKind kind = OpKind::kInverseRdft2;
  Tape& tape = tape_of(re, im);
  require_rank(kind, re, 3);
  if (re.dims() != im.dims()) shape_fail(kind, re.dims(), im.dims());
  const std::size_t c = re.dims()[0], h = re.dims()[1], half = re.dims()[2];
  if (width == 0 || half != width / 2 + 1) {
    shape_fail(kind, "half spectrum " + shape_string(re.dims()) + " does not match width " +
                         std::to_string(width));
  }
  const std::size_t w = width;
  auto ty = std::make_shared<Twiddle>(twiddle(h, h, h));     // [u][y]
  auto tx = std::make_shared<Twiddle>(twiddle(half, w, w));  // [v][x]
  auto colw = std::make_shared<std::vector<double>>(half, 2.0);
  (*colw)[0] = 1.0;
  if (w % 2 == 0) (*colw)[half - 1] = 1.0;
  const double norm = 1.0 / std::sqrt(static_cast<double>(h * w));

  const Tensor& a = re.value();
  const Tensor& b = im.value();
  Tensor out({c, h, w});
  std::vector<double> zr(h * half), zi(h * half);
  for (std::size_t k = 0; k < c; ++k) {
    // Column transform over u: Z[y,v] = sum_u (a + i b)[u,v] e^{2 pi i u y / h}.
    std::fill(zr.begin(), zr.end(), 0.0);
    std::fill(zi.begin(), zi.end(), 0.0);
    for (std::size_t u = 0; u < h; ++u) {
      for (std::size_t y = 0; y < h; ++y) {
        const double cs = ty->cos[u * h + y], sn = ty->sin[u * h + y];
        for (std::size_t v = 0; v < half; ++v) {
          const double ar = a.at(k, u, v), bi = b.at(k, u, v);
          zr[y * half + v] += ar * cs - bi * sn;
          zi[y * half + v] += ar * sn + bi * cs;
        }
      }
    }
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (std::size_t v = 0; v < half; ++v) {
          acc += (*colw)[v] * (zr[y * half + v] * tx->cos[v * w + x] -
                               zi[y * half + v] * tx->sin[v * w + x]);
        }
        out.at(k, y, x) = norm * acc;
      }
    }
  }
  const Var in[] = {re, im};
  return tape.push(
      kind, in, std::move(out),
      [c, h, w, half, ty, tx, colw, norm](const Tape&, const Node&, const Tensor& g,
                                          std::span<Tensor* const> grads) {
        if (grads[0] == nullptr && grads[1] == nullptr) return;
        std::vector<double> dzr(h * half), dzi(h * half);
        for (std::size_t k = 0; k < c; ++k) {
          for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t v = 0; v < half; ++v) {
              double sc = 0.0, ss = 0.0;
              for (std::size_t x = 0; x < w; ++x) {
                sc += g.at(k, y, x) * tx->cos[v * w + x];
                ss += g.at(k, y, x) * tx->sin[v * w + x];
              }
              dzr[y * half + v] = norm * (*colw)[v] * sc;
              dzi[y * half + v] = -norm * (*colw)[v] * ss;
            }
          }
          for (std::size_t u = 0; u < h; ++u) {
            for (std::size_t v = 0; v < half; ++v) {
              double da = 0.0, db = 0.0;
              for (std::size_t y = 0; y < h; ++y) {
                const double cs = ty->cos[u * h + y], sn = ty->sin[u * h + y];
                da += dzr[y * half + v] * cs + dzi[y * half + v] * sn;
                db += -dzr[y * half + v] * sn + dzi[y * half + v] * cs;
              }
              if (grads[0] != nullptr) grads[0]->at(k, u, v) += da;
              if (grads[1] != nullptr) grads[1]->at(k, u, v) += db;
            }
          }
        }
      });
}

Var record(OpKind kind, std::span<const Var> inputs, const OpAttrs& attrs) {
  auto arity = [&](std::size_t n) {
    if (inputs.size() != n) {
      shape_fail(kind, "expected " + std::to_string(n) + " inputs, got " +
                           std::to_string(inputs.size()));
    }
  };
  switch (kind) {
    case OpKind::kLeaf: shape_fail(kind, "leaves are created with Tape::leaf");
    case OpKind::kAdd: arity(2); return add(inputs[0], inputs[1]);
    case OpKind::kSub: arity(2); return sub(inputs[0], inputs[1]);
    case OpKind::kMul: arity(2); return mul(inputs[0], inputs[1]);
    case OpKind::kMatMul: arity(2); return matmul(inputs[0], inputs[1]);
    case OpKind::kConv2d:
      if (inputs.size() == 2) return conv2d(inputs[0], inputs[1], attrs.stride);
      arity(3);
      return conv2d(inputs[0], inputs[1], inputs[2], attrs.stride);
    case OpKind::kRelu: arity(1); return relu(inputs[0]);
    case OpKind::kTanh: arity(1); return tanh(inputs[0]);
    case OpKind::kSigmoid: arity(1); return sigmoid(inputs[0]);
    case OpKind::kSoftmax: arity(1); return softmax(inputs[0], attrs.axis);
    case OpKind::kConcat: return concat(inputs);
    case OpKind::kAvgPool: arity(1); return avg_pool2(inputs[0]);
    case OpKind::kGlobalMean: arity(1); return global_mean(inputs[0]);
    case OpKind::kBce: arity(2); return bce(inputs[0], inputs[1]);
    case OpKind::kBilinear: arity(1); return bilinear_resample(inputs[0], attrs.grid);
    case OpKind::kSumAxis: arity(1); return sum_axis(inputs[0], attrs.axis);
    case OpKind::kMean: arity(1); return mean(inputs[0]);
    case OpKind::kReshape: arity(1); return reshape(inputs[0], attrs.shape);
    case OpKind::kTranspose: arity(1); return transpose(inputs[0]);
    case OpKind::kBiasAdd: arity(2); return bias_add(inputs[0], inputs[1]);
    case OpKind::kUpsample: arity(1); return upsample2(inputs[0]);
    case OpKind::kInverseRdft2: arity(2); return inverse_rdft2(inputs[0], inputs[1], attrs.width);
  }
  shape_fail(kind, "unknown op");
}

double grad_check(const std::function<Var(Tape&, Var)>& build, const Tensor& leaf, double eps) {
  if (!(eps > 0.0)) throw Error("grad_check: eps must be positive");
  Tensor analytic;
  {
    Tape tape;
    Var x = tape.leaf(leaf);
    Var loss = build(tape, x);
    analytic = tape.backprop(loss)[x];
  }
  auto eval = [&](const Tensor& at) {
    Tape tape;
    Var x = tape.leaf(at);
    return build(tape, x).value()[0];
  };
  double worst = 0.0;
  Tensor probe = leaf;
  for (std::size_t i = 0; i < leaf.size(); ++i) {
    probe[i] = leaf[i] + eps;
    const double up = eval(probe);
    probe[i] = leaf[i] - eps;
    const double down = eval(probe);
    probe[i] = leaf[i];
    const double numeric = (up - down) / (2.0 * eps);
    const double err = std::abs(analytic[i] - numeric) / std::max(std::abs(analytic[i]), 1e-8);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace diagfuse::ad
