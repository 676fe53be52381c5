#pragma once

// Tape-based reverse-mode differentiation over Tensor values.
//
// Each primitive computes its forward value eagerly, rejects non-finite
// results, and appends a node holding the value and a backward closure.
// Node ids are assigned in creation order, so the tape is topologically
// sorted by construction and backprop is a single reverse sweep.
//
// Broadcasting is limited to scalar-vs-tensor in add/sub/mul. Everything
// else requires explicit shapes.

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "diagfuse/tensor.hpp"

namespace diagfuse::ad {

enum class OpKind {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kMatMul,
  kConv2d,
  kRelu,
  kTanh,
  kSigmoid,
  kSoftmax,
  kConcat,
  kAvgPool,
  kGlobalMean,
  kBce,
  kBilinear,
  kSumAxis,
  kMean,
  kReshape,
  kTranspose,
  kBiasAdd,
  kUpsample,
  kInverseRdft2,
};

std::string_view op_name(OpKind kind);

class Tape;

// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& dims() const { return value().dims(); }
};

// Source coordinates (in input pixel units) for every output pixel of a
// bilinear resample. Coordinates outside the input clamp to the edge.
struct SampleGrid {
  std::size_t out_h = 0;
  std::size_t out_w = 0;
  std::vector<double> ys;
  std::vector<double> xs;
};

// Attributes for the generic record() entry point.
struct OpAttrs {
  int stride = 1;          // conv2d
  std::size_t axis = 0;    // softmax, sum_axis
  Shape shape;             // reshape
  SampleGrid grid;         // bilinear
  std::size_t width = 0;   // inverse_rdft2 output width
};

class Gradients;

struct Node {
  // Accumulates input gradients given the gradient of this node's output.
  // Entries of input_grads are null for inputs that do not require grad.
  using BackwardFn = std::function<void(const Tape& tape, const Node& self,
                                        const Tensor& grad_out,
                                        std::span<Tensor* const> input_grads)>;

  OpKind kind = OpKind::kLeaf;
  std::vector<std::size_t> inputs;
  Tensor value;
  BackwardFn backward;
  bool requires_grad = false;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  const Node& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }

  // Used by primitives. Checks the forward value is finite.
  Var push(OpKind kind, std::span<const Var> inputs, Tensor value,
           Node::BackwardFn backward);

  // Reverse sweep from a scalar loss node.
  Gradients backprop(Var loss) const;

 private:
  // deque: references returned by Var::value() stay valid as nodes are added.
  std::deque<Node> nodes_;
};

// Gradient map node_id -> Tensor. Leaves never reached by the sweep hold
// zeros of the leaf's shape.
class Gradients {
 public:
  const Tensor& operator[](Var v) const { return of(v.id); }
  const Tensor& of(std::size_t id) const;

 private:
  friend class Tape;
  std::vector<Tensor> grads_;
};

// Primitives. All take and return handles on the same tape.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var matmul(Var a, Var b);
// input CxHxW, weight OxCxKxK (K odd), optional bias {O}. Zero padding K/2;
// output spatial size is H/stride x W/stride (floor).
Var conv2d(Var input, Var weight, int stride);
Var conv2d(Var input, Var weight, Var bias, int stride);
Var relu(Var x);
Var tanh(Var x);
Var sigmoid(Var x);
Var softmax(Var x, std::size_t axis);
Var concat(std::span<const Var> parts);  // along axis 0
Var avg_pool2(Var x);                    // CxHxW -> Cx(H/2)x(W/2)
Var global_mean(Var x);                  // CxHxW -> {C}
// Mean binary cross-entropy of probabilities against (soft) targets.
Var bce(Var prob, Var target);
Var bilinear_resample(Var x, SampleGrid grid);  // CxHxW -> Cxout_hxout_w
Var sum_axis(Var x, std::size_t axis);
Var mean(Var x);
Var reshape(Var x, Shape dims);
Var transpose(Var x);    // rank 2
Var bias_add(Var x, Var bias);  // NxC + {C}
Var upsample2(Var x);    // nearest, CxHxW -> Cx2Hx2W
// Real 2-D inverse transform of a half spectrum. re, im: CxHx(W/2+1).
// out[c,y,x] = 1/sqrt(HW) * sum_{u,v} g_v Re((re+i im)[c,u,v] e^{2pi i(uy/H+vx/W)})
// with g_v = 1 for the DC column (and the Nyquist column when W is even), 2 otherwise.
Var inverse_rdft2(Var re, Var im, std::size_t width);

// Dispatch by kind; the primitive set as data, for harnesses that sweep it.
Var record(OpKind kind, std::span<const Var> inputs, const OpAttrs& attrs = {});

// Max over leaf elements of |analytic - central difference| / max(|analytic|, 1e-8).
// build maps a fresh tape and the leaf handle to a scalar loss.
double grad_check(const std::function<Var(Tape&, Var)>& build, const Tensor& leaf,
                  double eps);

}  // namespace diagfuse::ad
