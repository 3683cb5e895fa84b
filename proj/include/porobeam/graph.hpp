#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "porobeam/fourier_kernels.hpp"
#include "porobeam/tensor.hpp"

namespace porobeam::ad {

// Reverse-mode automatic differentiation over dense tensors.
//
// A Graph is an immutable-once-built DAG of tensor operations with statically
// known shapes. backward() is symbolic: it appends the adjoint computation as
// new graph nodes, so gradients are themselves differentiable. Nested
// application yields second-order spatial derivatives of network outputs and,
// on top of those, parameter gradients of residual losses.

enum class Op : std::uint8_t {
  kInput,
  kConstant,
  kAdd,
  kSub,
  kMul,
  kAffine,  // a*x + b elementwise, constants in attrs
  kExp,
  kTanh,
  kSigmoid,
  kErf,
  kSqrt,
  kRecip,
  kGelu,      // exact erf form; fused
  kGeluGrad,  // derivative of gelu; not differentiable further
  kMatMul,    // attrs: transpose flags
  kSum,
  kReduceRows,    // [n,m] -> [m]
  kReduceCols,    // [n,m] -> [n]
  kExpandRows,    // [m] -> [n,m]
  kExpandCols,    // [n] -> [n,m]
  kScalarExpand,  // [] -> shape
  kSliceCol,      // [n,c] -> [n]
  kColExpand,     // [n] -> [n,c], zero except column j
  kReshape,
  kDft2,         // [B,Nx,Nz,C] -> [B,mx,mz,C,2], unnormalized forward
  kDft2T,        // exact transpose of kDft2
  kIdft2,        // [B,mx,mz,C,2] -> [B,Nx,Nz,C], conjugate-symmetric inverse
  kIdft2T,       // exact transpose of kIdft2
  kModeMul,      // per-mode complex channel mix
  kModeOuterRe,  // d(mode_mul)/dR, real part
  kModeOuterIm,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::kInput: return "input";
    case Op::kConstant: return "constant";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kAffine: return "affine";
    case Op::kExp: return "exp";
    case Op::kTanh: return "tanh";
    case Op::kSigmoid: return "sigmoid";
    case Op::kErf: return "erf";
    case Op::kSqrt: return "sqrt";
    case Op::kRecip: return "recip";
    case Op::kGelu: return "gelu";
    case Op::kGeluGrad: return "gelu_grad";
    case Op::kMatMul: return "matmul";
    case Op::kSum: return "sum";
    case Op::kReduceRows: return "reduce_rows";
    case Op::kReduceCols: return "reduce_cols";
    case Op::kExpandRows: return "expand_rows";
    case Op::kExpandCols: return "expand_cols";
    case Op::kScalarExpand: return "scalar_expand";
    case Op::kSliceCol: return "slice_col";
    case Op::kColExpand: return "col_expand";
    case Op::kReshape: return "reshape";
    case Op::kDft2: return "dft2";
    case Op::kDft2T: return "dft2_t";
    case Op::kIdft2: return "idft2";
    case Op::kIdft2T: return "idft2_t";
    case Op::kModeMul: return "mode_mul";
    case Op::kModeOuterRe: return "mode_outer_re";
    case Op::kModeOuterIm: return "mode_outer_im";
  }
  return "?";
}

using NodeId = std::int32_t;

struct Attrs {
  int i0 = 0, i1 = 0;
  bool f0 = false, f1 = false;
  double a = 1.0, b = 0.0;
};

struct Node {
  Op op;
  std::array<NodeId, 3> parent{-1, -1, -1};
  Attrs attr;
  Tensor value;
  bool bound = false;  // inputs only
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  std::size_t size() const { return nodes_.size(); }
  const Shape& shape(NodeId id) const { return nodes_.at(id).value.shape(); }
  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
  Op op(NodeId id) const { return nodes_.at(id).op; }

  /// Per-node finiteness checks during evaluation (slow; for tests).
  void set_check_finite(bool on) { check_finite_ = on; }

  NodeId input(Shape s) {
    Node n{Op::kInput, {-1, -1, -1}, {}, Tensor(std::move(s)), false};
    nodes_.push_back(std::move(n));
    return last();
  }

  NodeId constant(Tensor t) {
    Node n{Op::kConstant, {-1, -1, -1}, {}, std::move(t), true};
    nodes_.push_back(std::move(n));
    return last();
  }

  NodeId constant(double v) { return constant(Tensor::scalar(v)); }

  void bind(NodeId id, const Tensor& t) {
    Node& n = nodes_.at(id);
    if (n.op != Op::kInput) throw Error("bind: node is not an input");
    if (t.shape() != n.value.shape())
      throw Error("bind: shape mismatch, expected " + shape_str(n.value.shape()) + " got " +
                  shape_str(t.shape()));
    n.value = t;
    n.bound = true;
  }

  void bind(NodeId id, std::span<const double> v) {
    Node& n = nodes_.at(id);
    if (n.op != Op::kInput) throw Error("bind: node is not an input");
    if (v.size() != n.value.size()) throw Error("bind: size mismatch");
    std::copy(v.begin(), v.end(), n.value.data());
    n.bound = true;
  }

  // ---- elementwise builders ----

  NodeId add(NodeId a, NodeId b) { return binary(Op::kAdd, a, b); }
  NodeId sub(NodeId a, NodeId b) { return binary(Op::kSub, a, b); }
  NodeId mul(NodeId a, NodeId b) { return binary(Op::kMul, a, b); }

  NodeId affine(NodeId a, double alpha, double beta) {
    Attrs at;
    at.a = alpha;
    at.b = beta;
    return make(Op::kAffine, {a}, shape(a), at);
  }
  NodeId neg(NodeId a) { return affine(a, -1.0, 0.0); }

  NodeId exp_(NodeId a) { return unary(Op::kExp, a); }
  NodeId tanh_(NodeId a) { return unary(Op::kTanh, a); }
  NodeId sigmoid(NodeId a) { return unary(Op::kSigmoid, a); }
  NodeId erf_(NodeId a) { return unary(Op::kErf, a); }
  NodeId sqrt_(NodeId a) { return unary(Op::kSqrt, a); }
  NodeId recip(NodeId a) { return unary(Op::kRecip, a); }
  NodeId gelu(NodeId a) { return unary(Op::kGelu, a); }
  NodeId gelu_grad(NodeId a) { return unary(Op::kGeluGrad, a); }
  NodeId swish(NodeId a) { return mul(a, sigmoid(a)); }
  NodeId square(NodeId a) { return mul(a, a); }

  // ---- structure builders ----

  NodeId matmul(NodeId a, NodeId b, bool ta = false, bool tb = false) {
    const Shape& sa = shape(a);
    const Shape& sb = shape(b);
    if (sa.size() != 2 || sb.size() != 2) throw Error("matmul: rank-2 operands required");
    const std::size_t m = ta ? sa[1] : sa[0];
    const std::size_t k = ta ? sa[0] : sa[1];
    const std::size_t k2 = tb ? sb[1] : sb[0];
    const std::size_t n = tb ? sb[0] : sb[1];
    if (k != k2)
      throw Error("matmul: inner dimensions differ, " + shape_str(sa) + " x " + shape_str(sb));
    Attrs at;
    at.f0 = ta;
    at.f1 = tb;
    return make(Op::kMatMul, {a, b}, Shape{m, n}, at);
  }

  NodeId sum(NodeId a) { return make(Op::kSum, {a}, Shape{}, {}); }

  NodeId reduce_rows(NodeId a) {
    require_rank(a, 2, "reduce_rows");
    return make(Op::kReduceRows, {a}, Shape{shape(a)[1]}, {});
  }
  NodeId reduce_cols(NodeId a) {
    require_rank(a, 2, "reduce_cols");
    return make(Op::kReduceCols, {a}, Shape{shape(a)[0]}, {});
  }
  NodeId expand_rows(NodeId v, std::size_t n) {
    require_rank(v, 1, "expand_rows");
    return make(Op::kExpandRows, {v}, Shape{n, shape(v)[0]}, {});
  }
  NodeId expand_cols(NodeId v, std::size_t m) {
    require_rank(v, 1, "expand_cols");
    return make(Op::kExpandCols, {v}, Shape{shape(v)[0], m}, {});
  }
  NodeId scalar_expand(NodeId s, Shape out) {
    if (!shape(s).empty()) throw Error("scalar_expand: scalar parent required");
    return make(Op::kScalarExpand, {s}, std::move(out), {});
  }

  NodeId slice_col(NodeId a, std::size_t j) {
    require_rank(a, 2, "slice_col");
    if (j >= shape(a)[1]) throw Error("slice_col: column out of range");
    Attrs at;
    at.i0 = static_cast<int>(j);
    return make(Op::kSliceCol, {a}, Shape{shape(a)[0]}, at);
  }
  NodeId col_expand(NodeId v, std::size_t j, std::size_t c) {
    require_rank(v, 1, "col_expand");
    if (j >= c) throw Error("col_expand: column out of range");
    Attrs at;
    at.i0 = static_cast<int>(j);
    return make(Op::kColExpand, {v}, Shape{shape(v)[0], c}, at);
  }

  NodeId reshape(NodeId a, Shape out) {
    if (numel(out) != value(a).size()) throw Error("reshape: element count mismatch");
    return make(Op::kReshape, {a}, std::move(out), {});
  }

  /// Mean over all entries.
  NodeId mean(NodeId a) {
    const std::size_t n = value(a).size();
    return affine(sum(a), 1.0 / static_cast<double>(n), 0.0);
  }

  // ---- spectral builders ----

  NodeId dft2(NodeId a, std::size_t mx, std::size_t mz) {
    const Shape& s = shape(a);
    if (s.size() != 4) throw Error("dft2: rank-4 input [B,Nx,Nz,C] required");
    if (mx < 1 || mx > s[1] || mz < 1 || mz > s[2] / 2 + 1)
      throw Error("dft2: modes exceed Nyquist limits");
    Attrs at;
    at.i0 = static_cast<int>(mx);
    at.i1 = static_cast<int>(mz);
    return make(Op::kDft2, {a}, Shape{s[0], mx, mz, s[3], 2}, at);
  }

  NodeId dft2_t(NodeId c, std::size_t nx, std::size_t nz) {
    const Shape& s = shape(c);
    if (s.size() != 5 || s[4] != 2) throw Error("dft2_t: rank-5 coefficient input required");
    Attrs at;
    at.i0 = static_cast<int>(nx);
    at.i1 = static_cast<int>(nz);
    return make(Op::kDft2T, {c}, Shape{s[0], nx, nz, s[3]}, at);
  }

  NodeId idft2(NodeId c, std::size_t nx, std::size_t nz) {
    const Shape& s = shape(c);
    if (s.size() != 5 || s[4] != 2) throw Error("idft2: rank-5 coefficient input required");
    if (s[1] > nx || s[2] > nz / 2 + 1) throw Error("idft2: modes exceed Nyquist limits");
    Attrs at;
    at.i0 = static_cast<int>(nx);
    at.i1 = static_cast<int>(nz);
    return make(Op::kIdft2, {c}, Shape{s[0], nx, nz, s[3]}, at);
  }

  NodeId idft2_t(NodeId a, std::size_t mx, std::size_t mz) {
    const Shape& s = shape(a);
    if (s.size() != 4) throw Error("idft2_t: rank-4 input required");
    Attrs at;
    at.i0 = static_cast<int>(mx);
    at.i1 = static_cast<int>(mz);
    return make(Op::kIdft2T, {a}, Shape{s[0], mx, mz, s[3], 2}, at);
  }

  /// coef [B,mx,mz,Cin,2] x R [mx,mz,C,C2] -> [B,mx,mz,Cout,2]; see fourier::mode_mul.
  NodeId mode_mul(NodeId coef, NodeId rre, NodeId rim, bool conj_t = false) {
    const Shape& sc = shape(coef);
    const Shape& sr = shape(rre);
    if (sc.size() != 5 || sr.size() != 4) throw Error("mode_mul: bad operand ranks");
    if (shape(rim) != sr) throw Error("mode_mul: Rre/Rim shape mismatch");
    if (sc[1] != sr[0] || sc[2] != sr[1]) throw Error("mode_mul: mode counts differ");
    const std::size_t cin = conj_t ? sr[3] : sr[2];
    const std::size_t cout = conj_t ? sr[2] : sr[3];
    if (sc[3] != cin) throw Error("mode_mul: channel mismatch");
    Attrs at;
    at.f0 = conj_t;
    return make(Op::kModeMul, {coef, rre, rim}, Shape{sc[0], sc[1], sc[2], cout, 2}, at);
  }

  NodeId mode_outer(NodeId a, NodeId g, bool imag) {
    const Shape& sa = shape(a);
    const Shape& sg = shape(g);
    if (sa.size() != 5 || sg.size() != 5) throw Error("mode_outer: rank-5 operands required");
    return make(imag ? Op::kModeOuterIm : Op::kModeOuterRe, {a, g},
                Shape{sa[1], sa[2], sa[3], sg[3]}, {});
  }

  // ---- evaluation ----

  /// Computes the ancestor closure of `targets` in topological order.
  void evaluate(std::span<const NodeId> targets) {
    const std::size_t n = nodes_.size();
    need_.assign(n, 0);
    NodeId hi = -1;
    for (NodeId t : targets) {
      need_.at(t) = 1;
      hi = std::max(hi, t);
    }
    for (NodeId i = hi; i >= 0; --i) {
      if (!need_[i]) continue;
      for (NodeId p : nodes_[i].parent)
        if (p >= 0) need_[p] = 1;
    }
    for (NodeId i = 0; i <= hi; ++i) {
      if (!need_[i]) continue;
      compute(i);
      if (check_finite_ && !nodes_[i].value.all_finite())
        throw Error(std::string("non-finite intermediate in ") + op_name(nodes_[i].op));
    }
  }

  void evaluate(std::initializer_list<NodeId> targets) {
    evaluate(std::span<const NodeId>(targets.begin(), targets.size()));
  }

  // ---- reverse mode ----

  /// Appends the adjoint computation of scalar `f` w.r.t. `wrt` as new nodes
  /// and returns one node per entry of `wrt`. Parameters unreachable from `f`
  /// get constant zero nodes.
  std::vector<NodeId> backward(NodeId f, std::span<const NodeId> wrt) {
    if (!shape(f).empty()) throw Error("backward: target must be scalar");
    const NodeId n = static_cast<NodeId>(f) + 1;
    // anc: ancestors of f (including f). dep: nodes depending on some wrt.
    std::vector<std::uint8_t> anc(n, 0), dep(n, 0);
    anc[f] = 1;
    for (NodeId i = f; i >= 0; --i) {
      if (!anc[i]) continue;
      for (NodeId p : nodes_[i].parent)
        if (p >= 0) anc[p] = 1;
    }
    for (NodeId w : wrt) {
      if (w >= n) throw Error("backward: wrt node is not an ancestor of the target");
      dep[w] = 1;
    }
    for (NodeId i = 0; i < n; ++i) {
      if (dep[i]) continue;
      for (NodeId p : nodes_[i].parent)
        if (p >= 0 && dep[p]) {
          dep[i] = 1;
          break;
        }
    }
    std::vector<NodeId> adj(n, -1);
    if (dep[f]) adj[f] = constant(Tensor::scalar(1.0));
    for (NodeId i = f; i >= 0; --i) {
      if (!anc[i] || !dep[i] || adj[i] < 0) continue;
      emit_vjp(i, adj[i], adj, dep);
    }
    std::vector<NodeId> out;
    out.reserve(wrt.size());
    for (NodeId w : wrt) out.push_back(adj[w] >= 0 ? adj[w] : constant(Tensor(shape(w))));
    return out;
  }

  std::vector<NodeId> backward(NodeId f, std::initializer_list<NodeId> wrt) {
    return backward(f, std::span<const NodeId>(wrt.begin(), wrt.size()));
  }

  /// Evaluates d f / d wrt at the currently bound inputs.
  std::vector<Tensor> gradient(NodeId f, std::span<const NodeId> wrt) {
    std::vector<NodeId> g = backward(f, wrt);
    evaluate(g);
    std::vector<Tensor> out;
    out.reserve(g.size());
    for (NodeId id : g) {
      if (!value(id).all_finite()) throw Error("gradient: non-finite result");
      out.push_back(value(id));
    }
    return out;
  }

 private:
  NodeId last() const { return static_cast<NodeId>(nodes_.size()) - 1; }

  void require_rank(NodeId a, std::size_t r, const char* who) const {
    if (shape(a).size() != r)
      throw Error(std::string(who) + ": rank-" + std::to_string(r) + " operand required, got " +
                  shape_str(shape(a)));
  }

  NodeId make(Op op, std::initializer_list<NodeId> parents, Shape out, Attrs attr) {
    Node n{op, {-1, -1, -1}, attr, Tensor(std::move(out)), false};
    std::size_t i = 0;
    for (NodeId p : parents) {
      if (p < 0 || p >= static_cast<NodeId>(nodes_.size())) throw Error("make: bad parent id");
      n.parent[i++] = p;
    }
    nodes_.push_back(std::move(n));
    return last();
  }

  NodeId binary(Op op, NodeId a, NodeId b) {
    if (shape(a) != shape(b))
      throw Error(std::string(op_name(op)) + ": shape mismatch " + shape_str(shape(a)) + " vs " +
                  shape_str(shape(b)));
    return make(op, {a, b}, shape(a), {});
  }

  NodeId unary(Op op, NodeId a) { return make(op, {a}, shape(a), {}); }

  void accum(std::vector<NodeId>& adj, NodeId p, NodeId contrib,
             const std::vector<std::uint8_t>& dep) {
    if (!dep[p]) return;
    adj[p] = adj[p] < 0 ? contrib : add(adj[p], contrib);
  }

  void emit_vjp(NodeId i, NodeId g, std::vector<NodeId>& adj, std::vector<std::uint8_t>& dep) {
    const Node& nd = nodes_[i];
    const NodeId a = nd.parent[0], b = nd.parent[1], c = nd.parent[2];
    switch (nd.op) {
      case Op::kInput:
      case Op::kConstant:
        break;
      case Op::kAdd:
        accum(adj, a, g, dep);
        accum(adj, b, g, dep);
        break;
      case Op::kSub:
        accum(adj, a, g, dep);
        if (dep[b]) accum(adj, b, neg(g), dep);
        break;
      case Op::kMul:
        if (dep[a]) accum(adj, a, mul(g, b), dep);
        if (dep[b]) accum(adj, b, mul(g, a), dep);
        break;
      case Op::kAffine:
        accum(adj, a, affine(g, nd.attr.a, 0.0), dep);
        break;
      case Op::kExp:
        accum(adj, a, mul(g, i), dep);
        break;
      case Op::kTanh:
        accum(adj, a, mul(g, affine(square(i), -1.0, 1.0)), dep);
        break;
      case Op::kSigmoid:
        accum(adj, a, mul(g, mul(i, affine(i, -1.0, 1.0))), dep);
        break;
      case Op::kErf: {
        // d erf(x)/dx = 2/sqrt(pi) * exp(-x^2)
        const double two_over_sqrt_pi = 1.1283791670955126;
        accum(adj, a, mul(g, affine(exp_(neg(square(a))), two_over_sqrt_pi, 0.0)), dep);
        break;
      }
      case Op::kSqrt:
        accum(adj, a, mul(g, recip(affine(i, 2.0, 0.0))), dep);
        break;
      case Op::kRecip:
        accum(adj, a, mul(g, neg(square(i))), dep);
        break;
      case Op::kGelu:
        accum(adj, a, mul(g, gelu_grad(a)), dep);
        break;
      case Op::kGeluGrad:
        throw Error("gelu_grad: second-order derivative unsupported (use swish or tanh)");
      case Op::kMatMul: {
        const bool ta = nd.attr.f0, tb = nd.attr.f1;
        if (dep[a]) accum(adj, a, ta ? matmul(b, g, tb, true) : matmul(g, b, false, !tb), dep);
        if (dep[b]) accum(adj, b, tb ? matmul(g, a, true, ta) : matmul(a, g, !ta, false), dep);
        break;
      }
      case Op::kSum:
        accum(adj, a, scalar_expand(g, shape(a)), dep);
        break;
      case Op::kReduceRows:
        accum(adj, a, expand_rows(g, shape(a)[0]), dep);
        break;
      case Op::kReduceCols:
        accum(adj, a, expand_cols(g, shape(a)[1]), dep);
        break;
      case Op::kExpandRows:
        accum(adj, a, reduce_rows(g), dep);
        break;
      case Op::kExpandCols:
        accum(adj, a, reduce_cols(g), dep);
        break;
      case Op::kScalarExpand:
        accum(adj, a, sum(g), dep);
        break;
      case Op::kSliceCol:
        accum(adj, a, col_expand(g, static_cast<std::size_t>(nd.attr.i0), shape(a)[1]), dep);
        break;
      case Op::kColExpand:
        accum(adj, a, slice_col(g, static_cast<std::size_t>(nd.attr.i0)), dep);
        break;
      case Op::kReshape:
        accum(adj, a, reshape(g, shape(a)), dep);
        break;
      case Op::kDft2:
        accum(adj, a, dft2_t(g, shape(a)[1], shape(a)[2]), dep);
        break;
      case Op::kDft2T:
        accum(adj, a, dft2(g, shape(a)[1], shape(a)[2]), dep);
        break;
      case Op::kIdft2:
        accum(adj, a, idft2_t(g, shape(a)[1], shape(a)[2]), dep);
        break;
      case Op::kIdft2T:
        accum(adj, a, idft2(g, shape(a)[1], shape(a)[2]), dep);
        break;
      case Op::kModeMul: {
        const bool conj_t = nd.attr.f0;
        if (dep[a]) accum(adj, a, mode_mul(g, b, c, !conj_t), dep);
        if (dep[b] || dep[c]) {
          if (conj_t)
            throw Error("mode_mul: weight gradient through the adjoint mix is unsupported");
          accum(adj, b, mode_outer(a, g, false), dep);
          accum(adj, c, mode_outer(a, g, true), dep);
        }
        break;
      }
      case Op::kModeOuterRe:
      case Op::kModeOuterIm:
        throw Error("mode_outer: second-order derivative unsupported");
    }
  }

  void compute(NodeId i) {
    Node& nd = nodes_[i];
    const std::size_t n = nd.value.size();
    double* out = nd.value.data();
    const double* pa = nd.parent[0] >= 0 ? nodes_[nd.parent[0]].value.data() : nullptr;
    const double* pb = nd.parent[1] >= 0 ? nodes_[nd.parent[1]].value.data() : nullptr;
    switch (nd.op) {
      case Op::kInput:
        if (!nd.bound) throw Error("evaluate: unbound input");
        break;
      case Op::kConstant:
        break;
      case Op::kAdd:
        for (std::size_t k = 0; k < n; ++k) out[k] = pa[k] + pb[k];
        break;
      case Op::kSub:
        for (std::size_t k = 0; k < n; ++k) out[k] = pa[k] - pb[k];
        break;
      case Op::kMul:
        for (std::size_t k = 0; k < n; ++k) out[k] = pa[k] * pb[k];
        break;
      case Op::kAffine: {
        const double al = nd.attr.a, be = nd.attr.b;
        for (std::size_t k = 0; k < n; ++k) out[k] = al * pa[k] + be;
        break;
      }
      case Op::kExp:
        for (std::size_t k = 0; k < n; ++k) out[k] = std::exp(pa[k]);
        break;
      case Op::kTanh:
        for (std::size_t k = 0; k < n; ++k) out[k] = std::tanh(pa[k]);
        break;
      case Op::kSigmoid:
        for (std::size_t k = 0; k < n; ++k) out[k] = 1.0 / (1.0 + std::exp(-pa[k]));
        break;
      case Op::kErf:
        for (std::size_t k = 0; k < n; ++k) out[k] = std::erf(pa[k]);
        break;
      case Op::kSqrt:
        for (std::size_t k = 0; k < n; ++k) out[k] = std::sqrt(pa[k]);
        break;
      case Op::kRecip:
        for (std::size_t k = 0; k < n; ++k) out[k] = 1.0 / pa[k];
        break;
      case Op::kGelu: {
        const double inv_sqrt2 = 0.7071067811865476;
        for (std::size_t k = 0; k < n; ++k)
          out[k] = 0.5 * pa[k] * (1.0 + std::erf(pa[k] * inv_sqrt2));
        break;
      }
      case Op::kGeluGrad: {
        const double inv_sqrt2 = 0.7071067811865476;
        const double inv_sqrt_2pi = 0.3989422804014327;
        for (std::size_t k = 0; k < n; ++k) {
          const double x = pa[k];
          out[k] = 0.5 * (1.0 + std::erf(x * inv_sqrt2)) +
                   x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
        }
        break;
      }
      case Op::kMatMul: {
        const Shape& sa = nodes_[nd.parent[0]].value.shape();
        const Shape& sb = nodes_[nd.parent[1]].value.shape();
        const bool ta = nd.attr.f0, tb = nd.attr.f1;
        const int m = static_cast<int>(ta ? sa[1] : sa[0]);
        const int k = static_cast<int>(ta ? sa[0] : sa[1]);
        const int nn = static_cast<int>(tb ? sb[0] : sb[1]);
        fourier::gemm(ta, tb, m, nn, k, 1.0, pa, static_cast<int>(sa[1]), pb,
                      static_cast<int>(sb[1]), 0.0, out, nn);
        break;
      }
      case Op::kSum: {
        const std::size_t pn = nodes_[nd.parent[0]].value.size();
        double s = 0.0;
        for (std::size_t k = 0; k < pn; ++k) s += pa[k];
        out[0] = s;
        break;
      }
      case Op::kReduceRows: {
        const Shape& s = nodes_[nd.parent[0]].value.shape();
        const std::size_t rows = s[0], cols = s[1];
        for (std::size_t j = 0; j < cols; ++j) out[j] = 0.0;
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < cols; ++j) out[j] += pa[r * cols + j];
        break;
      }
      case Op::kReduceCols: {
        const Shape& s = nodes_[nd.parent[0]].value.shape();
        const std::size_t rows = s[0], cols = s[1];
        for (std::size_t r = 0; r < rows; ++r) {
          double acc = 0.0;
          for (std::size_t j = 0; j < cols; ++j) acc += pa[r * cols + j];
          out[r] = acc;
        }
        break;
      }
      case Op::kExpandRows: {
        const std::size_t cols = nodes_[nd.parent[0]].value.size();
        const std::size_t rows = nd.value.shape()[0];
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = pa[j];
        break;
      }
      case Op::kExpandCols: {
        const std::size_t rows = nodes_[nd.parent[0]].value.size();
        const std::size_t cols = nd.value.shape()[1];
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = pa[r];
        break;
      }
      case Op::kScalarExpand: {
        const double v = pa[0];
        for (std::size_t k = 0; k < n; ++k) out[k] = v;
        break;
      }
      case Op::kSliceCol: {
        const Shape& s = nodes_[nd.parent[0]].value.shape();
        const std::size_t cols = s[1], j = static_cast<std::size_t>(nd.attr.i0);
        for (std::size_t r = 0; r < s[0]; ++r) out[r] = pa[r * cols + j];
        break;
      }
      case Op::kColExpand: {
        const std::size_t rows = nodes_[nd.parent[0]].value.size();
        const std::size_t cols = nd.value.shape()[1];
        const std::size_t j = static_cast<std::size_t>(nd.attr.i0);
        std::fill(out, out + n, 0.0);
        for (std::size_t r = 0; r < rows; ++r) out[r * cols + j] = pa[r];
        break;
      }
      case Op::kReshape:
        std::copy(pa, pa + n, out);
        break;
      case Op::kDft2:
      case Op::kIdft2T: {
        const Shape& s = nodes_[nd.parent[0]].value.shape();
        fourier::Dims d{s[0], s[1], s[2], s[3], static_cast<std::size_t>(nd.attr.i0),
                        static_cast<std::size_t>(nd.attr.i1)};
        fourier::analysis(pa, out, d, nd.op == Op::kIdft2T);
        break;
      }
      case Op::kDft2T:
      case Op::kIdft2: {
        const Shape& s = nodes_[nd.parent[0]].value.shape();
        fourier::Dims d{s[0], static_cast<std::size_t>(nd.attr.i0),
                        static_cast<std::size_t>(nd.attr.i1), s[3], s[1], s[2]};
        fourier::synthesis(pa, out, d, nd.op == Op::kIdft2);
        break;
      }
      case Op::kModeMul: {
        const Shape& sr = nodes_[nd.parent[1]].value.shape();
        const Shape& sc = nodes_[nd.parent[0]].value.shape();
        const double* pc = nodes_[nd.parent[2]].value.data();
        fourier::mode_mul(pa, pb, pc, out, sc[0], sc[1] * sc[2], sr[2], sr[3], nd.attr.f0);
        break;
      }
      case Op::kModeOuterRe:
      case Op::kModeOuterIm: {
        const Shape& sa = nodes_[nd.parent[0]].value.shape();
        const Shape& sg = nodes_[nd.parent[1]].value.shape();
        fourier::mode_outer(pa, pb, out, sa[0], sa[1] * sa[2], sa[3], sg[3],
                            nd.op == Op::kModeOuterIm);
        break;
      }
    }
  }

  std::vector<Node> nodes_;
  std::vector<std::uint8_t> need_;
  bool check_finite_ = false;
};

/// Evaluates a single graph rooted at `build`'s result with the given
/// bindings. Matches the one-shot evaluate() contract; solvers keep graphs
/// alive and rebind instead.
inline Tensor evaluate(Graph& g, NodeId root,
                       std::span<const std::pair<NodeId, Tensor>> bindings) {
  for (const auto& [id, t] : bindings) g.bind(id, t);
  g.evaluate({root});
  if (!g.value(root).all_finite()) throw Error("evaluate: non-finite result");
  return g.value(root);
}

// ---- expression sugar for formula templates ----

struct Expr {
  Graph* g = nullptr;
  NodeId id = -1;
  Expr() = default;
  Expr(Graph& graph, NodeId node) : g(&graph), id(node) {}
};

inline Expr operator+(Expr a, Expr b) { return {*a.g, a.g->add(a.id, b.id)}; }
inline Expr operator-(Expr a, Expr b) { return {*a.g, a.g->sub(a.id, b.id)}; }
inline Expr operator*(Expr a, Expr b) { return {*a.g, a.g->mul(a.id, b.id)}; }
inline Expr operator*(double s, Expr a) { return {*a.g, a.g->affine(a.id, s, 0.0)}; }
inline Expr operator*(Expr a, double s) { return s * a; }
inline Expr operator+(Expr a, double s) { return {*a.g, a.g->affine(a.id, 1.0, s)}; }
inline Expr operator-(Expr a) { return {*a.g, a.g->neg(a.id)}; }

/// Mixed second/first input derivative of a scalar-valued map of (x, z),
/// via nested reverse sweeps. `build` maps the [1,2] input node to a scalar
/// node. Orders (ax, az) with 1 <= ax+az <= 2.
inline double input_derivative(const std::function<NodeId(Graph&, NodeId)>& build, double x,
                               double z, int ax, int az) {
  const int total = ax + az;
  if (total < 1 || total > 2 || ax < 0 || az < 0)
    throw Error("input_derivative: order must be 1 or 2");
  Graph g;
  const NodeId xz = g.input(Shape{1, 2});
  const NodeId y = build(g, xz);
  if (!g.shape(y).empty()) throw Error("input_derivative: map must produce a scalar node");
  const NodeId wrt[] = {xz};
  // Differentiate once per unit of the multi-index, x-component first.
  const std::size_t first = ax > 0 ? 0 : 1;
  const std::size_t second = ax == 2 ? 0 : 1;
  const std::vector<NodeId> d1 = g.backward(y, wrt);
  NodeId comp = g.slice_col(d1[0], first);
  if (total == 2) {
    const std::vector<NodeId> d2 = g.backward(g.sum(comp), wrt);
    comp = g.slice_col(d2[0], second);
  }
  g.bind(xz, std::vector<double>{x, z});
  g.evaluate({comp});
  const double v = g.value(comp)[0];
  if (!std::isfinite(v)) throw Error("input_derivative: non-finite result");
  return v;
}

}  // namespace porobeam::ad
