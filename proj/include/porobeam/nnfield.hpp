#pragma once

// Shared machinery for network-parameterized displacement fields: input
// normalization, output scaling, parameter flattening, and batched field
// evaluation (displacements, gradients, stresses) at arbitrary points.

#include <functional>
#include <vector>

#include "porobeam/graph.hpp"
#include "porobeam/mechanics.hpp"
#include "porobeam/models.hpp"

namespace porobeam::nnfield {

using ad::Graph;
using ad::NodeId;

/// Affine map of the physical coordinates into the network's input box
/// (typically [-1,1]^2).
struct InputMap {
  double ax = 1.0, bx = 0.0, az = 1.0, bz = 0.0;

  /// Maps [0,L] x [-h/2,h/2] onto [-1,1]^2.
  static InputMap centered(double length, double thickness) {
    return {2.0 / length, -1.0, 2.0 / thickness, 0.0};
  }
};

inline NodeId normalize_inputs(Graph& g, NodeId pts, const InputMap& m) {
  const NodeId xn = g.affine(g.slice_col(pts, 0), m.ax, m.bx);
  const NodeId zn = g.affine(g.slice_col(pts, 1), m.az, m.bz);
  return g.add(g.col_expand(xn, 0, 2), g.col_expand(zn, 1, 2));
}

/// points [N,2] -> u_scale * net(normalized points), shape [N,2].
inline NodeId raw_displacement(Graph& g, const models::DenseParams& params,
                               const models::DenseSpec& spec, NodeId pts, const InputMap& map,
                               double u_scale) {
  return g.affine(models::dense_forward(g, params, spec, normalize_inputs(g, pts, map)), u_scale,
                  0.0);
}

/// Optional constraint transform applied to the raw network displacement
/// (identity for penalty-based solvers, multiplicative ansatz for the energy
/// solver). Receives the point node so constraints may depend on position.
using ConstraintFn = std::function<NodeId(Graph&, NodeId pts, NodeId raw)>;

inline NodeId identity_constraint(Graph&, NodeId, NodeId raw) { return raw; }

// ---- flat parameter binding ----

struct ParamBinder {
  std::vector<NodeId> ids;
  std::vector<std::size_t> offsets;
  std::size_t total = 0;

  ParamBinder() = default;
  ParamBinder(const Graph& g, std::vector<NodeId> param_ids) : ids(std::move(param_ids)) {
    offsets.reserve(ids.size() + 1);
    for (NodeId id : ids) {
      offsets.push_back(total);
      total += numel(g.shape(id));
    }
    offsets.push_back(total);
  }

  void bind(Graph& g, std::span<const double> flat) const {
    if (flat.size() != total) throw Error("param bind: size mismatch");
    for (std::size_t i = 0; i < ids.size(); ++i)
      g.bind(ids[i], flat.subspan(offsets[i], offsets[i + 1] - offsets[i]));
  }

  void collect(const Graph& g, const std::vector<NodeId>& grad_ids,
               std::span<double> out) const {
    if (grad_ids.size() != ids.size() || out.size() != total)
      throw Error("param collect: size mismatch");
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const Tensor& t = g.value(grad_ids[i]);
      std::copy(t.data(), t.data() + t.size(), out.data() + offsets[i]);
    }
  }
};

/// A loss graph with its parameter binder and pre-built symbolic gradients;
/// the optimizer-facing closure evaluates both in one pass.
struct LossProgram {
  Graph graph;
  ParamBinder binder;
  NodeId loss = -1;
  std::vector<NodeId> grads;

  double eval(std::span<const double> flat, std::span<double> grad_out) {
    binder.bind(graph, flat);
    std::vector<NodeId> targets = grads;
    targets.push_back(loss);
    graph.evaluate(targets);
    binder.collect(graph, grads, grad_out);
    const double v = graph.value(loss)[0];
    if (!std::isfinite(v)) throw Error("loss evaluation produced a non-finite value");
    return v;
  }
};

// ---- batched field evaluation ----

struct FieldSample {
  std::vector<double> ux, uz, sxx, syy, szz, sxz;
};

/// Evaluates displacements and stresses of a constrained network field at the
/// given points, chunked to bound memory.
inline FieldSample evaluate_fields(const models::DenseNetwork& net, const InputMap& map,
                                   double u_scale, const ConstraintFn& constraint,
                                   const std::vector<std::array<double, 2>>& points,
                                   const mech::MaterialField& material,
                                   const mech::Geometry& geom, mech::Kinematics kin) {
  FieldSample out;
  const std::size_t m = points.size();
  out.ux.resize(m);
  out.uz.resize(m);
  out.sxx.resize(m);
  out.syy.resize(m);
  out.szz.resize(m);
  out.sxz.resize(m);
  const std::size_t chunk = std::min<std::size_t>(m, 2048);

  Graph g;
  const NodeId pts = g.input(Shape{chunk, 2});
  auto params = models::declare_dense_params(g, net.spec);
  const NodeId raw = raw_displacement(g, params, net.spec, pts, map, u_scale);
  const NodeId u = constraint(g, pts, raw);
  const auto gu = mech::field_gradients(g, pts, u);
  const NodeId lam_in = g.input(Shape{chunk});
  const NodeId mu_in = g.input(Shape{chunk});
  const auto stress = mech::stresses(gu, ad::Expr{g, lam_in}, ad::Expr{g, mu_in}, kin);
  const NodeId ux_id = g.slice_col(u, 0);
  const NodeId uz_id = g.slice_col(u, 1);
  models::bind_dense(g, params, net);

  std::vector<double> buf(chunk * 2), lam_v(chunk), mu_v(chunk);
  for (std::size_t start = 0; start < m; start += chunk) {
    const std::size_t count = std::min(chunk, m - start);
    for (std::size_t i = 0; i < chunk; ++i) {
      const auto& p = points[start + std::min(i, count - 1)];  // pad with the last point
      buf[2 * i] = p[0];
      buf[2 * i + 1] = p[1];
      const auto [lam, mu] = mech::lame(mech::modulus_at(material, p[1], geom), material.nu,
                                        material.mode);
      lam_v[i] = lam;
      mu_v[i] = mu;
    }
    g.bind(pts, buf);
    g.bind(lam_in, lam_v);
    g.bind(mu_in, mu_v);
    g.evaluate({ux_id, uz_id, stress.xx.id, stress.yy.id, stress.zz.id, stress.xz.id});
    for (std::size_t i = 0; i < count; ++i) {
      out.ux[start + i] = g.value(ux_id)[i];
      out.uz[start + i] = g.value(uz_id)[i];
      out.sxx[start + i] = g.value(stress.xx.id)[i];
      out.syy[start + i] = g.value(stress.yy.id)[i];
      out.szz[start + i] = g.value(stress.zz.id)[i];
      out.sxz[start + i] = g.value(stress.xz.id)[i];
    }
  }
  return out;
}

}  // namespace porobeam::nnfield
