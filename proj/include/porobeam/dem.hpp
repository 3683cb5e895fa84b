#pragma once

// Energy-approach solver: minimizes the total potential energy of the beam
// with a hard-constrained displacement ansatz (multiplicative distance
// factors per support type).

#include <array>
#include <atomic>
#include <chrono>
#include <string>
#include <thread>
#include <vector>

#include "porobeam/fem.hpp"
#include "porobeam/nnfield.hpp"
#include "porobeam/optimize.hpp"
#include "porobeam/pinn.hpp"
#include "porobeam/sampling.hpp"

namespace porobeam::dem {

using ad::Expr;
using ad::Graph;
using ad::NodeId;
using pinn::TrainSchedule;

struct DemProblem {
  mech::Geometry geom{2.0, 0.1, 0.1};  // steel-foam default, L/h = 20
  mech::MaterialField material;
  ref::SupportKind support = ref::SupportKind::hinged_hinged;
  double load_q = 1e4;  // N/m on the top edge, acting along +z in the potential convention
  std::size_t grid_nx = 80, grid_nz = 40;
  bool gauss_quadrature = false;  // alternative to the uniform midpoint grid
  std::size_t edge_quad_points = 128;
  models::DenseSpec net;
  mech::Kinematics kinematics = mech::Kinematics::fvk;
  std::uint64_t seed = 0;
  TrainSchedule schedule{1500, 1e-3, 1500, 1e-9};
  std::size_t eval_nx = 201, eval_nz = 41;

  void validate() const {
    geom.validate();
    material.validate();
    if (grid_nx < 2 || grid_nz < 2) throw Error("dem: integration grid must be at least 2x2");
    if (!std::isfinite(load_q)) throw Error("dem: load must be finite");
  }

  double u_ref() const {
    const double inertia = geom.width * std::pow(geom.thickness, 3) / 12.0;
    return std::max(5.0 * std::abs(load_q) * std::pow(geom.length, 4) /
                        (384.0 * material.e1 * inertia),
                    1e-12 * geom.thickness);
  }
};

/// Hard-constrained displacement: clamped end factors multiply both
/// components by (distance to the end)/L, hinged end factors multiply u_z
/// only; hinged-hinged removes the axial rigid mode by subtracting the raw
/// axial value at the x = 0 midplane anchor.
inline nnfield::ConstraintFn make_support_constraint(ref::SupportKind support,
                                                     const mech::Geometry& geom,
                                                     const models::DenseParams& params,
                                                     const models::DenseSpec& spec,
                                                     const nnfield::InputMap& map,
                                                     double u_scale) {
  const double inv_l = 1.0 / geom.length;
  return [support, inv_l, params, spec, map, u_scale](Graph& g, NodeId pts,
                                                      NodeId raw) -> NodeId {
    const NodeId x = g.slice_col(pts, 0);
    const NodeId f_left = g.affine(x, inv_l, 0.0);         // (x - 0)/L
    const NodeId f_right = g.affine(x, -inv_l, 1.0);       // (L - x)/L
    const NodeId f_both = g.mul(f_left, f_right);
    NodeId ux = g.slice_col(raw, 0);
    NodeId uz = g.slice_col(raw, 1);
    switch (support) {
      case ref::SupportKind::clamped_clamped:
        ux = g.mul(ux, f_both);
        uz = g.mul(uz, f_both);
        break;
      case ref::SupportKind::clamped_hinged:
        ux = g.mul(ux, f_left);
        uz = g.mul(uz, f_both);
        break;
      case ref::SupportKind::hinged_hinged: {
        uz = g.mul(uz, f_both);
        // subtract the raw axial value at the anchor (x = 0, z = 0)
        const NodeId anchor = g.constant(Tensor(Shape{1, 2}));
        const NodeId araw = nnfield::raw_displacement(g, params, spec, anchor, map, u_scale);
        const NodeId ax = g.reshape(g.slice_col(araw, 0), Shape{});
        ux = g.sub(ux, g.scalar_expand(ax, g.shape(ux)));
        break;
      }
    }
    return g.add(g.col_expand(ux, 0, 2), g.col_expand(uz, 1, 2));
  };
}

/// Loss graph: Pi = b * sum_i w_i w(grad u(p_i)) - sum_j ew_j q u_z(top_j).
class DemSystem {
 public:
  explicit DemSystem(const DemProblem& prob) : prob_(prob) {
    prob_.validate();
    map_ = nnfield::InputMap::centered(prob_.geom.length, prob_.geom.thickness);
    params_ = models::declare_dense_params(graph_, prob_.net);
    constraint_ = make_support_constraint(prob_.support, prob_.geom, params_, prob_.net, map_,
                                          prob_.u_ref());

    const sampling::Domain2D dom{0.0, prob_.geom.length, -prob_.geom.thickness / 2,
                                 prob_.geom.thickness / 2};
    if (prob_.gauss_quadrature) {
      quad_ = sampling::tensor_quadrature(dom, std::max<std::size_t>(1, prob_.grid_nx / 4),
                                          std::max<std::size_t>(1, prob_.grid_nz / 4), 4);
    } else {
      // uniform interior grid with midpoint weights
      quad_.method = sampling::Method::grid;
      const double wcell = dom.area() / static_cast<double>(prob_.grid_nx * prob_.grid_nz);
      for (double x : sampling::inset_linspace(dom.x0, dom.x1, prob_.grid_nx))
        for (double z : sampling::inset_linspace(dom.z0, dom.z1, prob_.grid_nz)) {
          quad_.points.push_back({x, z});
          quad_.weights.push_back(wcell);
        }
    }

    loss_ = build_potential();
    binder_ = nnfield::ParamBinder(graph_, models::dense_param_ids(params_));
    grads_ = graph_.backward(loss_, binder_.ids);
  }

  const sampling::PointSet& quadrature() const { return quad_; }

  double eval(std::span<const double> flat, std::span<double> grad_out) {
    binder_.bind(graph_, flat);
    std::vector<NodeId> targets = grads_;
    targets.push_back(loss_);
    graph_.evaluate(targets);
    binder_.collect(graph_, grads_, grad_out);
    const double v = graph_.value(loss_)[0];
    if (!std::isfinite(v)) throw Error("dem potential: non-finite value");
    return v;
  }

  double potential_value(std::span<const double> flat) {
    binder_.bind(graph_, flat);
    graph_.evaluate({loss_});
    return graph_.value(loss_)[0];
  }

  const nnfield::ParamBinder& binder() const { return binder_; }
  const nnfield::ConstraintFn& constraint() const { return constraint_; }
  const nnfield::InputMap& input_map() const { return map_; }

 private:
  NodeId points_input(const std::vector<std::array<double, 2>>& pts) {
    Tensor t(Shape{pts.size(), 2});
    for (std::size_t i = 0; i < pts.size(); ++i) {
      t[2 * i] = pts[i][0];
      t[2 * i + 1] = pts[i][1];
    }
    const NodeId id = graph_.input(Shape{pts.size(), 2});
    graph_.bind(id, t);
    return id;
  }

  NodeId build_potential() {
    // strain energy over the interior quadrature
    const NodeId pts = points_input(quad_.points);
    const NodeId raw = nnfield::raw_displacement(graph_, params_, prob_.net, pts, map_,
                                                 prob_.u_ref());
    const NodeId u = constraint_(graph_, pts, raw);
    const auto gu = mech::field_gradients(graph_, pts, u);
    Tensor lam(Shape{quad_.size()}), mu(Shape{quad_.size()});
    for (std::size_t i = 0; i < quad_.size(); ++i) {
      const auto [l, m] = mech::lame(
          mech::modulus_at(prob_.material, quad_.points[i][1], prob_.geom), prob_.material.nu,
          prob_.material.mode);
      lam[i] = l;
      mu[i] = m;
    }
    const Expr w = mech::energy_density(gu, Expr{graph_, graph_.constant(lam)},
                                        Expr{graph_, graph_.constant(mu)}, prob_.kinematics);
    Tensor wq(Shape{quad_.size()});
    for (std::size_t i = 0; i < quad_.size(); ++i) wq[i] = quad_.weights[i];
    const NodeId energy = graph_.affine(
        graph_.sum(graph_.mul(w.id, graph_.constant(wq))), prob_.geom.width, 0.0);

    // external work of the top-edge line load via 1-D Gauss-Legendre
    const auto [gx, gw] = sampling::gauss_legendre_1d(
        std::min<std::size_t>(64, std::max<std::size_t>(2, prob_.edge_quad_points / 2)));
    std::vector<std::array<double, 2>> top;
    std::vector<double> tw;
    const double half_l = prob_.geom.length / 2.0;
    // two panels keep the requested point count with n <= 64 nodes each
    for (int panel = 0; panel < 2; ++panel) {
      const double c0 = panel == 0 ? 0.0 : half_l;
      for (std::size_t k = 0; k < gx.size(); ++k) {
        top.push_back({c0 + 0.5 * half_l * (gx[k] + 1.0), prob_.geom.thickness / 2.0});
        tw.push_back(0.5 * half_l * gw[k]);
      }
    }
    const NodeId tpts = points_input(top);
    const NodeId traw = nnfield::raw_displacement(graph_, params_, prob_.net, tpts, map_,
                                                  prob_.u_ref());
    const NodeId tu = constraint_(graph_, tpts, traw);
    Tensor twt(Shape{tw.size()});
    for (std::size_t i = 0; i < tw.size(); ++i) twt[i] = tw[i] * prob_.load_q;
    const NodeId work = graph_.sum(graph_.mul(g_slice_uz(tu), graph_.constant(twt)));
    return graph_.sub(energy, work);
  }

  NodeId g_slice_uz(NodeId u) { return graph_.slice_col(u, 1); }

  DemProblem prob_;
  Graph graph_;
  models::DenseParams params_;
  nnfield::InputMap map_;
  nnfield::ConstraintFn constraint_;
  sampling::PointSet quad_;
  nnfield::ParamBinder binder_;
  NodeId loss_ = -1;
  std::vector<NodeId> grads_;
};

struct StressProfile {
  double station;                // x/L
  std::vector<double> z_over_h;  // thickness coordinate
  std::vector<double> sxx;       // physical sigma_xx
};

struct DemReport {
  models::DenseNetwork net;
  double max_deflection = 0.0;  // u_bar = max |u_z| / h
  double potential = 0.0;
  double grad_inf = 0.0;
  std::vector<double> loss_history;
  bool converged = false;
  bool flagged = false;
  double train_seconds = 0.0;
  std::vector<std::array<double, 2>> eval_points;
  nnfield::FieldSample fields;
  std::vector<StressProfile> profiles;
};

inline DemReport solve(const DemProblem& prob,
                       const std::vector<double>& stations = {0.25, 0.5, 0.75}) {
  DemSystem system(prob);
  const auto t0 = std::chrono::steady_clock::now();
  models::DenseNetwork net = models::init_dense(prob.net, prob.seed);

  opt::LossFn fn = [&system](std::span<const double> p, std::span<double> g) {
    return system.eval(p, g);
  };
  auto adam = opt::adam_run(fn, models::flatten(net), prob.schedule.adam_steps,
                            {.lr = prob.schedule.adam_lr});
  opt::LbfgsOpts lopts;
  lopts.max_iter = prob.schedule.lbfgs_max_iter;
  lopts.grad_tol = prob.schedule.lbfgs_grad_tol;
  auto lb = opt::lbfgs_run(fn, std::move(adam.x), lopts);

  DemReport rep;
  rep.loss_history = std::move(adam.history);
  rep.loss_history.insert(rep.loss_history.end(), lb.history.begin(), lb.history.end());
  rep.potential = lb.f;
  rep.grad_inf = lb.grad_inf;
  rep.converged = lb.converged;
  rep.flagged = lb.line_search_failed && !lb.converged;
  models::unflatten(net, lb.x);
  rep.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  // evaluation grid and dimensionless deflection
  const double h2 = prob.geom.thickness / 2.0;
  const auto xs = sampling::linspace(0.0, prob.geom.length, prob.eval_nx);
  const auto zs = sampling::linspace(-h2, h2, prob.eval_nz);
  for (double x : xs)
    for (double z : zs) rep.eval_points.push_back({x, z});

  DemSystem* sys = &system;
  rep.fields = nnfield::evaluate_fields(net, sys->input_map(), prob.u_ref(), sys->constraint(),
                                        rep.eval_points, prob.material, prob.geom,
                                        prob.kinematics);
  for (double v : rep.fields.uz)
    rep.max_deflection = std::max(rep.max_deflection, std::abs(v) / prob.geom.thickness);

  // through-thickness normal-stress profiles at the requested stations
  for (double s : stations) {
    StressProfile prof;
    prof.station = s;
    std::vector<std::array<double, 2>> pts;
    for (double z : sampling::linspace(-h2, h2, 81)) {
      prof.z_over_h.push_back(z / prob.geom.thickness);
      pts.push_back({s * prob.geom.length, z});
    }
    auto f = nnfield::evaluate_fields(net, sys->input_map(), prob.u_ref(), sys->constraint(), pts,
                                      prob.material, prob.geom, prob.kinematics);
    prof.sxx = std::move(f.sxx);
    rep.profiles.push_back(std::move(prof));
  }
  rep.net = std::move(net);
  return rep;
}

// ---- parametric sweep ----

struct SweepCase {
  mech::MaterialField::Law pattern;
  ref::SupportKind support;
  double e0;
  double slenderness;  // L/h
};

struct SweepRow {
  SweepCase spec;
  double max_deflection = 0.0;
  double seconds = 0.0;
  bool failed = false;
  std::string error;
};

struct SweepConfig {
  DemProblem base;  // geometry thickness/width and material e1/nu are taken from here
  std::vector<double> e0_values{0.0, 0.3, 0.6};
  std::vector<double> slenderness_values{10.0, 20.0, 30.0};
  std::vector<ref::SupportKind> supports{ref::SupportKind::hinged_hinged,
                                         ref::SupportKind::clamped_hinged,
                                         ref::SupportKind::clamped_clamped};
  std::vector<mech::MaterialField::Law> patterns{mech::MaterialField::Law::symmetric,
                                                 mech::MaterialField::Law::asymmetric};
  std::size_t jobs = 1;
};

inline DemProblem sweep_case_problem(const DemProblem& base, const SweepCase& c) {
  DemProblem p = base;
  p.material.law = c.e0 == 0.0 ? mech::MaterialField::Law::uniform : c.pattern;
  p.material.e0 = c.e0;
  p.support = c.support;
  p.geom.length = c.slenderness * p.geom.thickness;
  return p;
}

/// One solve per combination; failures are recorded per row and the sweep
/// continues. Rows are independent; `jobs` worker threads split them.
inline std::vector<SweepRow> parametric_sweep(const SweepConfig& cfg) {
  std::vector<SweepCase> cases;
  for (auto pattern : cfg.patterns)
    for (auto support : cfg.supports)
      for (double e0 : cfg.e0_values)
        for (double sl : cfg.slenderness_values) cases.push_back({pattern, support, e0, sl});

  std::vector<SweepRow> rows(cases.size());
  const std::size_t jobs = std::max<std::size_t>(1, cfg.jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cases.size()) return;
      rows[i].spec = cases[i];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        DemReport rep = solve(sweep_case_problem(cfg.base, cases[i]), {});
        rows[i].max_deflection = rep.max_deflection;
      } catch (const std::exception& e) {
        rows[i].failed = true;
        rows[i].error = e.what();
      }
      rows[i].seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return rows;
}

}  // namespace porobeam::dem
