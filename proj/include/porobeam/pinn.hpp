#pragma once

// Vector-approach solver: minimizes the mean-squared momentum residual at
// collocation points plus penalty terms for displacement and traction
// boundary conditions.

#include <array>
#include <chrono>
#include <functional>
#include <optional>
#include <vector>

#include "porobeam/fem.hpp"
#include "porobeam/mechanics.hpp"
#include "porobeam/nnfield.hpp"
#include "porobeam/optimize.hpp"
#include "porobeam/sampling.hpp"

namespace porobeam::pinn {

using ad::Expr;
using ad::Graph;
using ad::NodeId;

struct ComponentBc {
  enum class Kind { dirichlet, traction };
  Kind kind = Kind::traction;
  std::function<double(double, double)> value;  // prescribed displacement or traction; null = 0
};

struct EdgeBc {
  ComponentBc x, z;
};

struct PointAnchor {
  double x = 0, z = 0;
  int component = 0;  // 0 = u_x, 1 = u_z
  double value = 0;
};

struct TrainSchedule {
  std::size_t adam_steps = 2000;
  double adam_lr = 1e-3;
  std::size_t lbfgs_max_iter = 2000;
  double lbfgs_grad_tol = 1e-9;
};

struct PinnProblem {
  mech::Geometry geom;  // domain [0,L] x [-h/2,+h/2]
  mech::MaterialField material;
  mech::Kinematics kinematics = mech::Kinematics::fvk;
  std::function<std::array<double, 2>(double, double)> body_force;  // null = zero
  EdgeBc left, right, bottom, top;  // every edge carries exactly one condition per component
  std::vector<PointAnchor> anchors;
  sampling::Method method = sampling::Method::halton;
  std::size_t n_interior = 400;
  std::size_t n_boundary = 100;  // per edge
  models::DenseSpec net;
  double lambda_dirichlet = 100.0, lambda_neumann = 100.0;
  double u_ref = 1.0;      // displacement scale (output scaling and Dirichlet normalization)
  double sigma_ref = 1.0;  // bending-stress scale; the residual is normalized by sigma_ref / L
  double t_ref = 1.0;      // traction scale for the Neumann terms
  std::uint64_t seed = 0;
  TrainSchedule schedule;
  double convergence_threshold = 1e-4;  // on the final total loss

  void validate() const {
    geom.validate();
    material.validate();
    if (n_interior < 1) throw Error("pinn: at least one interior point required");
    if (n_boundary < 2) throw Error("pinn: each edge needs at least two samples");
  }
};

namespace detail {

inline sampling::Domain2D domain_of(const mech::Geometry& g) {
  return {0.0, g.length, -g.thickness / 2.0, g.thickness / 2.0};
}

struct EdgeGeom {
  ref::Edge which;
  std::array<double, 2> normal;
};

inline std::vector<std::array<double, 2>> edge_points(const mech::Geometry& g, ref::Edge e,
                                                      std::size_t n) {
  std::vector<std::array<double, 2>> pts;
  pts.reserve(n);
  const double h2 = g.thickness / 2.0;
  if (e == ref::Edge::left || e == ref::Edge::right) {
    const double x = e == ref::Edge::left ? 0.0 : g.length;
    for (double z : sampling::inset_linspace(-h2, h2, n)) pts.push_back({x, z});
  } else {
    const double z = e == ref::Edge::bottom ? -h2 : h2;
    for (double x : sampling::inset_linspace(0.0, g.length, n)) pts.push_back({x, z});
  }
  return pts;
}

}  // namespace detail

/// Relative L2 error of a predicted displacement field against a reference,
/// both sampled at the same points.
inline double relative_l2(std::span<const double> pred_ux, std::span<const double> pred_uz,
                          std::span<const double> ref_ux, std::span<const double> ref_uz) {
  if (pred_ux.size() != ref_ux.size() || pred_uz.size() != ref_uz.size())
    throw Error("relative_l2: size mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pred_ux.size(); ++i) {
    num += (pred_ux[i] - ref_ux[i]) * (pred_ux[i] - ref_ux[i]) +
           (pred_uz[i] - ref_uz[i]) * (pred_uz[i] - ref_uz[i]);
    den += ref_ux[i] * ref_ux[i] + ref_uz[i] * ref_uz[i];
  }
  if (den <= 0.0) throw Error("relative_l2: zero reference norm");
  return std::sqrt(num) / std::sqrt(den);
}

/// Builds the full penalty loss graph for a problem. The graph owns the
/// collocation constants; parameters are the only rebindable inputs.
class PinnSystem {
 public:
  explicit PinnSystem(const PinnProblem& prob) : prob_(prob) {
    prob_.validate();
    map_ = nnfield::InputMap::centered(prob_.geom.length, prob_.geom.thickness);
    params_ = models::declare_dense_params(graph_, prob_.net);
    interior_ = sampling::generate(prob_.method, prob_.n_interior, detail::domain_of(prob_.geom),
                                   prob_.seed);

    NodeId loss = build_interior_loss();
    components_.push_back({"interior", loss});
    const std::pair<const char*, const EdgeBc*> edges[] = {{"left", &prob_.left},
                                                           {"right", &prob_.right},
                                                           {"bottom", &prob_.bottom},
                                                           {"top", &prob_.top}};
    for (auto [name, bc] : edges) {
      const NodeId term = build_edge_loss(edge_by_name(name), *bc);
      components_.push_back({name, term});
      loss = graph_.add(loss, term);
    }
    for (const auto& a : prob_.anchors) {
      const NodeId term = build_anchor_loss(a);
      components_.push_back({"anchor", term});
      loss = graph_.add(loss, term);
    }
    loss_ = loss;

    binder_ = nnfield::ParamBinder(graph_, models::dense_param_ids(params_));
    grads_ = graph_.backward(loss_, binder_.ids);
  }

  const sampling::PointSet& interior_points() const { return interior_; }

  double eval(std::span<const double> flat, std::span<double> grad_out) {
    binder_.bind(graph_, flat);
    std::vector<NodeId> targets = grads_;
    targets.push_back(loss_);
    graph_.evaluate(targets);
    binder_.collect(graph_, grads_, grad_out);
    const double v = graph_.value(loss_)[0];
    if (!std::isfinite(v)) throw Error("pinn loss: non-finite value");
    return v;
  }

  /// Loss components at the given parameters (diagnostics).
  double loss_value(std::span<const double> flat) {
    binder_.bind(graph_, flat);
    graph_.evaluate({loss_});
    return graph_.value(loss_)[0];
  }

  std::vector<std::pair<std::string, double>> loss_breakdown(std::span<const double> flat) {
    binder_.bind(graph_, flat);
    std::vector<NodeId> ids;
    for (auto& [name, id] : components_) ids.push_back(id);
    graph_.evaluate(ids);
    std::vector<std::pair<std::string, double>> out;
    for (auto& [name, id] : components_) out.push_back({name, graph_.value(id)[0]});
    return out;
  }

  std::size_t param_count() const { return binder_.total; }

 private:
  NodeId displacement_at(NodeId pts) {
    return nnfield::raw_displacement(graph_, params_, prob_.net, pts, map_, prob_.u_ref);
  }

  NodeId constant_points(const std::vector<std::array<double, 2>>& pts) {
    Tensor t(Shape{pts.size(), 2});
    for (std::size_t i = 0; i < pts.size(); ++i) {
      t[2 * i] = pts[i][0];
      t[2 * i + 1] = pts[i][1];
    }
    // points participate in derivative sweeps, so they are inputs, bound once
    const NodeId id = graph_.input(Shape{pts.size(), 2});
    graph_.bind(id, t);
    return id;
  }

  std::pair<Expr, Expr> lame_constants(const std::vector<std::array<double, 2>>& pts) {
    Tensor lam(Shape{pts.size()}), mu(Shape{pts.size()});
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto [l, m] = mech::lame(mech::modulus_at(prob_.material, pts[i][1], prob_.geom),
                                     prob_.material.nu, prob_.material.mode);
      lam[i] = l;
      mu[i] = m;
    }
    return {Expr{graph_, graph_.constant(lam)}, Expr{graph_, graph_.constant(mu)}};
  }

  NodeId build_interior_loss() {
    const NodeId pts = constant_points(interior_.points);
    const NodeId u = displacement_at(pts);
    auto [lam, mu] = lame_constants(interior_.points);
    Tensor fx(Shape{interior_.size()}), fz(Shape{interior_.size()});
    if (prob_.body_force)
      for (std::size_t i = 0; i < interior_.size(); ++i) {
        const auto f = prob_.body_force(interior_.points[i][0], interior_.points[i][1]);
        fx[i] = f[0];
        fz[i] = f[1];
      }
    const Expr fxc{graph_, graph_.constant(fx)};
    const Expr fzc{graph_, graph_.constant(fz)};
    const auto res = mech::momentum_residual(graph_, pts, u, lam, mu, fxc, fzc, prob_.kinematics);
    const double r_scale = prob_.sigma_ref / prob_.geom.length;
    const NodeId rx = graph_.affine(res.rx, 1.0 / r_scale, 0.0);
    const NodeId rz = graph_.affine(res.rz, 1.0 / r_scale, 0.0);
    const NodeId ss = graph_.add(graph_.sum(graph_.square(rx)), graph_.sum(graph_.square(rz)));
    return graph_.affine(ss, 1.0 / static_cast<double>(interior_.size()), 0.0);
  }

  NodeId component_mse(NodeId diff, double scale, double weight, std::size_t n) {
    const NodeId d = graph_.affine(diff, 1.0 / scale, 0.0);
    return graph_.affine(graph_.sum(graph_.square(d)), weight / static_cast<double>(n), 0.0);
  }

  NodeId build_edge_loss(ref::Edge which, const EdgeBc& bc) {
    const auto pts = detail::edge_points(prob_.geom, which, prob_.n_boundary);
    const NodeId pn = constant_points(pts);
    const NodeId u = displacement_at(pn);
    NodeId loss = graph_.constant(0.0);

    const bool any_traction = bc.x.kind == ComponentBc::Kind::traction ||
                              bc.z.kind == ComponentBc::Kind::traction;
    std::optional<mech::Stress<Expr>> stress;
    if (any_traction) {
      auto [lam, mu] = lame_constants(pts);
      const auto gu = mech::field_gradients(graph_, pn, u);
      stress = mech::stresses(gu, lam, mu, prob_.kinematics);
    }
    const std::array<double, 2> n = normal_of(which);

    for (int comp = 0; comp < 2; ++comp) {
      const ComponentBc& cbc = comp == 0 ? bc.x : bc.z;
      Tensor target(Shape{pts.size()});
      if (cbc.value)
        for (std::size_t i = 0; i < pts.size(); ++i) target[i] = cbc.value(pts[i][0], pts[i][1]);
      const NodeId target_c = graph_.constant(target);
      if (cbc.kind == ComponentBc::Kind::dirichlet) {
        const NodeId diff = graph_.sub(graph_.slice_col(u, comp), target_c);
        loss = graph_.add(loss,
                          component_mse(diff, prob_.u_ref, prob_.lambda_dirichlet, pts.size()));
      } else {
        // t_comp = sigma(comp,:) . n
        const Expr sxx = stress->xx, szz = stress->zz, sxz = stress->xz;
        Expr t = comp == 0 ? n[0] * sxx + n[1] * sxz : n[0] * sxz + n[1] * szz;
        const NodeId diff = graph_.sub(t.id, target_c);
        loss = graph_.add(loss,
                          component_mse(diff, prob_.t_ref, prob_.lambda_neumann, pts.size()));
      }
    }
    return loss;
  }

  NodeId build_anchor_loss(const PointAnchor& a) {
    const NodeId pn = constant_points({{a.x, a.z}});
    const NodeId u = displacement_at(pn);
    const NodeId diff =
        graph_.sub(graph_.slice_col(u, a.component), graph_.constant(Tensor::full(Shape{1}, a.value)));
    return component_mse(diff, prob_.u_ref, prob_.lambda_dirichlet, 1);
  }

  static ref::Edge edge_by_name(const std::string& n) {
    if (n == "left") return ref::Edge::left;
    if (n == "right") return ref::Edge::right;
    if (n == "bottom") return ref::Edge::bottom;
    return ref::Edge::top;
  }

  static std::array<double, 2> normal_of(ref::Edge e) {
    switch (e) {
      case ref::Edge::left: return {-1.0, 0.0};
      case ref::Edge::right: return {1.0, 0.0};
      case ref::Edge::bottom: return {0.0, -1.0};
      case ref::Edge::top: return {0.0, 1.0};
    }
    return {0, 0};
  }

  PinnProblem prob_;
  Graph graph_;
  models::DenseParams params_;
  nnfield::InputMap map_;
  sampling::PointSet interior_;
  nnfield::ParamBinder binder_;
  NodeId loss_ = -1;
  std::vector<NodeId> grads_;
  std::vector<std::pair<std::string, NodeId>> components_;
};

struct TrainResult {
  models::DenseNetwork net;
  std::vector<double> loss_history;
  double final_loss = 0.0;
  double grad_inf = 0.0;
  bool converged = false;
  bool flagged = false;  // non-convergence or line-search failure
  double seconds = 0.0;
};

/// Adam warmup followed by L-BFGS, both on the flattened parameters.
inline TrainResult train(PinnSystem& system, const models::DenseSpec& spec, std::uint64_t seed,
                         const TrainSchedule& sched, double convergence_threshold) {
  const auto t0 = std::chrono::steady_clock::now();
  models::DenseNetwork net = models::init_dense(spec, seed);
  std::vector<double> x = models::flatten(net);

  opt::LossFn fn = [&system](std::span<const double> p, std::span<double> g) {
    return system.eval(p, g);
  };
  TrainResult res;
  auto adam = opt::adam_run(fn, std::move(x), sched.adam_steps, {.lr = sched.adam_lr});
  res.loss_history = std::move(adam.history);

  opt::LbfgsOpts lopts;
  lopts.max_iter = sched.lbfgs_max_iter;
  lopts.grad_tol = sched.lbfgs_grad_tol;
  auto lb = opt::lbfgs_run(fn, std::move(adam.x), lopts);
  res.loss_history.insert(res.loss_history.end(), lb.history.begin(), lb.history.end());
  res.final_loss = lb.f;
  res.grad_inf = lb.grad_inf;
  res.converged = lb.f < convergence_threshold;
  res.flagged = !res.converged;
  models::unflatten(net, lb.x);
  res.net = std::move(net);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

// ---- cantilever benchmark ----

struct CantileverConfig {
  ref::CantileverParams params;
  sampling::Method method = sampling::Method::halton;
  std::size_t n_interior = 400;
  std::size_t n_boundary = 100;
  models::DenseSpec net;  // 3x20 swish default
  // The closed-form reference solves the linear problem; the fvk variant is
  // selectable but shifts the solution by O(slope^2).
  mech::Kinematics kinematics = mech::Kinematics::linear;
  double lambda_dirichlet = 100.0, lambda_neumann = 100.0;
  std::uint64_t seed = 0;
  TrainSchedule schedule;
  std::size_t eval_nx = 201, eval_nz = 51;
};

struct CantileverReport {
  models::DenseNetwork net;
  double relative_l2 = 1.0;
  std::vector<double> loss_history;
  double final_loss = 0.0;
  bool flagged = false;
  double train_seconds = 0.0;
  // evaluation-grid fields
  std::vector<std::array<double, 2>> eval_points;
  nnfield::FieldSample fields;
  double u_ref = 0.0, sigma_ref = 0.0;
};

inline PinnProblem make_cantilever_problem(const CantileverConfig& cfg) {
  const auto& c = cfg.params;
  c.validate();
  PinnProblem prob;
  prob.geom = {c.length, c.depth, 1.0};
  prob.material.law = mech::MaterialField::Law::uniform;
  prob.material.e1 = c.e;
  prob.material.nu = c.nu;
  prob.material.mode = mech::PlaneMode::plane_stress;
  prob.kinematics = cfg.kinematics;
  prob.method = cfg.method;
  prob.n_interior = cfg.n_interior;
  prob.n_boundary = cfg.n_boundary;
  prob.net = cfg.net;
  prob.lambda_dirichlet = cfg.lambda_dirichlet;
  prob.lambda_neumann = cfg.lambda_neumann;
  prob.seed = cfg.seed;
  prob.schedule = cfg.schedule;
  // characteristic scales: tip-deflection magnitude, the bending stress it
  // implies (curvature u_ref/L^2 at fiber D/2), and the peak applied traction
  prob.u_ref = std::abs(c.p) * std::pow(c.length, 3) / (3.0 * c.e * c.inertia());
  prob.sigma_ref = c.e * prob.u_ref * c.depth / (c.length * c.length);
  prob.t_ref = std::abs(c.p) / (2.0 * c.inertia()) * c.depth * c.depth / 4.0;

  prob.left.x = {ComponentBc::Kind::dirichlet,
                 [c](double, double z) { return ref::timoshenko_u(0.0, z, c).first; }};
  prob.left.z = {ComponentBc::Kind::dirichlet,
                 [c](double, double z) { return ref::timoshenko_u(0.0, z, c).second; }};
  prob.right.x = {ComponentBc::Kind::traction, nullptr};
  prob.right.z = {ComponentBc::Kind::traction,
                  [c](double, double z) { return ref::cantilever_end_traction(z, c); }};
  // top and bottom are traction-free
  return prob;
}

inline CantileverReport solve_cantilever(const CantileverConfig& cfg) {
  PinnProblem prob = make_cantilever_problem(cfg);
  PinnSystem system(prob);
  TrainResult tr = train(system, prob.net, prob.seed, prob.schedule, prob.convergence_threshold);

  CantileverReport rep;
  rep.loss_history = std::move(tr.loss_history);
  rep.final_loss = tr.final_loss;
  rep.flagged = tr.flagged;
  rep.train_seconds = tr.seconds;
  rep.u_ref = prob.u_ref;
  rep.sigma_ref = prob.sigma_ref;

  const auto& c = cfg.params;
  const auto xs = sampling::linspace(0.0, c.length, cfg.eval_nx);
  const auto zs = sampling::linspace(-c.depth / 2, c.depth / 2, cfg.eval_nz);
  for (double x : xs)
    for (double z : zs) rep.eval_points.push_back({x, z});

  const auto map = nnfield::InputMap::centered(c.length, c.depth);
  rep.fields = nnfield::evaluate_fields(tr.net, map, prob.u_ref, nnfield::identity_constraint,
                                        rep.eval_points, prob.material, prob.geom,
                                        prob.kinematics);
  std::vector<double> ref_ux(rep.eval_points.size()), ref_uz(rep.eval_points.size());
  for (std::size_t i = 0; i < rep.eval_points.size(); ++i) {
    const auto [ux, uz] = ref::timoshenko_u(rep.eval_points[i][0], rep.eval_points[i][1], c);
    ref_ux[i] = ux;
    ref_uz[i] = uz;
  }
  rep.relative_l2 = relative_l2(rep.fields.ux, rep.fields.uz, ref_ux, ref_uz);
  rep.net = std::move(tr.net);
  return rep;
}

/// Penalty-form problem for a beam supported at both ends carrying a vertical
/// top-edge load q (per unit length, acting along +z); the cross-method
/// comparison against the energy solver uses this.
inline PinnProblem make_supported_beam_problem(const mech::Geometry& geom,
                                               const mech::MaterialField& material,
                                               ref::SupportKind support, double load_q) {
  PinnProblem prob;
  prob.geom = geom;
  prob.material = material;
  auto zero = ComponentBc{ComponentBc::Kind::traction, nullptr};
  auto uz_pinned = ComponentBc{ComponentBc::Kind::dirichlet, nullptr};
  auto ux_pinned = ComponentBc{ComponentBc::Kind::dirichlet, nullptr};
  switch (support) {
    case ref::SupportKind::hinged_hinged:
      prob.left = {zero, uz_pinned};
      prob.right = {zero, uz_pinned};
      prob.anchors.push_back({0.0, 0.0, 0, 0.0});
      break;
    case ref::SupportKind::clamped_clamped:
      prob.left = {ux_pinned, uz_pinned};
      prob.right = {ux_pinned, uz_pinned};
      break;
    case ref::SupportKind::clamped_hinged:
      prob.left = {ux_pinned, uz_pinned};
      prob.right = {zero, uz_pinned};
      break;
  }
  const double tz = load_q / geom.width;  // Pa on the top edge
  prob.top.x = zero;
  prob.top.z = {ComponentBc::Kind::traction, [tz](double, double) { return tz; }};
  prob.bottom = {zero, zero};
  // characteristic scales from the uniformly loaded supported beam
  const double inertia = geom.width * std::pow(geom.thickness, 3) / 12.0;
  prob.u_ref = std::max(5.0 * std::abs(load_q) * std::pow(geom.length, 4) /
                            (384.0 * material.e1 * inertia),
                        1e-12 * geom.thickness);
  prob.sigma_ref = material.e1 * prob.u_ref * geom.thickness / (geom.length * geom.length);
  prob.t_ref = std::max(std::abs(tz), 1e-12 * prob.sigma_ref);
  return prob;
}

}  // namespace porobeam::pinn
