#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "porobeam/graph.hpp"
#include "porobeam/tensor.hpp"

namespace porobeam::mech {

struct Geometry {
  double length = 1.0;     // L
  double thickness = 0.1;  // h (the cantilever benchmark calls this D)
  double width = 0.1;      // b

  void validate() const {
    if (length <= 0 || thickness <= 0 || width <= 0) throw Error("geometry: extents must be positive");
    if (length / thickness <= 1.0) throw Error("geometry: slenderness L/h must exceed 1");
  }
};

enum class PlaneMode { plane_stress, plane_strain };
enum class Kinematics { linear, fvk };

/// Poisson ratio plus the through-thickness Young's-modulus law.
/// z is centered: z in [-h/2, +h/2], zeta = z/h in [-1/2, 1/2].
struct MaterialField {
  enum class Law { uniform, symmetric, asymmetric, tabulated };

  Law law = Law::uniform;
  double e1 = 200e9;  // E_1, the maximum modulus
  double e0 = 0.0;    // porosity coefficient, 0 <= e0 < 1
  double nu = 0.3;
  PlaneMode mode = PlaneMode::plane_stress;
  std::vector<double> table_z, table_e;  // tabulated law, monotone z

  void validate() const {
    if (!(nu > 0.0 && nu < 0.5)) throw Error("material: 0 < nu < 0.5 required");
    if (e0 < 0.0 || e0 >= 1.0) throw Error("material: 0 <= e0 < 1 required");
    if (law != Law::tabulated && e1 <= 0.0) throw Error("material: E1 must be positive");
    if (law == Law::tabulated && (table_z.size() < 2 || table_z.size() != table_e.size()))
      throw Error("material: tabulated law needs matching z/E tables");
  }
};

/// E(z) per the selected porosity law.
///   symmetric:  E1 [1 - e0 cos(pi zeta)]           (softest at midplane)
///   asymmetric: E1 [1 - e0 cos(pi zeta/2 + pi/4)]  (softest at bottom surface)
inline double modulus_at(const MaterialField& m, double z, const Geometry& geom) {
  const double h = geom.thickness;
  if (z < -h / 2 - 1e-12 * h || z > h / 2 + 1e-12 * h)
    throw Error("modulus_at: z outside thickness");
  const double zeta = z / h;
  double e = 0.0;
  switch (m.law) {
    case MaterialField::Law::uniform: e = m.e1; break;
    case MaterialField::Law::symmetric: e = m.e1 * (1.0 - m.e0 * std::cos(3.14159265358979323846 * zeta)); break;
    case MaterialField::Law::asymmetric:
      e = m.e1 * (1.0 - m.e0 * std::cos(0.5 * 3.14159265358979323846 * zeta + 0.25 * 3.14159265358979323846));
      break;
    case MaterialField::Law::tabulated: {
      const auto& tz = m.table_z;
      const auto& te = m.table_e;
      if (z <= tz.front()) {
        e = te.front();
        break;
      }
      if (z >= tz.back()) {
        e = te.back();
        break;
      }
      std::size_t k = 1;
      while (k + 1 < tz.size() && tz[k] < z) ++k;
      const double t = (z - tz[k - 1]) / (tz[k] - tz[k - 1]);
      e = te[k - 1] + t * (te[k] - te[k - 1]);
      break;
    }
  }
  if (e <= 0.0) throw Error("modulus_at: nonpositive modulus");
  return e;
}

/// Lame parameters. In plane stress, lambda is replaced by the effective
/// lambda* = 2 lambda mu / (lambda + 2 mu).
inline std::pair<double, double> lame(double e, double nu, PlaneMode mode) {
  if (e <= 0.0) throw Error("lame: E must be positive");
  if (!(nu < 0.5)) throw Error("lame: nu = 0.5 is singular");
  const double mu = e / (2.0 * (1.0 + nu));
  double lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  if (mode == PlaneMode::plane_stress) lambda = 2.0 * lambda * mu / (lambda + 2.0 * mu);
  return {lambda, mu};
}

// ---- kinematics and constitutive law ----
// The templates run on plain doubles and on graph expressions alike, so the
// solvers and the oracle-style checks share one set of formulas.

template <class T>
struct GradU {
  T ux_x, ux_z, uz_x, uz_z;
};

template <class T>
struct Strains {
  T xx, zz, xz;
};

template <class T>
struct Stress {
  T xx, yy, zz, xz;
};

template <class T>
inline T half_square(T v) {
  return 0.5 * (v * v);
}

/// Nonzero strain components. In fvk mode the in-plane normal strain keeps
/// the rotation term 1/2 (d u_z / d x)^2.
template <class T>
inline Strains<T> fvk_strains(const GradU<T>& g, Kinematics kin) {
  Strains<T> s{g.ux_x, g.uz_z, 0.5 * (g.ux_z + g.uz_x)};
  if (kin == Kinematics::fvk) s.xx = s.xx + half_square(g.uz_x);
  return s;
}

/// sigma = 2 mu eps + lambda tr(eps) I applied to the beam strain state.
template <class T>
inline Stress<T> stresses_from(const Strains<T>& s, T lambda, T mu) {
  const T tr = s.xx + s.zz;
  return {2.0 * (mu * s.xx) + lambda * tr, lambda * tr, 2.0 * (mu * s.zz) + lambda * tr,
          2.0 * (mu * s.xz)};
}

template <class T>
inline Stress<T> stresses(const GradU<T>& g, T lambda, T mu, Kinematics kin) {
  return stresses_from(fvk_strains(g, kin), lambda, mu);
}

/// Strain-energy density 1/2 sigma : eps (plane components only).
template <class T>
inline T energy_density(const GradU<T>& g, T lambda, T mu, Kinematics kin) {
  const Strains<T> e = fvk_strains(g, kin);
  const Stress<T> s = stresses_from(e, lambda, mu);
  return 0.5 * (s.xx * e.xx + s.zz * e.zz + 2.0 * (s.xz * e.xz));
}

/// Momentum flux rows of (I + grad u) . sigma; in linear kinematics the
/// convective terms drop and the flux is sigma itself.
/// Order: (F_xx, F_xz, F_zx, F_zz) with r_x = dF_xx/dx + dF_xz/dz + f_x.
template <class T>
inline std::array<T, 4> momentum_flux(const GradU<T>& g, T lambda, T mu, Kinematics kin) {
  const Stress<T> s = stresses(g, lambda, mu, kin);
  if (kin == Kinematics::linear) return {s.xx, s.xz, s.xz, s.zz};
  return {s.xx + g.ux_x * s.xx + g.ux_z * s.xz, s.xz + g.ux_x * s.xz + g.ux_z * s.zz,
          s.xz + g.uz_x * s.xx + g.uz_z * s.xz, s.zz + g.uz_x * s.xz + g.uz_z * s.zz};
}

/// Literal transcription of the expanded flux terms M_pq, kept for
/// cross-checking only; momentum_flux is authoritative. The cubic coefficient
/// in M_zx is retained exactly as printed, (2 mu + lambda/2), although the
/// compositional flux yields (mu + lambda/2) there.
template <class T>
inline std::array<T, 4> m_terms(const GradU<T>& g, T lambda, T mu) {
  const T a = g.ux_x, b = g.ux_z, c = g.uz_z, d = g.uz_x;
  const T mxx = (2.0 * mu + lambda) * a + lambda * c + (2.0 * mu + lambda) * (a * a) +
                mu * (b * b) + (mu + 0.5 * lambda) * (d * d) + lambda * (a * c) + mu * (b * d) +
                (mu + 0.5 * lambda) * (a * (d * d));
  const T mxz = mu * b + mu * d + (mu + lambda) * (a * b) + mu * (a * d) +
                (2.0 * mu + lambda) * (c * b) + 0.5 * lambda * (b * (d * d));
  const T mzx = mu * b + mu * d + (mu + lambda) * (c * d) + mu * (b * c) +
                (2.0 * mu + lambda) * (a * d) + (2.0 * mu + 0.5 * lambda) * (d * (d * d));
  const T mzz = (2.0 * mu + lambda) * c + lambda * a + (2.0 * mu + lambda) * (c * c) +
                (mu + 0.5 * lambda) * (d * d) + lambda * (a * c) + mu * (b * d) +
                0.5 * lambda * (c * (d * d));
  return {mxx, mxz, mzx, mzz};
}

/// The potential-energy integrand exactly as expanded in the source
/// formulation (fvk form). Kept for the algebraic-agreement check; the
/// canonical 1/2 sigma : eps above is what the solvers minimize.
template <class T>
inline T energy_density_expanded(const GradU<T>& g, T lambda, T mu) {
  const T a = g.ux_x, b = g.ux_z, c = g.uz_z, d = g.uz_x;
  return (mu + 0.5 * lambda) * (a * a + c * c) + 0.25 * (mu * (b * b)) +
         0.25 * ((mu + lambda) * (d * d)) + lambda * (a * c) + 0.5 * (mu * (b * d)) +
         (mu + 0.75 * lambda) * (a * (d * d)) + 0.25 * (lambda * (c * (d * d))) +
         0.25 * ((mu + lambda) * ((d * d) * (d * d)));
}

// ---- graph-level assembly ----

using ad::Expr;
using ad::Graph;
using ad::NodeId;

/// Per-point displacement gradients of a batched field u [N,2] built from the
/// point input [N,2], via one reverse sweep per component. Points enter the
/// field only through their own row, so the summed seeds give row-wise
/// derivatives.
inline GradU<Expr> field_gradients(Graph& g, NodeId points, NodeId u) {
  const NodeId wrt[] = {points};
  const NodeId dx = g.backward(g.sum(g.slice_col(u, 0)), wrt)[0];
  const NodeId dz = g.backward(g.sum(g.slice_col(u, 1)), wrt)[0];
  return {Expr{g, g.slice_col(dx, 0)}, Expr{g, g.slice_col(dx, 1)}, Expr{g, g.slice_col(dz, 0)},
          Expr{g, g.slice_col(dz, 1)}};
}

struct ResidualNodes {
  NodeId rx, rz;
};

/// Interior momentum residual r = div[(I + grad u) sigma] + f at every point
/// of the batch, assembled compositionally from the flux expressions.
inline ResidualNodes momentum_residual(Graph& g, NodeId points, NodeId u, Expr lambda, Expr mu,
                                       Expr fx, Expr fz, Kinematics kin) {
  const GradU<Expr> gu = field_gradients(g, points, u);
  const std::array<Expr, 4> f = momentum_flux(gu, lambda, mu, kin);
  const NodeId wrt[] = {points};
  const NodeId dxx = g.backward(g.sum(f[0].id), wrt)[0];
  const NodeId dxz = g.backward(g.sum(f[1].id), wrt)[0];
  const NodeId dzx = g.backward(g.sum(f[2].id), wrt)[0];
  const NodeId dzz = g.backward(g.sum(f[3].id), wrt)[0];
  const NodeId rx = g.add(g.add(g.slice_col(dxx, 0), g.slice_col(dxz, 1)), fx.id);
  const NodeId rz = g.add(g.add(g.slice_col(dzx, 0), g.slice_col(dzz, 1)), fz.id);
  return {rx, rz};
}

/// Point-wise convenience for a twice-differentiable displacement map; the
/// batched graph form above is what the solvers use.
inline std::pair<double, double> momentum_residual_at(
    const std::function<NodeId(Graph&, NodeId)>& displacement_builder, double x, double z,
    const MaterialField& material, const Geometry& geom, std::array<double, 2> body_force,
    Kinematics kin) {
  Graph g;
  const NodeId pts = g.input(Shape{1, 2});
  const NodeId u = displacement_builder(g, pts);
  const auto [lam, mu] = lame(modulus_at(material, z, geom), material.nu, material.mode);
  const Expr lamc{g, g.constant(Tensor::full(Shape{1}, lam))};
  const Expr muc{g, g.constant(Tensor::full(Shape{1}, mu))};
  const Expr fxc{g, g.constant(Tensor::full(Shape{1}, body_force[0]))};
  const Expr fzc{g, g.constant(Tensor::full(Shape{1}, body_force[1]))};
  const ResidualNodes r = momentum_residual(g, pts, u, lamc, muc, fxc, fzc, kin);
  g.bind(pts, std::vector<double>{x, z});
  g.evaluate({r.rx, r.rz});
  const double rx = g.value(r.rx)[0], rz = g.value(r.rz)[0];
  if (!std::isfinite(rx) || !std::isfinite(rz)) throw Error("momentum_residual: non-finite");
  return {rx, rz};
}

}  // namespace porobeam::mech
