#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "porobeam/mechanics.hpp"
#include "porobeam/sampling.hpp"
#include "porobeam/tensor.hpp"

namespace porobeam::ref {

// ---- closed-form cantilever fields ----

struct CantileverParams {
  double p = 2.0;       // total end load per unit width
  double length = 8.0;  // L
  double depth = 2.0;   // D
  double e = 1e3;
  double nu = 0.25;

  double inertia() const { return depth * depth * depth / 12.0; }  // per unit width
  void validate() const {
    if (p == 0.0 || length <= 0 || depth <= 0 || e <= 0) throw Error("cantilever: bad parameters");
  }
};

/// End-loaded cantilever displacement field in the centered-z convention.
/// The sign of u_x is the one consistent with the stress field below and with
/// the prescribed-displacement data at x = 0 (the variants disagree in some
/// presentations).
inline std::pair<double, double> timoshenko_u(double x, double z, const CantileverParams& c) {
  const double i = c.inertia();
  const double ux = c.p * z / (6.0 * c.e * i) *
                    ((6.0 * c.length - 3.0 * x) * x +
                     (2.0 + c.nu) * (z * z - c.depth * c.depth / 4.0));
  const double uz = -c.p / (6.0 * c.e * i) *
                    (3.0 * c.nu * z * z * (c.length - x) +
                     (4.0 + 5.0 * c.nu) * c.depth * c.depth * x / 4.0 +
                     (3.0 * c.length - x) * x * x);
  return {ux, uz};
}

/// (sigma_xx, sigma_zz, tau_xz); sigma_zz vanishes identically.
inline std::array<double, 3> timoshenko_sigma(double x, double z, const CantileverParams& c) {
  const double i = c.inertia();
  return {c.p * (c.length - x) * z / i, 0.0,
          -c.p / (2.0 * i) * (c.depth * c.depth / 4.0 - z * z)};
}

/// Parabolic end traction (the z-component on the face x = L).
inline double cantilever_end_traction(double z, const CantileverParams& c) {
  return timoshenko_sigma(c.length, z, c)[2];
}

// ---- structured bilinear-quad plane FEM ----

enum class NodeOrder { z_fast, x_fast };

struct FemMesh {
  std::size_t nx = 8, nz = 4;  // element counts
  double x0 = 0, x1 = 1, z0 = 0, z1 = 1;
  NodeOrder order = NodeOrder::z_fast;

  std::size_t node_count() const { return (nx + 1) * (nz + 1); }
  std::size_t elem_count() const { return nx * nz; }
  double hx() const { return (x1 - x0) / static_cast<double>(nx); }
  double hz() const { return (z1 - z0) / static_cast<double>(nz); }

  std::size_t node_id(std::size_t ix, std::size_t iz) const {
    return order == NodeOrder::z_fast ? ix * (nz + 1) + iz : iz * (nx + 1) + ix;
  }
  std::array<double, 2> node_xz(std::size_t ix, std::size_t iz) const {
    return {x0 + hx() * static_cast<double>(ix), z0 + hz() * static_cast<double>(iz)};
  }
  void validate() const {
    if (nx < 1 || nz < 1) throw Error("fem mesh: element counts must be positive");
    if (!(x1 > x0 && z1 > z0)) throw Error("fem mesh: degenerate rectangle");
  }
};

struct Constraint {
  std::size_t dof;  // 2*node + component
  double value;
};

enum class Edge { left, right, bottom, top };

struct EdgeTraction {
  Edge edge;
  // traction (t_x, t_z) in Pa as a function of the running coordinate
  // (x for top/bottom, z for left/right)
  std::function<std::array<double, 2>(double)> t;
};

enum class SupportKind { hinged_hinged, clamped_clamped, clamped_hinged };

inline SupportKind support_from_string(const std::string& s) {
  if (s == "HH" || s == "hh" || s == "H-H") return SupportKind::hinged_hinged;
  if (s == "CC" || s == "cc" || s == "C-C") return SupportKind::clamped_clamped;
  if (s == "CH" || s == "ch" || s == "C-H") return SupportKind::clamped_hinged;
  throw Error("unknown support kind: " + s);
}

inline std::string to_string(SupportKind k) {
  switch (k) {
    case SupportKind::hinged_hinged: return "HH";
    case SupportKind::clamped_clamped: return "CC";
    case SupportKind::clamped_hinged: return "CH";
  }
  return "?";
}

/// Prescribes (component, value-function) pairs along a mesh face at x = x0
/// or x = x1.
inline void constrain_end_face(const FemMesh& m, bool right_face, bool fix_x, bool fix_z,
                               std::vector<Constraint>& out,
                               const std::function<std::pair<double, double>(double)>& value =
                                   nullptr) {
  const std::size_t ix = right_face ? m.nx : 0;
  for (std::size_t iz = 0; iz <= m.nz; ++iz) {
    const auto [x, z] = m.node_xz(ix, iz);
    (void)x;
    const auto v = value ? value(z) : std::pair<double, double>{0.0, 0.0};
    const std::size_t n = m.node_id(ix, iz);
    if (fix_x) out.push_back({2 * n, v.first});
    if (fix_z) out.push_back({2 * n + 1, v.second});
  }
}

/// Support constraints in the convention used throughout: a clamped end fixes
/// both components on the whole face; a hinged end fixes u_z on the whole
/// face; hinged-hinged additionally pins u_x at the midplane of x = 0 to
/// remove the axial rigid mode. C-H clamps x = 0 and hinges x = L.
inline std::vector<Constraint> support_constraints(const FemMesh& m, SupportKind kind) {
  std::vector<Constraint> out;
  switch (kind) {
    case SupportKind::clamped_clamped:
      constrain_end_face(m, false, true, true, out);
      constrain_end_face(m, true, true, true, out);
      break;
    case SupportKind::hinged_hinged: {
      constrain_end_face(m, false, false, true, out);
      constrain_end_face(m, true, false, true, out);
      const std::size_t mid = m.nz / 2;  // midplane anchor (nz even in practice)
      out.push_back({2 * m.node_id(0, mid), 0.0});
      break;
    }
    case SupportKind::clamped_hinged:
      constrain_end_face(m, false, true, true, out);
      constrain_end_face(m, true, false, true, out);
      break;
  }
  return out;
}

namespace detail {

/// 8x8 bilinear-quad stiffness for a rectangle element, 2x2 Gauss points,
/// constitutive matrix D (3x3: xx, zz, xz with engineering shear).
inline void quad_stiffness(double hx, double hz, const std::array<double, 9>& d, double thickness,
                           std::array<double, 64>& ke) {
  ke.fill(0.0);
  const double g = 1.0 / std::sqrt(3.0);
  const double jac = hx * hz / 4.0;
  for (int gx = 0; gx < 2; ++gx)
    for (int gz = 0; gz < 2; ++gz) {
      const double xi = gx ? g : -g, eta = gz ? g : -g;
      // dN/dxi, dN/deta for local nodes (-,-), (+,-), (+,+), (-,+)
      const double dndxi[4] = {-(1 - eta) / 4, (1 - eta) / 4, (1 + eta) / 4, -(1 + eta) / 4};
      const double dndeta[4] = {-(1 - xi) / 4, -(1 + xi) / 4, (1 + xi) / 4, (1 - xi) / 4};
      double bx[4], bz[4];
      for (int a = 0; a < 4; ++a) {
        bx[a] = dndxi[a] * 2.0 / hx;
        bz[a] = dndeta[a] * 2.0 / hz;
      }
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          // B_a^T D B_b blocks
          const double kxx = bx[a] * d[0] * bx[b] + bz[a] * d[8] * bz[b];
          const double kxz = bx[a] * d[1] * bz[b] + bz[a] * d[8] * bx[b];
          const double kzx = bz[a] * d[3] * bx[b] + bx[a] * d[8] * bz[b];
          const double kzz = bz[a] * d[4] * bz[b] + bx[a] * d[8] * bx[b];
          ke[(2 * a) * 8 + 2 * b] += kxx * jac * thickness;
          ke[(2 * a) * 8 + 2 * b + 1] += kxz * jac * thickness;
          ke[(2 * a + 1) * 8 + 2 * b] += kzx * jac * thickness;
          ke[(2 * a + 1) * 8 + 2 * b + 1] += kzz * jac * thickness;
        }
    }
}

inline std::array<double, 9> constitutive(double e, double nu, mech::PlaneMode mode) {
  const auto [lam, mu] = mech::lame(e, nu, mode);
  return {2 * mu + lam, lam, 0, lam, 2 * mu + lam, 0, 0, 0, mu};
}

}  // namespace detail

/// Linear-kinematics structured solver with element-centroid moduli and a
/// cached Cholesky pattern for repeated solves on one mesh.
class FemSolver {
 public:
  FemSolver(FemMesh mesh, mech::Geometry geom, std::vector<Constraint> constraints)
      : mesh_(mesh), geom_(geom), constraints_(std::move(constraints)) {
    mesh_.validate();
    const std::size_t ndof = 2 * mesh_.node_count();
    reduced_.assign(ndof, -1);
    prescribed_.assign(ndof, 0.0);
    std::vector<bool> fixed(ndof, false);
    for (const auto& c : constraints_) {
      fixed[c.dof] = true;
      prescribed_[c.dof] = c.value;
    }
    std::size_t nr = 0;
    for (std::size_t d = 0; d < ndof; ++d)
      if (!fixed[d]) reduced_[d] = static_cast<long>(nr++);
    n_reduced_ = nr;
    if (n_reduced_ == 0) throw Error("fem: fully constrained system");
    if (n_reduced_ == 2 * mesh_.node_count()) throw Error("fem: insufficient constraints");
  }

  const FemMesh& mesh() const { return mesh_; }

  /// Assembles and solves; returns the full nodal displacement vector
  /// (u_x, u_z interleaved by node id).
  std::vector<double> solve(const mech::MaterialField& material,
                            const std::vector<EdgeTraction>& loads) {
    material.validate();
    const std::size_t ndof = 2 * mesh_.node_count();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(mesh_.elem_count() * 64);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<long>(n_reduced_));

    std::array<double, 64> ke{};
    for (std::size_t ex = 0; ex < mesh_.nx; ++ex)
      for (std::size_t ez = 0; ez < mesh_.nz; ++ez) {
        const double zc = mesh_.z0 + mesh_.hz() * (static_cast<double>(ez) + 0.5);
        const double e = mech::modulus_at(material, zc, geom_);
        const auto d = detail::constitutive(e, material.nu, material.mode);
        detail::quad_stiffness(mesh_.hx(), mesh_.hz(), d, geom_.width, ke);
        const std::size_t nodes[4] = {mesh_.node_id(ex, ez), mesh_.node_id(ex + 1, ez),
                                      mesh_.node_id(ex + 1, ez + 1), mesh_.node_id(ex, ez + 1)};
        for (int a = 0; a < 8; ++a) {
          const std::size_t da = 2 * nodes[a / 2] + (a % 2);
          if (reduced_[da] < 0) continue;
          for (int b = 0; b < 8; ++b) {
            const std::size_t db = 2 * nodes[b / 2] + (b % 2);
            const double kab = ke[static_cast<std::size_t>(a) * 8 + static_cast<std::size_t>(b)];
            if (reduced_[db] >= 0)
              trips.emplace_back(reduced_[da], reduced_[db], kab);
            else
              rhs[reduced_[da]] -= kab * prescribed_[db];
          }
        }
      }

    add_loads(loads, rhs);

    Eigen::SparseMatrix<double> k(static_cast<long>(n_reduced_), static_cast<long>(n_reduced_));
    k.setFromTriplets(trips.begin(), trips.end());
    if (!analyzed_) {
      solver_.analyzePattern(k);
      analyzed_ = true;
    }
    solver_.factorize(k);
    if (solver_.info() != Eigen::Success) throw Error("fem: factorization failed (not SPD?)");
    Eigen::VectorXd u = solver_.solve(rhs);
    if (solver_.info() != Eigen::Success) throw Error("fem: solve failed");

    std::vector<double> full(ndof);
    for (std::size_t d = 0; d < ndof; ++d)
      full[d] = reduced_[d] >= 0 ? u[reduced_[d]] : prescribed_[d];
    return full;
  }

 private:
  void add_loads(const std::vector<EdgeTraction>& loads, Eigen::VectorXd& rhs) const {
    const double g = 1.0 / std::sqrt(3.0);
    for (const auto& load : loads) {
      const bool horizontal = load.edge == Edge::top || load.edge == Edge::bottom;
      const std::size_t count = horizontal ? mesh_.nx : mesh_.nz;
      const double h = horizontal ? mesh_.hx() : mesh_.hz();
      for (std::size_t k = 0; k < count; ++k) {
        std::size_t n0, n1;
        double s0;
        switch (load.edge) {
          case Edge::top:
            n0 = mesh_.node_id(k, mesh_.nz);
            n1 = mesh_.node_id(k + 1, mesh_.nz);
            s0 = mesh_.x0 + mesh_.hx() * static_cast<double>(k);
            break;
          case Edge::bottom:
            n0 = mesh_.node_id(k, 0);
            n1 = mesh_.node_id(k + 1, 0);
            s0 = mesh_.x0 + mesh_.hx() * static_cast<double>(k);
            break;
          case Edge::left:
            n0 = mesh_.node_id(0, k);
            n1 = mesh_.node_id(0, k + 1);
            s0 = mesh_.z0 + mesh_.hz() * static_cast<double>(k);
            break;
          case Edge::right:
          default:
            n0 = mesh_.node_id(mesh_.nx, k);
            n1 = mesh_.node_id(mesh_.nx, k + 1);
            s0 = mesh_.z0 + mesh_.hz() * static_cast<double>(k);
            break;
        }
        // 2-point Gauss along the edge with linear shape functions
        for (int q = 0; q < 2; ++q) {
          const double xi = q ? g : -g;
          const double s = s0 + 0.5 * h * (xi + 1.0);
          const auto t = load.t(s);
          const double w = 0.5 * h * geom_.width;  // unit Gauss weight
          const double sh0 = 0.5 * (1.0 - xi), sh1 = 0.5 * (1.0 + xi);
          const std::size_t dofs[4] = {2 * n0, 2 * n0 + 1, 2 * n1, 2 * n1 + 1};
          const double vals[4] = {sh0 * t[0], sh0 * t[1], sh1 * t[0], sh1 * t[1]};
          for (int m = 0; m < 4; ++m)
            if (reduced_[dofs[m]] >= 0) rhs[reduced_[dofs[m]]] += w * vals[m];
        }
      }
    }
  }

  FemMesh mesh_;
  mech::Geometry geom_;
  std::vector<Constraint> constraints_;
  std::vector<long> reduced_;
  std::vector<double> prescribed_;
  std::size_t n_reduced_ = 0;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> solver_;
  bool analyzed_ = false;
};

/// One-shot convenience wrapper.
inline std::vector<double> fem_solve(const FemMesh& mesh, const mech::MaterialField& material,
                                     const mech::Geometry& geom,
                                     const std::vector<Constraint>& constraints,
                                     const std::vector<EdgeTraction>& loads) {
  FemSolver solver(mesh, geom, constraints);
  return solver.solve(material, loads);
}

struct ElementStress {
  double x, z;  // element center
  double sxx, szz, sxz;
};

/// Strains from shape-function gradients at element centers, stresses via the
/// plane law with the local modulus.
inline std::vector<ElementStress> fem_stress_recovery(const FemMesh& mesh,
                                                      const mech::MaterialField& material,
                                                      const mech::Geometry& geom,
                                                      const std::vector<double>& u) {
  std::vector<ElementStress> out;
  out.reserve(mesh.elem_count());
  for (std::size_t ex = 0; ex < mesh.nx; ++ex)
    for (std::size_t ez = 0; ez < mesh.nz; ++ez) {
      const std::size_t nodes[4] = {mesh.node_id(ex, ez), mesh.node_id(ex + 1, ez),
                                    mesh.node_id(ex + 1, ez + 1), mesh.node_id(ex, ez + 1)};
      // center of the reference square: dN/dxi = (-1,1,1,-1)/4, dN/deta = (-1,-1,1,1)/4
      const double bx[4] = {-0.5 / mesh.hx(), 0.5 / mesh.hx(), 0.5 / mesh.hx(), -0.5 / mesh.hx()};
      const double bz[4] = {-0.5 / mesh.hz(), -0.5 / mesh.hz(), 0.5 / mesh.hz(), 0.5 / mesh.hz()};
      double exx = 0, ezz = 0, gxz = 0;
      for (int a = 0; a < 4; ++a) {
        exx += bx[a] * u[2 * nodes[a]];
        ezz += bz[a] * u[2 * nodes[a] + 1];
        gxz += bz[a] * u[2 * nodes[a]] + bx[a] * u[2 * nodes[a] + 1];
      }
      const double xc = mesh.x0 + mesh.hx() * (static_cast<double>(ex) + 0.5);
      const double zc = mesh.z0 + mesh.hz() * (static_cast<double>(ez) + 0.5);
      const double e = mech::modulus_at(material, zc, geom);
      const auto d = detail::constitutive(e, material.nu, material.mode);
      out.push_back({xc, zc, d[0] * exx + d[1] * ezz, d[3] * exx + d[4] * ezz, d[8] * gxz});
    }
  return out;
}

/// Bilinear interpolation of the nodal solution at an arbitrary point.
inline std::pair<double, double> fem_interpolate(const FemMesh& mesh, const std::vector<double>& u,
                                                 double x, double z) {
  const double fx = (x - mesh.x0) / mesh.hx();
  const double fz = (z - mesh.z0) / mesh.hz();
  const auto clamp = [](double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); };
  const std::size_t ex = static_cast<std::size_t>(clamp(std::floor(fx), 0.0, static_cast<double>(mesh.nx - 1)));
  const std::size_t ez = static_cast<std::size_t>(clamp(std::floor(fz), 0.0, static_cast<double>(mesh.nz - 1)));
  const double xi = clamp(fx - static_cast<double>(ex), 0.0, 1.0);
  const double eta = clamp(fz - static_cast<double>(ez), 0.0, 1.0);
  const std::size_t n00 = mesh.node_id(ex, ez), n10 = mesh.node_id(ex + 1, ez);
  const std::size_t n11 = mesh.node_id(ex + 1, ez + 1), n01 = mesh.node_id(ex, ez + 1);
  auto lerp = [&](int comp) {
    return (1 - xi) * (1 - eta) * u[2 * n00 + comp] + xi * (1 - eta) * u[2 * n10 + comp] +
           xi * eta * u[2 * n11 + comp] + (1 - xi) * eta * u[2 * n01 + comp];
  };
  return {lerp(0), lerp(1)};
}

}  // namespace porobeam::ref
