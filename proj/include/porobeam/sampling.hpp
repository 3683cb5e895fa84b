#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "porobeam/io.hpp"
#include "porobeam/rng.hpp"
#include "porobeam/tensor.hpp"

namespace porobeam::sampling {

struct Domain2D {
  double x0 = 0, x1 = 1, z0 = 0, z1 = 1;

  double lx() const { return x1 - x0; }
  double lz() const { return z1 - z0; }
  double area() const { return lx() * lz(); }
  void validate() const {
    if (!(x1 > x0) || !(z1 > z0)) throw Error("domain: degenerate extents");
  }
};

enum class Method { grid, quadrature, lhs, halton, hammersley, sobol };

inline Method method_from_string(const std::string& s) {
  if (s == "grid") return Method::grid;
  if (s == "quadrature") return Method::quadrature;
  if (s == "lhs") return Method::lhs;
  if (s == "halton") return Method::halton;
  if (s == "hammersley") return Method::hammersley;
  if (s == "sobol") return Method::sobol;
  throw Error("unknown sampling method: " + s);
}

inline std::string to_string(Method m) {
  switch (m) {
    case Method::grid: return "grid";
    case Method::quadrature: return "quadrature";
    case Method::lhs: return "lhs";
    case Method::halton: return "halton";
    case Method::hammersley: return "hammersley";
    case Method::sobol: return "sobol";
  }
  return "?";
}

struct PointSet {
  std::vector<std::array<double, 2>> points;
  std::vector<double> weights;  // present for quadrature sets; sums to the domain area
  Method method = Method::grid;
  std::uint64_t seed = 0;

  std::size_t size() const { return points.size(); }
};

/// Van der Corput radical inverse in the given base.
inline double radical_inverse(std::uint64_t i, std::uint64_t base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
/// Weights sum to 2; degree 2n-1 polynomials integrate exactly.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre_1d(std::size_t n) {
  if (n < 1 || n > 64) throw Error("gauss_legendre_1d: n out of range [1,64]");
  std::vector<double> x(n), w(n);
  const std::size_t m = (n + 1) / 2;
  for (std::size_t i = 0; i < m; ++i) {
    double xi = std::cos(3.14159265358979323846 * (static_cast<double>(i) + 0.75) /
                         (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = xi;
      if (n == 1) p1 = xi;
      for (std::size_t k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * xi * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = pk;
      }
      const double pn = (n == 1) ? xi : p1;
      const double pn1 = (n == 1) ? 1.0 : p0;
      dp = static_cast<double>(n) * (xi * pn - pn1) / (xi * xi - 1.0);
      const double dx = pn / dp;
      xi -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    x[i] = -xi;
    x[n - 1 - i] = xi;
    const double ww = 2.0 / ((1.0 - xi * xi) * dp * dp);
    w[i] = ww;
    w[n - 1 - i] = ww;
  }
  if (n % 2 == 1) x[n / 2] = 0.0;
  return {x, w};
}

namespace detail {

/// Factorization n ~ nx*nz minimizing |nx*nz - n|, tie-broken by closeness of
/// nx/nz to the domain aspect ratio, then by smaller nx.
inline std::pair<std::size_t, std::size_t> factor_for_aspect(std::size_t n, double aspect) {
  std::size_t best_nx = 1, best_nz = n;
  double best_cnt = 1e300, best_asp = 1e300;
  for (std::size_t nx = 1; nx <= n; ++nx) {
    for (long d = -1; d <= 1; ++d) {
      const double ideal = static_cast<double>(n) / static_cast<double>(nx);
      const long nz_l = std::lround(ideal) + d;
      if (nz_l < 1) continue;
      const std::size_t nz = static_cast<std::size_t>(nz_l);
      const double cnt = std::abs(static_cast<double>(nx * nz) - static_cast<double>(n));
      const double asp = std::abs(std::log((static_cast<double>(nx) / static_cast<double>(nz)) / aspect));
      if (cnt < best_cnt - 1e-9 || (std::abs(cnt - best_cnt) <= 1e-9 && asp < best_asp - 1e-12)) {
        best_cnt = cnt;
        best_asp = asp;
        best_nx = nx;
        best_nz = nz;
      }
    }
  }
  return {best_nx, best_nz};
}

struct Sobol2D {
  // Direction numbers: dimension 1 is the base-2 van der Corput sequence;
  // dimension 2 uses the degree-1 primitive polynomial with m_1 = 1.
  static constexpr int kBits = 52;
  std::array<std::uint64_t, kBits> v1{}, v2{};
  std::uint64_t x1 = 0, x2 = 0;
  std::uint64_t index = 0;

  Sobol2D() {
    std::vector<std::uint64_t> m{1};
    for (int k = 1; k < kBits; ++k) m.push_back((m[k - 1] << 1) ^ m[k - 1]);
    for (int k = 0; k < kBits; ++k) {
      v1[k] = std::uint64_t{1} << (kBits - 1 - k);
      v2[k] = m[k] << (kBits - 1 - k);
    }
  }

  /// Next point of the sequence, Gray-code order, initial zero point skipped.
  std::array<double, 2> next() {
    ++index;
    std::uint64_t c = index - 1;  // flip the first zero bit of the previous index
    int k = 0;
    while (c & 1) {
      c >>= 1;
      ++k;
    }
    x1 ^= v1[k];
    x2 ^= v2[k];
    const double scale = 0x1.0p-52;
    return {static_cast<double>(x1) * scale, static_cast<double>(x2) * scale};
  }
};

}  // namespace detail

/// Tensor-product Gauss-Legendre quadrature: cx*cz cells, n x n points per
/// cell, weights scaled by the cell Jacobian.
inline PointSet tensor_quadrature(const Domain2D& dom, std::size_t cx, std::size_t cz,
                                  std::size_t n) {
  dom.validate();
  if (cx < 1 || cz < 1 || n < 1) throw Error("tensor_quadrature: counts must be positive");
  const auto [gx, gw] = gauss_legendre_1d(n);
  PointSet ps;
  ps.method = Method::quadrature;
  const double hx = dom.lx() / static_cast<double>(cx);
  const double hz = dom.lz() / static_cast<double>(cz);
  for (std::size_t ix = 0; ix < cx; ++ix)
    for (std::size_t iz = 0; iz < cz; ++iz) {
      const double cx0 = dom.x0 + hx * static_cast<double>(ix);
      const double cz0 = dom.z0 + hz * static_cast<double>(iz);
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
          ps.points.push_back({cx0 + 0.5 * hx * (gx[a] + 1.0), cz0 + 0.5 * hz * (gx[b] + 1.0)});
          ps.weights.push_back(0.25 * hx * hz * gw[a] * gw[b]);
        }
    }
  return ps;
}

/// Collocation point generation. Grid and Quadrature round n to the nearest
/// factorization honoring the domain aspect ratio (the actual count is the
/// size of the returned set); the low-discrepancy methods and LHS return
/// exactly n points. Interior sets are strictly inside the domain.
inline PointSet generate(Method method, std::size_t n, const Domain2D& dom, std::uint64_t seed) {
  dom.validate();
  if (n < 1) throw Error("generate: n must be positive");
  PointSet ps;
  ps.method = method;
  ps.seed = seed;
  const double aspect = dom.lx() / dom.lz();
  switch (method) {
    case Method::grid: {
      const auto [nx, nz] = detail::factor_for_aspect(n, aspect);
      for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < nz; ++j)
          ps.points.push_back(
              {dom.x0 + dom.lx() * (static_cast<double>(i) + 0.5) / static_cast<double>(nx),
               dom.z0 + dom.lz() * (static_cast<double>(j) + 0.5) / static_cast<double>(nz)});
      break;
    }
    case Method::quadrature: {
      // 4x4 Gauss-Legendre points per cell
      const std::size_t q = 4;
      const std::size_t cells = std::max<std::size_t>(1, (n + q * q / 2) / (q * q));
      const auto [cx, cz] = detail::factor_for_aspect(cells, aspect);
      PointSet qs = tensor_quadrature(dom, cx, cz, q);
      ps.points = std::move(qs.points);
      ps.weights = std::move(qs.weights);
      break;
    }
    case Method::lhs: {
      Rng rng(seed);
      std::vector<std::size_t> perm_x(n), perm_z(n);
      std::iota(perm_x.begin(), perm_x.end(), 0);
      std::iota(perm_z.begin(), perm_z.end(), 0);
      rng.shuffle(perm_x);
      rng.shuffle(perm_z);
      for (std::size_t i = 0; i < n; ++i) {
        const double ux = (static_cast<double>(perm_x[i]) + rng.uniform()) / static_cast<double>(n);
        const double uz = (static_cast<double>(perm_z[i]) + rng.uniform()) / static_cast<double>(n);
        ps.points.push_back({dom.x0 + dom.lx() * ux, dom.z0 + dom.lz() * uz});
      }
      break;
    }
    case Method::halton: {
      // prime bases (2, 3), index started at 1 to stay strictly interior
      for (std::size_t i = 1; i <= n; ++i)
        ps.points.push_back({dom.x0 + dom.lx() * radical_inverse(i, 2),
                             dom.z0 + dom.lz() * radical_inverse(i, 3)});
      break;
    }
    case Method::hammersley: {
      // equidistant first dimension i/(n+1), van der Corput base 2 second
      for (std::size_t i = 1; i <= n; ++i)
        ps.points.push_back(
            {dom.x0 + dom.lx() * static_cast<double>(i) / static_cast<double>(n + 1),
             dom.z0 + dom.lz() * radical_inverse(i, 2)});
      break;
    }
    case Method::sobol: {
      detail::Sobol2D seq;
      for (std::size_t i = 0; i < n; ++i) {
        const auto [u, v] = seq.next();
        ps.points.push_back({dom.x0 + dom.lx() * u, dom.z0 + dom.lz() * v});
      }
      break;
    }
  }
  return ps;
}

inline void write_csv(const PointSet& ps, const std::filesystem::path& path) {
  std::vector<std::string> header{"x", "z"};
  const bool with_w = !ps.weights.empty();
  if (with_w) header.push_back("weight");
  std::vector<std::vector<double>> rows;
  rows.reserve(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    std::vector<double> row{ps.points[i][0], ps.points[i][1]};
    if (with_w) row.push_back(ps.weights[i]);
    rows.push_back(std::move(row));
  }
  io::write_csv(path, header, rows);
}

/// Equispaced points strictly inside a 1-D interval (half-cell inset).
inline std::vector<double> inset_linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = a + (b - a) * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  return out;
}

/// Closed equispaced grid including endpoints.
inline std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = a;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i)
    out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

}  // namespace porobeam::sampling
