#pragma once

#include <cblas.h>

#include <cmath>
#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "porobeam/tensor.hpp"

namespace porobeam::fourier {

// Truncated 2-D discrete Fourier transform, real-input half-spectrum
// convention.
//
// Retained frequencies: along x the mx lowest signed frequencies in FFT
// order [0, 1, ..., ceil(mx/2)-1, -floor(mx/2), ..., -1]; along z the
// half-spectrum bins kz = 0..mz-1 with mz <= Nz/2+1. Coefficients are stored
// as [..., 2] with the real part first.
//
// Two core kernels cover all four linear maps used by the graph ops:
//   analysis  : field [B,Nx,Nz,C]      -> coef [B,mx,mz,C,2]
//   synthesis : coef  [B,mx,mz,C,2]    -> field [B,Nx,Nz,C]
// With weights = 1 they are the unnormalized forward transform and its exact
// transpose; with the conjugate-symmetry weights w_l/(Nx*Nz) they are the
// inverse transform and its exact transpose:
//   dft2           = analysis (weights 1)
//   dft2 transpose = synthesis (weights 1)
//   idft2          = synthesis (weights w/(Nx*Nz))
//   idft2 transpose= analysis (weights w/(Nx*Nz))
// where w_l = 1 for kz = 0 and kz = Nz/2, else 2.

inline void gemm(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, int lda,
                 const double* b, int ldb, double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n,
              k, alpha, a, lda, b, ldb, beta, c, ldc);
}

struct Twiddle {
  // cos/sin tables, row-major [m, N]: angle 2*pi*freq_j*x/N.
  std::vector<double> cos_t, sin_t;
};

inline int signed_freq(int j, int m) {
  const int half = (m + 1) / 2;
  return j < half ? j : j - m;
}

inline const Twiddle& twiddle(std::size_t n, std::size_t m) {
  thread_local std::map<std::pair<std::size_t, std::size_t>, Twiddle> cache;
  auto key = std::make_pair(n, m);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  Twiddle t;
  t.cos_t.resize(m * n);
  t.sin_t.resize(m * n);
  const double two_pi = 2.0 * 3.14159265358979323846;
  for (std::size_t j = 0; j < m; ++j) {
    const double f = static_cast<double>(signed_freq(static_cast<int>(j), static_cast<int>(m)));
    for (std::size_t x = 0; x < n; ++x) {
      const double th = two_pi * f * static_cast<double>(x) / static_cast<double>(n);
      t.cos_t[j * n + x] = std::cos(th);
      t.sin_t[j * n + x] = std::sin(th);
    }
  }
  return cache.emplace(key, std::move(t)).first->second;
}

// z-axis tables use nonnegative bins 0..mz-1 only.
inline const Twiddle& twiddle_half(std::size_t n, std::size_t m) {
  thread_local std::map<std::pair<std::size_t, std::size_t>, Twiddle> cache;
  auto key = std::make_pair(n, m);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  Twiddle t;
  t.cos_t.resize(m * n);
  t.sin_t.resize(m * n);
  const double two_pi = 2.0 * 3.14159265358979323846;
  for (std::size_t l = 0; l < m; ++l)
    for (std::size_t z = 0; z < n; ++z) {
      const double th = two_pi * static_cast<double>(l) * static_cast<double>(z) / static_cast<double>(n);
      t.cos_t[l * n + z] = std::cos(th);
      t.sin_t[l * n + z] = std::sin(th);
    }
  return cache.emplace(key, std::move(t)).first->second;
}

inline double half_weight(std::size_t l, std::size_t nz) {
  return (l == 0 || 2 * l == nz) ? 1.0 : 2.0;
}

struct Dims {
  std::size_t b, nx, nz, c, mx, mz;
};

/// field [B,Nx,Nz,C] -> coef [B,mx,mz,C,2].
inline void analysis(const double* field, double* coef, const Dims& d, bool inverse_weights) {
  const auto& tx = twiddle(d.nx, d.mx);
  const auto& tz = twiddle_half(d.nz, d.mz);
  const std::size_t zc = d.nz * d.c;
  const std::size_t jc = d.mx * d.c;
  thread_local std::vector<double> are, aim, tre, tim, fre, fim;
  are.resize(d.mx * zc);
  aim.resize(d.mx * zc);
  tre.resize(d.nz * jc);
  tim.resize(d.nz * jc);
  fre.resize(d.mz * jc);
  fim.resize(d.mz * jc);
  for (std::size_t b = 0; b < d.b; ++b) {
    const double* vb = field + b * d.nx * zc;
    // stage x: A[j, z, c] = sum_x e^{-i a} V[x, z, c]
    gemm(false, false, (int)d.mx, (int)zc, (int)d.nx, 1.0, tx.cos_t.data(), (int)d.nx, vb, (int)zc,
         0.0, are.data(), (int)zc);
    gemm(false, false, (int)d.mx, (int)zc, (int)d.nx, -1.0, tx.sin_t.data(), (int)d.nx, vb, (int)zc,
         0.0, aim.data(), (int)zc);
    // transpose to [z, j*c]
    for (std::size_t j = 0; j < d.mx; ++j)
      for (std::size_t z = 0; z < d.nz; ++z)
        for (std::size_t c = 0; c < d.c; ++c) {
          tre[z * jc + j * d.c + c] = are[j * zc + z * d.c + c];
          tim[z * jc + j * d.c + c] = aim[j * zc + z * d.c + c];
        }
    // stage z: F = (A_re + i A_im) * e^{-i phi}
    gemm(false, false, (int)d.mz, (int)jc, (int)d.nz, 1.0, tz.cos_t.data(), (int)d.nz, tre.data(),
         (int)jc, 0.0, fre.data(), (int)jc);
    gemm(false, false, (int)d.mz, (int)jc, (int)d.nz, 1.0, tz.sin_t.data(), (int)d.nz, tim.data(),
         (int)jc, 1.0, fre.data(), (int)jc);
    gemm(false, false, (int)d.mz, (int)jc, (int)d.nz, 1.0, tz.cos_t.data(), (int)d.nz, tim.data(),
         (int)jc, 0.0, fim.data(), (int)jc);
    gemm(false, false, (int)d.mz, (int)jc, (int)d.nz, -1.0, tz.sin_t.data(), (int)d.nz, tre.data(),
         (int)jc, 1.0, fim.data(), (int)jc);
    // scatter to coef[b, j, l, c, 2] with optional inverse weights
    double* ob = coef + b * d.mx * d.mz * d.c * 2;
    const double inv = 1.0 / (static_cast<double>(d.nx) * static_cast<double>(d.nz));
    for (std::size_t l = 0; l < d.mz; ++l) {
      const double s = inverse_weights ? half_weight(l, d.nz) * inv : 1.0;
      for (std::size_t j = 0; j < d.mx; ++j)
        for (std::size_t c = 0; c < d.c; ++c) {
          const std::size_t src = l * jc + j * d.c + c;
          double* o = ob + ((j * d.mz + l) * d.c + c) * 2;
          o[0] = s * fre[src];
          o[1] = s * fim[src];
        }
    }
  }
}

/// coef [B,mx,mz,C,2] -> field [B,Nx,Nz,C].
inline void synthesis(const double* coef, double* field, const Dims& d, bool inverse_weights) {
  const auto& tx = twiddle(d.nx, d.mx);
  const auto& tz = twiddle_half(d.nz, d.mz);
  const std::size_t zc = d.nz * d.c;
  const std::size_t jc = d.mx * d.c;
  thread_local std::vector<double> pre, pim, gre, gim, ure, uim;
  pre.resize(d.mz * jc);
  pim.resize(d.mz * jc);
  gre.resize(d.nz * jc);
  gim.resize(d.nz * jc);
  ure.resize(d.mx * zc);
  uim.resize(d.mx * zc);
  const double inv = 1.0 / (static_cast<double>(d.nx) * static_cast<double>(d.nz));
  for (std::size_t b = 0; b < d.b; ++b) {
    const double* cb = coef + b * d.mx * d.mz * d.c * 2;
    // pack to [l, j*c] with weights folded in
    for (std::size_t l = 0; l < d.mz; ++l) {
      const double s = inverse_weights ? half_weight(l, d.nz) * inv : 1.0;
      for (std::size_t j = 0; j < d.mx; ++j)
        for (std::size_t c = 0; c < d.c; ++c) {
          const double* src = cb + ((j * d.mz + l) * d.c + c) * 2;
          pre[l * jc + j * d.c + c] = s * src[0];
          pim[l * jc + j * d.c + c] = s * src[1];
        }
    }
    // stage z-expand: G[z, j*c] = sum_l P * e^{+i phi}
    gemm(true, false, (int)d.nz, (int)jc, (int)d.mz, 1.0, tz.cos_t.data(), (int)d.nz, pre.data(),
         (int)jc, 0.0, gre.data(), (int)jc);
    gemm(true, false, (int)d.nz, (int)jc, (int)d.mz, -1.0, tz.sin_t.data(), (int)d.nz, pim.data(),
         (int)jc, 1.0, gre.data(), (int)jc);
    gemm(true, false, (int)d.nz, (int)jc, (int)d.mz, 1.0, tz.sin_t.data(), (int)d.nz, pre.data(),
         (int)jc, 0.0, gim.data(), (int)jc);
    gemm(true, false, (int)d.nz, (int)jc, (int)d.mz, 1.0, tz.cos_t.data(), (int)d.nz, pim.data(),
         (int)jc, 1.0, gim.data(), (int)jc);
    // transpose [z, j, c] -> [j, z*c]
    for (std::size_t z = 0; z < d.nz; ++z)
      for (std::size_t j = 0; j < d.mx; ++j)
        for (std::size_t c = 0; c < d.c; ++c) {
          ure[j * zc + z * d.c + c] = gre[z * jc + j * d.c + c];
          uim[j * zc + z * d.c + c] = gim[z * jc + j * d.c + c];
        }
    // stage x-expand, real part: out[x, z*c] = sum_j U * e^{+i a}
    double* ob = field + b * d.nx * zc;
    gemm(true, false, (int)d.nx, (int)zc, (int)d.mx, 1.0, tx.cos_t.data(), (int)d.nx, ure.data(),
         (int)zc, 0.0, ob, (int)zc);
    gemm(true, false, (int)d.nx, (int)zc, (int)d.mx, -1.0, tx.sin_t.data(), (int)d.nx, uim.data(),
         (int)zc, 1.0, ob, (int)zc);
  }
}

/// Per-retained-mode complex channel mix.
/// coef [B,mx,mz,Cin,2] x (Rre,Rim) [mx,mz,C,C2] -> out [B,mx,mz,Cout,2].
/// conj_t = false: out[c2] = sum_c coef[c] * R[c,c2]         (Cin = C, Cout = C2)
/// conj_t = true : out[c]  = sum_c2 coef[c2] * conj(R[c,c2]) (Cin = C2, Cout = C)
inline void mode_mul(const double* coef, const double* rre, const double* rim, double* out,
                     std::size_t b_n, std::size_t modes, std::size_t c, std::size_t c2,
                     bool conj_t) {
  const std::size_t cin = conj_t ? c2 : c;
  const std::size_t cout = conj_t ? c : c2;
  const std::size_t mode_in = cin * 2, mode_out = cout * 2;
  for (std::size_t m = 0; m < modes; ++m) {
    const double* rr = rre + m * c * c2;
    const double* ri = rim + m * c * c2;
    for (std::size_t b = 0; b < b_n; ++b) {
      const double* a = coef + (b * modes + m) * mode_in;
      double* o = out + (b * modes + m) * mode_out;
      if (!conj_t) {
        for (std::size_t k = 0; k < mode_out; ++k) o[k] = 0.0;
        for (std::size_t ci = 0; ci < c; ++ci) {
          const double ar = a[ci * 2], ai = a[ci * 2 + 1];
          const double* rrow = rr + ci * c2;
          const double* irow = ri + ci * c2;
          for (std::size_t co = 0; co < c2; ++co) {
            o[co * 2] += ar * rrow[co] - ai * irow[co];
            o[co * 2 + 1] += ar * irow[co] + ai * rrow[co];
          }
        }
      } else {
        for (std::size_t ci = 0; ci < c; ++ci) {
          const double* rrow = rr + ci * c2;
          const double* irow = ri + ci * c2;
          double sre = 0.0, sim = 0.0;
          for (std::size_t co = 0; co < c2; ++co) {
            const double ar = a[co * 2], ai = a[co * 2 + 1];
            sre += ar * rrow[co] + ai * irow[co];
            sim += ai * rrow[co] - ar * irow[co];
          }
          o[ci * 2] = sre;
          o[ci * 2 + 1] = sim;
        }
      }
    }
  }
}

/// Gradient of mode_mul (conj_t = false) with respect to the spectral weights.
/// a [B,modes,C,2], g [B,modes,C2,2] -> out [modes,C,C2] (sum over batch).
/// re: sum_b a_re*g_re + a_im*g_im;  im: sum_b a_re*g_im - a_im*g_re.
inline void mode_outer(const double* a, const double* g, double* out, std::size_t b_n,
                       std::size_t modes, std::size_t c, std::size_t c2, bool imag) {
  for (std::size_t m = 0; m < modes; ++m) {
    double* om = out + m * c * c2;
    for (std::size_t k = 0; k < c * c2; ++k) om[k] = 0.0;
    for (std::size_t b = 0; b < b_n; ++b) {
      const double* ab = a + (b * modes + m) * c * 2;
      const double* gb = g + (b * modes + m) * c2 * 2;
      for (std::size_t ci = 0; ci < c; ++ci) {
        const double ar = ab[ci * 2], ai = ab[ci * 2 + 1];
        double* row = om + ci * c2;
        if (!imag)
          for (std::size_t co = 0; co < c2; ++co) row[co] += ar * gb[co * 2] + ai * gb[co * 2 + 1];
        else
          for (std::size_t co = 0; co < c2; ++co) row[co] += ar * gb[co * 2 + 1] - ai * gb[co * 2];
      }
    }
  }
}

}  // namespace porobeam::fourier
