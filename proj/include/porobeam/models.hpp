#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "porobeam/graph.hpp"
#include "porobeam/io.hpp"
#include "porobeam/rng.hpp"
#include "porobeam/tensor.hpp"

namespace porobeam::models {

using ad::Graph;
using ad::NodeId;

enum class Activation { identity, swish, gelu, tanh };

inline Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "swish") return Activation::swish;
  if (s == "gelu") return Activation::gelu;
  if (s == "tanh") return Activation::tanh;
  throw Error("unknown activation: " + s);
}

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::swish: return "swish";
    case Activation::gelu: return "gelu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

inline NodeId apply_activation(Graph& g, NodeId x, Activation a) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::swish: return g.swish(x);
    case Activation::gelu: return g.gelu(x);
    case Activation::tanh: return g.tanh_(x);
  }
  return x;
}

// ---- fully connected displacement network ----

struct DenseSpec {
  std::vector<std::size_t> widths{2, 20, 20, 20, 2};  // benchmark default: 3 hidden x 20
  Activation activation = Activation::swish;          // hidden layers; output is linear

  std::size_t layers() const { return widths.size() - 1; }
};

struct DenseNetwork {
  DenseSpec spec;
  std::vector<Tensor> weights;  // [out, in] per layer
  std::vector<Tensor> biases;   // [out] per layer
};

inline std::size_t param_count(const DenseSpec& s) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < s.widths.size(); ++l)
    n += s.widths[l + 1] * s.widths[l] + s.widths[l + 1];
  return n;
}

/// Scaled uniform fan-in initialization: W ~ U(-a, a) with a = sqrt(1/fan_in);
/// biases start at zero. Deterministic per seed.
inline DenseNetwork init_dense(const DenseSpec& spec, std::uint64_t seed) {
  DenseNetwork net{spec, {}, {}};
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    const std::size_t in = spec.widths[l], out = spec.widths[l + 1];
    Tensor w(Shape{out, in});
    const double a = std::sqrt(1.0 / static_cast<double>(in));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-a, a);
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(Shape{out});
  }
  return net;
}

// Canonical parameter walk: layers in definition order, weights before biases.
inline std::vector<double> flatten(const DenseNetwork& net) {
  std::vector<double> out;
  out.reserve(param_count(net.spec));
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    out.insert(out.end(), net.weights[l].vec().begin(), net.weights[l].vec().end());
    out.insert(out.end(), net.biases[l].vec().begin(), net.biases[l].vec().end());
  }
  return out;
}

inline void unflatten(DenseNetwork& net, std::span<const double> flat) {
  if (flat.size() != param_count(net.spec)) throw Error("unflatten: parameter count mismatch");
  std::size_t k = 0;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    for (double& v : net.weights[l].vec()) v = flat[k++];
    for (double& v : net.biases[l].vec()) v = flat[k++];
  }
}

struct DenseParams {
  std::vector<NodeId> weights, biases;
};

inline DenseParams declare_dense_params(Graph& g, const DenseSpec& spec) {
  DenseParams p;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    p.weights.push_back(g.input(Shape{spec.widths[l + 1], spec.widths[l]}));
    p.biases.push_back(g.input(Shape{spec.widths[l + 1]}));
  }
  return p;
}

inline void bind_dense(Graph& g, const DenseParams& p, const DenseNetwork& net) {
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    g.bind(p.weights[l], net.weights[l]);
    g.bind(p.biases[l], net.biases[l]);
  }
}

inline std::vector<NodeId> dense_param_ids(const DenseParams& p) {
  std::vector<NodeId> ids;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    ids.push_back(p.weights[l]);
    ids.push_back(p.biases[l]);
  }
  return ids;
}

/// Batched forward pass: points [N, in] -> outputs [N, out].
inline NodeId dense_forward(Graph& g, const DenseParams& p, const DenseSpec& spec, NodeId x) {
  const std::size_t n = g.shape(x)[0];
  NodeId h = x;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    h = g.add(g.matmul(h, p.weights[l], false, true), g.expand_rows(p.biases[l], n));
    if (l + 1 < p.weights.size()) h = apply_activation(g, h, spec.activation);
  }
  return h;
}

/// Single-point evaluation (N_x, N_z) of a 2->...->2 network.
inline std::pair<double, double> mlp_forward(const DenseNetwork& net, double x, double z) {
  Graph g;
  const NodeId in = g.input(Shape{1, 2});
  DenseParams p = declare_dense_params(g, net.spec);
  const NodeId out = dense_forward(g, p, net.spec, in);
  bind_dense(g, p, net);
  g.bind(in, std::vector<double>{x, z});
  g.evaluate({out});
  if (!g.value(out).all_finite()) throw Error("mlp_forward: non-finite output");
  return {g.value(out)[0], g.value(out)[1]};
}

// ---- Fourier neural operator ----

struct FnoSpec {
  std::size_t in_channels = 4;
  std::size_t width = 32;  // d_v
  std::size_t modes_x = 16, modes_z = 8;
  std::size_t blocks = 4;
  std::size_t lift_hidden = 32;
  std::size_t proj_hidden = 128;
  std::size_t out_channels = 2;
};

struct FnoModel {
  FnoSpec spec;
  Tensor lift_w1, lift_b1, lift_w2, lift_b2;
  std::vector<Tensor> r_re, r_im;  // [mx, mz, width, width] per block
  std::vector<Tensor> local_w;     // [width, width]
  std::vector<Tensor> local_b;     // [width]
  Tensor proj_w1, proj_b1, proj_w2, proj_b2;
};

inline std::size_t param_count(const FnoSpec& s) {
  const std::size_t spectral = s.modes_x * s.modes_z * s.width * s.width;
  std::size_t n = s.lift_hidden * s.in_channels + s.lift_hidden +  // lift 1
                  s.width * s.lift_hidden + s.width;               // lift 2
  n += s.blocks * (2 * spectral + s.width * s.width + s.width);
  n += s.proj_hidden * s.width + s.proj_hidden + s.out_channels * s.proj_hidden + s.out_channels;
  return n;
}

/// Dense parts use scaled uniform fan-in; spectral weights are uniform complex
/// with magnitude scale 1/width^2.
inline FnoModel init_fno(const FnoSpec& spec, std::uint64_t seed) {
  FnoModel m;
  m.spec = spec;
  Rng rng(seed);
  auto dense = [&rng](std::size_t out, std::size_t in) {
    Tensor w(Shape{out, in});
    const double a = std::sqrt(1.0 / static_cast<double>(in));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-a, a);
    return w;
  };
  m.lift_w1 = dense(spec.lift_hidden, spec.in_channels);
  m.lift_b1 = Tensor(Shape{spec.lift_hidden});
  m.lift_w2 = dense(spec.width, spec.lift_hidden);
  m.lift_b2 = Tensor(Shape{spec.width});
  const double rscale = 1.0 / (static_cast<double>(spec.width) * static_cast<double>(spec.width));
  for (std::size_t b = 0; b < spec.blocks; ++b) {
    Tensor re(Shape{spec.modes_x, spec.modes_z, spec.width, spec.width});
    Tensor im(Shape{spec.modes_x, spec.modes_z, spec.width, spec.width});
    for (std::size_t i = 0; i < re.size(); ++i) re[i] = rng.uniform(-rscale, rscale);
    for (std::size_t i = 0; i < im.size(); ++i) im[i] = rng.uniform(-rscale, rscale);
    m.r_re.push_back(std::move(re));
    m.r_im.push_back(std::move(im));
    m.local_w.push_back(dense(spec.width, spec.width));
    m.local_b.emplace_back(Shape{spec.width});
  }
  m.proj_w1 = dense(spec.proj_hidden, spec.width);
  m.proj_b1 = Tensor(Shape{spec.proj_hidden});
  m.proj_w2 = dense(spec.out_channels, spec.proj_hidden);
  m.proj_b2 = Tensor(Shape{spec.out_channels});
  return m;
}

struct FnoParams {
  NodeId lift_w1, lift_b1, lift_w2, lift_b2;
  std::vector<NodeId> r_re, r_im, local_w, local_b;
  NodeId proj_w1, proj_b1, proj_w2, proj_b2;
};

inline FnoParams declare_fno_params(Graph& g, const FnoSpec& s) {
  FnoParams p;
  p.lift_w1 = g.input(Shape{s.lift_hidden, s.in_channels});
  p.lift_b1 = g.input(Shape{s.lift_hidden});
  p.lift_w2 = g.input(Shape{s.width, s.lift_hidden});
  p.lift_b2 = g.input(Shape{s.width});
  for (std::size_t b = 0; b < s.blocks; ++b) {
    p.r_re.push_back(g.input(Shape{s.modes_x, s.modes_z, s.width, s.width}));
    p.r_im.push_back(g.input(Shape{s.modes_x, s.modes_z, s.width, s.width}));
    p.local_w.push_back(g.input(Shape{s.width, s.width}));
    p.local_b.push_back(g.input(Shape{s.width}));
  }
  p.proj_w1 = g.input(Shape{s.proj_hidden, s.width});
  p.proj_b1 = g.input(Shape{s.proj_hidden});
  p.proj_w2 = g.input(Shape{s.out_channels, s.proj_hidden});
  p.proj_b2 = g.input(Shape{s.out_channels});
  return p;
}

// Parameter walk: lift, blocks (R real before imaginary, then local map and
// bias), projection; weights before biases throughout.
inline std::vector<std::pair<NodeId, const Tensor*>> fno_param_table(const FnoParams& p,
                                                                     const FnoModel& m) {
  std::vector<std::pair<NodeId, const Tensor*>> t;
  t.push_back({p.lift_w1, &m.lift_w1});
  t.push_back({p.lift_b1, &m.lift_b1});
  t.push_back({p.lift_w2, &m.lift_w2});
  t.push_back({p.lift_b2, &m.lift_b2});
  for (std::size_t b = 0; b < m.spec.blocks; ++b) {
    t.push_back({p.r_re[b], &m.r_re[b]});
    t.push_back({p.r_im[b], &m.r_im[b]});
    t.push_back({p.local_w[b], &m.local_w[b]});
    t.push_back({p.local_b[b], &m.local_b[b]});
  }
  t.push_back({p.proj_w1, &m.proj_w1});
  t.push_back({p.proj_b1, &m.proj_b1});
  t.push_back({p.proj_w2, &m.proj_w2});
  t.push_back({p.proj_b2, &m.proj_b2});
  return t;
}

inline void bind_fno(Graph& g, const FnoParams& p, const FnoModel& m) {
  for (auto& [id, t] : fno_param_table(p, m)) g.bind(id, *t);
}

inline std::vector<NodeId> fno_param_ids(const FnoParams& p, const FnoSpec& s) {
  std::vector<NodeId> ids;
  ids.insert(ids.end(), {p.lift_w1, p.lift_b1, p.lift_w2, p.lift_b2});
  for (std::size_t b = 0; b < s.blocks; ++b)
    ids.insert(ids.end(), {p.r_re[b], p.r_im[b], p.local_w[b], p.local_b[b]});
  ids.insert(ids.end(), {p.proj_w1, p.proj_b1, p.proj_w2, p.proj_b2});
  return ids;
}

inline std::vector<double> flatten(const FnoModel& m) {
  std::vector<double> out;
  out.reserve(param_count(m.spec));
  auto push = [&out](const Tensor& t) { out.insert(out.end(), t.vec().begin(), t.vec().end()); };
  push(m.lift_w1);
  push(m.lift_b1);
  push(m.lift_w2);
  push(m.lift_b2);
  for (std::size_t b = 0; b < m.spec.blocks; ++b) {
    push(m.r_re[b]);
    push(m.r_im[b]);
    push(m.local_w[b]);
    push(m.local_b[b]);
  }
  push(m.proj_w1);
  push(m.proj_b1);
  push(m.proj_w2);
  push(m.proj_b2);
  return out;
}

inline void unflatten(FnoModel& m, std::span<const double> flat) {
  if (flat.size() != param_count(m.spec)) throw Error("unflatten: parameter count mismatch");
  std::size_t k = 0;
  auto pull = [&](Tensor& t) {
    for (double& v : t.vec()) v = flat[k++];
  };
  pull(m.lift_w1);
  pull(m.lift_b1);
  pull(m.lift_w2);
  pull(m.lift_b2);
  for (std::size_t b = 0; b < m.spec.blocks; ++b) {
    pull(m.r_re[b]);
    pull(m.r_im[b]);
    pull(m.local_w[b]);
    pull(m.local_b[b]);
  }
  pull(m.proj_w1);
  pull(m.proj_b1);
  pull(m.proj_w2);
  pull(m.proj_b2);
}

/// Spectral convolution: truncate, mix channels per retained mode, invert.
inline NodeId spectral_conv(Graph& g, NodeId v4 /*[B,Nx,Nz,C]*/, NodeId r_re, NodeId r_im,
                            std::size_t mx, std::size_t mz) {
  const Shape& s = g.shape(v4);
  return g.idft2(g.mode_mul(g.dft2(v4, mx, mz), r_re, r_im), s[1], s[2]);
}

/// Batched forward pass: input [B,Nx,Nz,Cin] -> [B,Nx,Nz,2].
/// Lift -> 4x (spectral + local linear + bias, GELU; last block linear) -> project.
inline NodeId fno_forward(Graph& g, const FnoParams& p, const FnoSpec& s, NodeId input) {
  const Shape& sh = g.shape(input);
  if (sh.size() != 4 || sh[3] != s.in_channels) throw Error("fno_forward: bad input shape");
  const std::size_t b = sh[0], nx = sh[1], nz = sh[2];
  if (s.modes_x > nx || s.modes_z > nz / 2 + 1) throw Error("fno_forward: grid smaller than modes");
  const std::size_t rows = b * nx * nz;

  NodeId v = g.reshape(input, Shape{rows, s.in_channels});
  v = g.gelu(g.add(g.matmul(v, p.lift_w1, false, true), g.expand_rows(p.lift_b1, rows)));
  v = g.add(g.matmul(v, p.lift_w2, false, true), g.expand_rows(p.lift_b2, rows));

  for (std::size_t t = 0; t < s.blocks; ++t) {
    NodeId v4 = g.reshape(v, Shape{b, nx, nz, s.width});
    NodeId spec = spectral_conv(g, v4, p.r_re[t], p.r_im[t], s.modes_x, s.modes_z);
    NodeId local = g.matmul(v, p.local_w[t], false, true);
    NodeId mix = g.add(g.add(g.reshape(spec, Shape{rows, s.width}), local),
                       g.expand_rows(p.local_b[t], rows));
    v = (t + 1 < s.blocks) ? g.gelu(mix) : mix;
  }

  NodeId q = g.gelu(g.add(g.matmul(v, p.proj_w1, false, true), g.expand_rows(p.proj_b1, rows)));
  NodeId out = g.add(g.matmul(q, p.proj_w2, false, true), g.expand_rows(p.proj_b2, rows));
  return g.reshape(out, Shape{b, nx, nz, s.out_channels});
}

// ---- checkpoints ----
// File layout: 8-byte little-endian header length, JSON header, raw
// little-endian float64 parameter blob in canonical walk order.

inline void save_checkpoint(const std::filesystem::path& path, const io::json& header,
                            std::span<const double> params) {
  if (path.has_parent_path()) io::ensure_dir(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  const std::string h = header.dump();
  const std::uint64_t len = h.size();
  f.write(reinterpret_cast<const char*>(&len), 8);
  f.write(h.data(), static_cast<std::streamsize>(h.size()));
  f.write(reinterpret_cast<const char*>(params.data()),
          static_cast<std::streamsize>(params.size() * 8));
}

inline std::pair<io::json, std::vector<double>> load_checkpoint(
    const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw Error("cannot open " + path.string());
  const std::streamsize total = f.tellg();
  f.seekg(0);
  std::uint64_t len = 0;
  f.read(reinterpret_cast<char*>(&len), 8);
  if (static_cast<std::streamsize>(8 + len) > total) throw Error("corrupt checkpoint header");
  std::string h(len, '\0');
  f.read(h.data(), static_cast<std::streamsize>(len));
  const std::streamsize blob = total - 8 - static_cast<std::streamsize>(len);
  if (blob % 8 != 0) throw Error("corrupt checkpoint blob");
  std::vector<double> params(static_cast<std::size_t>(blob / 8));
  f.read(reinterpret_cast<char*>(params.data()), blob);
  return {io::json::parse(h), std::move(params)};
}

inline io::json dense_header(const DenseNetwork& net, std::uint64_t seed) {
  io::json j;
  j["kind"] = "dense";
  j["widths"] = net.spec.widths;
  j["activation"] = to_string(net.spec.activation);
  j["seed"] = seed;
  j["param_count"] = param_count(net.spec);
  return j;
}

inline io::json fno_header(const FnoModel& m, std::uint64_t seed) {
  io::json j;
  j["kind"] = "fno";
  j["in_channels"] = m.spec.in_channels;
  j["width"] = m.spec.width;
  j["modes_x"] = m.spec.modes_x;
  j["modes_z"] = m.spec.modes_z;
  j["blocks"] = m.spec.blocks;
  j["lift_hidden"] = m.spec.lift_hidden;
  j["proj_hidden"] = m.spec.proj_hidden;
  j["out_channels"] = m.spec.out_channels;
  j["seed"] = seed;
  j["param_count"] = param_count(m.spec);
  return j;
}

inline FnoSpec fno_spec_from_header(const io::json& j) {
  FnoSpec s;
  s.in_channels = j.at("in_channels").get<std::size_t>();
  s.width = j.at("width").get<std::size_t>();
  s.modes_x = j.at("modes_x").get<std::size_t>();
  s.modes_z = j.at("modes_z").get<std::size_t>();
  s.blocks = j.at("blocks").get<std::size_t>();
  s.lift_hidden = j.at("lift_hidden").get<std::size_t>();
  s.proj_hidden = j.at("proj_hidden").get<std::size_t>();
  s.out_channels = j.at("out_channels").get<std::size_t>();
  return s;
}

}  // namespace porobeam::models
