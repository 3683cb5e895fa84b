#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "porobeam/tensor.hpp"

namespace porobeam::io {

using json = nlohmann::json;

inline void ensure_dir(const std::filesystem::path& p) {
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw Error("cannot create directory " + p.string() + ": " + ec.message());
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  if (p.has_parent_path()) ensure_dir(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot open " + p.string() + " for writing");
  f << s;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw Error("cannot open " + p.string());
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

inline void write_json(const std::filesystem::path& p, const json& j) {
  write_text(p, j.dump(2) + "\n");
}

inline json read_json(const std::filesystem::path& p) { return json::parse(read_text(p)); }

/// Full-precision decimal formatting; the reproducibility contract compares
/// these bytes.
inline std::string fmt_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_csv(const std::filesystem::path& p, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out += ",";
    out += header[i];
  }
  out += "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ",";
      out += fmt_g17(row[i]);
    }
    out += "\n";
  }
  write_text(p, out);
}

/// One value per line, optionally with a leading header line.
inline std::vector<double> read_values(const std::filesystem::path& p) {
  std::ifstream f(p);
  if (!f) throw Error("cannot open " + p.string());
  std::vector<double> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    // take the last comma-separated field so (x,value) CSVs also work
    const auto pos = line.find_last_of(',');
    const std::string field = pos == std::string::npos ? line : line.substr(pos + 1);
    try {
      out.push_back(std::stod(field));
    } catch (...) {
      if (out.empty()) continue;  // header line
      throw Error("cannot parse number in " + p.string() + ": " + line);
    }
  }
  return out;
}

// Raw little-endian 64-bit float blobs. x86-64 only; asserted at compile time.
static_assert(std::endian::native == std::endian::little, "blob io assumes little-endian");

inline void write_f64(const std::filesystem::path& p, std::span<const double> v) {
  if (p.has_parent_path()) ensure_dir(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot open " + p.string() + " for writing");
  f.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
}

inline std::vector<double> read_f64(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary | std::ios::ate);
  if (!f) throw Error("cannot open " + p.string());
  const std::streamsize bytes = f.tellg();
  if (bytes % 8 != 0) throw Error("blob size not a multiple of 8: " + p.string());
  std::vector<double> v(static_cast<std::size_t>(bytes / 8));
  f.seekg(0);
  f.read(reinterpret_cast<char*>(v.data()), bytes);
  return v;
}

// ---- self-contained SVG heatmaps ----

struct HeatmapSpec {
  std::string title;
  double x0 = 0, x1 = 1, z0 = 0, z1 = 1;
};

namespace detail {
inline std::array<int, 3> viridis(double t) {
  // coarse viridis control points, linearly interpolated
  static constexpr double pts[][3] = {{68, 1, 84},    {59, 82, 139},  {33, 145, 140},
                                      {94, 201, 98},  {253, 231, 37}};
  t = std::min(1.0, std::max(0.0, t)) * 3.999;
  const int k = static_cast<int>(t);
  const double f = t - k;
  return {static_cast<int>(pts[k][0] + f * (pts[k + 1][0] - pts[k][0])),
          static_cast<int>(pts[k][1] + f * (pts[k + 1][1] - pts[k][1])),
          static_cast<int>(pts[k][2] + f * (pts[k + 1][2] - pts[k][2]))};
}
}  // namespace detail

/// values laid out row-major [nx, nz]; cell (i,j) covers
/// x in [x0 + i dx, ...), z in [z0 + j dz, ...).
inline void write_heatmap_svg(const std::filesystem::path& p, const std::vector<double>& values,
                              std::size_t nx, std::size_t nz, const HeatmapSpec& spec) {
  if (values.size() != nx * nz) throw Error("heatmap: grid size mismatch");
  double lo = values[0], hi = values[0];
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi - lo < 1e-300) hi = lo + 1.0;
  const double w = 640.0, h = 300.0, mx = 60.0, my = 40.0, bar = 24.0;
  std::string s;
  s += "<svg xmlns='http://www.w3.org/2000/svg' width='" + std::to_string(int(w + mx * 2 + bar + 60)) +
       "' height='" + std::to_string(int(h + my * 2)) + "'>\n";
  s += "<text x='" + std::to_string(int(mx)) + "' y='24' font-family='sans-serif' font-size='15'>" +
       spec.title + "</text>\n";
  const double cw = w / static_cast<double>(nx), ch = h / static_cast<double>(nz);
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < nz; ++j) {
      const double t = (values[i * nz + j] - lo) / (hi - lo);
      auto [r, gg, b] = detail::viridis(t);
      const double px = mx + cw * static_cast<double>(i);
      const double py = my + h - ch * static_cast<double>(j + 1);  // z grows upward
      char buf[200];
      std::snprintf(buf, sizeof(buf),
                    "<rect x='%.2f' y='%.2f' width='%.2f' height='%.2f' fill='rgb(%d,%d,%d)'/>\n",
                    px, py, cw + 0.5, ch + 0.5, r, gg, b);
      s += buf;
    }
  // color scale
  for (int k = 0; k < 64; ++k) {
    auto [r, gg, b] = detail::viridis(static_cast<double>(k) / 63.0);
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "<rect x='%.2f' y='%.2f' width='%.2f' height='%.2f' fill='rgb(%d,%d,%d)'/>\n",
                  mx + w + 20.0, my + h - (k + 1) * h / 64.0, bar, h / 64.0 + 0.5, r, gg, b);
    s += buf;
  }
  char lab[300];
  std::snprintf(lab, sizeof(lab),
                "<text x='%.1f' y='%.1f' font-family='sans-serif' font-size='12'>%.4g</text>\n"
                "<text x='%.1f' y='%.1f' font-family='sans-serif' font-size='12'>%.4g</text>\n",
                mx + w + 20 + bar + 4, my + 12.0, hi, mx + w + 20 + bar + 4, my + h, lo);
  s += lab;
  std::snprintf(lab, sizeof(lab),
                "<text x='%.1f' y='%.1f' font-family='sans-serif' font-size='12'>x: %.4g..%.4g  "
                "z: %.4g..%.4g</text>\n",
                mx, my + h + 20.0, spec.x0, spec.x1, spec.z0, spec.z1);
  s += lab;
  s += "</svg>\n";
  write_text(p, s);
}

}  // namespace porobeam::io
