#pragma once

// Uniform tensor grids over boxes, centered difference stencils and the
// S2GRID v1 text format.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "s2wb/errors.hpp"
#include "s2wb/sym_core.hpp"

namespace s2wb {

inline constexpr std::size_t kMaxGridDim = 3;
inline constexpr std::size_t kMinGridNodes = 5;

using Point = std::array<double, kMaxGridDim>;
using ScalarField = std::function<double(const Point&)>;

/// Nodal values on a uniform grid with m nodes per axis over
/// [lo_0, hi_0] x ... x [lo_{n-1}, hi_{n-1}], row-major with the last axis fastest.
/// Values may be NaN where a derived field is undefined.
class PotentialGrid {
 public:
  PotentialGrid(std::size_t n, std::size_t m, std::vector<double> lo, std::vector<double> hi)
      : n_(n), m_(m), lo_(std::move(lo)), hi_(std::move(hi)) {
    if (n < 1 || n > kMaxGridDim) throw DomainError("PotentialGrid: n must be in 1..3");
    if (m < kMinGridNodes) throw DomainError("PotentialGrid: m must be >= 5");
    if (lo_.size() != n || hi_.size() != n) throw DomainError("PotentialGrid: bounds size differs from n");
    std::size_t total = 1;
    for (std::size_t d = 0; d < n; ++d) {
      if (!(hi_[d] > lo_[d]) || !std::isfinite(lo_[d]) || !std::isfinite(hi_[d]))
        throw DomainError("PotentialGrid: empty or non-finite axis");
      h_[d] = (hi_[d] - lo_[d]) / static_cast<double>(m - 1);
      total *= m;
    }
    stride_[n - 1] = 1;
    for (std::size_t d = n - 1; d-- > 0;) stride_[d] = stride_[d + 1] * m;
    values_.assign(total, 0.0);
  }

  /// [-R, R]^n.
  static PotentialGrid box(std::size_t n, std::size_t m, double R) {
    if (!(R > 0.0)) throw DomainError("PotentialGrid: R must be positive");
    return PotentialGrid(n, m, std::vector<double>(n, -R), std::vector<double>(n, R));
  }

  static PotentialGrid sample(std::size_t n, std::size_t m, double R, const ScalarField& f) {
    PotentialGrid g = box(n, m, R);
    for (std::size_t p = 0; p < g.size(); ++p) g.values_[p] = f(g.point(p));
    return g;
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t m() const noexcept { return m_; }
  std::size_t size() const noexcept { return values_.size(); }
  double lo(std::size_t d) const { return lo_[d]; }
  double hi(std::size_t d) const { return hi_[d]; }
  double h(std::size_t d) const { return h_[d]; }
  std::size_t stride(std::size_t d) const { return stride_[d]; }
  const std::vector<double>& lower() const noexcept { return lo_; }
  const std::vector<double>& upper() const noexcept { return hi_; }

  bool centered() const {
    for (std::size_t d = 0; d < n_; ++d)
      if (lo_[d] != -hi_[d] || hi_[d] != hi_[0]) return false;
    return true;
  }
  /// Largest half-width over the axes (the R of a centered box).
  double half_width() const {
    double r = 0.0;
    for (std::size_t d = 0; d < n_; ++d) r = std::max(r, 0.5 * (hi_[d] - lo_[d]));
    return r;
  }

  double coord(std::size_t d, std::size_t i) const {
    return i + 1 == m_ ? hi_[d] : lo_[d] + static_cast<double>(i) * h_[d];
  }
  std::size_t axis_index(std::size_t p, std::size_t d) const { return (p / stride_[d]) % m_; }
  Point point(std::size_t p) const {
    Point x{};
    for (std::size_t d = 0; d < n_; ++d) x[d] = coord(d, axis_index(p, d));
    return x;
  }
  bool is_boundary(std::size_t p) const {
    for (std::size_t d = 0; d < n_; ++d) {
      const std::size_t i = axis_index(p, d);
      if (i == 0 || i + 1 == m_) return true;
    }
    return false;
  }
  /// True when every node within `layers` steps along each axis exists.
  bool has_margin(std::size_t p, std::size_t layers) const {
    for (std::size_t d = 0; d < n_; ++d) {
      const std::size_t i = axis_index(p, d);
      if (i < layers || i + layers >= m_) return false;
    }
    return true;
  }

  double operator[](std::size_t p) const { return values_[p]; }
  double& operator[](std::size_t p) { return values_[p]; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

 private:
  std::size_t n_;
  std::size_t m_;
  std::vector<double> lo_, hi_;
  std::array<double, kMaxGridDim> h_{};
  std::array<std::size_t, kMaxGridDim> stride_{};
  std::vector<double> values_;
};

/// Centered second difference along (i, j); the 4-point cross for i != j.
/// `p` must be an interior node.
inline double second_difference(const PotentialGrid& g, std::size_t p, std::size_t i, std::size_t j) {
  const std::size_t si = g.stride(i);
  if (i == j) return (g[p + si] - 2.0 * g[p] + g[p - si]) / (g.h(i) * g.h(i));
  const std::size_t sj = g.stride(j);
  return (g[p + si + sj] - g[p + si - sj] - g[p - si + sj] + g[p - si - sj]) / (4.0 * g.h(i) * g.h(j));
}

inline SymmetricMatrix discrete_hessian(const PotentialGrid& g, std::size_t p) {
  SymmetricMatrix hm(g.n());
  for (std::size_t i = 0; i < g.n(); ++i)
    for (std::size_t j = i; j < g.n(); ++j) hm.set(i, j, second_difference(g, p, i, j));
  return hm;
}

inline std::vector<double> discrete_gradient(const PotentialGrid& g, std::size_t p) {
  std::vector<double> grad(g.n());
  for (std::size_t d = 0; d < g.n(); ++d) grad[d] = (g[p + g.stride(d)] - g[p - g.stride(d)]) / (2.0 * g.h(d));
  return grad;
}

// ---------------------------------------------------------------------------
// S2GRID v1

/// Header "S2GRID v1 n m R", then m^n values one per line. Grids that are not
/// a centered cube add a "# bounds lo_0 hi_0 ..." line after the header.
inline void write_s2grid(std::ostream& os, const PotentialGrid& g) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", g.half_width());
  os << "S2GRID v1 " << g.n() << ' ' << g.m() << ' ' << buf << '\n';
  if (!g.centered()) {
    os << "# bounds";
    for (std::size_t d = 0; d < g.n(); ++d) {
      std::snprintf(buf, sizeof buf, " %.17g", g.lo(d));
      os << buf;
      std::snprintf(buf, sizeof buf, " %.17g", g.hi(d));
      os << buf;
    }
    os << '\n';
  }
  for (double v : g.values()) {
    if (std::isnan(v)) {
      os << "nan\n";
    } else {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << buf << '\n';
    }
  }
}

inline PotentialGrid read_s2grid(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("read_s2grid: empty input");
  std::istringstream hs(line);
  std::string magic, version;
  std::size_t n = 0, m = 0;
  double R = 0.0;
  if (!(hs >> magic >> version >> n >> m >> R) || magic != "S2GRID" || version != "v1")
    throw ConfigError("read_s2grid: bad header '" + line + "'");
  std::vector<double> lo(n, -R), hi(n, R);
  std::size_t total = 1;
  for (std::size_t d = 0; d < n; ++d) total *= m;
  std::vector<double> vals;
  vals.reserve(total);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream bs(line.substr(1));
      std::string tag;
      bs >> tag;
      if (tag == "bounds")
        for (std::size_t d = 0; d < n; ++d)
          if (!(bs >> lo[d] >> hi[d])) throw ConfigError("read_s2grid: bad bounds line");
      continue;
    }
    if (line == "nan") {
      vals.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(line, &used);
    } catch (const std::exception&) {
      throw ConfigError("read_s2grid: bad value '" + line + "'");
    }
    vals.push_back(v);
  }
  if (vals.size() != total)
    throw ConfigError("read_s2grid: expected " + std::to_string(total) + " values, got " + std::to_string(vals.size()));
  PotentialGrid g(n, m, lo, hi);
  for (std::size_t p = 0; p < total; ++p) g[p] = vals[p];
  return g;
}

}  // namespace s2wb
