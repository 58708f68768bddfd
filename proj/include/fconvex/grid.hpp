#pragma once

// Uniform 1D/2D grids, sampled functions on them, and their CSV / binary
// serializations.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "fconvex/numerics.hpp"

namespace fconvex {

/// One uniform axis: nodes lo, lo+h, ..., lo+(n-1)h.
struct Axis {
  double lo = 0.0;
  double h = 1.0;
  std::size_t n = 1;

  [[nodiscard]] double coord(std::size_t i) const { return lo + h * static_cast<double>(i); }
  [[nodiscard]] double hi() const { return coord(n - 1); }

  /// Axis covering [lo, hi] with spacing close to (and not above) h.
  static Axis covering(double lo, double hi, double h) {
    if (!(hi > lo) || !(h > 0.0)) throw std::invalid_argument("Axis: need hi > lo and h > 0");
    const auto cells = static_cast<std::size_t>(std::ceil((hi - lo) / h - 1e-9));
    return {lo, (hi - lo) / static_cast<double>(cells), cells + 1};
  }
};

struct GridSpec {
  std::vector<Axis> axes;

  [[nodiscard]] int dim() const { return static_cast<int>(axes.size()); }
  [[nodiscard]] std::size_t size() const {
    std::size_t s = 1;
    for (const auto& a : axes) s *= a.n;
    return s;
  }
  [[nodiscard]] const Axis& x() const { return axes.at(0); }
  [[nodiscard]] const Axis& y() const { return axes.at(1); }

  static GridSpec line(double lo, double hi, double h) { return {{Axis::covering(lo, hi, h)}}; }
  static GridSpec rect(double xlo, double xhi, double ylo, double yhi, double h) {
    return {{Axis::covering(xlo, xhi, h), Axis::covering(ylo, yhi, h)}};
  }
};

/**
 * Samples of a function on a GridSpec, row-major with x varying slowest in
 * 2D (index = i * ny + j). `errors` holds a per-node absolute error bound
 * (zero for exact samples). `growth_a`, `growth_A` certify
 * |value| <= a e^{A|x|^2} at all nodes.
 */
struct GridFunction {
  GridSpec grid;
  std::vector<double> values;
  std::vector<double> errors;
  double growth_A = 0.0;
  double growth_a = kInf;
  std::map<std::string, std::string> metadata;

  GridFunction() = default;
  explicit GridFunction(GridSpec g)
      : grid(std::move(g)), values(grid.size(), 0.0), errors(grid.size(), 0.0) {}

  [[nodiscard]] int dim() const { return grid.dim(); }
  [[nodiscard]] std::size_t size() const { return values.size(); }

  [[nodiscard]] double& at(std::size_t i) { return values[i]; }
  [[nodiscard]] double at(std::size_t i) const { return values[i]; }
  [[nodiscard]] double& at(std::size_t i, std::size_t j) { return values[i * grid.y().n + j]; }
  [[nodiscard]] double at(std::size_t i, std::size_t j) const { return values[i * grid.y().n + j]; }

  /// |x|^2 of node k.
  [[nodiscard]] double radius2(std::size_t k) const {
    if (dim() == 1) {
      const double x = grid.x().coord(k);
      return x * x;
    }
    const std::size_t ny = grid.y().n;
    const double x = grid.x().coord(k / ny);
    const double y = grid.y().coord(k % ny);
    return x * x + y * y;
  }

  /// Smallest a with |value| <= a e^{A|x|^2} at every node, for the given A.
  [[nodiscard]] double fitted_growth_a(double A) const {
    double a = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
      a = std::max(a, (std::abs(values[k]) + errors[k]) * std::exp(-A * radius2(k)));
    }
    return a;
  }

  /// True when the stored growth bound holds at every node.
  [[nodiscard]] bool growth_certified() const {
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (std::abs(values[k]) > growth_a * std::exp(growth_A * radius2(k)) * (1.0 + 1e-12)) return false;
    }
    return true;
  }

  template <typename Fn>
  static GridFunction sample(const GridSpec& g, Fn&& fn) {
    GridFunction u(g);
    if constexpr (std::is_invocable_v<Fn&, double>) {
      if (g.dim() != 1) throw std::invalid_argument("GridFunction::sample: 1D function on a 2D grid");
      for (std::size_t i = 0; i < g.x().n; ++i) u.values[i] = fn(g.x().coord(i));
    } else {
      if (g.dim() != 2) throw std::invalid_argument("GridFunction::sample: 2D function on a 1D grid");
      for (std::size_t i = 0; i < g.x().n; ++i)
        for (std::size_t j = 0; j < g.y().n; ++j) u.at(i, j) = fn(g.x().coord(i), g.y().coord(j));
    }
    return u;
  }
};

/// Spatial setting for an evolution.
struct DomainSpec {
  enum class Kind { free_space, half_line, interval, rectangle };
  Kind kind = Kind::free_space;
  int n = 1;
  /// x-bounds (interval, rectangle, and half_line lower end); y-bounds for rectangles
  Interval xb{-kInf, kInf};
  Interval yb{-kInf, kInf};
  double ell = 0.0;

  static DomainSpec free_space(int n) { return {Kind::free_space, n, {}, {}, 0.0}; }
  static DomainSpec half_line(double a, double ell) { return {Kind::half_line, 1, {a, kInf}, {}, ell}; }
  static DomainSpec interval(double a, double b, double ell) { return {Kind::interval, 1, {a, b}, {}, ell}; }
  static DomainSpec rectangle(Interval x, Interval y, double ell) { return {Kind::rectangle, 2, x, y, ell}; }

  void validate() const {
    if (kind == Kind::free_space) {
      if (n != 1 && n != 2) throw std::invalid_argument("DomainSpec: free space supports n = 1, 2");
      return;
    }
    if (!std::isfinite(ell)) throw std::invalid_argument("DomainSpec: boundary value must be finite");
    if (kind == Kind::half_line && !std::isfinite(xb.lo)) {
      throw std::invalid_argument("DomainSpec: half line needs a finite end");
    }
    if ((kind == Kind::interval || kind == Kind::rectangle) && !(xb.bounded() && xb.hi > xb.lo)) {
      throw std::invalid_argument("DomainSpec: empty or unbounded interval");
    }
    if (kind == Kind::rectangle && !(yb.bounded() && yb.hi > yb.lo)) {
      throw std::invalid_argument("DomainSpec: empty or unbounded rectangle");
    }
  }
};

inline const char* to_string(DomainSpec::Kind k) {
  switch (k) {
    case DomainSpec::Kind::free_space: return "free_space";
    case DomainSpec::Kind::half_line: return "half_line";
    case DomainSpec::Kind::interval: return "interval";
    case DomainSpec::Kind::rectangle: return "rectangle";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// serialization

namespace detail {

inline std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// CSV with columns x[,y],value,error; metadata as leading `# key=value` lines.
inline void write_csv(std::ostream& os, const GridFunction& u) {
  for (const auto& [k, v] : u.metadata) os << "# " << k << '=' << v << '\n';
  os << "# growth_A=" << detail::fmt17(u.growth_A) << '\n';
  os << "# growth_a=" << detail::fmt17(u.growth_a) << '\n';
  if (u.dim() == 1) {
    os << "x,value,error\n";
    for (std::size_t i = 0; i < u.size(); ++i) {
      os << detail::fmt17(u.grid.x().coord(i)) << ',' << detail::fmt17(u.values[i]) << ','
         << detail::fmt17(u.errors[i]) << '\n';
    }
    return;
  }
  os << "x,y,value,error\n";
  const auto& ax = u.grid.x();
  const auto& ay = u.grid.y();
  for (std::size_t i = 0; i < ax.n; ++i) {
    for (std::size_t j = 0; j < ay.n; ++j) {
      const std::size_t k = i * ay.n + j;
      os << detail::fmt17(ax.coord(i)) << ',' << detail::fmt17(ay.coord(j)) << ','
         << detail::fmt17(u.values[k]) << ',' << detail::fmt17(u.errors[k]) << '\n';
    }
  }
}

/**
 * Read a CSV written by write_csv, or a plain `x,value` / `x,y,value` table.
 * Coordinates must form a uniform grid.
 */
inline GridFunction read_csv(std::istream& is) {
  std::string line;
  std::map<std::string, std::string> meta;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) {
        std::string key = line.substr(1, eq - 1);
        key.erase(0, key.find_first_not_of(' '));
        meta[key] = line.substr(eq + 1);
      }
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (header.empty() && !cells.empty() && !std::isdigit(static_cast<unsigned char>(cells[0][0])) &&
        cells[0][0] != '-' && cells[0][0] != '.' && cells[0][0] != '+') {
      header = cells;
      continue;
    }
    std::vector<double> r;
    for (const auto& c : cells) r.push_back(std::stod(c));
    rows.push_back(std::move(r));
  }
  if (rows.size() < 2) throw std::runtime_error("read_csv: need at least two rows");
  const bool two_d = !header.empty() ? (header.size() >= 2 && header[1] == "y") : rows[0].size() == 3;
  const std::size_t vcol = two_d ? 2 : 1;
  const bool has_err = rows[0].size() > vcol + 1;
  GridFunction u;
  if (!two_d) {
    const double lo = rows.front()[0];
    const double h = (rows.back()[0] - lo) / static_cast<double>(rows.size() - 1);
    u.grid = {{Axis{lo, h, rows.size()}}};
  } else {
    std::size_t ny = 1;
    while (ny < rows.size() && rows[ny][0] == rows[0][0]) ++ny;
    const std::size_t nx = rows.size() / ny;
    if (nx * ny != rows.size()) throw std::runtime_error("read_csv: 2D rows do not form a full grid");
    const double xlo = rows.front()[0];
    const double ylo = rows.front()[1];
    const double hx = nx > 1 ? (rows.back()[0] - xlo) / static_cast<double>(nx - 1) : 1.0;
    const double hy = ny > 1 ? (rows.back()[1] - ylo) / static_cast<double>(ny - 1) : 1.0;
    u.grid = {{Axis{xlo, hx, nx}, Axis{ylo, hy, ny}}};
  }
  u.values.resize(rows.size());
  u.errors.assign(rows.size(), 0.0);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double expect = u.dim() == 1 ? u.grid.x().coord(k) : u.grid.x().coord(k / u.grid.y().n);
    if (std::abs(rows[k][0] - expect) > 1e-9 * std::max(1.0, std::abs(expect))) {
      throw std::runtime_error("read_csv: coordinates are not uniformly spaced");
    }
    u.values[k] = rows[k][vcol];
    if (has_err) u.errors[k] = rows[k][vcol + 1];
  }
  if (auto it = meta.find("growth_A"); it != meta.end()) {
    u.growth_A = std::stod(it->second);
    meta.erase(it);
  }
  if (auto it = meta.find("growth_a"); it != meta.end()) {
    u.growth_a = std::stod(it->second);
    meta.erase(it);
  }
  if (!std::isfinite(u.growth_a)) u.growth_a = u.fitted_growth_a(u.growth_A);
  u.metadata = std::move(meta);
  return u;
}

namespace detail {

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw std::runtime_error("read_binary: truncated input");
  return v;
}

inline constexpr char kMagic[4] = {'F', 'C', 'X', 'G'};
inline constexpr std::uint32_t kVersion = 1;

}  // namespace detail

/**
 * Binary layout (native little-endian doubles): magic "FCXG", u32 version,
 * u32 dim, per axis {f64 lo, f64 h, u64 n}, f64 growth_A, f64 growth_a,
 * u32 has_errors, values, [errors]. Metadata is not stored.
 */
inline void write_binary(std::ostream& os, const GridFunction& u) {
  os.write(detail::kMagic, 4);
  detail::put<std::uint32_t>(os, detail::kVersion);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(u.dim()));
  for (const auto& a : u.grid.axes) {
    detail::put<double>(os, a.lo);
    detail::put<double>(os, a.h);
    detail::put<std::uint64_t>(os, a.n);
  }
  detail::put<double>(os, u.growth_A);
  detail::put<double>(os, u.growth_a);
  bool has_err = false;
  for (double e : u.errors) has_err = has_err || e != 0.0;
  detail::put<std::uint32_t>(os, has_err ? 1u : 0u);
  os.write(reinterpret_cast<const char*>(u.values.data()),
           static_cast<std::streamsize>(u.values.size() * sizeof(double)));
  if (has_err) {
    os.write(reinterpret_cast<const char*>(u.errors.data()),
             static_cast<std::streamsize>(u.errors.size() * sizeof(double)));
  }
}

inline GridFunction read_binary(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, detail::kMagic, 4) != 0) throw std::runtime_error("read_binary: bad magic");
  if (detail::get<std::uint32_t>(is) != detail::kVersion) throw std::runtime_error("read_binary: unsupported version");
  const auto dim = detail::get<std::uint32_t>(is);
  if (dim != 1 && dim != 2) throw std::runtime_error("read_binary: bad dimension");
  GridSpec g;
  for (std::uint32_t d = 0; d < dim; ++d) {
    Axis a;
    a.lo = detail::get<double>(is);
    a.h = detail::get<double>(is);
    a.n = detail::get<std::uint64_t>(is);
    g.axes.push_back(a);
  }
  GridFunction u(g);
  u.growth_A = detail::get<double>(is);
  u.growth_a = detail::get<double>(is);
  const auto has_err = detail::get<std::uint32_t>(is);
  is.read(reinterpret_cast<char*>(u.values.data()), static_cast<std::streamsize>(u.size() * sizeof(double)));
  if (has_err) {
    is.read(reinterpret_cast<char*>(u.errors.data()), static_cast<std::streamsize>(u.size() * sizeof(double)));
  }
  if (!is) throw std::runtime_error("read_binary: truncated input");
  return u;
}

}  // namespace fconvex
