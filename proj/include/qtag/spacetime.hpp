#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qtag/time.hpp"

namespace qtag {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Position in n <= 3 spatial dimensions, distance-units.
struct Vec {
  int dim = 1;
  std::array<double, 3> v{0.0, 0.0, 0.0};

  Vec() = default;
  Vec(std::initializer_list<double> xs) {
    dim = static_cast<int>(xs.size());
    if (dim < 1 || dim > 3) throw ConfigError("position must have 1..3 components");
    int i = 0;
    for (double x : xs) v[i++] = x;
  }
  static Vec from(const std::vector<double>& xs) {
    if (xs.size() < 1 || xs.size() > 3) throw ConfigError("position must have 1..3 components");
    Vec p;
    p.dim = static_cast<int>(xs.size());
    for (int i = 0; i < p.dim; ++i) p.v[i] = xs[i];
    return p;
  }
  double operator[](int i) const { return v[i]; }
  double& operator[](int i) { return v[i]; }
  bool operator==(const Vec& o) const {
    if (dim != o.dim) return false;
    for (int i = 0; i < dim; ++i)
      if (v[i] != o.v[i]) return false;
    return true;
  }
  bool finite() const {
    for (int i = 0; i < dim; ++i)
      if (!std::isfinite(v[i])) return false;
    return true;
  }
  std::vector<double> to_vector() const { return {v.begin(), v.begin() + dim}; }
};

inline Vec operator-(const Vec& a, const Vec& b) {
  Vec r = a;
  for (int i = 0; i < a.dim; ++i) r.v[i] = a.v[i] - b.v[i];
  return r;
}
inline Vec operator+(const Vec& a, const Vec& b) {
  Vec r = a;
  for (int i = 0; i < a.dim; ++i) r.v[i] = a.v[i] + b.v[i];
  return r;
}
inline Vec operator*(double s, const Vec& a) {
  Vec r = a;
  for (int i = 0; i < a.dim; ++i) r.v[i] = s * a.v[i];
  return r;
}
inline double dot(const Vec& a, const Vec& b) {
  double s = 0;
  for (int i = 0; i < a.dim; ++i) s += a.v[i] * b.v[i];
  return s;
}
inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double euclidean_distance(const Vec& p, const Vec& q) {
  if (p.dim != q.dim) throw ConfigError("dimension mismatch between positions");
  return norm(p - q);
}

// A (time, position) pair; the unit of causal reasoning.
struct SpacetimeEvent {
  Ticks t = 0;
  Vec x;

  bool finite() const { return x.finite(); }
};

struct Geometry {
  int dimension = 1;
  double c = 1.0;  // signal speed, distance-units per time-unit
  std::vector<Vec> stations;
  Vec tag;  // t_plus
  std::optional<std::array<double, 2>> tag_extent;  // [t_0, t_1], 1D only

  double propagation_delay_units(const Vec& p, const Vec& q) const {
    if (p.dim != dimension || q.dim != dimension)
      throw ConfigError("dimension mismatch between position and geometry");
    return euclidean_distance(p, q) / c;
  }

  Ticks propagation_delay(const Vec& p, const Vec& q) const {
    return delay_ticks_from_units(propagation_delay_units(p, q));
  }
};

inline bool causally_accessible(const SpacetimeEvent& origin, const SpacetimeEvent& query,
                                const Geometry& geom) {
  return query.t >= origin.t + geom.propagation_delay(origin.x, query.x);
}

// Signed volume of the tetrahedron spanned by four vertices (times 6).
inline double signed_volume6(const std::array<Vec, 4>& vs) {
  Vec e1 = vs[1] - vs[0], e2 = vs[2] - vs[0], e3 = vs[3] - vs[0];
  return e1[0] * (e2[1] * e3[2] - e2[2] * e3[1]) - e1[1] * (e2[0] * e3[2] - e2[2] * e3[0]) +
         e1[2] * (e2[0] * e3[1] - e2[1] * e3[0]);
}

// Barycentric coordinates of p with respect to the tetrahedron.
inline std::array<double, 4> barycentric(const Vec& p, const std::array<Vec, 4>& vs) {
  double v = signed_volume6(vs);
  if (std::abs(v) < 1e-14) throw ConfigError("degenerate tetrahedron: vertices are coplanar");
  std::array<double, 4> w;
  for (int i = 0; i < 4; ++i) {
    std::array<Vec, 4> sub = vs;
    sub[i] = p;
    w[i] = signed_volume6(sub) / v;
  }
  return w;
}

// Closed convex hull: boundary points count as inside.
inline bool in_tetrahedron(const Vec& p, const std::array<Vec, 4>& vertices,
                           double tol = 1e-12) {
  auto w = barycentric(p, vertices);
  for (double wi : w)
    if (wi < -tol || wi > 1.0 + tol) return false;
  return true;
}

struct MultilaterationResult {
  bool consistent = false;
  Vec point;                          // solution of the linearized system
  std::array<double, 4> residuals{};  // |p - s_i| - d_i per sphere
};

// Solve |p - s_i| = d_i, i = 0..3, by subtracting sphere equations pairwise
// to get a 3x3 linear system, then verifying the candidate against all four
// spheres within tol.
inline MultilaterationResult multilaterate(const std::array<Vec, 4>& stations,
                                           const std::array<double, 4>& distances,
                                           double tol = 1e-9) {
  for (double d : distances)
    if (d < 0) throw ConfigError("multilateration distance must be nonnegative");
  double vol = signed_volume6(stations);
  if (std::abs(vol) < 1e-14) throw ConfigError("multilateration stations are coplanar");

  // 2 (s_i - s_0) . p = |s_i|^2 - |s_0|^2 - d_i^2 + d_0^2
  double a[3][3], b[3];
  for (int i = 1; i < 4; ++i) {
    Vec row = stations[i] - stations[0];
    for (int j = 0; j < 3; ++j) a[i - 1][j] = 2.0 * row[j];
    b[i - 1] = dot(stations[i], stations[i]) - dot(stations[0], stations[0]) -
               distances[i] * distances[i] + distances[0] * distances[0];
  }
  // Gaussian elimination with partial pivoting.
  int perm[3] = {0, 1, 2};
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (piv != col) {
      for (int j = 0; j < 3; ++j) std::swap(a[col][j], a[piv][j]);
      std::swap(b[col], b[piv]);
      std::swap(perm[col], perm[piv]);
    }
    for (int r = col + 1; r < 3; ++r) {
      double f = a[r][col] / a[col][col];
      for (int j = col; j < 3; ++j) a[r][j] -= f * a[col][j];
      b[r] -= f * b[col];
    }
  }
  MultilaterationResult res;
  Vec p;
  p.dim = 3;
  for (int r = 2; r >= 0; --r) {
    double s = b[r];
    for (int j = r + 1; j < 3; ++j) s -= a[r][j] * p[j];
    p[r] = s / a[r][r];
  }
  res.point = p;
  res.consistent = true;
  for (int i = 0; i < 4; ++i) {
    res.residuals[i] = euclidean_distance(p, stations[i]) - distances[i];
    if (std::abs(res.residuals[i]) > tol) res.consistent = false;
  }
  return res;
}

inline void validate_geometry(const Geometry& g) {
  if (g.c <= 0) throw ConfigError("geometry.c must be > 0");
  if (g.dimension < 1 || g.dimension > 3) throw ConfigError("geometry.dimension must be 1..3");
  if (g.tag.dim != g.dimension) throw ConfigError("geometry.tag has wrong dimension");
  for (const Vec& s : g.stations)
    if (s.dim != g.dimension) throw ConfigError("geometry.stations entry has wrong dimension");
  if (g.dimension == 1) {
    if (g.stations.size() != 2) throw ConfigError("1D geometry requires exactly 2 stations");
    double a0 = g.stations[0][0], a1 = g.stations[1][0], tp = g.tag[0];
    if (!(a0 < tp && tp < a1))
      throw ConfigError("1D geometry requires a_0 < t_plus < a_1");
    if (g.tag_extent) {
      double t0 = (*g.tag_extent)[0], t1 = (*g.tag_extent)[1];
      if (!(a0 < t0 && t0 <= tp && tp <= t1 && t1 < a1))
        throw ConfigError("1D geometry requires a_0 < t_0 <= t_plus <= t_1 < a_1");
    }
  } else if (g.dimension == 3) {
    if (g.stations.size() != 4) throw ConfigError("3D geometry requires exactly 4 stations");
    std::array<Vec, 4> vs{g.stations[0], g.stations[1], g.stations[2], g.stations[3]};
    if (std::abs(signed_volume6(vs)) < 1e-14)
      throw ConfigError("3D geometry requires non-coplanar stations");
  }
}

}  // namespace qtag
