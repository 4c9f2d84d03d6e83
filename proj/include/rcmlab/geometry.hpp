#pragma once
// Lattice geometry: points of Z^d (d <= 5), canonical nearest-neighbour edges,
// and axis-aligned box regions with site indexing.
//
// Norm conventions used across the lab:
//   - regions and lattice balls B(x,r) are sup-norm unless an op says otherwise
//   - Euclidean distances are provided for the ops that need them (Green decay
//     scans, power sums, Euclidean site balls for space averages).

#include <array>
#include <cassert>
#include <cmath>
#include <compare>
#include <cstdint>
#include <vector>

#include "rcmlab/rng.hpp"

namespace rcmlab {

inline constexpr int kMaxDim = 5;

struct Point {
  std::array<int32_t, kMaxDim> c{};  // coordinates beyond the dimension stay 0

  int32_t& operator[](int i) { return c[i]; }
  int32_t operator[](int i) const { return c[i]; }
  bool operator==(const Point&) const = default;
  auto operator<=>(const Point&) const = default;  // lexicographic
};

inline Point make_point(std::initializer_list<int32_t> xs) {
  Point p;
  int i = 0;
  for (int32_t v : xs) p.c[i++] = v;
  return p;
}

inline Point offset(Point p, int axis, int32_t delta) {
  p.c[axis] += delta;
  return p;
}

inline int64_t sup_dist(const Point& a, const Point& b, int d) {
  int64_t m = 0;
  for (int i = 0; i < d; ++i) m = std::max<int64_t>(m, std::abs(int64_t(a.c[i]) - b.c[i]));
  return m;
}
inline int64_t l1_dist(const Point& a, const Point& b, int d) {
  int64_t s = 0;
  for (int i = 0; i < d; ++i) s += std::abs(int64_t(a.c[i]) - b.c[i]);
  return s;
}
inline int64_t l2sq_dist(const Point& a, const Point& b, int d) {
  int64_t s = 0;
  for (int i = 0; i < d; ++i) {
    int64_t t = int64_t(a.c[i]) - b.c[i];
    s += t * t;
  }
  return s;
}
inline double l2_dist(const Point& a, const Point& b, int d) {
  return std::sqrt(double(l2sq_dist(a, b, d)));
}
inline int64_t sup_norm(const Point& a, int d) { return sup_dist(a, Point{}, d); }
inline int64_t l2sq_norm(const Point& a, int d) { return l2sq_dist(a, Point{}, d); }
inline double l2_norm(const Point& a, int d) { return l2_dist(a, Point{}, d); }

inline uint64_t hash_point(uint64_t h, const Point& p, int d) {
  for (int i = 0; i < d; ++i) h = hash_fold(h, uint64_t(uint32_t(p.c[i])));
  return h;
}

// Canonical unordered nearest-neighbour edge {base, base + e_axis}.
struct Edge {
  Point base;
  int8_t axis = 0;

  bool operator==(const Edge&) const = default;
  auto operator<=>(const Edge&) const = default;
};

inline Point edge_other(const Edge& e) { return offset(e.base, e.axis, +1); }

// Build the canonical edge from two adjacent sites (order irrelevant).
inline Edge make_edge(const Point& a, const Point& b, int d) {
  assert(l1_dist(a, b, d) == 1);
  Edge e;
  for (int i = 0; i < d; ++i) {
    if (a.c[i] != b.c[i]) {
      e.axis = int8_t(i);
      e.base = (a.c[i] < b.c[i]) ? a : b;
      return e;
    }
  }
  assert(false && "sites not adjacent");
  return e;
}

// Edge incident to x along +/-axis.
inline Edge incident_edge(const Point& x, int axis, bool positive) {
  Edge e;
  e.axis = int8_t(axis);
  e.base = positive ? x : offset(x, axis, -1);
  return e;
}

inline uint64_t hash_edge(uint64_t h, const Edge& e, int d) {
  h = hash_point(h, e.base, d);
  return hash_fold(h, uint64_t(e.axis));
}

enum class Boundary { free_sites, dirichlet };

// Axis-aligned cube of sites {x : |x - center|_sup <= half_side}.
struct LatticeRegion {
  int d = 3;
  Point center{};
  int32_t half_side = 0;
  Boundary boundary = Boundary::free_sites;

  int64_t side() const { return 2 * int64_t(half_side) + 1; }
  int64_t site_count() const {
    int64_t n = 1;
    for (int i = 0; i < d; ++i) n *= side();
    return n;
  }
  bool contains(const Point& p) const {
    return sup_dist(p, center, d) <= half_side;
  }
  // Mixed-radix index of a site; caller guarantees containment.
  int64_t index_of(const Point& p) const {
    int64_t idx = 0;
    for (int i = 0; i < d; ++i) {
      idx = idx * side() + (int64_t(p.c[i]) - center.c[i] + half_side);
    }
    return idx;
  }
  Point site_at(int64_t idx) const {
    Point p;
    for (int i = d - 1; i >= 0; --i) {
      p.c[i] = int32_t(idx % side() - half_side + center.c[i]);
      idx /= side();
    }
    return p;
  }
};

inline LatticeRegion make_box(int d, const Point& center, int32_t half_side,
                              Boundary b = Boundary::free_sites) {
  LatticeRegion r;
  r.d = d;
  r.center = center;
  r.half_side = half_side;
  r.boundary = b;
  return r;
}

// All sites of `region` within Euclidean distance `radius` of `center`
// (used by the space-average ops; most other balls are sup-norm cubes).
std::vector<Point> euclidean_ball_sites(int d, const Point& center, double radius);

// All sites of the sup-norm ball, enumerated in index order of its bounding box.
std::vector<Point> sup_ball_sites(int d, const Point& center, int32_t radius);

}  // namespace rcmlab
