#include "rcmlab/field.hpp"

#include <stdexcept>

namespace rcmlab {

ConductanceField ConductanceField::iid(const TailLaw& law, uint64_t seed) {
  ConductanceField f;
  f.kind_ = Kind::lazy_iid;
  f.d_ = law.d;
  f.has_law_ = true;
  f.law_ = law;
  f.seed_ = seed;
  return f;
}

ConductanceField ConductanceField::iid_cached(const TailLaw& law, uint64_t seed,
                                              const LatticeRegion& window) {
  ConductanceField f;
  f.kind_ = Kind::eager_iid;
  f.d_ = law.d;
  f.has_law_ = true;
  f.law_ = law;
  f.seed_ = seed;
  // hull covers every edge incident to a window site: bases live within
  // half_side + 1 of the centre
  f.hull_ = make_box(law.d, window.center, window.half_side + 1);
  f.cache_.resize(size_t(f.hull_.site_count()) * law.d);
  for (int64_t i = 0; i < f.hull_.site_count(); ++i) {
    Point base = f.hull_.site_at(i);
    for (int axis = 0; axis < law.d; ++axis) {
      Edge e{base, int8_t(axis)};
      f.cache_[size_t(i) * law.d + axis] = f.lazy_value(e);
    }
  }
  return f;
}

ConductanceField ConductanceField::uniform(int d, double value) {
  if (value < 0.0)
    throw std::invalid_argument("ConductanceField::uniform: negative value");
  ConductanceField f;
  f.kind_ = Kind::constant;
  f.d_ = d;
  f.const_value_ = value;
  return f;
}

ConductanceField ConductanceField::from_edges(
    int d, const std::vector<std::pair<Edge, double>>& edges) {
  ConductanceField f;
  f.kind_ = Kind::table;
  f.d_ = d;
  for (const auto& [e, v] : edges) {
    if (v < 0.0)
      throw std::invalid_argument("ConductanceField::from_edges: negative value");
    f.table_[e] = v;
  }
  return f;
}

double ConductanceField::lazy_value(const Edge& e) const {
  uint64_t h = hash_fold(kSaltEdge, seed_);
  h = hash_edge(h, e, d_);
  return law_.sample_from_uniform(unit_from_bits(h));
}

double ConductanceField::edge_value(const Edge& e) const {
  switch (kind_) {
    case Kind::constant:
      return const_value_;
    case Kind::lazy_iid:
      return lazy_value(e);
    case Kind::eager_iid:
      if (hull_.contains(e.base)) {
        return cache_[size_t(hull_.index_of(e.base)) * d_ + e.axis];
      }
      return lazy_value(e);
    case Kind::table: {
      auto it = table_.find(e);
      return it == table_.end() ? 0.0 : it->second;
    }
  }
  return 0.0;
}

double site_conductance(const EnvView& env, const Point& x,
                        const LatticeRegion* region) {
  int d = env.dim();
  double s = 0.0;
  for (int axis = 0; axis < d; ++axis) {
    for (int dir = 0; dir < 2; ++dir) {
      bool positive = dir == 0;
      if (region != nullptr && region->boundary == Boundary::free_sites) {
        Point other = offset(x, axis, positive ? +1 : -1);
        if (!region->contains(other)) continue;
      }
      s += env.edge_value(incident_edge(x, axis, positive));
    }
  }
  return s;
}

std::vector<std::pair<Edge, double>> big_edge_set(const EnvView& env,
                                                  const LatticeRegion& region,
                                                  double a, int64_t n,
                                                  double b) {
  if (a < 0.0 || b <= a)
    throw std::invalid_argument("big_edge_set: need 0 <= a < b");
  double lo = a * double(n) * double(n);
  double hi = b * double(n) * double(n);
  std::vector<std::pair<Edge, double>> out;
  int d = region.d;
  for (int64_t i = 0; i < region.site_count(); ++i) {
    Point base = region.site_at(i);
    for (int axis = 0; axis < d; ++axis) {
      Point other = offset(base, axis, +1);
      if (!region.contains(other)) continue;
      Edge e{base, int8_t(axis)};
      double v = env.edge_value(e);
      if (v >= lo && v < hi) out.emplace_back(e, v);
    }
  }
  return out;  // site_at order is lexicographic, so edges are canonical-sorted
}

}  // namespace rcmlab
