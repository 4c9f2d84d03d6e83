#pragma once
// Conductance environments on the edges of Z^d.
//
// A field assigns a nonnegative conductance to every nearest-neighbour edge.
// Backings:
//   - iid:        lazy, unbounded; value = quantile(hash(seed, edge)) so any
//                 edge can be queried at any time with a stable answer
//   - iid_cached: same values, precomputed over a window for hot loops
//   - uniform:    mu == const everywhere (homogeneous controls)
//   - from_edges: explicit table, zero off-table (small test networks,
//                 reloaded serialized environments)
//
// EnvView layers a truncation on top: value v becomes v * 1{v <= cutoff}.

#include <cstdint>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

#include "rcmlab/geometry.hpp"
#include "rcmlab/tail_law.hpp"

namespace rcmlab {

struct EdgeHash {
  size_t operator()(const Edge& e) const {
    return size_t(hash_edge(kSaltScalar, e, kMaxDim));
  }
};

class ConductanceField {
 public:
  static ConductanceField iid(const TailLaw& law, uint64_t seed);
  static ConductanceField iid_cached(const TailLaw& law, uint64_t seed,
                                     const LatticeRegion& window);
  static ConductanceField uniform(int d, double value);
  static ConductanceField from_edges(int d,
                                     const std::vector<std::pair<Edge, double>>& edges);

  int dim() const { return d_; }
  bool has_law() const { return has_law_; }
  const TailLaw& law() const { return law_; }
  uint64_t seed() const { return seed_; }

  double edge_value(const Edge& e) const;

  // Enumerate the explicit table (valid for from_edges fields).
  const std::unordered_map<Edge, double, EdgeHash>& table() const {
    return table_;
  }

 private:
  enum class Kind { lazy_iid, eager_iid, constant, table } kind_ = Kind::constant;
  int d_ = 3;
  bool has_law_ = false;
  TailLaw law_;
  uint64_t seed_ = 0;
  double const_value_ = 1.0;
  LatticeRegion hull_;           // eager cache: edges with base inside hull
  std::vector<double> cache_;    // hull.site_count() * d values
  std::unordered_map<Edge, double, EdgeHash> table_;

  double lazy_value(const Edge& e) const;
};

// Truncated / plain view of a field: edge value v * 1{v <= cutoff}.
struct EnvView {
  const ConductanceField* field = nullptr;
  double cutoff = std::numeric_limits<double>::infinity();

  int dim() const { return field->dim(); }
  double edge_value(const Edge& e) const {
    double v = field->edge_value(e);
    return v <= cutoff ? v : 0.0;
  }
};

inline EnvView full_view(const ConductanceField& f) { return EnvView{&f}; }
inline EnvView truncated_view(const ConductanceField& f, double cutoff) {
  return EnvView{&f, cutoff};
}

// Total conductance at x.  With a region: free boundary drops edges leaving
// the region, dirichlet keeps them (they lead to the absorbing outside).
double site_conductance(const EnvView& env, const Point& x,
                        const LatticeRegion* region = nullptr);

// Edges with both endpoints in `region` and value in [a*n^2, b*n^2), canonical
// order, with their values.
std::vector<std::pair<Edge, double>> big_edge_set(
    const EnvView& env, const LatticeRegion& region, double a, int64_t n,
    double b = std::numeric_limits<double>::infinity());

}  // namespace rcmlab
