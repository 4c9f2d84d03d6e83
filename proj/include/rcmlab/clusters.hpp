#pragma once
// Bond percolation clusters of the "strong" edges {mu_e > a_p} inside a box,
// with the per-cluster statistics the conductance bounds need: vertex count
// and sup-norm diameter.  For an edge e, cluster_of_edge returns the union of
// the two endpoint clusters together with both endpoints (for open edges the
// two coincide).

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "rcmlab/field.hpp"
#include "rcmlab/geometry.hpp"

namespace rcmlab {

// Reference bond-percolation thresholds for Z^d (d=2 exact, d>=3 numerical).
double bond_percolation_threshold(int d);

struct ClusterStats {
  int64_t size = 0;
  int32_t lo[kMaxDim] = {0, 0, 0, 0, 0};  // bounding box
  int32_t hi[kMaxDim] = {0, 0, 0, 0, 0};

  int64_t sup_diameter(int d) const {
    int64_t m = 0;
    for (int i = 0; i < d; ++i)
      m = std::max<int64_t>(m, int64_t(hi[i]) - lo[i]);
    return m;
  }
};

struct ClusterMap {
  LatticeRegion region;
  double threshold = 0.0;
  // canonical label of each region site = smallest site index in its cluster
  std::vector<int64_t> label;
  std::unordered_map<int64_t, ClusterStats> stats;

  int64_t label_of(const Point& x) const { return label[region.index_of(x)]; }
  const ClusterStats& stats_of(const Point& x) const {
    return stats.at(label_of(x));
  }
  // Union of both endpoint clusters (plus the endpoints, which are always in
  // their own clusters); both endpoints must lie in the region.
  ClusterStats cluster_of_edge(const Edge& e) const;
};

// Open edge <=> mu_e > a_p.  Requires a subcritical threshold when the field
// carries a marginal law: P(mu > a_p) < p_c(d); throws otherwise.
ClusterMap percolation_clusters(const EnvView& env, const LatticeRegion& region,
                                double a_p);

}  // namespace rcmlab
