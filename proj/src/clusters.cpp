#include "rcmlab/clusters.hpp"

#include <numeric>
#include <stdexcept>

namespace rcmlab {

double bond_percolation_threshold(int d) {
  switch (d) {
    case 2:
      return 0.5;          // exact
    case 3:
      return 0.24881182;   // numerical
    case 4:
      return 0.16013140;
    case 5:
      return 0.11817145;
    default:
      throw std::invalid_argument("bond_percolation_threshold: d in [2,5]");
  }
}

namespace {

struct UnionFind {
  std::vector<int64_t> parent;
  explicit UnionFind(int64_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), int64_t(0));
  }
  int64_t find(int64_t x) {
    int64_t root = x;
    while (parent[root] != root) root = parent[root];
    while (parent[x] != root) {
      int64_t next = parent[x];
      parent[x] = root;
      x = next;
    }
    return root;
  }
  void unite(int64_t a, int64_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b)
      parent[b] = a;  // keep the smaller index as root => canonical labels
    else
      parent[a] = b;
  }
};

}  // namespace

ClusterMap percolation_clusters(const EnvView& env, const LatticeRegion& region,
                                double a_p) {
  if (env.field->has_law()) {
    double p_open = env.field->law().survival(a_p);
    double p_c = bond_percolation_threshold(region.d);
    if (p_open >= p_c)
      throw std::invalid_argument(
          "percolation_clusters: P(mu > a_p) = " + std::to_string(p_open) +
          " >= p_c(" + std::to_string(region.d) + ") = " + std::to_string(p_c) +
          "; pick a larger a_p");
  }
  ClusterMap cm;
  cm.region = region;
  cm.threshold = a_p;
  int64_t n = region.site_count();
  int d = region.d;
  UnionFind uf(n);
  for (int64_t i = 0; i < n; ++i) {
    Point base = region.site_at(i);
    for (int axis = 0; axis < d; ++axis) {
      Point other = offset(base, axis, +1);
      if (!region.contains(other)) continue;
      if (env.edge_value(Edge{base, int8_t(axis)}) > a_p)
        uf.unite(i, region.index_of(other));
    }
  }
  cm.label.resize(n);
  for (int64_t i = 0; i < n; ++i) cm.label[i] = uf.find(i);
  for (int64_t i = 0; i < n; ++i) {
    Point p = region.site_at(i);
    auto [it, fresh] = cm.stats.try_emplace(cm.label[i]);
    ClusterStats& cs = it->second;
    if (fresh) {
      for (int k = 0; k < d; ++k) {
        cs.lo[k] = p.c[k];
        cs.hi[k] = p.c[k];
      }
    }
    cs.size += 1;
    for (int k = 0; k < d; ++k) {
      cs.lo[k] = std::min(cs.lo[k], p.c[k]);
      cs.hi[k] = std::max(cs.hi[k], p.c[k]);
    }
  }
  return cm;
}

ClusterStats ClusterMap::cluster_of_edge(const Edge& e) const {
  Point x = e.base;
  Point y = edge_other(e);
  int64_t lx = label_of(x), ly = label_of(y);
  ClusterStats out = stats.at(lx);
  if (ly != lx) {
    const ClusterStats& o = stats.at(ly);
    out.size += o.size;
    for (int k = 0; k < region.d; ++k) {
      out.lo[k] = std::min(out.lo[k], o.lo[k]);
      out.hi[k] = std::max(out.hi[k], o.hi[k]);
    }
  }
  return out;
}

}  // namespace rcmlab
