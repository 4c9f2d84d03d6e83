#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "rcmlab/geometry.hpp"
#include "rcmlab/parallel.hpp"
#include "rcmlab/rng.hpp"

using namespace rcmlab;

TEST_CASE("counter rng is a pure function of (key, counter)") {
  CounterRng a{42, 0}, b{42, 0};
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  // copying forks the remaining sequence
  CounterRng c{7, 0};
  c.next_u64();
  CounterRng fork = c;
  CHECK(c.next_u64() == fork.next_u64());

  // distinct keys decorrelate immediately
  CounterRng d{43, 0};
  CounterRng e{42, 0};
  CHECK(d.next_u64() != e.next_u64());
}

TEST_CASE("avalanche outputs look distinct and unit doubles stay in range") {
  std::set<uint64_t> seen;
  for (uint64_t i = 0; i < 4096; ++i) seen.insert(fmix64(i));
  CHECK(seen.size() == 4096);

  CounterRng rng{123, 0};
  for (int i = 0; i < 20000; ++i) {
    double u = rng.next_unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CounterRng rng2{321, 0};
  for (int i = 0; i < 20000; ++i) {
    double u = rng2.next_unit_open();
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
  }
}

TEST_CASE("exponential holding times have the right scale") {
  CounterRng rng{991, 0};
  const int n = 40000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    double h = rng.next_exponential(2.0);
    CHECK(h > 0.0);
    sum += h;
  }
  // mean 1/rate = 0.5, sd 0.5 -> 4 sigma band
  CHECK(std::abs(sum / n - 0.5) < 4.0 * 0.5 / std::sqrt(double(n)));
}

TEST_CASE("derived streams separate by salt, seed and index") {
  CounterRng a = derive_stream(kSaltWalker, 5, 0);
  CounterRng b = derive_stream(kSaltWalker, 5, 0);
  CHECK(a.key == b.key);
  CHECK(derive_stream(kSaltWalker, 5, 1).key != a.key);
  CHECK(derive_stream(kSaltWalker, 6, 0).key != a.key);
  CHECK(derive_stream(kSaltEdge, 5, 0).key != a.key);
}

TEST_CASE("point hashing depends on exactly the first d coordinates") {
  Point p = make_point({3, -2, 5});
  Point q = p;
  q.c[3] = 99;  // beyond d = 3
  CHECK(hash_point(kSaltEdge, p, 3) == hash_point(kSaltEdge, p, 3));
  CHECK(hash_point(kSaltEdge, p, 4) != hash_point(kSaltEdge, q, 4));
  Point r = p;
  r.c[2] = 6;
  CHECK(hash_point(kSaltEdge, p, 3) != hash_point(kSaltEdge, r, 3));

  std::set<uint64_t> seen;
  for (int x = -8; x <= 8; ++x)
    for (int y = -8; y <= 8; ++y)
      seen.insert(hash_point(kSaltEdge, make_point({x, y}), 2));
  CHECK(seen.size() == 17u * 17u);
}

TEST_CASE("edges canonicalize independently of endpoint order") {
  Point a = make_point({1, 2, 3});
  Point b = make_point({1, 3, 3});
  Edge e1 = make_edge(a, b, 3);
  Edge e2 = make_edge(b, a, 3);
  CHECK(e1 == e2);
  CHECK(e1.axis == 1);
  CHECK(e1.base == a);
  CHECK(edge_other(e1) == b);
  CHECK(hash_edge(kSaltEdge, e1, 3) == hash_edge(kSaltEdge, e2, 3));

  Edge plus = incident_edge(a, 0, true);
  CHECK(plus.base == a);
  Edge minus = incident_edge(a, 0, false);
  CHECK(minus.base == make_point({0, 2, 3}));
  CHECK(edge_other(minus) == a);
}

TEST_CASE("distances") {
  Point a = make_point({1, -2});
  Point b = make_point({4, 2});
  CHECK(sup_dist(a, b, 2) == 4);
  CHECK(l1_dist(a, b, 2) == 7);
  CHECK(l2sq_dist(a, b, 2) == 25);
  CHECK(l2_dist(a, b, 2) == doctest::Approx(5.0));
  CHECK(sup_norm(b, 2) == 4);
  CHECK(l2sq_norm(b, 2) == 20);
}

TEST_CASE("region indexing round-trips every site") {
  LatticeRegion box = make_box(3, make_point({2, -1, 0}), 2);
  CHECK(box.site_count() == 125);
  for (int64_t i = 0; i < box.site_count(); ++i) {
    Point p = box.site_at(i);
    CHECK(box.contains(p));
    CHECK(box.index_of(p) == i);
  }
  CHECK(box.contains(make_point({4, 1, 2})));
  CHECK(!box.contains(make_point({5, 1, 2})));
  CHECK(!box.contains(make_point({4, 1, 3})));
}

TEST_CASE("euclidean ball enumerations have the exact lattice counts") {
  // d=2, r=2: origin + 4 at distance 1 + 4 at sqrt(2) + 4 at 2
  auto b2 = euclidean_ball_sites(2, Point{}, 2.0);
  CHECK(b2.size() == 13);
  // d=3, r=1.5: origin + 6 at 1 + 12 at sqrt(2)
  auto b3 = euclidean_ball_sites(3, Point{}, 1.5);
  CHECK(b3.size() == 19);
  // shifted center keeps the count, shifts the membership
  Point c = make_point({10, -3});
  auto shifted = euclidean_ball_sites(2, c, 2.0);
  CHECK(shifted.size() == 13);
  std::set<Point> uniq;
  for (const Point& p : shifted) {
    CHECK(l2sq_dist(p, c, 2) <= 4);
    uniq.insert(p);
  }
  CHECK(uniq.size() == shifted.size());
}

TEST_CASE("sup ball enumerates the full cube in index order") {
  Point c = make_point({1, 1});
  auto sites = sup_ball_sites(2, c, 2);
  CHECK(sites.size() == 25);
  LatticeRegion bb = make_box(2, c, 2);
  for (size_t k = 1; k < sites.size(); ++k)
    CHECK(bb.index_of(sites[k]) > bb.index_of(sites[k - 1]));
}

TEST_CASE("fixed-order reductions are invariant under the thread count") {
  std::vector<double> v(100001), w(100001);
  CounterRng rng{2024, 0};
  for (size_t i = 0; i < v.size(); ++i) {
    v[i] = rng.next_unit() - 0.5;
    w[i] = rng.next_unit();
  }
  set_threads(1);
  double s1 = block_sum(v.data(), int64_t(v.size()));
  double d1 = block_dot(v.data(), w.data(), int64_t(v.size()));
  set_threads(4);
  double s4 = block_sum(v.data(), int64_t(v.size()));
  double d4 = block_dot(v.data(), w.data(), int64_t(v.size()));
  CHECK(s1 == s4);  // bitwise, not approximately
  CHECK(d1 == d4);

  // parallel_for writes per-index slots identically
  std::vector<double> f1(5000), f4(5000);
  set_threads(1);
  parallel_for(0, 5000, [&](int64_t i) { f1[size_t(i)] = double(i) * 1.25; });
  set_threads(4);
  parallel_for(0, 5000, [&](int64_t i) { f4[size_t(i)] = double(i) * 1.25; });
  CHECK(f1 == f4);

  // the chunk grid of parallel_chunks is fixed by (n, grain) alone
  std::vector<int64_t> widths1(10, -1), widths4(10, -1);
  set_threads(1);
  parallel_chunks(95, 10, [&](int64_t lo, int64_t hi, int64_t c) {
    widths1[size_t(c)] = hi - lo;
  });
  set_threads(4);
  parallel_chunks(95, 10, [&](int64_t lo, int64_t hi, int64_t c) {
    widths4[size_t(c)] = hi - lo;
  });
  CHECK(widths1 == widths4);
  CHECK(widths1.back() == 5);
  set_threads(2);
}
