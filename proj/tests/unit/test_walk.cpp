#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rcmlab/field.hpp"
#include "rcmlab/stats.hpp"
#include "rcmlab/tail_law.hpp"
#include "rcmlab/walk.hpp"

using namespace rcmlab;

TEST_CASE("constant field: the clock is deterministic, mu_x * t") {
  ConductanceField f = ConductanceField::uniform(2, 1.5);  // site rate 6
  EnvView env = full_view(f);
  CounterRng rng = derive_stream(kSaltWalker, 1, 0);
  WalkTrajectory traj = simulate_vsrw(env, Point{}, 10.0, rng);
  CHECK(traj.end_time == 10.0);
  CHECK(traj.jump_count() > 0);
  for (double r : traj.rates) CHECK(r == 6.0);
  for (double t : {0.0, 0.37, 2.0, 9.99, 10.0})
    CHECK(clock_value(traj, t) == doctest::Approx(6.0 * t).epsilon(1e-13));
  CHECK_THROWS_AS(clock_value(traj, 10.5), std::invalid_argument);
  CHECK_THROWS_AS(clock_value(traj, -0.1), std::invalid_argument);
}

TEST_CASE("csrw_position inverts the clock along the recorded path") {
  TailLaw law = make_tail_law(2);
  ConductanceField f = ConductanceField::iid(law, 31);
  EnvView env = full_view(f);
  CounterRng rng = derive_stream(kSaltWalker, 31, 5);
  WalkTrajectory traj = simulate_vsrw(env, Point{}, 25.0, rng);
  REQUIRE(traj.jump_count() > 10);
  const auto& cp = traj.clock_prefix();
  REQUIRE(cp.size() == traj.epochs.size() + 1);
  // at each arrival epoch the inverse lands on the site just entered
  for (size_t k = 0; k < traj.sites.size(); ++k) {
    CHECK(csrw_position(traj, cp[k]) == traj.sites[k]);
    // strictly inside the holding interval as well
    double mid = 0.5 * (cp[k] + cp[k + 1]);
    CHECK(csrw_position(traj, mid) == traj.sites[k]);
  }
  CHECK(csrw_position(traj, cp.back()) == traj.sites.back());
  CHECK_THROWS_AS(csrw_position(traj, cp.back() * 1.01), std::invalid_argument);

  // clock_value and the prefix agree at the epochs
  for (size_t k = 0; k < traj.epochs.size(); ++k)
    CHECK(clock_value(traj, traj.epochs[k]) == doctest::Approx(cp[k]).epsilon(1e-12));
}

TEST_CASE("weighted occupation specializes to time and to the clock") {
  TailLaw law = make_tail_law(2);
  ConductanceField f = ConductanceField::iid(law, 77);
  EnvView env = full_view(f);
  CounterRng rng = derive_stream(kSaltWalker, 77, 0);
  WalkTrajectory traj = simulate_vsrw(env, Point{}, 12.0, rng);
  for (double t : {1.0, 7.5, 12.0}) {
    CHECK(weighted_occupation(traj, t, [](const Point&) { return 1.0; }) ==
          doctest::Approx(t).epsilon(1e-12));
    double clock = weighted_occupation(traj, t, [&](const Point& x) {
      return site_conductance(env, x);
    });
    CHECK(clock == doctest::Approx(clock_value(traj, t)).epsilon(1e-12));
    double at_origin = weighted_occupation(
        traj, t, [](const Point& x) { return x == Point{} ? 1.0 : 0.0; });
    CHECK(at_origin >= 0.0);
    CHECK(at_origin <= t);
  }
}

TEST_CASE("exit_time matches a manual scan in both norms") {
  TailLaw law = make_tail_law(2);
  ConductanceField f = ConductanceField::iid(law, 13);
  EnvView env = full_view(f);
  CounterRng rng = derive_stream(kSaltWalker, 13, 2);
  WalkTrajectory traj = simulate_vsrw(env, Point{}, 60.0, rng);

  for (ExitNorm norm : {ExitNorm::euclidean, ExitNorm::sup}) {
    for (double R : {1.0, 3.0, 5.0}) {
      std::optional<double> manual;
      for (size_t k = 0; k < traj.sites.size(); ++k) {
        double dist = norm == ExitNorm::sup
                          ? double(sup_norm(traj.sites[k], 2))
                          : l2_norm(traj.sites[k], 2);
        if (dist > R) {
          manual = traj.epochs[k];
          break;
        }
      }
      std::optional<double> got = exit_time(traj, Point{}, R, norm);
      CHECK(got.has_value() == manual.has_value());
      if (got && manual) CHECK(*got == *manual);
    }
  }
  CHECK(!exit_time(traj, Point{}, 1e9).has_value());
  // the sup ball contains the euclidean ball, so its exit cannot come first
  auto sup5 = exit_time(traj, Point{}, 5.0, ExitNorm::sup);
  auto euc5 = exit_time(traj, Point{}, 5.0, ExitNorm::euclidean);
  if (sup5) {
    REQUIRE(euc5.has_value());
    CHECK(*euc5 <= *sup5);
  }
}

TEST_CASE("rescaled clock series: exact on a constant field") {
  // S_{n^2 t} = 2 d c n^2 t exactly, so the series is 2 d c t / ln n
  ConductanceField f = ConductanceField::uniform(2, 1.0);
  const int64_t n = 8;
  std::vector<double> grid = {0.25, 0.5, 1.0};
  CounterRng rng = derive_stream(kSaltWalker, 3, 0);
  auto series = rescaled_clock_series(full_view(f), n, grid, rng);
  REQUIRE(series.size() == 3);
  for (size_t i = 0; i < grid.size(); ++i)
    CHECK(series[i] ==
          doctest::Approx(4.0 * grid[i] / std::log(8.0)).epsilon(1e-12));

  CounterRng rng2 = derive_stream(kSaltWalker, 3, 0);
  std::vector<double> bad = {1.0, 0.5};
  CHECK_THROWS_AS(rescaled_clock_series(full_view(f), n, bad, rng2),
                  std::invalid_argument);
  CHECK_THROWS_AS(rescaled_clock_series(full_view(f), 1, grid, rng2),
                  std::invalid_argument);
}

TEST_CASE("truncated clock series: cutoff and ball behave as documented") {
  const int64_t n = 8;
  std::vector<double> grid = {0.5, 1.0};

  // constant value below the cutoff, huge ball: identical to the plain series
  ConductanceField f2 = ConductanceField::uniform(2, 2.0);
  CounterRng ra = derive_stream(kSaltWalker, 9, 1);
  auto full_series = rescaled_truncated_clock_series(f2, n, grid, 1.0, 1e6, ra);
  for (size_t i = 0; i < grid.size(); ++i)
    CHECK(full_series[i] ==
          doctest::Approx(8.0 * grid[i] / std::log(8.0)).epsilon(1e-12));

  // cutoff below the constant value: every edge is dropped from the weight
  CounterRng rb = derive_stream(kSaltWalker, 9, 1);
  auto zero_series =
      rescaled_truncated_clock_series(f2, n, grid, 0.01, 1e6, rb);
  CHECK(zero_series[0] == 0.0);
  CHECK(zero_series[1] == 0.0);

  // a small ball can only shrink the accumulated weight
  CounterRng rc = derive_stream(kSaltWalker, 9, 1);
  auto ball_series =
      rescaled_truncated_clock_series(f2, n, grid, 1.0, 0.25, rc);
  CHECK(ball_series[0] > 0.0);  // the walk starts inside |x| <= 2
  CHECK(ball_series[0] <= full_series[0]);
  CHECK(ball_series[1] <= full_series[1]);
  CHECK(ball_series[0] <= ball_series[1] + 1e-15);  // nondecreasing weight integral
}

TEST_CASE("boxed dynamics: free boxes confine, dirichlet boxes absorb") {
  ConductanceField f = ConductanceField::uniform(2, 1.0);

  LatticeRegion free_box = make_box(2, Point{}, 2, Boundary::free_sites);
  JumpTable jt_free = JumpTable::build(full_view(f), free_box);
  // corner site loses two edges under the free boundary
  Point corner = make_point({2, 2});
  CHECK(jt_free.op.rate[free_box.index_of(corner)] == 2.0);
  CHECK(jt_free.op.rate[free_box.index_of(Point{})] == 4.0);
  CHECK(jt_free.op.max_rate == 4.0);

  CounterRng rng = derive_stream(kSaltWalker, 21, 0);
  int64_t arrivals = 0;
  auto out = run_boxed_vsrw(
      jt_free, free_box.index_of(Point{}), 50.0, rng,
      [](double, double, int64_t) { return true; },
      [&](double, int64_t site) {
        CHECK(site >= 0);
        CHECK(site < 25);
        ++arrivals;
        return true;
      });
  CHECK(!out.absorbed);
  CHECK(out.end_time == 50.0);
  CHECK(out.jumps == arrivals);

  LatticeRegion dir_box = make_box(2, Point{}, 1, Boundary::dirichlet);
  JumpTable jt_dir = JumpTable::build(full_view(f), dir_box);
  // dirichlet keeps the full rate everywhere
  CHECK(jt_dir.op.rate[dir_box.index_of(make_point({1, 1}))] == 4.0);
  CounterRng rng2 = derive_stream(kSaltWalker, 21, 1);
  WalkTrajectory traj = simulate_vsrw_boxed(jt_dir, Point{}, 1e6, rng2);
  CHECK(traj.absorbed);
  CHECK(traj.end_time < 1e6);
  CHECK_THROWS_AS(simulate_vsrw_boxed(jt_dir, make_point({5, 5}), 1.0, rng2),
                  std::invalid_argument);
}

TEST_CASE("csrw marginal: homogeneous control has variance t/d per coordinate") {
  ConductanceField f = ConductanceField::uniform(2, 1.0);
  EnvView env = full_view(f);
  const int64_t n = 12;
  const double t = 0.75;
  const int walkers = 3000;
  std::vector<double> x0, x1;
  x0.reserve(walkers);
  x1.reserve(walkers);
  for (int w = 0; w < walkers; ++w) {
    CounterRng rng = derive_stream(kSaltWalker, 4242, uint64_t(w));
    auto xy = rescaled_csrw_marginal(env, n, t, false, rng);
    REQUIRE(xy.size() == 2);
    x0.push_back(xy[0]);
    x1.push_back(xy[1]);
  }
  SummaryStats s0 = summarize(x0), s1 = summarize(x1);
  const double var_target = t / 2.0;  // tau / d scaled by n^2
  const double mean_band = 4.0 * std::sqrt(var_target / walkers);
  CHECK(std::abs(s0.mean) < mean_band);
  CHECK(std::abs(s1.mean) < mean_band);
  // variance of the sample variance ~ 2 var^2 / n for near-Gaussian sums
  const double var_band = 4.0 * var_target * std::sqrt(2.0 / walkers);
  CHECK(std::abs(s0.variance - var_target) < var_band);
  CHECK(std::abs(s1.variance - var_target) < var_band);

  // degenerate time: no displacement
  CounterRng rng0 = derive_stream(kSaltWalker, 4242, 0);
  auto zero = rescaled_csrw_marginal(env, n, 0.0, false, rng0);
  CHECK(zero[0] == 0.0);
  CHECK(zero[1] == 0.0);
}

TEST_CASE("lazy stepper and recorded trajectory consume randomness identically") {
  TailLaw law = make_tail_law(3);
  ConductanceField f = ConductanceField::iid(law, 61);
  EnvView env = full_view(f);
  CounterRng r1 = derive_stream(kSaltWalker, 61, 7);
  CounterRng r2 = r1;
  WalkTrajectory traj = simulate_vsrw(env, Point{}, 5.0, r1);
  auto out = run_lazy_vsrw(
      env, Point{}, 5.0, r2,
      [](double, double, const Point&, const double*, double) { return true; },
      [](double, const Point&) { return true; });
  CHECK(traj.jump_count() == out.jumps);
  CHECK(traj.sites.back() == out.end_site);
  CHECK(traj.end_time == out.end_time);
  CHECK(r1.counter == r2.counter);
}
