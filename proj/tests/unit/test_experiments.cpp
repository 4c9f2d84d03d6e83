#include "doctest.h"

#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "rcmlab/experiments.hpp"
#include "rcmlab/field.hpp"
#include "rcmlab/stats.hpp"
#include "rcmlab/tail_law.hpp"

using namespace rcmlab;

TEST_CASE("classical analogue: closed forms match an independent recomputation") {
  CHECK(classical_truncated_mean(0.5) == 0.0);
  CHECK(classical_truncated_mean(1.0) == 0.0);
  CHECK(classical_truncated_mean(std::exp(2.0)) == doctest::Approx(2.0).epsilon(1e-13));

  const int64_t n = 400;
  const double beta = 1.5;
  double mean = 0.0, var = 0.0;
  for (int64_t i = 1; i <= n; ++i) {
    double a = i <= 1 ? 0.0 : double(i) * std::pow(std::log(double(i)), beta);
    double p = a > 1.0 ? 1.0 / a : 1.0;
    mean += p;
    var += p * (1.0 - p);
  }
  CHECK(classical_mismatch_mean(n, beta) == doctest::Approx(mean).epsilon(1e-13));
  CHECK(classical_mismatch_variance(n, beta) == doctest::Approx(var).epsilon(1e-13));
}

TEST_CASE("classical path functionals: determinism and ordering") {
  std::vector<double> grid = {0.25, 0.5, 1.0};
  ClassicalResult a = classical_sums(2000, 1.5, grid, 42);
  ClassicalResult b = classical_sums(2000, 1.5, grid, 42);
  CHECK(a.u_raw == b.u_raw);
  CHECK(a.sup_dev_raw == b.sup_dev_raw);
  CHECK(a.mismatch_count == b.mismatch_count);

  // truncation only removes mass
  for (size_t g = 0; g < grid.size(); ++g) {
    CHECK(a.v_truncated[g] <= a.u_raw[g]);
    CHECK(a.v_truncated[g] >= 0.0);
  }
  // the path sup dominates every grid deviation
  for (size_t g = 0; g < grid.size(); ++g) {
    CHECK(a.sup_dev_raw >= std::abs(a.u_raw[g] - grid[g]) - 1e-12);
    CHECK(a.sup_dev_truncated >= std::abs(a.v_truncated[g] - grid[g]) - 1e-12);
    CHECK(a.sup_abs_m >= std::abs(a.m_centered[g]) - 1e-12);
  }
  CHECK(a.mismatch_count >= 0);
  CHECK(a.mismatch_count <= 2000);

  ClassicalResult c = classical_sums(2000, 1.5, grid, 43);
  CHECK(a.u_raw != c.u_raw);

  CHECK_THROWS_AS(classical_sums(1, 1.5, grid, 1), std::invalid_argument);
  CHECK_THROWS_AS(classical_sums(100, 1.0, grid, 1), std::invalid_argument);
  CHECK_THROWS_AS(classical_sums(100, 1.5, {-0.5}, 1), std::invalid_argument);
}

TEST_CASE("classical centered sums have mean zero") {
  std::vector<double> ms;
  for (uint64_t seed = 0; seed < 200; ++seed)
    ms.push_back(classical_sums(500, 1.5, {1.0}, seed).m_centered[0]);
  SummaryStats s = summarize(ms);
  CHECK(std::abs(s.mean) < 4.0 * s.std_error);
}

TEST_CASE("ergodic averages: the exact mean obeys the closed-form bias ratio") {
  TailLaw law = make_tail_law(3);
  const int64_t n = 24;
  auto one = [](const double*) { return 1.0; };
  ErgodicResult res = ergodic_average(law, 7, n, 1.0, 1.0, one, one, one);
  CHECK(res.sites > 0);

  // E I_n / (2 int f) = (2 ln n + 2d - 1 + ln a) / (2 ln n), here a = 1
  double ratio = (2.0 * std::log(double(n)) + 5.0) / (2.0 * std::log(double(n)));
  CHECK(res.e_i_n / res.target_f == doctest::Approx(ratio).epsilon(1e-12));
  // construction from the law's truncated site mean
  double per_site = law.truncated_site_mean(double(n) * double(n)) / 2.0;
  CHECK(res.e_i_n ==
        doctest::Approx(res.riemann_f * per_site * 2.0 / std::log(double(n)))
            .epsilon(1e-12));
  CHECK(res.target_f == doctest::Approx(2.0 * res.riemann_f).epsilon(1e-14));
  // lattice Riemann sum of the unit-ball indicator, d=3: within the surface
  // error of the volume 4 pi / 3 (times the limit factor 2)
  CHECK(std::abs(res.target_f - 8.377580409572781) < 0.1 * 8.377580409572781);
  CHECK(res.rel_dev == doctest::Approx(res.i_n / res.e_i_n - 1.0).epsilon(1e-12));

  // separable double averages factorize exactly
  CHECK(res.j_n == res.i_g1 * res.i_g2);
  CHECK_THROWS_AS(ergodic_average(law, 7, 1, 1.0, 1.0, one, one, one),
                  std::invalid_argument);
  CHECK_THROWS_AS(ergodic_average(law, 7, 8, -1.0, 1.0, one, one, one),
                  std::invalid_argument);
}

TEST_CASE("sigma_v estimate recovers the homogeneous diffusivity") {
  TailLaw law = make_tail_law(2);
  SigmaVEstimate est = estimate_sigma_v(law, 10, 300, 1.0, 4, 99, 1.0);
  CHECK(est.n == 10);
  CHECK(est.envs == 4);
  // constant conductance c: per-coordinate variance rate 2c = 2
  CHECK(est.std_error < 0.2);
  CHECK(std::abs(est.sigma_v_sq - 2.0) < 5.0 * est.std_error);
  REQUIRE(est.cross_cov.size() == 1);
  CHECK(std::abs(est.cross_cov[0]) < 5.0 * est.cross_cov_se[0] + 0.05);

  // determinism across calls
  SigmaVEstimate est2 = estimate_sigma_v(law, 10, 300, 1.0, 4, 99, 1.0);
  CHECK(est.sigma_v_sq == est2.sigma_v_sq);
}

TEST_CASE("clock expectation identity: MC equals the kernel integral") {
  TailLaw law = make_tail_law(2);
  ConductanceField field = ConductanceField::iid(law, 314);
  ClockIdentityResult res =
      clock_expectation_identity(field, 4, 1.0, 1.0, 2.0, 10, 3000, 1e-8, 2718);
  CHECK(res.mc.walkers == 3000);
  CHECK(res.mc.std_error > 0.0);
  CHECK(res.kernel_value > 0.0);
  CHECK(std::abs(res.z) < 3.5);
  CHECK(res.z == doctest::Approx((res.mc.mean - res.kernel_value) /
                                 res.mc.std_error));
}

TEST_CASE("clock increment moments: deterministic on a constant field") {
  ConductanceField f = ConductanceField::uniform(2, 2.0);
  // cutoff a n^2 = 64 keeps every edge, ball K n = 8000 holds the whole path
  ClockMomentsResult res = clock_increment_moments(f, 8, 1.0, 0.25, 1.0, 1000.0,
                                                   50, 5);
  double expect = 2.0 * 2.0 * 2.0 * 0.75 / std::log(8.0);  // 2 d c (t - delta) / ln n
  CHECK(res.first_moment == doctest::Approx(expect).epsilon(1e-12));
  CHECK(res.first_se == doctest::Approx(0.0));
  CHECK(res.second_moment == doctest::Approx(expect * expect).epsilon(1e-12));

  // Jensen on a random field
  TailLaw law = make_tail_law(2);
  ConductanceField rf = ConductanceField::iid(law, 11);
  ClockMomentsResult r2 = clock_increment_moments(rf, 6, 1.0, 0.1, 1.0, 2.0,
                                                  400, 17);
  CHECK(r2.second_moment >=
        r2.first_moment * r2.first_moment - 4.0 * r2.second_se -
            8.0 * r2.first_moment * r2.first_se);
}

TEST_CASE("truncation probabilities: the wrapper is the 1x1 sweep") {
  TailLaw law = make_tail_law(2);
  ConductanceField field = ConductanceField::iid(law, 73);
  const int64_t walkers = 2000;
  TruncationProbs p = truncation_probs(field, 6, 3.0, 4.0, 0.5, walkers, 88);
  TruncationSweepResult s =
      truncation_sweep(field, 6, {3.0}, {4.0}, 0.5, walkers, 88);
  CHECK(p.walkers == walkers);
  CHECK(p.p_exit == double(s.exit_counts[0]) / double(walkers));
  CHECK(p.p_hit_big == double(s.hit_counts[0][0]) / double(walkers));
  CHECK(p.se_exit ==
        doctest::Approx(std::sqrt(p.p_exit * (1.0 - p.p_exit) / double(walkers)))
            .epsilon(1e-12));

  // a larger ball is harder to leave; a larger cutoff is harder to hit
  TruncationSweepResult grid =
      truncation_sweep(field, 6, {2.0, 4.0}, {2.0, 8.0, 32.0}, 0.5, walkers, 88);
  CHECK(grid.exit_counts[0] >= grid.exit_counts[1]);
  for (size_t ki = 0; ki < 2; ++ki)
    for (size_t ai = 1; ai < 3; ++ai)
      CHECK(grid.hit_counts[ki][ai] <= grid.hit_counts[ki][ai - 1]);
  // hit sets grow with K
  for (size_t ai = 0; ai < 3; ++ai)
    CHECK(grid.hit_counts[1][ai] >= grid.hit_counts[0][ai]);

  CHECK_THROWS_AS(
      truncation_sweep(field, 6, {2.0}, {8.0, 2.0}, 0.5, 100, 1),
      std::invalid_argument);
}

TEST_CASE("qfclt marginal: degenerate time short-circuits, control passes KS") {
  TailLaw law = make_tail_law(2);
  QfcltResult zero = qfclt_marginal_test(law, 5, 8, 0.0, 100, 0.5, false, 6, 1.0);
  CHECK(zero.skipped);

  QfcltResult ctrl = qfclt_marginal_test(law, 5, 8, 1.0, 400, 0.5, false, 6, 1.0);
  CHECK(!ctrl.skipped);
  CHECK(ctrl.walkers == 400);
  REQUIRE(ctrl.ks_per_coord.size() == 2);
  CHECK(ctrl.ks_max == std::max(ctrl.ks_per_coord[0], ctrl.ks_per_coord[1]));
  // modest bar: n = 8 carries visible lattice discreteness
  CHECK(ctrl.ks_max < 0.15);
  REQUIRE(ctrl.cov_offdiag_z.size() == 1);
  CHECK(std::abs(ctrl.cov_offdiag_z[0]) < 4.0);
}

TEST_CASE("environment seeds form a salted namespace") {
  std::set<uint64_t> seen;
  for (uint64_t m : {1ULL, 2ULL, 999ULL})
    for (uint64_t i = 0; i < 50; ++i) seen.insert(derive_env_seed(m, i));
  CHECK(seen.size() == 150);
  CHECK(derive_env_seed(1, 0) == derive_env_seed(1, 0));
  CHECK(derive_env_seed(1, 0) != 1);
}

TEST_CASE("clock trend harness: shapes and bookkeeping") {
  TailLaw law = make_tail_law(2);
  ClockTrendResult res = clock_trend(law, {4, 6}, 2, 60, 0.5, 2024);
  REQUIRE(res.envs.size() == 2);
  REQUIRE(res.pooled_abs_dev.size() == 2);
  int decreasing = 0;
  for (const auto& env : res.envs) {
    REQUIRE(env.mean_clock.size() == 2);
    for (size_t r = 0; r < 2; ++r) {
      CHECK(env.abs_dev[r] ==
            doctest::Approx(std::abs(env.mean_clock[r] - 1.0)).epsilon(1e-12));
      CHECK(env.se_clock[r] > 0.0);
      CHECK(env.mean_clock[r] > 0.0);
    }
    bool dec = env.abs_dev[1] < env.abs_dev[0];
    CHECK(env.strictly_decreasing == dec);
    if (dec) ++decreasing;
  }
  CHECK(res.decreasing_count == decreasing);
  CHECK(res.t == 0.5);
}

TEST_CASE("homogenization tiles: counts and the closed-form edge intensity") {
  TailLaw law = make_tail_law(2);
  ConductanceField field = ConductanceField::iid(law, 2048);
  HomogenizationResult res =
      homogenization_stat(field, 8, 0.5, 1.0, 1.1, 2, 1e-8, 4);
  CHECK(res.m == 10);  // ceil(8^1.1)
  CHECK(res.b_n == 2);
  // tiles in m Z^2 meeting the sup ball of radius K n + 1 = 9: a 2 x 2 grid
  CHECK(int64_t(res.tiles.size()) == 4);
  CHECK(res.expected_big_per_tile ==
        doctest::Approx(2.0 * 100.0 * law.survival(0.5 * 64.0)).epsilon(1e-12));
  int64_t big_total = 0;
  for (const auto& tile : res.tiles) {
    CHECK(tile.gamma_sum >= 0.0);
    big_total += tile.big_edges;
  }
  CHECK(big_total == res.total_big_edges);
  if (res.total_big_edges > 0) {
    CHECK(res.max_tile_sum > 0.0);
    CHECK(res.max_to_mean >= 1.0);
  }
  CHECK(res.mean_gamma_edge >= 0.0);
  // tile side must dominate the gamma separation ball
  CHECK_THROWS_AS(homogenization_stat(field, 8, 0.5, 1.0, 1.1, 4, 1e-8, 4),
                  std::invalid_argument);
}

TEST_CASE("gamma prime exponential moments and the cut-set bound") {
  TailLaw law = make_tail_law(2);
  GammaMomentResult res =
      gamma_moment_check(law, 31415, 1.2, 4, {0.05, 0.1}, 150, 1e-6);
  CHECK(res.samples == 150);
  REQUIRE(res.exp_moment.size() == 2);
  for (size_t i = 0; i < 2; ++i) {
    CHECK(res.exp_moment[i] >= 1.0);  // gamma' >= 0
    CHECK(res.exp_moment_se[i] >= 0.0);
  }
  CHECK(res.exp_moment[1] >= res.exp_moment[0]);  // monotone in theta
  CHECK(res.mean_gamma_prime >= 0.0);
  CHECK(res.max_gamma_prime >= res.mean_gamma_prime);
  CHECK(res.truncated_count >= 0);
  CHECK(res.truncated_count <= 150);
  CHECK(res.cut_bound_violations == 0);
}

TEST_CASE("llt ratio in deterministic mode on the homogeneous control") {
  ConductanceField f = ConductanceField::uniform(2, 1.0);
  LltConfig cfg;
  cfg.n = 6;
  cfg.delta = 0.5;
  cfg.t_max = 1.0;
  cfg.times = {0.5, 1.0};
  cfg.starts = {{0.0, 0.0}, {0.25, 0.0}};
  cfg.y_axis = {0.0, 0.5};
  cfg.ball_radius = 2;
  cfg.walkers_per_start = 1;
  cfg.box_margin = 2;
  cfg.deterministic = true;
  cfg.kernel_tol = 1e-10;
  LltResult res = llt_ratio(full_view(f), cfg, 2.0, 7);
  CHECK(res.n == 6);
  CHECK(res.excluded == 0);
  REQUIRE(res.included == int64_t(res.cells.size()));
  double sup = 0.0, inf = 1e300;
  for (const auto& cell : res.cells) {
    CHECK(cell.ratio > 0.8);
    CHECK(cell.ratio < 1.25);
    sup = std::max(sup, cell.ratio);
    inf = std::min(inf, cell.ratio);
  }
  CHECK(res.sup_ratio == doctest::Approx(sup));
  CHECK(res.inf_ratio == doctest::Approx(inf));
}
