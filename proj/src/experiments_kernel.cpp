// Kernel-side experiments: the truncated-clock expectation identity (Monte
// Carlo occupation vs the deterministic time-integral formula), local-limit
// density ratios against the Gaussian comparison kernel, heat-kernel and
// Green bound shapes, and the drivers for clock / heat-kernel / green / ceff
// / llt together with the experiment dispatch table.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <stdexcept>

#include "rcmlab/experiments.hpp"
#include "rcmlab/io.hpp"
#include "rcmlab/parallel.hpp"
#include "rcmlab/solver.hpp"
#include "rcmlab/special.hpp"
#include "rcmlab/walk.hpp"

#include "experiments_internal.hpp"

namespace rcmlab {

namespace {

// mu~(x) 1{|x|_2 <= K n} for every site of the box, under the truncated view.
std::vector<double> truncated_ball_weights(const EnvView& env,
                                           const LatticeRegion& box, int64_t n,
                                           double K) {
  const int d = env.dim();
  const double ball_sq = K * double(n) * K * double(n) + 1e-9;
  std::vector<double> w(size_t(box.site_count()), 0.0);
  parallel_for(0, box.site_count(), [&](int64_t i) {
    Point x = box.site_at(i);
    if (double(l2sq_norm(x, d)) <= ball_sq)
      w[size_t(i)] = site_conductance(env, x);
  });
  return w;
}

}  // namespace

// ---------------------------------------------------------------------------
// Clock expectation identity

std::vector<double> clock_expectation_kernel(const ConductanceField& field,
                                             int64_t n,
                                             const std::vector<double>& times,
                                             double a, double K,
                                             int64_t box_half, double tol) {
  if (n < 2 || box_half < 1 || times.empty())
    throw std::invalid_argument("clock_expectation_kernel: bad parameters");
  const int d = field.dim();
  const double cutoff = a * double(n) * double(n);
  const LatticeRegion box = make_box(d, Point{}, int32_t(box_half));
  const EnvView env = truncated_view(field, cutoff);
  const std::vector<double> w = truncated_ball_weights(env, box, n, K);
  const double norm = 1.0 / (double(n) * double(n) * std::log(double(n)));
  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times) {
    std::vector<double> g = heat_kernel_time_integral(
        env, box, Point{}, double(n) * double(n) * t, tol);
    out.push_back(block_dot(w.data(), g.data(), box.site_count()) * norm);
  }
  return out;
}

ClockMcStats clock_mc_truncated(const ConductanceField& field, int64_t n,
                                double t, double a, double K, int64_t box_half,
                                int64_t walkers, uint64_t walker_seed) {
  if (n < 2 || box_half < 1 || walkers < 1)
    throw std::invalid_argument("clock_mc_truncated: bad parameters");
  const int d = field.dim();
  const LatticeRegion box = make_box(d, Point{}, int32_t(box_half));
  // walk and weights both on the truncated view: the kernel companion
  // evaluates the same operator, so the identity is exact up to MC noise
  const EnvView env =
      truncated_view(field, a * double(n) * double(n));
  const JumpTable jt = JumpTable::build(env, box);
  const std::vector<double> w = truncated_ball_weights(env, box, n, K);
  const double horizon = double(n) * double(n) * t;
  const double norm = 1.0 / (double(n) * double(n) * std::log(double(n)));
  const int64_t start = box.index_of(Point{});

  std::vector<double> values(size_t(walkers), 0.0);
  std::vector<int64_t> jumps(size_t(walkers), 0);
  parallel_for(0, walkers, [&](int64_t wi) {
    CounterRng rng = derive_stream(kSaltWalker, walker_seed, uint64_t(wi));
    double acc = 0.0;
    WalkOutcome out = run_boxed_vsrw(
        jt, start, horizon, rng,
        [&](double t0, double t1, int64_t site) {
          acc += (t1 - t0) * w[size_t(site)];
          return true;
        },
        [](double, int64_t) { return true; });
    values[size_t(wi)] = acc * norm;
    jumps[size_t(wi)] = out.jumps;
  });

  ClockMcStats stats;
  stats.walkers = walkers;
  SummaryStats st = summarize(values);
  stats.mean = st.mean;
  stats.std_error = st.std_error;
  for (int64_t j : jumps) stats.total_jumps += j;
  return stats;
}

ClockIdentityResult clock_expectation_identity(const ConductanceField& field,
                                               int64_t n, double t, double a,
                                               double K, int64_t box_half,
                                               int64_t walkers, double tol,
                                               uint64_t walker_seed) {
  ClockIdentityResult res;
  res.box_half = box_half;
  res.mc = clock_mc_truncated(field, n, t, a, K, box_half, walkers,
                              walker_seed);
  res.kernel_value =
      clock_expectation_kernel(field, n, {t}, a, K, box_half, tol)[0];
  res.z = res.mc.std_error > 0.0
              ? (res.mc.mean - res.kernel_value) / res.mc.std_error
              : 0.0;
  return res;
}

// ---------------------------------------------------------------------------
// Local limit ratios

LltResult llt_ratio(const EnvView& env, const LltConfig& cfg,
                    double sigma_v_sq, uint64_t walker_seed) {
  const int d = env.dim();
  const int64_t n = cfg.n;
  if (n < 2 || !(sigma_v_sq > 0.0) || cfg.ball_radius < 0)
    throw std::invalid_argument("llt_ratio: bad parameters");
  if (!cfg.deterministic && cfg.walkers_per_start < 1)
    throw std::invalid_argument("llt_ratio: walkers_per_start required");

  std::vector<double> times = cfg.times;
  if (times.empty())
    times = {cfg.delta, 0.5 * (cfg.delta + cfg.t_max), cfg.t_max};
  std::sort(times.begin(), times.end());
  std::vector<std::vector<double>> starts = cfg.starts;
  if (starts.empty()) starts.push_back(std::vector<double>(size_t(d), 0.0));
  std::vector<double> y_axis = cfg.y_axis;
  if (y_axis.empty()) y_axis = {0.0, 0.25, 0.5};

  double xmax = 0.0;
  for (const auto& x : starts) {
    if (x.size() != size_t(d))
      throw std::invalid_argument("llt_ratio: start dimension mismatch");
    for (double c : x) xmax = std::max(xmax, std::abs(c));
  }
  for (double v : y_axis) xmax = std::max(xmax, std::abs(v));
  const double t_top = times.back();
  const double spread = 3.5 * std::sqrt(std::max(sigma_v_sq, 1.0) * t_top);
  const int32_t half =
      int32_t(std::ceil(double(n) * (xmax + spread))) + int32_t(cfg.box_margin);
  const LatticeRegion box = make_box(d, Point{}, half);

  std::vector<double> walk_times(times);
  for (double& t : walk_times) t *= double(n) * double(n);
  const double nd = std::pow(double(n), d);

  LltResult res;
  res.n = n;
  res.sigma_v_sq = sigma_v_sq;
  double sup = -std::numeric_limits<double>::infinity();
  double inf = std::numeric_limits<double>::infinity();

  for (size_t s = 0; s < starts.size(); ++s) {
    Point nx{};
    std::vector<double> x_eff(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) {
      nx.c[i] = int32_t(std::llround(starts[s][size_t(i)] * double(n)));
      x_eff[size_t(i)] = double(nx.c[i]) / double(n);
    }
    KernelField kf;
    McKernelEstimate mc;
    if (cfg.deterministic) {
      kf = heat_kernel(env, box, nx, walk_times, cfg.kernel_tol);
    } else {
      mc = mc_heat_kernel(env, box, nx, walk_times,
                          cfg.walkers_per_start,
                          hash_fold(walker_seed, uint64_t(s)));
      res.total_jumps += mc.total_jumps;
    }
    for (size_t ti = 0; ti < times.size(); ++ti) {
      const double t = times[ti];
      for (double v : y_axis) {
        Point ny{};
        ny.c[0] = int32_t(std::llround(v * double(n)));
        std::vector<double> y_eff(size_t(d), 0.0);
        y_eff[0] = double(ny.c[0]) / double(n);

        LltCell cell;
        cell.t = t;
        cell.x = x_eff;
        cell.y = y_eff;
        std::vector<Point> ball =
            euclidean_ball_sites(d, ny, double(cfg.ball_radius));
        bool inside = true;
        for (const Point& z : ball) inside = inside && box.contains(z);
        double kbar = 0.0;
        std::vector<double> arg(static_cast<size_t>(d));
        for (const Point& z : ball) {
          for (int i = 0; i < d; ++i)
            arg[size_t(i)] = double(z.c[i]) / double(n) - x_eff[size_t(i)];
          kbar += gaussian_density(d, sigma_v_sq, t, arg);
        }
        kbar /= double(ball.size());
        cell.density_gauss = kbar;

        if (!inside || kbar < 1e-300) {
          cell.excluded = true;
        } else if (cfg.deterministic) {
          double pbar = 0.0;
          for (const Point& z : ball) pbar += kf.value_at(ti, z);
          pbar /= double(ball.size());
          cell.density_mc = nd * pbar;
          cell.ratio = cell.density_mc / kbar;
        } else {
          McKernelEstimate::BallValue bv = mc.ball_average(ti, ball);
          cell.hits = bv.hits;
          cell.density_mc = nd * bv.mean;
          double expected = double(cfg.walkers_per_start) *
                            double(ball.size()) * kbar / nd;
          if (expected < cfg.min_expected_hits) {
            cell.excluded = true;
          } else {
            cell.ratio = cell.density_mc / kbar;
            cell.ratio_se = nd * bv.std_error / kbar;
          }
        }
        if (cell.excluded) {
          ++res.excluded;
        } else {
          ++res.included;
          sup = std::max(sup, cell.ratio);
          inf = std::min(inf, cell.ratio);
        }
        res.cells.push_back(std::move(cell));
      }
    }
  }
  if (res.included > 0) {
    res.sup_ratio = sup;
    res.inf_ratio = inf;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Heat-kernel / Green bound shapes

HkBoundStats hk_bound_stats(const EnvView& env, const LatticeRegion& box,
                            const std::vector<double>& t_scan, double tol) {
  if (t_scan.empty())
    throw std::invalid_argument("hk_bound_stats: empty scan");
  const int d = env.dim();
  HkBoundStats hb;
  hb.t_scan = t_scan;
  KernelField kf = heat_kernel(env, box, Point{}, t_scan, tol);
  hb.sup_ondiag = -std::numeric_limits<double>::infinity();
  hb.inf_ondiag = std::numeric_limits<double>::infinity();
  std::vector<double> us, vs;
  for (size_t i = 0; i < t_scan.size(); ++i) {
    const double t = t_scan[i];
    const double td = std::pow(t, 0.5 * d);
    const double p00 = kf.value_at(i, Point{});
    hb.sup_ondiag = std::max(hb.sup_ondiag, td * p00);
    hb.inf_ondiag = std::min(hb.inf_ondiag, td * p00);
    for (int64_t s = 0; s < box.site_count(); ++s) {
      Point x = box.site_at(s);
      double r2 = double(l2sq_norm(x, d));
      if (r2 <= 0.0) continue;
      double u = r2 / t;
      if (u < 0.5 || u > 10.0) continue;
      double p = kf.values[i][size_t(s)];
      if (p < 1e-14) continue;
      us.push_back(u);
      vs.push_back(std::log(td * p));
    }
  }
  if (us.size() >= 8) {
    LinearFit fit = fit_line(us, vs);
    hb.offdiag_c5 = -fit.slope;
    hb.offdiag_c4 = std::exp(fit.intercept);
  }
  hb.shell_lo = 3.0;
  hb.shell_hi = std::min(12.0, double(box.half_side) - 2.0);
  if (d > 2 && hb.shell_hi > hb.shell_lo) {
    LatticeRegion boxd =
        make_box(d, Point{}, box.half_side, Boundary::dirichlet);
    hb.sup_green_decay =
        green_decay_sup(env, boxd, hb.shell_lo, hb.shell_hi, tol);
  }
  return hb;
}

double green_decay_sup(const EnvView& env, const LatticeRegion& box,
                       double shell_lo, double shell_hi, double tol) {
  const int d = env.dim();
  GreenField gf = green(env, box, Point{}, tol);
  double sup = 0.0;
  for (int64_t s = 0; s < box.site_count(); ++s) {
    Point x = box.site_at(s);
    double r = std::sqrt(double(l2sq_norm(x, d)));
    if (r < shell_lo || r > shell_hi) continue;
    sup = std::max(sup, gf.values[size_t(s)] * std::pow(r, d - 2));
  }
  return sup;
}

// ---------------------------------------------------------------------------
// Driver: clock

ExperimentReport run_clock(const RunConfig& cfg) {
  detail::StopWatch watch;
  const nlohmann::json block = cfg.block("clock");
  const int d = cfg.law.d;
  const bool is_uniform = cfg.law.uniform > 0.0;
  const std::vector<int64_t> ladder =
      param_int_list(block, "n_ladder", {8, 16, 32});
  const int64_t envs = param_int(block, "envs", 10);
  const int64_t walkers = param_int(block, "walkers", 2000);
  const double t = param_num(block, "t", 1.0);
  std::vector<double> t_grid = param_num_list(block, "t_grid", {});
  if (t_grid.empty())
    for (int j = 1; j <= 10; ++j) t_grid.push_back(0.1 * j);
  const double a = param_num(block, "a", 1.0);
  const double K = param_num(block, "K", 2.0);
  const double delta = param_num(block, "delta", 0.1);
  const double eps = param_num(block, "eps", 0.5);
  const int64_t identity_n = param_int(block, "identity_n", 8);
  const int64_t identity_walkers = param_int(block, "identity_walkers", 10000);
  const int64_t identity_box_margin =
      param_int(block, "identity_box_margin", identity_n);
  const double identity_tol = param_num(block, "identity_tol", 1e-8);
  const int64_t moment_envs = param_int(block, "moment_envs", 30);
  const int64_t moment_walkers = param_int(block, "moment_walkers", 500);
  const int64_t moment_n = param_int(block, "moment_n", 16);
  const double sigma_v_sq = param_num(block, "sigma_v_sq", 2.0);
  const bool do_trend = param_flag(block, "do_trend", true);
  const bool do_identity = param_flag(block, "do_identity", true);
  const bool do_gap = param_flag(block, "do_gap", false);
  const bool do_moments = param_flag(block, "do_moments", false);
  const std::vector<int64_t> gap_ladder =
      param_int_list(block, "gap_ladder", {8, 16, 32});
  const int64_t gap_walkers = param_int(block, "gap_walkers", 2000);
  const uint64_t base =
      param_int(block, "env_seed", 0) != 0
          ? uint64_t(param_int(block, "env_seed", 0))
          : cfg.seed;

  ExperimentReport rep;
  rep.experiment = "clock";
  rep.seed = cfg.seed;
  rep.config_hash = cfg.config_hash;
  rep.params = {{"n_ladder", ladder},   {"envs", envs},
                {"walkers", walkers},   {"t", t},
                {"a", a},               {"K", K},
                {"delta", delta},       {"eps", eps},
                {"identity_n", identity_n},
                {"identity_walkers", identity_walkers},
                {"law", detail::law_desc(cfg.law)}};

  if ((do_trend || do_gap || do_moments) && is_uniform)
    throw std::runtime_error(
        "clock: trend/gap/moment sections need a heavy-tailed law, not a "
        "uniform field");

  if (do_trend) {
    const TailLaw law = law_from_config(cfg.law);
    ClockTrendResult tr = clock_trend(law, ladder, int(envs), walkers, t, base);
    {
      CsvWriter csv(detail::out_path(cfg, "clock_trend.csv"), cfg.config_hash,
                    cfg.seed,
                    {"env_index", "n", "mean_clock", "se_clock", "abs_dev"});
      for (size_t e = 0; e < tr.envs.size(); ++e)
        for (size_t r = 0; r < ladder.size(); ++r)
          csv.row({double(e), double(ladder[r]), tr.envs[e].mean_clock[r],
                   tr.envs[e].se_clock[r], tr.envs[e].abs_dev[r]});
    }
    // per-rung sample paths on the first environment (same walker streams as
    // the trend statistic)
    {
      uint64_t env0 = derive_env_seed(base, 0);
      ConductanceField field = ConductanceField::iid(law, env0);
      EnvView env = full_view(field);
      const int64_t w_csv = std::min<int64_t>(walkers, 50);
      for (int64_t nr : ladder) {
        char name[64];
        snprintf(name, sizeof(name), "clock_series_n%lld.csv",
                 static_cast<long long>(nr));
        CsvWriter csv(detail::out_path(cfg, name), cfg.config_hash, cfg.seed,
                      {"n", "t", "s_n_t", "walker_id"});
        uint64_t rung_seed = hash_fold(env0, uint64_t(nr));
        std::vector<std::vector<double>> rows(static_cast<size_t>(w_csv));
        parallel_for(0, w_csv, [&](int64_t w) {
          CounterRng rng = derive_stream(kSaltWalker, rung_seed, uint64_t(w));
          rows[size_t(w)] = rescaled_clock_series(env, nr, t_grid, rng);
        });
        for (int64_t w = 0; w < w_csv; ++w)
          for (size_t g = 0; g < t_grid.size(); ++g)
            csv.row({double(nr), t_grid[g], rows[size_t(w)][g], double(w)});
      }
    }
    double frac = double(tr.decreasing_count) / double(envs);
    rep.add_check("abs_dev_decreasing_fraction", frac, frac >= 0.8,
                  "fraction of environments with |mean clock - 2t| strictly "
                  "decreasing along the ladder >= 0.8",
                  -1.0, envs);
    for (size_t r = 0; r < ladder.size(); ++r)
      rep.add("pooled_abs_dev_n" + std::to_string(ladder[r]),
              tr.pooled_abs_dev[r], -1.0, envs * walkers);
  }

  if (do_identity) {
    ConductanceField field =
        is_uniform ? ConductanceField::uniform(d, cfg.law.uniform)
                   : ConductanceField::iid(law_from_config(cfg.law),
                                           derive_env_seed(base, 0));
    const int64_t box_half =
        int64_t(std::ceil(K * double(identity_n) - 1e-9)) + identity_box_margin;
    ClockIdentityResult idr = clock_expectation_identity(
        field, identity_n, t, a, K, box_half, identity_walkers, identity_tol,
        hash_fold(derive_env_seed(base, 0), 0xc1ULL));
    rep.add("identity_mc_mean", idr.mc.mean, idr.mc.std_error,
            identity_walkers);
    rep.add("identity_kernel", idr.kernel_value);
    rep.add("identity_box_half", double(idr.box_half));
    rep.add_check("identity_z", idr.z, std::abs(idr.z) <= 3.0,
                  "Monte Carlo truncated clock within 3 std errors of the "
                  "kernel formula",
                  -1.0, identity_walkers);
  }

  if (do_gap) {
    const TailLaw law = law_from_config(cfg.law);
    const double target = 2.0 * a1_integral(d, K, t, delta, sigma_v_sq);
    CsvWriter csv(detail::out_path(cfg, "clock_gap.csv"), cfg.config_hash,
                  cfg.seed, {"n", "mean_gap", "se_gap", "target"});
    rep.add("gap_target", target);
    for (int64_t nr : gap_ladder) {
      double sum = 0.0, var = 0.0;
      for (int64_t e = 0; e < envs; ++e) {
        uint64_t env_seed = derive_env_seed(base, 200 + uint64_t(e));
        ConductanceField field = ConductanceField::iid(law, env_seed);
        ClockMomentsResult mm = clock_increment_moments(
            field, nr, t, delta, a, K, gap_walkers,
            hash_fold(env_seed, uint64_t(nr)));
        sum += mm.first_moment;
        var += mm.first_se * mm.first_se;
      }
      double mean = sum / double(envs);
      double se = std::sqrt(var) / double(envs);
      csv.row({double(nr), mean, se, target});
      rep.add("gap_n" + std::to_string(nr), mean, se, envs * gap_walkers);
    }
  }

  if (do_moments) {
    const TailLaw law = law_from_config(cfg.law);
    const double bound =
        clock_second_moment_bound(d, K, t, delta, sigma_v_sq, eps);
    CsvWriter csv(detail::out_path(cfg, "clock_moments.csv"), cfg.config_hash,
                  cfg.seed,
                  {"env_index", "second_moment", "se", "bound", "within"});
    int64_t within = 0;
    for (int64_t e = 0; e < moment_envs; ++e) {
      uint64_t env_seed = derive_env_seed(base, 300 + uint64_t(e));
      ConductanceField field = ConductanceField::iid(law, env_seed);
      ClockMomentsResult mm = clock_increment_moments(
          field, moment_n, t, delta, a, K, moment_walkers,
          hash_fold(env_seed, 0x3aULL));
      bool ok = mm.second_moment <= bound;
      if (ok) ++within;
      csv.row({double(e), mm.second_moment, mm.second_se, bound,
               ok ? 1.0 : 0.0});
    }
    double frac = double(within) / double(moment_envs);
    rep.add("second_moment_bound", bound);
    rep.add_check("second_moment_within_bound_fraction", frac, frac >= 0.9,
                  "fraction of environments with E[(increment)^2] below the "
                  "Gaussian comparison bound >= 0.9",
                  -1.0, moment_envs);
  }

  rep.wall_seconds = watch.seconds();
  write_json_file(detail::out_path(cfg, "clock_summary.json"),
                  report_to_json(rep));
  return rep;
}

// ---------------------------------------------------------------------------
// Driver: heat kernel

ExperimentReport run_heat_kernel(const RunConfig& cfg) {
  detail::StopWatch watch;
  const nlohmann::json block = cfg.block("heat_kernel");
  const int d = cfg.law.d;
  const int64_t half = require_int(block, "box", "heat_kernel");
  std::vector<double> times = param_num_list(block, "times", {1.0});
  const double tol = param_num(block, "tol", 1e-10);
  const uint64_t env_seed = uint64_t(
      param_int(block, "env_seed", int64_t(derive_env_seed(cfg.seed, 0))));
  const double cutoff = param_num(block, "cutoff", 0.0);
  const int64_t mc_walkers = param_int(block, "mc_walkers", 0);
  const int64_t ball_radius = param_int(block, "ball_radius", 2);
  const bool bounds = param_flag(block, "bounds", false);
  const std::vector<double> t_scan =
      param_num_list(block, "t_scan", {2.0, 4.0, 8.0, 16.0});
  const int64_t budget = param_int(block, "budget", kDefaultMatvecBudget);
  const bool write_binary = param_flag(block, "write_binary", false);
  const bool write_csv = param_flag(block, "write_csv", false);

  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  if (times.empty() || times.front() <= 0.0)
    throw std::runtime_error("heat_kernel: times must be positive");

  ConductanceField field =
      cfg.law.uniform > 0.0
          ? ConductanceField::uniform(d, cfg.law.uniform)
          : ConductanceField::iid(law_from_config(cfg.law), env_seed);
  EnvView env = cutoff > 0.0 ? truncated_view(field, cutoff)
                             : full_view(field);
  const LatticeRegion box = make_box(d, Point{}, int32_t(half));

  // times extended with 2 t_min so the semigroup identity can be evaluated
  const double t_min = times.front();
  std::vector<double> times_ext = times;
  size_t idx_2t = times_ext.size();
  for (size_t i = 0; i < times_ext.size(); ++i)
    if (std::abs(times_ext[i] - 2.0 * t_min) < 1e-12 * t_min) idx_2t = i;
  if (idx_2t == times_ext.size()) {
    times_ext.push_back(2.0 * t_min);
    std::sort(times_ext.begin(), times_ext.end());
    for (size_t i = 0; i < times_ext.size(); ++i)
      if (std::abs(times_ext[i] - 2.0 * t_min) < 1e-12 * t_min) idx_2t = i;
  }
  size_t idx_t = 0;
  for (size_t i = 0; i < times_ext.size(); ++i)
    if (times_ext[i] == t_min) idx_t = i;

  Point xstar{};
  xstar.c[0] = 1;
  KernelField k0 = heat_kernel(env, box, Point{}, times_ext, tol, budget);
  KernelField kx = heat_kernel(env, box, xstar, times_ext, tol, budget);

  double mass_dev = 0.0, sym_dev = 0.0;
  for (size_t i = 0; i < times_ext.size(); ++i) {
    mass_dev = std::max(
        mass_dev,
        std::abs(block_sum(k0.values[i].data(), box.site_count()) - 1.0));
    sym_dev = std::max(sym_dev, std::abs(k0.value_at(i, xstar) -
                                         kx.value_at(i, Point{})));
  }
  const double semi00 =
      block_dot(k0.values[idx_t].data(), k0.values[idx_t].data(),
                box.site_count());
  const double semi0x =
      block_dot(k0.values[idx_t].data(), kx.values[idx_t].data(),
                box.site_count());
  const double semi_dev =
      std::max(std::abs(semi00 - k0.value_at(idx_2t, Point{})),
               std::abs(semi0x - k0.value_at(idx_2t, xstar)));

  ExperimentReport rep;
  rep.experiment = "heat-kernel";
  rep.seed = cfg.seed;
  rep.config_hash = cfg.config_hash;
  rep.params = {{"box", half},       {"times", times},
                {"tol", tol},        {"env_seed", env_seed},
                {"cutoff", cutoff},  {"mc_walkers", mc_walkers},
                {"bounds", bounds},  {"law", detail::law_desc(cfg.law)}};
  rep.add("lambda", k0.lambda);
  rep.add("matvecs", double(k0.matvecs));
  rep.add("mass_defect", k0.mass_defect);
  for (size_t i = 0; i < times.size(); ++i) {
    for (size_t j = 0; j < times_ext.size(); ++j)
      if (times_ext[j] == times[i])
        rep.add("p00_t" + std::to_string(i), k0.value_at(j, Point{}));
  }
  char note[160];
  snprintf(note, sizeof(note), "max time-slice |mass - 1| <= %g", 2.0 * tol);
  rep.add_check("mass_dev", mass_dev, mass_dev <= 2.0 * tol, note);
  snprintf(note, sizeof(note), "|p_t(0,x*) - p_t(x*,0)| <= %g", 2.0 * tol);
  rep.add_check("symmetry_dev", sym_dev, sym_dev <= 2.0 * tol, note);
  snprintf(note, sizeof(note),
           "|p_2t - sum_y p_t p_t| <= %g at t = %g", 4.0 * tol, t_min);
  rep.add_check("semigroup_dev", semi_dev, semi_dev <= 4.0 * tol, note);

  // closed-form on-diagonal value for the homogeneous planar case
  if (cfg.law.uniform == 1.0 && d == 2 && half >= 12) {
    for (size_t j = 0; j < times_ext.size(); ++j) {
      if (std::abs(times_ext[j] - 1.0) < 1e-12) {
        const double expected = 0.09517738508487991;  // (e^-2 I_0(2))^2
        double dev = std::abs(k0.value_at(j, Point{}) - expected);
        rep.add_check("ondiag_closed_form_dev", dev, dev <= 1e-8,
                      "p_1(0,0) matches the product-of-Bessel value to 1e-8");
      }
    }
  }

  if (mc_walkers > 0) {
    McKernelEstimate mc = mc_heat_kernel(env, box, Point{}, times_ext,
                                         mc_walkers,
                                         hash_fold(env_seed, 0x6dcULL));
    std::vector<Point> ball =
        euclidean_ball_sites(d, Point{}, double(ball_radius));
    double worst_z = 0.0;
    for (size_t i = 0; i < times_ext.size(); ++i) {
      McKernelEstimate::BallValue bv = mc.ball_average(i, ball);
      double kb = 0.0;
      for (const Point& z : ball) kb += k0.value_at(i, z);
      kb /= double(ball.size());
      if (bv.std_error > 0.0)
        worst_z = std::max(worst_z, std::abs((bv.mean - kb) / bv.std_error));
    }
    rep.add("mc_total_jumps", double(mc.total_jumps));
    rep.add_check("mc_max_z", worst_z, worst_z <= 3.0,
                  "ball-averaged Monte Carlo kernel within 3 std errors of "
                  "the deterministic kernel",
                  -1.0, mc_walkers);
  }

  if (bounds) {
    HkBoundStats hb = hk_bound_stats(env, box, t_scan, tol);
    rep.add("sup_ondiag", hb.sup_ondiag);
    rep.add("inf_ondiag", hb.inf_ondiag);
    rep.add("offdiag_c4", hb.offdiag_c4);
    rep.add("offdiag_c5", hb.offdiag_c5);
    rep.add("sup_green_decay", hb.sup_green_decay);
  }

  if (write_binary)
    write_kernel_binary(detail::out_path(cfg, "heat_kernel.rcmk"), k0, tol);
  if (write_csv)
    write_kernel_csv(detail::out_path(cfg, "heat_kernel.csv"),
                     cfg.config_hash, cfg.seed, k0);
  rep.wall_seconds = watch.seconds();
  write_json_file(detail::out_path(cfg, "heat_kernel_summary.json"),
                  report_to_json(rep));
  return rep;
}

// ---------------------------------------------------------------------------
// Driver: green

ExperimentReport run_green(const RunConfig& cfg) {
  detail::StopWatch watch;
  const nlohmann::json block = cfg.block("green");
  const int d = cfg.law.d;
  const int64_t half = require_int(block, "box", "green");
  const double tol = param_num(block, "tol", 1e-10);
  const uint64_t env_seed = uint64_t(
      param_int(block, "env_seed", int64_t(derive_env_seed(cfg.seed, 0))));
  const double shell_lo = param_num(block, "shell_lo", 3.0);
  const double shell_hi = param_num(block, "shell_hi", 0.0);
  const bool write_csv = param_flag(block, "write_csv", false);
  if (d <= 2)
    throw std::runtime_error(
        "green: the stationary solve needs a transient dimension (d >= 3)");

  ConductanceField field =
      cfg.law.uniform > 0.0
          ? ConductanceField::uniform(d, cfg.law.uniform)
          : ConductanceField::iid(law_from_config(cfg.law), env_seed);
  EnvView env = full_view(field);
  const LatticeRegion box =
      make_box(d, Point{}, int32_t(half), Boundary::dirichlet);
  GreenField gf = green(env, box, Point{}, tol);

  ExperimentReport rep;
  rep.experiment = "green";
  rep.seed = cfg.seed;
  rep.config_hash = cfg.config_hash;
  rep.params = {{"box", half},
                {"tol", tol},
                {"env_seed", env_seed},
                {"law", detail::law_desc(cfg.law)}};
  rep.add("g00", gf.value_at(Point{}));
  rep.add("iters", double(gf.iters));
  char note[128];
  snprintf(note, sizeof(note), "relative residual <= %g", 10.0 * tol);
  rep.add_check("rel_residual", gf.rel_residual, gf.rel_residual <= 10.0 * tol,
                note);
  if (cfg.law.uniform == 1.0 && d == 3)
    rep.add("ref_dev_free_space",
            std::abs(gf.value_at(Point{}) - 0.252731009858663));
  if (shell_hi > shell_lo) {
    double sup = 0.0;
    for (int64_t s = 0; s < box.site_count(); ++s) {
      Point x = box.site_at(s);
      double r = std::sqrt(double(l2sq_norm(x, d)));
      if (r < shell_lo || r > shell_hi) continue;
      sup = std::max(sup, gf.values[size_t(s)] * std::pow(r, d - 2));
    }
    rep.add("green_decay_sup", sup);
  }
  if (write_csv)
    write_green_csv(detail::out_path(cfg, "green.csv"), cfg.config_hash,
                    cfg.seed, gf);
  rep.wall_seconds = watch.seconds();
  write_json_file(detail::out_path(cfg, "green_summary.json"),
                  report_to_json(rep));
  return rep;
}

// ---------------------------------------------------------------------------
// Driver: ceff (Green / effective-conductance duality)

ExperimentReport run_ceff(const RunConfig& cfg) {
  detail::StopWatch watch;
  const nlohmann::json block = cfg.block("ceff");
  const int d = cfg.law.d;
  const int64_t half = require_int(block, "box", "ceff");
  const double tol = param_num(block, "tol", 1e-10);
  const int64_t envs = param_int(block, "envs", 10);
  const uint64_t base =
      param_int(block, "env_seed", 0) != 0
          ? uint64_t(param_int(block, "env_seed", 0))
          : cfg.seed;
  const double dev_tol = 1e-6;

  const LatticeRegion box =
      make_box(d, Point{}, int32_t(half), Boundary::dirichlet);
  std::vector<Point> interior;
  interior.reserve(size_t(box.site_count()) - 1);
  for (int64_t s = 0; s < box.site_count(); ++s) {
    Point x = box.site_at(s);
    if (l2sq_norm(x, d) > 0) interior.push_back(x);
  }

  ExperimentReport rep;
  rep.experiment = "ceff";
  rep.seed = cfg.seed;
  rep.config_hash = cfg.config_hash;
  rep.params = {{"box", half},
                {"tol", tol},
                {"envs", envs},
                {"law", detail::law_desc(cfg.law)}};

  CsvWriter csv(detail::out_path(cfg, "ceff_duality.csv"), cfg.config_hash,
                cfg.seed, {"env_index", "g00", "ceff", "duality_dev"});
  double worst = 0.0;
  for (int64_t e = 0; e < envs; ++e) {
    uint64_t env_seed = derive_env_seed(base, uint64_t(e));
    ConductanceField field =
        cfg.law.uniform > 0.0
            ? ConductanceField::uniform(d, cfg.law.uniform)
            : ConductanceField::iid(law_from_config(cfg.law), env_seed);
    EnvView env = full_view(field);
    GreenField gf = green(env, box, Point{}, tol);
    CeffResult ce = effective_conductance(env, box, {Point{}}, interior, tol);
    double dev = std::abs(ce.conductance * gf.value_at(Point{}) - 1.0);
    worst = std::max(worst, dev);
    csv.row({double(e), gf.value_at(Point{}), ce.conductance, dev});
  }
  char note[160];
  snprintf(note, sizeof(note),
           "max over %lld environments of |Ceff * g(0,0) - 1| <= %g",
           static_cast<long long>(envs), dev_tol);
  rep.add_check("duality_dev_max", worst, worst <= dev_tol, note, -1.0, envs);
  rep.wall_seconds = watch.seconds();
  write_json_file(detail::out_path(cfg, "ceff_summary.json"),
                  report_to_json(rep));
  return rep;
}

// ---------------------------------------------------------------------------
// Driver: llt

ExperimentReport run_llt(const RunConfig& cfg) {
  detail::StopWatch watch;
  const nlohmann::json block = cfg.block("llt");
  const int d = cfg.law.d;
  LltConfig lc;
  lc.n = require_int(block, "n", "llt");
  lc.delta = param_num(block, "delta", 0.5);
  lc.t_max = param_num(block, "t_max", 1.0);
  lc.times = param_num_list(block, "times", {});
  lc.y_axis = param_num_list(block, "y_axis", {0.0, 0.25, 0.5});
  lc.ball_radius = param_int(block, "ball_radius", 2);
  lc.walkers_per_start = param_int(block, "walkers", 20000);
  lc.box_margin = param_int(block, "box_margin", 0);
  lc.min_expected_hits = param_num(block, "min_expected_hits", 50.0);
  lc.deterministic = param_flag(block, "deterministic", false);
  lc.kernel_tol = param_num(block, "kernel_tol", 1e-10);
  if (block.contains("starts")) {
    const nlohmann::json& arr = block.at("starts");
    if (!arr.is_array())
      throw std::runtime_error(
          "config: \"starts\" must be an array of coordinate arrays");
    for (const auto& item : arr) {
      if (!item.is_array() || item.size() != size_t(d))
        throw std::runtime_error(
            "config: each \"starts\" entry must list d coordinates");
      std::vector<double> x;
      for (const auto& c : item) x.push_back(c.get<double>());
      lc.starts.push_back(std::move(x));
    }
  }
  const bool control = param_flag(block, "control", false);
  const double band = param_num(block, "band", 1.35);
  const double control_band = param_num(block, "control_band", 1.2);
  const uint64_t env_seed = uint64_t(
      param_int(block, "env_seed", int64_t(derive_env_seed(cfg.seed, 0))));

  double sigma_v_sq = 0.0;
  double sigma_se = 0.0;
  ConductanceField field = ConductanceField::uniform(d, 1.0);
  if (control) {
    sigma_v_sq = 2.0;  // mu == 1: variance rate 2 per coordinate, exactly
  } else {
    const TailLaw law = law_from_config(cfg.law);
    const int64_t sigma_n = param_int(block, "sigma_n", 32);
    const int64_t sigma_walkers = param_int(block, "sigma_walkers", 4000);
    const int64_t sigma_envs = param_int(block, "sigma_envs", 4);
    const double sigma_t = param_num(block, "sigma_t", 1.0);
    SigmaVEstimate sv =
        estimate_sigma_v(law, sigma_n, sigma_walkers, sigma_t, int(sigma_envs),
                         derive_env_seed(cfg.seed, 777));
    sigma_v_sq = sv.sigma_v_sq;
    sigma_se = sv.std_error;
    field = ConductanceField::iid(law, env_seed);
  }
  EnvView env = full_view(field);
  LltResult res = llt_ratio(env, lc, sigma_v_sq, hash_fold(env_seed, 0x117ULL));

  ExperimentReport rep;
  rep.experiment = "llt";
  rep.seed = cfg.seed;
  rep.config_hash = cfg.config_hash;
  rep.params = {{"n", lc.n},
                {"delta", lc.delta},
                {"t_max", lc.t_max},
                {"ball_radius", lc.ball_radius},
                {"walkers", lc.walkers_per_start},
                {"control", control},
                {"deterministic", lc.deterministic},
                {"band", control ? control_band : band},
                {"env_seed", env_seed},
                {"law", detail::law_desc(cfg.law)}};

  {
    std::vector<std::string> cols = {"t"};
    for (int i = 0; i < d; ++i) cols.push_back("x" + std::to_string(i + 1));
    for (int i = 0; i < d; ++i) cols.push_back("y" + std::to_string(i + 1));
    cols.insert(cols.end(), {"ratio", "ratio_se", "density_mc",
                             "density_gauss", "hits", "excluded"});
    CsvWriter csv(detail::out_path(cfg, "llt_cells.csv"), cfg.config_hash,
                  cfg.seed, cols);
    for (const LltCell& cell : res.cells) {
      std::vector<double> row = {cell.t};
      for (int i = 0; i < d; ++i) row.push_back(cell.x[size_t(i)]);
      for (int i = 0; i < d; ++i) row.push_back(cell.y[size_t(i)]);
      row.insert(row.end(),
                 {cell.ratio, cell.ratio_se, cell.density_mc,
                  cell.density_gauss, double(cell.hits),
                  cell.excluded ? 1.0 : 0.0});
      csv.row(row);
    }
  }

  const double band_eff = control ? control_band : band;
  rep.add("sigma_v_sq", sigma_v_sq, sigma_se);
  rep.add("included", double(res.included));
  rep.add("excluded", double(res.excluded));
  rep.add("total_jumps", double(res.total_jumps));
  rep.add_check("included_cells", double(res.included), res.included >= 1,
                "at least one cell has enough statistics");
  char note[160];
  snprintf(note, sizeof(note),
           "all included density ratios within [%g, %g]", 1.0 / band_eff,
           band_eff);
  const bool in_band = res.included >= 1 && res.sup_ratio <= band_eff &&
                       res.inf_ratio >= 1.0 / band_eff;
  rep.add("sup_ratio", res.sup_ratio);
  rep.add("inf_ratio", res.inf_ratio);
  rep.add_check("ratio_band", res.sup_ratio, in_band, note);
  rep.wall_seconds = watch.seconds();
  write_json_file(detail::out_path(cfg, "llt_summary.json"),
                  report_to_json(rep));
  return rep;
}

// ---------------------------------------------------------------------------
// Dispatch

ExperimentReport run_experiment(const std::string& name,
                                const RunConfig& cfg) {
  using Fn = ExperimentReport (*)(const RunConfig&);
  static const std::map<std::string, Fn> table = {
      {"env-sample", run_env_sample},
      {"walk", run_walk},
      {"clock", run_clock},
      {"heat-kernel", run_heat_kernel},
      {"green", run_green},
      {"ceff", run_ceff},
      {"llt", run_llt},
      {"classical", run_classical},
      {"ergodic", run_ergodic},
      {"truncation", run_truncation},
      {"homogenization", run_homogenization},
      {"clusters", run_clusters},
      {"qfclt", run_qfclt},
      {"report", run_report}};
  auto it = table.find(name);
  if (it == table.end())
    throw std::runtime_error("unknown experiment \"" + name + "\"");
  return it->second(cfg);
}

}  // namespace rcmlab
