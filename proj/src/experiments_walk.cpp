// Walk-driven statistics: sigma_V estimation, the rescaled-clock convergence
// trend, truncated-clock increment moments, truncation-event probabilities
// (with a grid sweep that reuses one walker pass), and the CSRW marginal
// (quenched FCLT) tests, plus their drivers.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "rcmlab/experiments.hpp"
#include "rcmlab/io.hpp"
#include "rcmlab/parallel.hpp"
#include "rcmlab/special.hpp"
#include "rcmlab/walk.hpp"

#include "experiments_internal.hpp"

namespace rcmlab {

// ---------------------------------------------------------------------------
// sigma_V

SigmaVEstimate estimate_sigma_v(const TailLaw& law, int64_t n,
                                int64_t walkers_per_env, double t, int envs,
                                uint64_t master_seed, double uniform_value) {
  if (n < 2 || walkers_per_env < 1 || envs < 1 || !(t > 0.0))
    throw std::invalid_argument("estimate_sigma_v: bad parameters");
  const int d = law.d;
  const double horizon = double(n) * double(n) * t;
  const double norm = 1.0 / horizon;
  const int npairs = d * (d - 1) / 2;
  // Edges above n^2 only produce local two-site bounces that do not move the
  // walker; dropping them bounds the per-walker jump count by O(n^2) per
  // encounter while leaving the diffusive limit unchanged.
  const double cutoff = double(n) * double(n);

  std::vector<double> env_sq(size_t(envs), 0.0);  // mean of |Y|^2 / (d n^2 t)
  std::vector<double> env_cross(size_t(envs) * size_t(std::max(npairs, 1)),
                                0.0);

  for (int e = 0; e < envs; ++e) {
    uint64_t env_seed = derive_env_seed(master_seed, uint64_t(e));
    ConductanceField field =
        uniform_value > 0.0 ? ConductanceField::uniform(d, uniform_value)
                            : ConductanceField::iid(law, env_seed);
    EnvView view = truncated_view(field, cutoff);

    const int64_t grain = 256;
    const int64_t chunks = (walkers_per_env + grain - 1) / grain;
    std::vector<double> partial(size_t(chunks) * size_t(1 + npairs), 0.0);
    parallel_chunks(walkers_per_env, grain,
                    [&](int64_t lo, int64_t hi, int64_t chunk) {
                      double* slot = &partial[size_t(chunk) * (1 + npairs)];
                      for (int64_t w = lo; w < hi; ++w) {
                        CounterRng rng = derive_stream(
                            kSaltWalker, hash_fold(env_seed, 0xe57aULL),
                            uint64_t(w));
                        LazyWalkOutcome out = run_lazy_vsrw(
                            view, Point{}, horizon, rng,
                            [](double, double, const Point&, const double*,
                               double) { return true; },
                            [](double, const Point&) { return true; });
                        double sq = 0.0;
                        int p = 0;
                        for (int i = 0; i < d; ++i) {
                          double yi = double(out.end_site.c[i]);
                          sq += yi * yi;
                          for (int j = i + 1; j < d; ++j, ++p)
                            slot[1 + p] += yi * double(out.end_site.c[j]);
                        }
                        slot[0] += sq;
                      }
                    });
    double sq_sum = 0.0;
    std::vector<double> cross_sum(size_t(std::max(npairs, 1)), 0.0);
    for (int64_t c = 0; c < chunks; ++c) {
      sq_sum += partial[size_t(c) * (1 + npairs)];
      for (int p = 0; p < npairs; ++p)
        cross_sum[size_t(p)] += partial[size_t(c) * (1 + npairs) + 1 + p];
    }
    env_sq[size_t(e)] = sq_sum * norm / (double(walkers_per_env) * d);
    for (int p = 0; p < npairs; ++p)
      env_cross[size_t(e) * npairs + p] =
          cross_sum[size_t(p)] * norm / double(walkers_per_env);
  }

  SigmaVEstimate est;
  est.n = n;
  est.walkers_per_env = walkers_per_env;
  est.envs = envs;
  SummaryStats sq_stats = summarize(env_sq);
  est.sigma_v_sq = sq_stats.mean;
  est.std_error = envs > 1 ? sq_stats.std_error : 0.0;
  for (int p = 0; p < npairs; ++p) {
    std::vector<double> vals(static_cast<size_t>(envs));
    for (int e = 0; e < envs; ++e)
      vals[size_t(e)] = env_cross[size_t(e) * npairs + p];
    SummaryStats cs = summarize(vals);
    est.cross_cov.push_back(cs.mean);
    est.cross_cov_se.push_back(envs > 1 ? cs.std_error : 0.0);
  }
  return est;
}

// ---------------------------------------------------------------------------
// Clock trend

ClockTrendResult clock_trend(const TailLaw& law,
                             const std::vector<int64_t>& ladder, int envs,
                             int64_t walkers, double t, uint64_t master_seed) {
  if (ladder.empty() || envs < 1 || walkers < 1)
    throw std::invalid_argument("clock_trend: bad parameters");
  ClockTrendResult res;
  res.ladder = ladder;
  res.t = t;
  const size_t rungs = ladder.size();
  const std::vector<double> grid = {t};

  // one flat pass over (env, rung, walker); each task is an independent walk
  std::vector<double> values(size_t(envs) * rungs * size_t(walkers), 0.0);
  std::vector<uint64_t> env_seeds(static_cast<size_t>(envs));
  for (int e = 0; e < envs; ++e)
    env_seeds[size_t(e)] = derive_env_seed(master_seed, uint64_t(e));

  for (int e = 0; e < envs; ++e) {
    ConductanceField field = ConductanceField::iid(law, env_seeds[size_t(e)]);
    EnvView env = full_view(field);
    for (size_t r = 0; r < rungs; ++r) {
      int64_t n = ladder[r];
      uint64_t rung_seed = hash_fold(env_seeds[size_t(e)], uint64_t(n));
      double* out =
          &values[(size_t(e) * rungs + r) * size_t(walkers)];
      parallel_for(0, walkers, [&](int64_t w) {
        CounterRng rng = derive_stream(kSaltWalker, rung_seed, uint64_t(w));
        out[w] = rescaled_clock_series(env, n, grid, rng)[0];
      });
    }
  }

  res.pooled_abs_dev.assign(rungs, 0.0);
  std::vector<double> pooled(rungs, 0.0);
  for (int e = 0; e < envs; ++e) {
    ClockTrendEnv env_row;
    env_row.env_seed = env_seeds[size_t(e)];
    bool strict = true;
    for (size_t r = 0; r < rungs; ++r) {
      const double* vals =
          &values[(size_t(e) * rungs + r) * size_t(walkers)];
      std::vector<double> copy(vals, vals + walkers);
      SummaryStats st = summarize(copy);
      env_row.mean_clock.push_back(st.mean);
      env_row.se_clock.push_back(st.std_error);
      env_row.abs_dev.push_back(std::abs(st.mean - 2.0 * t));
      pooled[r] += st.mean;
      if (r > 0 && env_row.abs_dev[r] >= env_row.abs_dev[r - 1])
        strict = false;
    }
    env_row.strictly_decreasing = strict;
    if (strict) ++res.decreasing_count;
    res.envs.push_back(std::move(env_row));
  }
  for (size_t r = 0; r < rungs; ++r)
    res.pooled_abs_dev[r] = std::abs(pooled[r] / double(envs) - 2.0 * t);
  return res;
}

// ---------------------------------------------------------------------------
// Truncated clock increment moments

ClockMomentsResult clock_increment_moments(const ConductanceField& field,
                                           int64_t n, double t, double delta,
                                           double a, double K, int64_t walkers,
                                           uint64_t walker_seed) {
  if (!(delta >= 0.0) || !(t > delta) || walkers < 1)
    throw std::invalid_argument("clock_increment_moments: bad parameters");
  const std::vector<double> grid = {delta, t};
  std::vector<double> incs(size_t(walkers), 0.0);
  parallel_for(0, walkers, [&](int64_t w) {
    CounterRng rng = derive_stream(kSaltWalker, walker_seed, uint64_t(w));
    std::vector<double> s =
        rescaled_truncated_clock_series(field, n, grid, a, K, rng);
    incs[size_t(w)] = s[1] - s[0];
  });
  ClockMomentsResult res;
  res.walkers = walkers;
  SummaryStats first = summarize(incs);
  res.first_moment = first.mean;
  res.first_se = first.std_error;
  std::vector<double> sq(static_cast<size_t>(walkers));
  for (int64_t w = 0; w < walkers; ++w)
    sq[size_t(w)] = incs[size_t(w)] * incs[size_t(w)];
  SummaryStats second = summarize(sq);
  res.second_moment = second.mean;
  res.second_se = second.std_error;
  return res;
}

// ---------------------------------------------------------------------------
// Truncation events

TruncationSweepResult truncation_sweep(const ConductanceField& field, int64_t n,
                                       const std::vector<double>& k_values,
                                       const std::vector<double>& a_values,
                                       double t, int64_t walkers,
                                       uint64_t walker_seed) {
  if (k_values.empty() || a_values.empty() || walkers < 1)
    throw std::invalid_argument("truncation_sweep: bad parameters");
  const int d = field.dim();
  const double horizon = double(n) * double(n) * t;
  const EnvView env = full_view(field);
  const size_t nk = k_values.size(), na = a_values.size();

  // site thresholds a_j n^2, ascending; per-walker we track, for each j, the
  // smallest |x|_2^2 among visited sites whose rate lands in bracket j
  // (rate >= a_j n^2, < a_{j+1} n^2), then suffix-minimize.
  std::vector<double> site_thresholds(na);
  for (size_t j = 0; j < na; ++j) {
    site_thresholds[j] = a_values[j] * double(n) * double(n);
    if (j > 0 && a_values[j] <= a_values[j - 1])
      throw std::invalid_argument(
          "truncation_sweep: a_values must be strictly increasing");
  }
  std::vector<double> ball_sq(nk);
  for (size_t i = 0; i < nk; ++i)
    ball_sq[i] = k_values[i] * double(n) * k_values[i] * double(n) + 1e-9;

  const int64_t grain = 512;
  const int64_t chunks = (walkers + grain - 1) / grain;
  std::vector<int64_t> exit_part(size_t(chunks) * nk, 0);
  std::vector<int64_t> hit_part(size_t(chunks) * nk * na, 0);

  parallel_chunks(walkers, grain, [&](int64_t lo, int64_t hi, int64_t chunk) {
    int64_t* exits = &exit_part[size_t(chunk) * nk];
    int64_t* hits = &hit_part[size_t(chunk) * nk * na];
    std::vector<double> bracket_min(na);
    for (int64_t w = lo; w < hi; ++w) {
      CounterRng rng = derive_stream(kSaltWalker, walker_seed, uint64_t(w));
      double max_sq = 0.0;
      std::fill(bracket_min.begin(), bracket_min.end(),
                std::numeric_limits<double>::infinity());
      run_lazy_vsrw(
          env, Point{}, horizon, rng,
          [&](double, double, const Point& site, const double*, double rate) {
            double sq = double(l2sq_norm(site, d));
            max_sq = std::max(max_sq, sq);
            if (rate >= site_thresholds[0]) {
              size_t j = 0;
              while (j + 1 < na && rate >= site_thresholds[j + 1]) ++j;
              bracket_min[j] = std::min(bracket_min[j], sq);
            }
            return true;
          },
          [](double, const Point&) { return true; });
      // suffix minimum: smallest radius among sites with rate >= a_j n^2
      for (size_t j = na; j-- > 1;)
        bracket_min[j - 1] = std::min(bracket_min[j - 1], bracket_min[j]);
      for (size_t i = 0; i < nk; ++i) {
        if (max_sq > ball_sq[i]) ++exits[i];
        for (size_t j = 0; j < na; ++j)
          if (bracket_min[j] <= ball_sq[i]) ++hits[i * na + j];
      }
    }
  });

  TruncationSweepResult res;
  res.k_values = k_values;
  res.a_values = a_values;
  res.walkers = walkers;
  res.exit_counts.assign(nk, 0);
  res.hit_counts.assign(nk, std::vector<int64_t>(na, 0));
  for (int64_t c = 0; c < chunks; ++c) {
    for (size_t i = 0; i < nk; ++i) {
      res.exit_counts[i] += exit_part[size_t(c) * nk + i];
      for (size_t j = 0; j < na; ++j)
        res.hit_counts[i][j] += hit_part[size_t(c) * nk * na + i * na + j];
    }
  }
  return res;
}

TruncationProbs truncation_probs(const ConductanceField& field, int64_t n,
                                 double K, double a, double t, int64_t walkers,
                                 uint64_t walker_seed) {
  TruncationSweepResult sweep =
      truncation_sweep(field, n, {K}, {a}, t, walkers, walker_seed);
  TruncationProbs probs;
  probs.walkers = walkers;
  probs.p_exit = double(sweep.exit_counts[0]) / double(walkers);
  probs.p_hit_big = double(sweep.hit_counts[0][0]) / double(walkers);
  probs.se_exit =
      std::sqrt(probs.p_exit * (1.0 - probs.p_exit) / double(walkers));
  probs.se_hit =
      std::sqrt(probs.p_hit_big * (1.0 - probs.p_hit_big) / double(walkers));
  return probs;
}

// ---------------------------------------------------------------------------
// CSRW marginal test

QfcltResult qfclt_marginal_test(const TailLaw& law, uint64_t env_seed,
                                int64_t n, double t, int64_t walkers,
                                double sigma1_sq, bool log_time_scale,
                                uint64_t walker_seed, double uniform_value) {
  QfcltResult res;
  res.n = n;
  res.t = t;
  res.sigma1_sq = sigma1_sq;
  res.walkers = walkers;
  const int d = law.d;
  if (t == 0.0) {
    res.skipped = true;
    return res;
  }
  if (!(t > 0.0) || walkers < 1 || !(sigma1_sq > 0.0))
    throw std::invalid_argument("qfclt_marginal_test: bad parameters");
  ConductanceField field =
      uniform_value > 0.0 ? ConductanceField::uniform(d, uniform_value)
                          : ConductanceField::iid(law, env_seed);
  EnvView env = full_view(field);

  std::vector<double> comps(size_t(walkers) * size_t(d), 0.0);
  parallel_for(0, walkers, [&](int64_t w) {
    CounterRng rng = derive_stream(kSaltWalker, walker_seed, uint64_t(w));
    std::vector<double> x =
        rescaled_csrw_marginal(env, n, t, log_time_scale, rng);
    for (int i = 0; i < d; ++i) comps[size_t(w) * d + i] = x[size_t(i)];
  });

  const double sd = std::sqrt(sigma1_sq * t);
  auto cdf = [&](double x) { return normal_cdf(x / sd); };
  for (int i = 0; i < d; ++i) {
    std::vector<double> coord(static_cast<size_t>(walkers));
    for (int64_t w = 0; w < walkers; ++w)
      coord[size_t(w)] = comps[size_t(w) * d + i];
    double ks = ks_distance(std::move(coord), cdf);
    res.ks_per_coord.push_back(ks);
    res.ks_max = std::max(res.ks_max, ks);
  }
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      std::vector<double> prod(static_cast<size_t>(walkers));
      for (int64_t w = 0; w < walkers; ++w)
        prod[size_t(w)] =
            comps[size_t(w) * d + i] * comps[size_t(w) * d + j];
      SummaryStats st = summarize(prod);
      res.cov_offdiag_z.push_back(
          st.std_error > 0.0 ? st.mean / st.std_error : 0.0);
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Driver: walk

ExperimentReport run_walk(const RunConfig& cfg) {
  detail::StopWatch watch;
  const nlohmann::json block = cfg.block("walk");
  const double t_max = require_num(block, "t_max", "walk");
  const int64_t n = param_int(block, "n", 0);
  const int64_t walkers = param_int(block, "walkers", 100);
  const uint64_t env_seed = uint64_t(
      param_int(block, "env_seed", int64_t(derive_env_seed(cfg.seed, 0))));
  const bool dump_trajectory = param_flag(block, "dump_trajectory", true);
  const int64_t clock_points = param_int(block, "clock_points", 64);
  const int d = cfg.law.d;
  ConductanceField field =
      cfg.law.uniform > 0.0 ? ConductanceField::uniform(d, cfg.law.uniform)
                            : ConductanceField::iid(law_from_config(cfg.law),
                                                    env_seed);
  EnvView env = full_view(field);
  const double horizon =
      n > 0 ? double(n) * double(n) * t_max : t_max;  // rescaled vs plain

  struct WalkRow {
    double sq = 0.0, jumps = 0.0, clock = 0.0;
    bool monotone = true;
  };
  std::vector<WalkRow> rows(static_cast<size_t>(walkers));
  parallel_for(0, walkers, [&](int64_t w) {
    CounterRng rng = derive_stream(kSaltWalker, env_seed, uint64_t(w));
    WalkTrajectory traj = simulate_vsrw(env, Point{}, horizon, rng);
    WalkRow& row = rows[size_t(w)];
    row.sq = double(l2sq_norm(traj.sites.back(), d));
    row.jumps = double(traj.jump_count());
    row.clock = clock_value(traj, traj.end_time);
    for (size_t k = 1; k < traj.epochs.size(); ++k)
      if (traj.epochs[k] <= traj.epochs[k - 1]) row.monotone = false;
  });

  bool all_monotone = true;
  double mean_sq = 0.0, mean_jumps = 0.0, mean_clock = 0.0;
  for (const WalkRow& r : rows) {
    all_monotone = all_monotone && r.monotone;
    mean_sq += r.sq;
    mean_jumps += r.jumps;
    mean_clock += r.clock;
  }
  mean_sq /= double(walkers);
  mean_jumps /= double(walkers);
  mean_clock /= double(walkers);

  // walker 0 artifacts
  {
    CounterRng rng = derive_stream(kSaltWalker, env_seed, 0);
    WalkTrajectory traj = simulate_vsrw(env, Point{}, horizon, rng);
    if (dump_trajectory) {
      std::vector<std::string> cols = {"epoch"};
      for (int i = 0; i < d; ++i) cols.push_back("x" + std::to_string(i + 1));
      CsvWriter csv(detail::out_path(cfg, "walk_trajectory.csv"),
                    cfg.config_hash, cfg.seed, cols);
      for (size_t k = 0; k < traj.sites.size(); ++k) {
        std::vector<double> row = {traj.epochs[k]};
        for (int i = 0; i < d; ++i) row.push_back(double(traj.sites[k].c[i]));
        csv.row(row);
      }
    }
    if (clock_points > 0) {
      CsvWriter csv(detail::out_path(cfg, "walk_clock.csv"), cfg.config_hash,
                    cfg.seed,
                    n > 0 ? std::vector<std::string>{"t", "s_n_t"}
                          : std::vector<std::string>{"t", "s_t"});
      const double scale =
          n > 0 ? 1.0 / (double(n) * double(n) * std::log(double(n))) : 1.0;
      for (int64_t j = 1; j <= clock_points; ++j) {
        double tj = t_max * double(j) / double(clock_points);
        double raw = clock_value(traj, std::min(horizon, tj * (n > 0 ? double(n) * double(n) : 1.0)));
        csv.row({tj, raw * scale});
      }
    }
  }

  ExperimentReport rep;
  rep.experiment = "walk";
  rep.seed = cfg.seed;
  rep.config_hash = cfg.config_hash;
  rep.params = {{"t_max", t_max},   {"n", n},
                {"walkers", walkers}, {"env_seed", env_seed},
                {"law", detail::law_desc(cfg.law)}};
  rep.add("mean_end_sq", mean_sq, -1.0, walkers);
  rep.add("mean_jumps", mean_jumps, -1.0, walkers);
  rep.add("mean_clock", mean_clock, -1.0, walkers);
  rep.add_check("epochs_monotone", all_monotone ? 1.0 : 0.0, all_monotone,
                "jump epochs strictly increasing on every path");
  rep.wall_seconds = watch.seconds();
  write_json_file(detail::out_path(cfg, "walk_summary.json"),
                  report_to_json(rep));
  return rep;
}

// ---------------------------------------------------------------------------
// Driver: truncation

ExperimentReport run_truncation(const RunConfig& cfg) {
  detail::StopWatch watch;
  const nlohmann::json block = cfg.block("truncation");
  const int64_t n = require_int(block, "n", "truncation");
  const double t = param_num(block, "t", 1.0);
  const std::vector<double> k_values =
      param_num_list(block, "k_values", {4.0, 5.0, 6.0});
  const std::vector<double> a_values =
      param_num_list(block, "a_values", {8.0, 16.0, 32.0, 64.0, 128.0});
  const int64_t pilot_envs = param_int(block, "pilot_envs", 5);
  const int64_t pilot_walkers = param_int(block, "pilot_walkers", 2000);
  const int64_t envs = param_int(block, "envs", 20);
  const int64_t walkers = param_int(block, "walkers", 10000);
  const double threshold = param_num(block, "threshold", 0.05);
  double K = param_num(block, "K", 0.0);
  double a = param_num(block, "a", 0.0);
  const uint64_t base_seed =
      uint64_t(param_int(block, "env_seed", 0)) != 0
          ? uint64_t(param_int(block, "env_seed", 0))
          : cfg.seed;
  const TailLaw law = law_from_config(cfg.law);

  ExperimentReport rep;
  rep.experiment = "truncation";
  rep.seed = cfg.seed;
  rep.config_hash = cfg.config_hash;

  // Phase 1: pilot sweep on its own environment pool, unless (K, a) pinned.
  const bool pinned = K > 0.0 && a > 0.0;
  if (!pinned) {
    const size_t nk = k_values.size(), na = a_values.size();
    std::vector<int64_t> exit_tot(nk, 0);
    std::vector<std::vector<int64_t>> hit_tot(nk,
                                              std::vector<int64_t>(na, 0));
    for (int64_t e = 0; e < pilot_envs; ++e) {
      uint64_t env_seed = derive_env_seed(base_seed, 1000 + uint64_t(e));
      ConductanceField field = ConductanceField::iid(law, env_seed);
      TruncationSweepResult sweep =
          truncation_sweep(field, n, k_values, a_values, t, pilot_walkers,
                           hash_fold(env_seed, 0x7257ULL));
      for (size_t i = 0; i < nk; ++i) {
        exit_tot[i] += sweep.exit_counts[i];
        for (size_t j = 0; j < na; ++j) hit_tot[i][j] += sweep.hit_counts[i][j];
      }
    }
    const double pool = double(pilot_envs * pilot_walkers);
    CsvWriter csv(detail::out_path(cfg, "truncation_sweep.csv"),
                  cfg.config_hash, cfg.seed, {"K", "a", "p_exit", "p_hit"});
    // Pick the pair whose worse probability is smallest among those clearing
    // the threshold with headroom; fall back to the overall best pair.
    const double margin = 0.8;
    double best_any = std::numeric_limits<double>::infinity();
    double best_ok = std::numeric_limits<double>::infinity();
    bool found = false;
    for (size_t i = 0; i < nk; ++i) {
      double p_exit = double(exit_tot[i]) / pool;
      for (size_t j = 0; j < na; ++j) {
        double p_hit = double(hit_tot[i][j]) / pool;
        csv.row({k_values[i], a_values[j], p_exit, p_hit});
        double worst = std::max(p_exit, p_hit);
        bool ok = p_exit <= margin * threshold && p_hit <= margin * threshold;
        if (ok && worst < best_ok) {
          best_ok = worst;
          K = k_values[i];
          a = a_values[j];
          found = true;
        }
        if (!found && worst < best_any) {
          best_any = worst;
          K = k_values[i];
          a = a_values[j];
        }
      }
    }
    rep.add("pilot_found", found ? 1.0 : 0.0);
  }

  // Phase 2: assert the chosen pair on fresh environments.
  int64_t exit_count = 0, hit_count = 0;
  for (int64_t e = 0; e < envs; ++e) {
    uint64_t env_seed = derive_env_seed(base_seed, uint64_t(e));
    ConductanceField field = ConductanceField::iid(law, env_seed);
    TruncationSweepResult one = truncation_sweep(
        field, n, {K}, {a}, t, walkers, hash_fold(env_seed, 0x7258ULL));
    exit_count += one.exit_counts[0];
    hit_count += one.hit_counts[0][0];
  }
  const double pool = double(envs * walkers);
  const double p_exit = double(exit_count) / pool;
  const double p_hit = double(hit_count) / pool;
  const double se_exit = std::sqrt(p_exit * (1.0 - p_exit) / pool);
  const double se_hit = std::sqrt(p_hit * (1.0 - p_hit) / pool);

  rep.params = {{"n", n},           {"t", t},
                {"k_values", k_values}, {"a_values", a_values},
                {"pilot_envs", pilot_envs},
                {"pilot_walkers", pilot_walkers},
                {"envs", envs},     {"walkers", walkers},
                {"threshold", threshold},
                {"K", K},           {"a", a}};
  rep.add("chosen_K", K);
  rep.add("chosen_a", a);
  char note[128];
  snprintf(note, sizeof(note), "P(exit ball before n^2 t) <= %g", threshold);
  rep.add_check("p_exit", p_exit, p_exit <= threshold, note, se_exit,
                int64_t(pool));
  snprintf(note, sizeof(note), "P(hit site >= a n^2 in ball) <= %g",
           threshold);
  rep.add_check("p_hit_big", p_hit, p_hit <= threshold, note, se_hit,
                int64_t(pool));
  rep.wall_seconds = watch.seconds();
  write_json_file(detail::out_path(cfg, "truncation_summary.json"),
                  report_to_json(rep));
  return rep;
}

// ---------------------------------------------------------------------------
// Driver: qfclt

ExperimentReport run_qfclt(const RunConfig& cfg) {
  detail::StopWatch watch;
  const nlohmann::json block = cfg.block("qfclt");
  const int64_t n = require_int(block, "n", "qfclt");
  const double t = param_num(block, "t", 1.0);
  const int64_t walkers = param_int(block, "walkers", 2000);
  const bool control = param_flag(block, "control", false);
  const int d = cfg.law.d;

  ExperimentReport rep;
  rep.experiment = "qfclt";
  rep.seed = cfg.seed;
  rep.config_hash = cfg.config_hash;

  if (control) {
    // Homogeneous mu == 1: CSRW is the simple walk at rate 1, classical
    // scaling X_{n^2 t}/n with per-coordinate variance t/d.
    const double control_ks_max = param_num(block, "control_ks_max", 0.02);
    // only the dimension matters here; the walk runs on mu == 1
    const TailLaw law = cfg.law.uniform > 0.0 ? make_tail_law(cfg.law.d)
                                              : law_from_config(cfg.law);
    QfcltResult qr = qfclt_marginal_test(
        law, derive_env_seed(cfg.seed, 0), n, t, walkers, 1.0 / d, false,
        derive_env_seed(cfg.seed, 1), 1.0);
    rep.params = {{"n", n},       {"t", t}, {"walkers", walkers},
                  {"control", true},        {"control_ks_max", control_ks_max}};
    if (qr.skipped) {
      rep.add_check("skipped", 1.0, true, "t = 0 degenerate marginal");
    } else {
      char note[128];
      snprintf(note, sizeof(note), "max KS distance <= %g (mu == 1 control)",
               control_ks_max);
      rep.add_check("ks_max", qr.ks_max, qr.ks_max <= control_ks_max, note,
                    -1.0, walkers);
      for (int i = 0; i < d; ++i)
        rep.add("ks_coord_" + std::to_string(i + 1), qr.ks_per_coord[size_t(i)],
                -1.0, walkers);
    }
    rep.wall_seconds = watch.seconds();
    write_json_file(detail::out_path(cfg, "qfclt_summary.json"),
                    report_to_json(rep));
    return rep;
  }

  const std::vector<int64_t> ladder =
      param_int_list(block, "n_ladder", {8, 16, 32});
  const int64_t seeds = param_int(block, "seeds", 20);
  const double trend_fraction = param_num(block, "trend_fraction", 0.8);
  const int64_t sigma_n = param_int(block, "sigma_n", 32);
  const int64_t sigma_walkers = param_int(block, "sigma_walkers", 4000);
  const int64_t sigma_envs = param_int(block, "sigma_envs", 4);
  const double sigma_t = param_num(block, "sigma_t", 1.0);
  const TailLaw law = law_from_config(cfg.law);

  SigmaVEstimate sv = estimate_sigma_v(law, sigma_n, sigma_walkers, sigma_t,
                                       int(sigma_envs),
                                       derive_env_seed(cfg.seed, 777));
  const double sigma1_sq = 0.5 * sv.sigma_v_sq;

  // main point
  QfcltResult main_run = qfclt_marginal_test(
      law, derive_env_seed(cfg.seed, 0), n, t, walkers, sigma1_sq, true,
      derive_env_seed(cfg.seed, 1));
  // trend over seeds
  int64_t decreasing = 0;
  {
    CsvWriter csv(detail::out_path(cfg, "qfclt_trend.csv"), cfg.config_hash,
                  cfg.seed, {"seed_index", "n", "ks_max"});
    for (int64_t s = 0; s < seeds; ++s) {
      uint64_t env_seed = derive_env_seed(cfg.seed, 100 + uint64_t(s));
      double prev = std::numeric_limits<double>::infinity();
      bool strict = true;
      for (int64_t rung : ladder) {
        QfcltResult qr = qfclt_marginal_test(
            law, env_seed, rung, t, walkers, sigma1_sq, true,
            hash_fold(env_seed, uint64_t(rung)));
        csv.row({double(s), double(rung), qr.ks_max});
        if (qr.ks_max >= prev) strict = false;
        prev = qr.ks_max;
      }
      if (strict) ++decreasing;
    }
  }

  rep.params = {{"n", n},
                {"t", t},
                {"walkers", walkers},
                {"control", false},
                {"n_ladder", ladder},
                {"seeds", seeds},
                {"trend_fraction", trend_fraction},
                {"sigma_n", sigma_n},
                {"sigma_walkers", sigma_walkers},
                {"sigma_envs", sigma_envs},
                {"sigma_t", sigma_t}};
  rep.add("sigma_v_sq", sv.sigma_v_sq, sv.std_error,
          sigma_envs * sigma_walkers);
  rep.add("sigma1_sq", sigma1_sq);
  if (main_run.skipped) {
    rep.add_check("skipped", 1.0, true, "t = 0 degenerate marginal");
  } else {
    rep.add("ks_max", main_run.ks_max, -1.0, walkers);
    double worst_z = 0.0;
    for (double z : main_run.cov_offdiag_z)
      worst_z = std::max(worst_z, std::abs(z));
    rep.add_check("cov_offdiag_max_z", worst_z, worst_z <= 4.0,
                  "|cross-coordinate covariance z| <= 4", -1.0, walkers);
  }
  double frac = seeds > 0 ? double(decreasing) / double(seeds) : 1.0;
  char note[160];
  snprintf(note, sizeof(note),
           "fraction of seeds with KS strictly decreasing along the ladder "
           ">= %g",
           trend_fraction);
  rep.add_check("ks_decreasing_fraction", frac, frac >= trend_fraction, note,
                -1.0, seeds);
  rep.wall_seconds = watch.seconds();
  write_json_file(detail::out_path(cfg, "qfclt_summary.json"),
                  report_to_json(rep));
  return rep;
}

}  // namespace rcmlab
