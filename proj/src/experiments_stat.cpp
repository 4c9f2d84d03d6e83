// Experiments with no lattice component: the classical i.i.d. truncated-sum
// analogue, the Gaussian ball-occupation integral A_1, the second-moment bound
// for the truncated clock increment, and the report aggregation driver.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <utility>

#include "rcmlab/experiments.hpp"
#include "rcmlab/io.hpp"
#include "rcmlab/parallel.hpp"
#include "rcmlab/special.hpp"

#include "experiments_internal.hpp"

namespace rcmlab {

uint64_t derive_env_seed(uint64_t master_seed, uint64_t index) {
  return derive_stream(kSaltEnvSeed, master_seed, index).next_u64();
}

// ---------------------------------------------------------------------------
// Classical i.i.d. sums

namespace {

// a_i = i (ln i)^beta; a_1 = 0.
double trunc_level(int64_t i, double beta) {
  if (i <= 1) return 0.0;
  return double(i) * std::pow(std::log(double(i)), beta);
}

// P(xi > a) under the exact Pareto(1) law on [1, inf).
double mismatch_prob(double a) { return a > 1.0 ? 1.0 / a : 1.0; }

}  // namespace

double classical_truncated_mean(double a) {
  return a >= 1.0 ? std::log(a) : 0.0;
}

double classical_mismatch_mean(int64_t n, double beta) {
  double s = 0.0;
  for (int64_t i = 1; i <= n; ++i) s += mismatch_prob(trunc_level(i, beta));
  return s;
}

double classical_mismatch_variance(int64_t n, double beta) {
  double s = 0.0;
  for (int64_t i = 1; i <= n; ++i) {
    double p = mismatch_prob(trunc_level(i, beta));
    s += p * (1.0 - p);
  }
  return s;
}

ClassicalResult classical_sums(int64_t n, double beta,
                               const std::vector<double>& t_grid,
                               uint64_t seed) {
  if (n < 2) throw std::invalid_argument("classical_sums: n must be >= 2");
  if (!(beta > 1.0 && beta < 2.0))
    throw std::invalid_argument("classical_sums: beta must lie in (1,2)");
  ClassicalResult res;
  res.n = n;
  res.beta = beta;
  res.t_grid = t_grid;
  res.u_raw.assign(t_grid.size(), 0.0);
  res.v_truncated.assign(t_grid.size(), 0.0);
  res.m_centered.assign(t_grid.size(), 0.0);

  double t_max = t_grid.empty() ? 1.0 : 0.0;
  for (double t : t_grid) {
    if (t < 0.0)
      throw std::invalid_argument("classical_sums: negative grid time");
    t_max = std::max(t_max, t);
  }
  const int64_t steps = int64_t(std::floor(double(n) * t_max + 1e-9));
  const double norm = 1.0 / (double(n) * std::log(double(n)));

  // Grid recording points [n t], visited in index order.
  std::vector<std::pair<int64_t, size_t>> targets;
  targets.reserve(t_grid.size());
  for (size_t g = 0; g < t_grid.size(); ++g)
    targets.emplace_back(int64_t(std::floor(double(n) * t_grid[g] + 1e-9)), g);
  std::sort(targets.begin(), targets.end());
  size_t next_target = 0;
  while (next_target < targets.size() && targets[next_target].first <= 0)
    ++next_target;  // partial sums over an empty range stay 0

  double raw = 0.0, trunc = 0.0, cent = 0.0;
  // Path value after i terms holds on [i/n, (i+1)/n); deviations from the
  // linear target peak at segment endpoints, so the sup over the whole path
  // is exact.
  auto track = [&](int64_t i) {
    double lo = double(i) / double(n);
    if (lo > t_max) return;
    double hi = std::min(double(i + 1) / double(n), t_max);
    double u = raw * norm, v = trunc * norm, m = cent * norm;
    res.sup_dev_raw = std::max(
        res.sup_dev_raw, std::max(std::abs(u - lo), std::abs(u - hi)));
    res.sup_dev_truncated = std::max(
        res.sup_dev_truncated, std::max(std::abs(v - lo), std::abs(v - hi)));
    res.sup_abs_m = std::max(res.sup_abs_m, std::abs(m));
  };
  track(0);
  for (int64_t i = 1; i <= steps; ++i) {
    CounterRng rng = derive_stream(kSaltScalar, seed, uint64_t(i));
    double xi = 1.0 / rng.next_unit_open();  // survival exactly 1/t on [1,inf)
    double a = trunc_level(i, beta);
    double xp = xi <= a ? xi : 0.0;
    raw += xi;
    trunc += xp;
    cent += xp - classical_truncated_mean(a);
    if (i <= n && xi > a) ++res.mismatch_count;
    while (next_target < targets.size() && targets[next_target].first == i) {
      size_t g = targets[next_target].second;
      res.u_raw[g] = raw * norm;
      res.v_truncated[g] = trunc * norm;
      res.m_centered[g] = cent * norm;
      ++next_target;
    }
    track(i);
  }
  return res;
}

// ---------------------------------------------------------------------------
// A_1 and the second-moment bound

double a1_integral(int d, double K, double t, double delta, double sigma_v_sq) {
  if (d < 1 || d > kMaxDim)
    throw std::invalid_argument("a1_integral: dimension out of range");
  if (!(K > 0.0) || !(sigma_v_sq > 0.0) || !(delta >= 0.0))
    throw std::invalid_argument(
        "a1_integral: need K > 0, sigma_v_sq > 0, delta >= 0");
  if (delta >= t) return 0.0;
  auto mass = [&](double s) {
    if (s <= 0.0) return 1.0;  // point mass at the origin, inside the ball
    return gaussian_euclidean_ball_mass(d, sigma_v_sq * s, K);
  };
  return adaptive_simpson(mass, delta, t, 1e-10);
}

namespace {

// P(chi'^2_d(lambda) <= y), noncentral chi-square CDF.  Poisson-weighted
// window around j ~ lambda/2 with the contiguous recurrences
//   P(a+1, x) = P(a, x) - x^a e^{-x} / Gamma(a+1),
//   pois_{j+1} = pois_j * (lambda/2) / (j+1),
// so only one incomplete-gamma evaluation is needed per call.  Far in the
// small-r regime (huge lambda) the moment-matched normal tail is enough: that
// region's contribution to the r-integral is O(1/lambda).
double noncentral_chi2_cdf(int d, double lambda, double y) {
  if (y <= 0.0) return 0.0;
  if (lambda <= 1e-12) return reg_lower_gamma(0.5 * d, 0.5 * y);
  if (lambda > 4.0e4) {
    double mean = d + lambda;
    double var = 2.0 * (d + 2.0 * lambda);
    return normal_cdf((y - mean) / std::sqrt(var));
  }
  const double lam2 = 0.5 * lambda, x = 0.5 * y;
  const double sd = std::sqrt(lam2 + 1.0);
  const int64_t j0 =
      std::max<int64_t>(0, int64_t(std::floor(lam2 - 12.0 * sd - 20.0)));
  const int64_t j1 = int64_t(std::ceil(lam2 + 12.0 * sd + 30.0));
  double a0 = 0.5 * d + double(j0);
  double pois = std::exp(-lam2 + double(j0) * std::log(lam2) -
                         std::lgamma(double(j0) + 1.0));
  double c = reg_lower_gamma(a0, x);
  double term = std::exp(a0 * std::log(x) - x - std::lgamma(a0 + 1.0));
  double acc = 0.0;
  for (int64_t j = j0; j <= j1; ++j) {
    acc += pois * c;
    if (double(j) > lam2 && (c <= 0.0 || pois * c < 1e-17 * (acc + 1e-300)))
      break;
    pois *= lam2 / double(j + 1);
    c -= term;
    if (c < 0.0) c = 0.0;
    term *= x / (0.5 * d + double(j) + 1.0);
  }
  return std::min(1.0, std::max(0.0, acc));
}

}  // namespace

double clock_second_moment_bound(int d, double K, double t, double delta,
                                 double sigma_v_sq, double eps) {
  if (d < 1 || d > kMaxDim)
    throw std::invalid_argument("clock_second_moment_bound: dimension");
  if (!(K > 0.0) || !(sigma_v_sq > 0.0) || !(eps >= 0.0) || !(delta >= 0.0))
    throw std::invalid_argument(
        "clock_second_moment_bound: need K > 0, sigma_v_sq > 0, eps >= 0");
  if (delta >= t) return eps;
  const double s2 = sigma_v_sq;

  // P(|x + N(0, s2 r I_d)| <= K) for |x| = rho.
  auto ball_mass_after = [&](double rho, double r) {
    if (r <= 0.0) return rho < K ? 1.0 : (rho > K ? 0.0 : 0.5);
    double tau = s2 * r;
    return noncentral_chi2_cdf(d, rho * rho / tau, K * K / tau);
  };
  // int_0^upper P(...) dr, substituted r = w^2 so the integrand is smooth at
  // the short-time end.
  auto inner_r = [&](double rho, double upper) {
    if (upper <= 0.0) return 0.0;
    double W = std::sqrt(upper);
    auto fw = [&](double w) {
      return 2.0 * w * ball_mass_after(rho, w * w);
    };
    return adaptive_simpson(fw, 0.0, W, 1e-6, 1e-14, 24);
  };
  // Radial density of |N(0, s2 s I_d)|.
  auto mid = [&](double s) {
    double tau = s2 * s;
    double coef =
        2.0 / (std::pow(2.0 * tau, 0.5 * d) * std::tgamma(0.5 * d));
    auto frho = [&](double rho) {
      double dens =
          coef * std::pow(rho, d - 1) * std::exp(-rho * rho / (2.0 * tau));
      if (dens <= 0.0) return 0.0;
      return dens * inner_r(rho, t - s);
    };
    // Cap the range at the effective support of the radial density; beyond
    // sqrt(d) + 12 standard radii the mass is ~1e-32, and integrating a
    // spike buried deep inside [0, K] would defeat the adaptive refinement.
    double upper =
        std::min(K, std::sqrt(tau) * (std::sqrt(double(d)) + 12.0));
    return adaptive_simpson(frho, 0.0, upper, 1e-6, 1e-14, 24);
  };
  double integral = adaptive_simpson(mid, delta, t, 1e-5, 1e-14, 22);
  return eps + 8.0 * (1.0 + eps) * integral;
}

// ---------------------------------------------------------------------------
// Driver: classical

ExperimentReport run_classical(const RunConfig& cfg) {
  detail::StopWatch watch;
  const nlohmann::json block = cfg.block("classical");
  const std::vector<int64_t> ladder = param_int_list(
      block, "n_ladder", {1000, 10000, 100000, 1000000});
  const int64_t seeds = param_int(block, "seeds", 50);
  const double beta = param_num(block, "beta", 1.5);
  const std::vector<double> t_grid =
      param_num_list(block, "t_grid", {0.25, 0.5, 0.75, 1.0});
  const int64_t mismatch_n =
      param_int(block, "mismatch_n", ladder.empty() ? 1000000
                                                    : ladder.back());
  const double trend_fraction = param_num(block, "trend_fraction", 0.8);
  if (ladder.empty())
    throw std::runtime_error("config: classical.n_ladder must be non-empty");
  if (seeds < 1)
    throw std::runtime_error("config: classical.seeds must be >= 1");

  const size_t rungs = ladder.size();
  std::vector<ClassicalResult> results(size_t(seeds) * rungs);
  parallel_for(0, seeds * int64_t(rungs), [&](int64_t idx) {
    int64_t s = idx / int64_t(rungs);
    size_t r = size_t(idx % int64_t(rungs));
    uint64_t rep_seed = derive_env_seed(cfg.seed, uint64_t(s));
    results[size_t(idx)] =
        classical_sums(ladder[r], beta, t_grid, rep_seed);
  });

  // Mismatch totals at the checking rung (computed separately if it is not on
  // the ladder).
  std::vector<int64_t> mismatches(size_t(seeds), 0);
  int mm_rung = -1;
  for (size_t r = 0; r < rungs; ++r)
    if (ladder[r] == mismatch_n) mm_rung = int(r);
  if (mm_rung >= 0) {
    for (int64_t s = 0; s < seeds; ++s)
      mismatches[size_t(s)] =
          results[size_t(s) * rungs + size_t(mm_rung)].mismatch_count;
  } else {
    parallel_for(0, seeds, [&](int64_t s) {
      uint64_t rep_seed = derive_env_seed(cfg.seed, uint64_t(s));
      mismatches[size_t(s)] =
          classical_sums(mismatch_n, beta, {1.0}, rep_seed).mismatch_count;
    });
  }

  // Trend counts and CSV emission.
  int64_t dec_raw = 0, dec_trunc = 0;
  {
    CsvWriter csv(detail::out_path(cfg, "classical_ladder.csv"),
                  cfg.config_hash, cfg.seed,
                  {"seed_index", "n", "sup_dev_raw", "sup_dev_truncated",
                   "sup_abs_m", "mismatch_count"});
    for (int64_t s = 0; s < seeds; ++s) {
      bool mono_raw = true, mono_trunc = true;
      for (size_t r = 0; r < rungs; ++r) {
        const ClassicalResult& cr = results[size_t(s) * rungs + r];
        if (r > 0) {
          const ClassicalResult& prev = results[size_t(s) * rungs + r - 1];
          mono_raw = mono_raw && cr.sup_dev_raw < prev.sup_dev_raw;
          mono_trunc =
              mono_trunc && cr.sup_dev_truncated < prev.sup_dev_truncated;
        }
        char line[256];
        snprintf(line, sizeof(line), "%lld,%lld,%s,%s,%s,%lld",
                 (long long)s, (long long)cr.n,
                 format_g17(cr.sup_dev_raw).c_str(),
                 format_g17(cr.sup_dev_truncated).c_str(),
                 format_g17(cr.sup_abs_m).c_str(),
                 (long long)cr.mismatch_count);
        csv.raw_row(line);
      }
      if (mono_raw) ++dec_raw;
      if (mono_trunc) ++dec_trunc;
    }
  }
  {
    CsvWriter csv(detail::out_path(cfg, "classical_grid.csv"),
                  cfg.config_hash, cfg.seed,
                  {"n", "t", "u_raw", "v_truncated", "m_centered"});
    for (size_t r = 0; r < rungs; ++r) {
      const ClassicalResult& cr = results[r];  // seed index 0
      for (size_t g = 0; g < cr.t_grid.size(); ++g)
        csv.row({double(cr.n), cr.t_grid[g], cr.u_raw[g], cr.v_truncated[g],
                 cr.m_centered[g]});
    }
  }

  int64_t total_mismatch = 0;
  for (int64_t m : mismatches) total_mismatch += m;
  const double mm_mean = classical_mismatch_mean(mismatch_n, beta);
  const double mm_var = classical_mismatch_variance(mismatch_n, beta);
  const double pooled_sd = std::sqrt(double(seeds) * mm_var);
  const double mm_z =
      (double(total_mismatch) - double(seeds) * mm_mean) / pooled_sd;

  ExperimentReport rep;
  rep.experiment = "classical";
  rep.seed = cfg.seed;
  rep.config_hash = cfg.config_hash;
  rep.params = {{"n_ladder", ladder},   {"seeds", seeds},
                {"beta", beta},         {"t_grid", t_grid},
                {"mismatch_n", mismatch_n},
                {"trend_fraction", trend_fraction}};

  double frac_raw = double(dec_raw) / double(seeds);
  double frac_trunc = double(dec_trunc) / double(seeds);
  char note[160];
  snprintf(note, sizeof(note),
           "fraction of seeds with strictly decreasing sup|U-t| >= %g",
           trend_fraction);
  rep.add_check("raw_sup_dev_decreasing_fraction", frac_raw,
                frac_raw >= trend_fraction, note, -1.0, seeds);
  rep.add("truncated_sup_dev_decreasing_fraction", frac_trunc, -1.0, seeds);
  // Mean sup deviations per rung (diagnostic).
  for (size_t r = 0; r < rungs; ++r) {
    double mean_raw = 0.0, mean_trunc = 0.0, mean_m = 0.0;
    for (int64_t s = 0; s < seeds; ++s) {
      const ClassicalResult& cr = results[size_t(s) * rungs + r];
      mean_raw += cr.sup_dev_raw;
      mean_trunc += cr.sup_dev_truncated;
      mean_m += cr.sup_abs_m;
    }
    char key[64];
    snprintf(key, sizeof(key), "mean_sup_dev_raw_n%lld",
             (long long)ladder[r]);
    rep.add(key, mean_raw / double(seeds), -1.0, seeds);
    snprintf(key, sizeof(key), "mean_sup_dev_truncated_n%lld",
             (long long)ladder[r]);
    rep.add(key, mean_trunc / double(seeds), -1.0, seeds);
    snprintf(key, sizeof(key), "mean_sup_abs_m_n%lld", (long long)ladder[r]);
    rep.add(key, mean_m / double(seeds), -1.0, seeds);
  }
  rep.add("mismatch_total", double(total_mismatch), pooled_sd, seeds);
  rep.add("mismatch_expected", double(seeds) * mm_mean);
  rep.add_check("mismatch_z", mm_z, std::abs(mm_z) <= 4.0,
                "|pooled mismatch z-score| <= 4", 1.0, seeds);
  rep.wall_seconds = watch.seconds();
  write_json_file(detail::out_path(cfg, "classical_summary.json"),
                  report_to_json(rep));
  return rep;
}

// ---------------------------------------------------------------------------
// Driver: report aggregation

ExperimentReport run_report(const RunConfig& cfg) {
  detail::StopWatch watch;
  const nlohmann::json block = cfg.block("report");
  const std::vector<std::string> inputs =
      param_str_list(block, "inputs", {});
  if (inputs.empty())
    throw std::runtime_error(
        "config: report.inputs must list at least one summary JSON");
  std::vector<ExperimentReport> reps;
  reps.reserve(inputs.size());
  for (const std::string& path : inputs)
    reps.push_back(report_from_json(read_json_file(path)));
  nlohmann::json agg = aggregate_reports(reps);
  print_aggregate(agg, std::cout);

  ExperimentReport rep;
  rep.experiment = "report";
  rep.seed = cfg.seed;
  rep.config_hash = cfg.config_hash;
  rep.params = {{"inputs", inputs}};
  int64_t checks = 0, failures = 0;
  for (const auto& entry : agg.at("reports")) {
    checks += entry.at("checks").get<int64_t>();
    failures += entry.at("failures").get<int64_t>();
  }
  rep.add("reports", double(reps.size()));
  rep.add("checks", double(checks));
  rep.add_check("failures", double(failures), failures == 0,
                "no failing checks across aggregated reports");
  rep.wall_seconds = watch.seconds();
  write_json_file(detail::out_path(cfg, "aggregate_report.json"), agg);
  return rep;
}

}  // namespace rcmlab
