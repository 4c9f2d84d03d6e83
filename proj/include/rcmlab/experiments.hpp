#pragma once
// Statistical experiment harnesses.  Each core routine is a pure function of
// its arguments (seeds included) returning a plain result struct; the run_*
// drivers wrap them with config plumbing, file emission, and report assembly.
//
// Seed discipline: environment-level randomness and walk-level randomness use
// separate salted namespaces.  Experiments that loop over environments derive
// env seed i from (master seed, i) and walker streams from (env index, rung,
// walker index), so every statistic is reproducible bit-for-bit from
// (master seed, config) at any thread count.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rcmlab/config.hpp"
#include "rcmlab/field.hpp"
#include "rcmlab/geometry.hpp"
#include "rcmlab/report.hpp"
#include "rcmlab/stats.hpp"
#include "rcmlab/tail_law.hpp"

namespace rcmlab {

// ---------------------------------------------------------------------------
// Classical i.i.d. analogue: xi_i exact Pareto(1) (survival 1/u on [1, inf)),
// a_i = i (ln i)^beta, xi'_i = xi_i 1{xi_i <= a_i}.
//   U^(n)_t = (n ln n)^{-1} sum_{i<=nt} xi_i          (raw)
//   V^(n)_t = (n ln n)^{-1} sum_{i<=nt} xi'_i         (truncated)
//   M^(n)_t = (n ln n)^{-1} sum_{i<=nt} (xi'_i - E xi'_i)
// sup-deviations are exact over the full step path on [0, max t_grid], not
// just over the reporting grid.
struct ClassicalResult {
  int64_t n = 0;
  double beta = 0.0;
  std::vector<double> t_grid;
  std::vector<double> u_raw;
  std::vector<double> v_truncated;
  std::vector<double> m_centered;
  double sup_dev_raw = 0.0;        // sup_t |U^(n)_t - t|
  double sup_dev_truncated = 0.0;  // sup_t |V^(n)_t - t|
  double sup_abs_m = 0.0;          // sup_t |M^(n)_t|
  int64_t mismatch_count = 0;      // #{i <= n : xi_i != xi'_i}
};

ClassicalResult classical_sums(int64_t n, double beta,
                               const std::vector<double>& t_grid,
                               uint64_t seed);

double classical_truncated_mean(double a);            // E xi 1{xi<=a}
double classical_mismatch_mean(int64_t n, double beta);      // sum min(1,1/a_i)
double classical_mismatch_variance(int64_t n, double beta);  // sum p_i(1-p_i)

// ---------------------------------------------------------------------------
// sigma_V^2: per-coordinate variance rate of the VSRW, (E Y_{n^2 t,k}^2 /
// (n^2 t)) averaged over coordinates; error bar from environment-level
// batching (walkers per environment are exchangeable, environments are not).
struct SigmaVEstimate {
  double sigma_v_sq = 0.0;
  double std_error = 0.0;
  std::vector<double> cross_cov;     // coordinate pairs (i<j), rescaled units
  std::vector<double> cross_cov_se;
  int64_t n = 0;
  int64_t walkers_per_env = 0;
  int envs = 0;
};

// uniform_value > 0 replaces the law by the constant edge conductance.
SigmaVEstimate estimate_sigma_v(const TailLaw& law, int64_t n,
                                int64_t walkers_per_env, double t, int envs,
                                uint64_t master_seed,
                                double uniform_value = 0.0);

// ---------------------------------------------------------------------------
// Clock convergence trend: per environment, mean over walkers of
// S^(n)_t = S_{n^2 t} / (n^2 ln n) on a ladder of n (same environment seed
// across the ladder), against the limit 2t.
struct ClockTrendEnv {
  uint64_t env_seed = 0;
  std::vector<double> mean_clock;  // per rung
  std::vector<double> se_clock;
  std::vector<double> abs_dev;     // |mean_clock - 2t|
  bool strictly_decreasing = false;
};

struct ClockTrendResult {
  std::vector<int64_t> ladder;
  double t = 1.0;
  std::vector<ClockTrendEnv> envs;
  int decreasing_count = 0;
  std::vector<double> pooled_abs_dev;  // |pooled mean - 2t| per rung
};

ClockTrendResult clock_trend(const TailLaw& law,
                             const std::vector<int64_t>& ladder, int envs,
                             int64_t walkers, double t, uint64_t master_seed);

// ---------------------------------------------------------------------------
// Deterministic expectation of the truncated, ball-restricted clock via the
// time-integrated kernel:
//   E S~^(n)_t = (n^2 ln n)^{-1} sum_x w(x) int_0^{n^2 t} p_s(0,x) ds,
//   w(x) = mu~_x 1{|x|_2 <= K n},
// evaluated on the *truncated* free-boundary box operator (edge values
// mu 1{mu <= a n^2} on a box of the given half side).  The companion MC
// routine runs walkers on the same operator, so the identity is exact up to
// MC noise and kernel tolerance.
std::vector<double> clock_expectation_kernel(const ConductanceField& field,
                                             int64_t n,
                                             const std::vector<double>& times,
                                             double a, double K,
                                             int64_t box_half, double tol);

struct ClockMcStats {
  double mean = 0.0;
  double std_error = 0.0;
  int64_t walkers = 0;
  int64_t total_jumps = 0;
};

ClockMcStats clock_mc_truncated(const ConductanceField& field, int64_t n,
                                double t, double a, double K, int64_t box_half,
                                int64_t walkers, uint64_t walker_seed);

struct ClockIdentityResult {
  ClockMcStats mc;
  double kernel_value = 0.0;
  double z = 0.0;  // (mc.mean - kernel_value) / mc.std_error
  int64_t box_half = 0;
};

ClockIdentityResult clock_expectation_identity(const ConductanceField& field,
                                               int64_t n, double t, double a,
                                               double K, int64_t box_half,
                                               int64_t walkers, double tol,
                                               uint64_t walker_seed);

// ---------------------------------------------------------------------------
// A_1(K,t,delta) = int_delta^t P(|N(0, sigma_v^2 s I_d)| <= K) ds (Euclidean
// ball; exact chi-square mass per time slice, adaptive Simpson in s).
double a1_integral(int d, double K, double t, double delta, double sigma_v_sq);

// Second-moment bound for the truncated clock increment:
//   eps + 8(1+eps) int_delta^t ds int_0^{t-s} dr
//       int_{|x|<=K} dx k_s(x) P(|x + N(0, sigma_v^2 r I_d)| <= K),
// radial reduction with a noncentral chi-square series for the inner mass.
double clock_second_moment_bound(int d, double K, double t, double delta,
                                 double sigma_v_sq, double eps);

// MC moments of the increment S~^(n)_t - S~^(n)_delta along the full
// (untruncated) walk with truncated, ball-restricted weights.
struct ClockMomentsResult {
  double first_moment = 0.0;
  double first_se = 0.0;
  double second_moment = 0.0;
  double second_se = 0.0;
  int64_t walkers = 0;
};

ClockMomentsResult clock_increment_moments(const ConductanceField& field,
                                           int64_t n, double t, double delta,
                                           double a, double K, int64_t walkers,
                                           uint64_t walker_seed);

// ---------------------------------------------------------------------------
// Truncation-event probabilities (Euclidean balls):
//   P_exit    = P(Y visits a site with |x|_2 >= K n before n^2 t),
//   P_hit_big = P(Y visits a site with mu_x >= a n^2 and |x|_2 <= K n).
// The sweep variant evaluates a whole (K, a) grid from one walker pass.
struct TruncationProbs {
  double p_exit = 0.0;
  double se_exit = 0.0;
  double p_hit_big = 0.0;
  double se_hit = 0.0;
  int64_t walkers = 0;
};

TruncationProbs truncation_probs(const ConductanceField& field, int64_t n,
                                 double K, double a, double t, int64_t walkers,
                                 uint64_t walker_seed);

struct TruncationSweepResult {
  std::vector<double> k_values;
  std::vector<double> a_values;
  std::vector<int64_t> exit_counts;              // per K
  std::vector<std::vector<int64_t>> hit_counts;  // [K index][a index]
  int64_t walkers = 0;
};

TruncationSweepResult truncation_sweep(const ConductanceField& field, int64_t n,
                                       const std::vector<double>& k_values,
                                       const std::vector<double>& a_values,
                                       double t, int64_t walkers,
                                       uint64_t walker_seed);

// ---------------------------------------------------------------------------
// Ergodic averages over the Euclidean ball |x|_2 <= K n:
//   I_n(f) = (n^d ln n)^{-1} sum_x mu~_x f(x/n)        -> 2 int_B f
//   J_n    = I_n(g1) I_n(g2) for separable g(x,y) = g1(x) g2(y)
//            (the double sum factorizes exactly)        -> 4 int g1 int g2
// E I_n is exact: E mu~_x times the lattice Riemann sum of f.
using SiteFunction = std::function<double(const double*)>;

struct ErgodicResult {
  int64_t n = 0;
  double K = 0.0;
  double a = 0.0;
  int64_t sites = 0;
  double i_n = 0.0;
  double e_i_n = 0.0;      // exact mean
  double rel_dev = 0.0;    // i_n / e_i_n - 1
  double riemann_f = 0.0;  // n^{-d} sum f(x/n)
  double target_f = 0.0;   // 2 * riemann_f (limit target at lattice accuracy)
  double i_g1 = 0.0;
  double i_g2 = 0.0;
  double j_n = 0.0;
  double target_g = 0.0;  // 4 * riemann_g1 * riemann_g2
};

ErgodicResult ergodic_average(const TailLaw& law, uint64_t env_seed, int64_t n,
                              double K, double a, const SiteFunction& f,
                              const SiteFunction& g1, const SiteFunction& g2);

// ---------------------------------------------------------------------------
// Homogenization tiles: cubes Q = [0, m-1]^d + m Z^d with m = ceil(n^theta1),
// edge sets E(Q) = {(x, axis+), x in Q}; per tile the gamma-weighted big-edge
// sum sum_{e in E(Q), mu_e >= a n^2} gamma(e) with gamma(e) the effective
// conductance from e's endpoints to the complement of B(e, b_n).  Tiles are
// those meeting the sup-ball B(0, K n + 1).
struct TileStat {
  Point corner;
  int64_t big_edges = 0;
  double gamma_sum = 0.0;
};

struct HomogenizationResult {
  int64_t n = 0;
  int64_t m = 0;     // tile side
  int64_t b_n = 0;   // gamma ball radius (requires m >= 3 b_n)
  double a = 0.0;
  std::vector<TileStat> tiles;
  int64_t total_big_edges = 0;
  double expected_big_per_tile = 0.0;  // d m^d P(mu >= a n^2), closed form
  double max_tile_sum = 0.0;
  double mean_tile_sum = 0.0;
  double max_to_mean = 0.0;     // 0 when mean is 0
  double mean_gamma_edge = 0.0;  // empirical E gamma over a spaced subsample
  double bound_reference = 0.0;  // m^d (a n^2)^{-1} mean_gamma_edge
  double lambda_fit = 0.0;       // max_tile_sum / bound_reference
};

HomogenizationResult homogenization_stat(const ConductanceField& field,
                                         int64_t n, double a, double K,
                                         double theta1, int64_t b_n,
                                         double ceff_tol,
                                         int64_t gamma_subsample);

// ---------------------------------------------------------------------------
// Cluster of a fixed edge in the bond percolation {mu_e > a_p}: both
// endpoints always included (union of their open clusters).  Lazy BFS with a
// size cap; capped probes report capped=true and a size/diameter >= cap.
struct EdgeClusterProbe {
  int64_t size = 0;          // vertex count
  int64_t sup_diameter = 0;  // sup-norm diameter of the vertex set
  bool capped = false;
};

EdgeClusterProbe probe_edge_cluster(const EnvView& env, const Edge& e,
                                    double a_p, int64_t size_cap);

// Survival fit of |C(e)| over independent environments: ln P(|C(e)| > m)
// against m on [m_lo, m_hi] (survival counts from one pass; the fit drops
// empty tail points and reports how many grid points were usable).
struct ClusterTailResult {
  double a_p = 0.0;
  double p_open = 0.0;
  int64_t samples = 0;
  std::vector<int64_t> m_grid;
  std::vector<double> survival;      // P(|C(e)| > m)
  std::vector<double> log_survival;  // ln of the above (usable points only)
  std::vector<double> m_used;
  LinearFit fit;                     // over (m_used, log_survival)
  double mean_size = 0.0;
};

ClusterTailResult cluster_tail_fit(const TailLaw& law, uint64_t master_seed,
                                   double a_p, int64_t samples, int64_t m_lo,
                                   int64_t m_hi);

// ---------------------------------------------------------------------------
// Exponential moments of gamma'(e) = gamma(e) 1{diam C(e) < b_n / 2} over
// independent environments; also checks the cut-set bound
// gamma(e) <= d a_p |C(e)| on the truncation event.
struct GammaMomentResult {
  double a_p = 0.0;
  int64_t b_n = 0;
  std::vector<double> thetas;
  std::vector<double> exp_moment;  // empirical E exp(theta gamma')
  std::vector<double> exp_moment_se;
  int64_t samples = 0;
  double mean_gamma_prime = 0.0;
  double max_gamma_prime = 0.0;
  int64_t truncated_count = 0;     // samples with diam C(e) >= b_n/2
  int64_t cut_bound_violations = 0;
};

GammaMomentResult gamma_moment_check(const TailLaw& law, uint64_t master_seed,
                                     double a_p, int64_t b_n,
                                     const std::vector<double>& thetas,
                                     int64_t samples, double ceff_tol);

// ---------------------------------------------------------------------------
// Uniform-LLT ratio statistic: for grid cells (t, x, y),
//   ratio = ball-avg of n^d p-hat_{n^2 t}(n x, n y) / ball-avg of k_t(y - x),
// with lattice Euclidean balls of the given radius around n y, identical
// sites in numerator and denominator.  Cells whose expected hit count is
// below min_expected_hits are excluded and counted.
struct LltCell {
  double t = 0.0;
  std::vector<double> x;  // start, macroscopic units
  std::vector<double> y;  // target, macroscopic units
  double ratio = 0.0;
  double ratio_se = 0.0;  // MC noise propagated through the ratio
  double density_mc = 0.0;
  double density_gauss = 0.0;
  int64_t hits = 0;
  bool excluded = false;
};

struct LltResult {
  int64_t n = 0;
  double sigma_v_sq = 0.0;
  std::vector<LltCell> cells;
  double sup_ratio = 0.0;  // over included cells
  double inf_ratio = 0.0;
  int64_t included = 0;
  int64_t excluded = 0;
  int64_t total_jumps = 0;
};

struct LltConfig {
  int64_t n = 16;
  double delta = 0.5;
  double t_max = 1.0;
  std::vector<double> times;           // defaults to {delta, (delta+T)/2, T}
  std::vector<std::vector<double>> starts;   // x grid, |x| <= K
  std::vector<double> y_axis;          // y grid per coordinate, |y| <= K
  int64_t ball_radius = 2;             // lattice sites
  int64_t walkers_per_start = 0;       // required
  int64_t box_margin = 0;              // box half = ceil(K n + slack) + margin
  double min_expected_hits = 50.0;
  bool deterministic = false;          // uniformization kernel instead of MC
  double kernel_tol = 1e-10;
};

LltResult llt_ratio(const EnvView& env, const LltConfig& cfg, double sigma_v_sq,
                    uint64_t walker_seed);

// ---------------------------------------------------------------------------
// Heat-kernel / Green bound shapes (fitted constants, scan ranges recorded).
struct HkBoundStats {
  double sup_ondiag = 0.0;       // sup over scan of t^{d/2} p_t(x,x)
  double inf_ondiag = 0.0;       // inf over the late-time scan
  double offdiag_c5 = 0.0;       // fitted decay rate in t^{d/2} p <= c4 e^{-c5 |x|^2/t}
  double offdiag_c4 = 0.0;
  double sup_green_decay = 0.0;  // sup over shell of g(0,x) |x|^{d-2}
  std::vector<double> t_scan;
  double shell_lo = 0.0, shell_hi = 0.0;
};

HkBoundStats hk_bound_stats(const EnvView& env, const LatticeRegion& box,
                            const std::vector<double>& t_scan, double tol);
double green_decay_sup(const EnvView& env, const LatticeRegion& box,
                       double shell_lo, double shell_hi, double tol);

// ---------------------------------------------------------------------------
// CSRW marginal test: X^(n)_t = X_{n^2 (ln n) t} / n (heavy-tail mode) or
// X_{n^2 t} / n (uniform control), per-coordinate KS distance against
// N(0, sigma1_sq t), plus pairwise covariance isotropy z-scores.
struct QfcltResult {
  int64_t n = 0;
  double t = 0.0;
  double sigma1_sq = 0.0;
  std::vector<double> ks_per_coord;
  double ks_max = 0.0;
  std::vector<double> cov_offdiag_z;  // pairwise, units of std errs
  int64_t walkers = 0;
  bool skipped = false;  // t == 0 degenerate case
};

QfcltResult qfclt_marginal_test(const TailLaw& law, uint64_t env_seed,
                                int64_t n, double t, int64_t walkers,
                                double sigma1_sq, bool log_time_scale,
                                uint64_t walker_seed,
                                double uniform_value = 0.0);

// ---------------------------------------------------------------------------
// Experiment drivers (one per CLI subcommand).  Each runs the experiment
// described by its config block, writes CSV/JSON artifacts into cfg.out_dir,
// and returns the report.
ExperimentReport run_env_sample(const RunConfig& cfg);
ExperimentReport run_walk(const RunConfig& cfg);
ExperimentReport run_clock(const RunConfig& cfg);
ExperimentReport run_heat_kernel(const RunConfig& cfg);
ExperimentReport run_green(const RunConfig& cfg);
ExperimentReport run_ceff(const RunConfig& cfg);
ExperimentReport run_llt(const RunConfig& cfg);
ExperimentReport run_classical(const RunConfig& cfg);
ExperimentReport run_ergodic(const RunConfig& cfg);
ExperimentReport run_truncation(const RunConfig& cfg);
ExperimentReport run_homogenization(const RunConfig& cfg);
ExperimentReport run_clusters(const RunConfig& cfg);
ExperimentReport run_qfclt(const RunConfig& cfg);
ExperimentReport run_report(const RunConfig& cfg);

// Dispatch by subcommand name (hyphenated); throws on unknown names.
ExperimentReport run_experiment(const std::string& name, const RunConfig& cfg);

// Environment seed for index i under a master seed (salted namespace).
uint64_t derive_env_seed(uint64_t master_seed, uint64_t index);

}  // namespace rcmlab
