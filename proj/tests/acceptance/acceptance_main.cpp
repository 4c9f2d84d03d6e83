// Acceptance harness: thirteen pinned desk-scale checks covering the tail
// sampler, the deterministic solvers, the walk engines, and the statistical
// verification experiments.  Each criterion prints exactly one
// [PASS]/[FAIL] line with its measured values; the process exits 0 only if
// every criterion passes (1 on any failure, 2 on an unexpected error).
//
// All seeds, grids, and thresholds below are pinned from pilot runs so the
// binary is deterministic end to end.  Statistical gates use the tolerance
// written into the corresponding criterion (KS bands, z-scores, fractions),
// not re-tuned values.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "rcmlab/config.hpp"
#include "rcmlab/experiments.hpp"
#include "rcmlab/field.hpp"
#include "rcmlab/parallel.hpp"
#include "rcmlab/solver.hpp"
#include "rcmlab/stats.hpp"
#include "rcmlab/tail_law.hpp"

using namespace rcmlab;
namespace fs = std::filesystem;

namespace {

double now_s() {
  using C = std::chrono::steady_clock;
  return std::chrono::duration<double>(C::now().time_since_epoch()).count();
}

int g_failures = 0;

void emit(int idx, const char* name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", idx,
              name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

template <typename Fn>
void criterion(int idx, const char* name, Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& ex) {
    emit(idx, name, false, std::string("exception: ") + ex.what());
  }
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// ---------------------------------------------------------------------------

void c1_tail_sampler() {
  double t0 = now_s();
  TailLaw law = make_tail_law(3);
  const int64_t n = 1'000'000;
  std::vector<double> xs(static_cast<size_t>(n));
  CounterRng rng = derive_stream(kSaltScalar, 20240817, 0);
  for (auto& x : xs) x = law.sample(rng);
  double ks = ks_distance(std::move(xs),
                          [&](double u) { return law.cdf(u); },
                          [&](double u) { return law.cdf_left(u); });
  double band = 1.63 / std::sqrt(double(n));
  double dt = now_s() - t0;
  emit(1, "tail sampler matches the closed-form mixture CDF",
       ks <= band && dt < 5.0,
       fmt("KS=%.2e <= %.2e on 1e6 draws, %.2fs", ks, band, dt));
}

void c2_kernel_oracle() {
  double t0 = now_s();
  const double exact = 0.09517738508487991;  // (e^{-2} I_0(2))^2
  ConductanceField uni = ConductanceField::uniform(2, 1.0);
  EnvView env = full_view(uni);
  LatticeRegion box = make_box(2, Point{}, 12);
  KernelField kf = heat_kernel(env, box, Point{}, {1.0}, 1e-12);
  double det = kf.values[0][size_t(box.index_of(Point{}))];
  McKernelEstimate mc = mc_heat_kernel(env, box, Point{}, {1.0}, 1'000'000, 881);
  auto bv = mc.ball_average(0, {Point{}});
  double z = (bv.mean - exact) / bv.std_error;
  double dt = now_s() - t0;
  emit(2, "homogeneous return probability hits the Bessel value",
       std::abs(det - exact) <= 1e-8 && std::abs(z) <= 3.0 && dt < 60.0,
       fmt("|det-exact|=%.1e, MC z=%.2f on 1e6 walkers, %.2fs",
           std::abs(det - exact), z, dt));
}

void c3_green_watson() {
  double t0 = now_s();
  const double ref = 0.252731009858663;  // free-space g(0,0) on Z^3
  ConductanceField uni = ConductanceField::uniform(3, 1.0);
  EnvView env = full_view(uni);
  GreenField g20 =
      green(env, make_box(3, Point{}, 20, Boundary::dirichlet), Point{}, 1e-10);
  GreenField g40 =
      green(env, make_box(3, Point{}, 40, Boundary::dirichlet), Point{}, 1e-10);
  double rich = 2.0 * g40.value_at(Point{}) - g20.value_at(Point{});
  double rel = std::abs(rich - ref) / ref;
  double dt = now_s() - t0;
  emit(3, "extrapolated lattice Green value matches the Watson constant",
       rel <= 0.01 && dt < 120.0,
       fmt("41^3->81^3 Richardson rel err=%.2e, %.1fs", rel, dt));
}

void c4_duality() {
  double t0 = now_s();
  TailLaw law = make_tail_law(3);
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    ConductanceField f =
        ConductanceField::iid(law, derive_env_seed(4242, uint64_t(i)));
    EnvView env = full_view(f);
    LatticeRegion box = make_box(3, Point{}, 10, Boundary::dirichlet);
    GreenField g = green(env, box, Point{}, 1e-10);
    std::vector<Point> interior;
    for (int64_t s = 0; s < box.site_count(); ++s) {
      Point p = box.site_at(s);
      if (!(p == Point{})) interior.push_back(p);
    }
    CeffResult ce = effective_conductance(env, box, {Point{}}, interior, 1e-10);
    worst =
        std::max(worst, std::abs(ce.conductance * g.value_at(Point{}) - 1.0));
  }
  double dt = now_s() - t0;
  emit(4, "conductance/Green duality on random fields",
       worst <= 1e-6 && dt < 120.0,
       fmt("max |Ceff*g - 1|=%.1e over 10 fields, 21^3 box, %.1fs", worst, dt));
}

void c5_kernel_invariants() {
  const double tol = 1e-10;
  TailLaw law = make_tail_law(3);
  ConductanceField f = ConductanceField::iid(law, derive_env_seed(505, 0));
  EnvView env = full_view(f);
  LatticeRegion box = make_box(3, Point{}, 7);  // 15^3
  Point x = make_point({2, -1, 3});
  KernelField k0 = heat_kernel(env, box, Point{}, {0.5, 1.0}, tol);
  KernelField kx = heat_kernel(env, box, x, {0.5, 1.0}, tol);
  double mass = 0.0, sym = 0.0;
  for (size_t ti = 0; ti < 2; ++ti) {
    double m = 0.0;
    for (double v : k0.values[ti]) m += v;
    mass = std::max(mass, std::abs(m - 1.0));
    sym = std::max(sym, std::abs(k0.values[ti][size_t(box.index_of(x))] -
                                 kx.values[ti][size_t(box.index_of(Point{}))]));
  }
  double conv =
      block_dot(k0.values[0].data(), kx.values[0].data(), box.site_count());
  double semi = std::abs(conv - k0.values[1][size_t(box.index_of(x))]);
  emit(5, "kernel mass, symmetry and semigroup residuals",
       mass <= 2 * tol && sym <= 2 * tol && semi <= 4 * tol,
       fmt("mass=%.1e sym=%.1e semigroup=%.1e at tol=1e-10, 15^3 box", mass,
           sym, semi));
}

void c6_clock_identity() {
  double t0 = now_s();
  TailLaw law = make_tail_law(3);
  ConductanceField f = ConductanceField::iid(law, derive_env_seed(606, 0));
  ClockIdentityResult r =
      clock_expectation_identity(f, 8, 1.0, 1.0, 2.0, 24, 10'000, 1e-6, 2718);
  double dt = now_s() - t0;
  emit(6, "truncated-clock MC mean equals the kernel-sum expectation",
       std::abs(r.z) <= 3.0 && dt < 300.0,
       fmt("z=%.2f (MC %.4f+-%.4f vs kernel %.4f), n=8, 1e4 walkers, %.1fs",
           r.z, r.mc.mean, r.mc.std_error, r.kernel_value, dt));
}

void c7_clock_trend() {
  TailLaw law = make_tail_law(3);
  ClockTrendResult r = clock_trend(law, {8, 16, 32}, 10, 2000, 1.0, 3001);
  std::string devs;
  for (double v : r.pooled_abs_dev) devs += fmt(" %.2f", v);
  emit(7, "clock deviation from 2t shrinks along the n ladder",
       r.decreasing_count >= 8,
       fmt("strictly decreasing in %d/10 environments; pooled |dev|:%s "
           "(1/ln n rate, absolute values not asserted)",
           r.decreasing_count, devs.c_str()));
}

void c8_llt_ratios() {
  double t0 = now_s();
  auto cfg_base = [] {
    LltConfig cfg;
    cfg.n = 16;
    cfg.delta = 0.5;
    cfg.t_max = 1.0;
    cfg.times = {0.5, 0.75, 1.0};
    cfg.starts = {{0.0, 0.0}, {0.5, 0.0}};
    cfg.y_axis = {0.0, 0.5, 1.0};
    cfg.ball_radius = 2;
    cfg.box_margin = 2;
    return cfg;
  };
  // homogeneous control: exact kernel vs Gaussian, discreteness only
  ConductanceField uni = ConductanceField::uniform(2, 1.0);
  LltConfig ctrl = cfg_base();
  ctrl.deterministic = true;
  ctrl.kernel_tol = 1e-10;
  LltResult rc = llt_ratio(full_view(uni), ctrl, 2.0, 0);
  bool ctrl_ok = rc.excluded == 0 && rc.sup_ratio <= 1.2 &&
                 rc.inf_ratio >= 1.0 / 1.2;
  // heavy-tailed field: MC kernel against the fitted diffusive Gaussian
  TailLaw law = make_tail_law(2);
  SigmaVEstimate sv = estimate_sigma_v(law, 16, 2000, 1.0, 8, 4141);
  ConductanceField f = ConductanceField::iid(law, derive_env_seed(8, 0));
  LltConfig heavy = cfg_base();
  heavy.walkers_per_start = 5'000'000;  // two starts: 1e7 walkers
  LltResult rh = llt_ratio(full_view(f), heavy, sv.sigma_v_sq, 991);
  bool heavy_ok = rh.excluded == 0 && rh.sup_ratio <= 1.35 &&
                  rh.inf_ratio >= 1.0 / 1.35;
  double dt = now_s() - t0;
  emit(8, "uniform LLT ratio cells at desk scale",
       ctrl_ok && heavy_ok && dt < 900.0,
       fmt("heavy ratios [%.3f, %.3f] in [%.3f, 1.35] on %lld cells "
           "(sigma_v^2=%.3f), control [%.3f, %.3f] in [%.3f, 1.2], %.0fs",
           rh.inf_ratio, rh.sup_ratio, 1.0 / 1.35, (long long)rh.included,
           sv.sigma_v_sq, rc.inf_ratio, rc.sup_ratio, 1.0 / 1.2, dt));
}

void c9_classical() {
  double t0 = now_s();
  const std::vector<int64_t> ladder = {1000, 10'000, 100'000, 1'000'000};
  int strict = 0;
  double mm_total = 0.0, mm_mean = 0.0, mm_var = 0.0;
  for (int s = 0; s < 50; ++s) {
    double prev = 1e300;
    bool chain = true;
    for (int64_t n : ladder) {
      ClassicalResult r = classical_sums(n, 1.5, {0.25, 0.5, 0.75, 1.0},
                                         derive_env_seed(909, uint64_t(s)));
      if (!(r.sup_dev_raw < prev)) chain = false;
      prev = r.sup_dev_raw;
      if (n == ladder.back()) {
        mm_total += double(r.mismatch_count);
        mm_mean += classical_mismatch_mean(n, 1.5);
        mm_var += classical_mismatch_variance(n, 1.5);
      }
    }
    strict += chain ? 1 : 0;
  }
  double z = (mm_total - mm_mean) / std::sqrt(mm_var);
  double dt = now_s() - t0;
  emit(9, "classical partial sums: sup deviation trend and mismatch counts",
       strict >= 40 && std::abs(z) <= 4.0 && dt < 120.0,
       fmt("strict decrease in %d/50 seeds (need 40); mismatch z=%.2f; %.1fs "
           "- heavy-tail sup fluctuations at ln n scale decay too slowly for "
           "a strict four-rung chain at these n",
           strict, z, dt));
}

void c10_ergodic() {
  double t0 = now_s();
  TailLaw law = make_tail_law(3);
  auto one = [](const double*) { return 1.0; };
  int ok = 0;
  double maxdev = 0.0;
  for (int i = 0; i < 50; ++i) {
    ErgodicResult r = ergodic_average(law, derive_env_seed(777, uint64_t(i)),
                                      128, 1.0, 1.0, one, one, one);
    if (std::abs(r.rel_dev) <= 0.05) ++ok;
    maxdev = std::max(maxdev, std::abs(r.rel_dev));
  }
  double dt = now_s() - t0;
  emit(10, "ergodic ball averages concentrate at the closed-form mean",
       ok >= 45 && dt < 180.0,
       fmt("|I_n/E I_n - 1| <= 0.05 in %d/50 seeds (max %.3f), n=128, %.0fs",
           ok, maxdev, dt));
}

void c11_truncation() {
  double t0 = now_s();
  const double K = 6.0, a = 128.0;
  TailLaw law = make_tail_law(3);
  int64_t exits = 0, hits = 0, walkers = 0;
  for (int e = 0; e < 20; ++e) {
    ConductanceField f =
        ConductanceField::iid(law, derive_env_seed(1212, uint64_t(e)));
    TruncationProbs p = truncation_probs(f, 16, K, a, 1.0, 500,
                                         derive_env_seed(3434, uint64_t(e)));
    exits += int64_t(std::lround(p.p_exit * double(p.walkers)));
    hits += int64_t(std::lround(p.p_hit_big * double(p.walkers)));
    walkers += p.walkers;
  }
  double pe = double(exits) / double(walkers);
  double ph = double(hits) / double(walkers);
  double dt = now_s() - t0;
  emit(11, "pinned (K, a) keeps both truncation probabilities small",
       pe <= 0.05 && ph <= 0.05 && dt < 600.0,
       fmt("K=%.0f a=%.0f: p_exit=%.4f p_hit=%.4f over 20 envs x 500 walkers, "
           "%.1fs",
           K, a, pe, ph, dt));
}

void c12_clusters_gamma() {
  double t0 = now_s();
  TailLaw law = make_tail_law(2);
  ClusterTailResult ct = cluster_tail_fit(law, 8181, 1.2, 30'000, 4, 20);
  GammaMomentResult g6 = gamma_moment_check(law, 9090, 1.2, 6, {0.1}, 150, 1e-6);
  GammaMomentResult g10 =
      gamma_moment_check(law, 9090, 1.2, 10, {0.1}, 150, 1e-6);
  double ratio = g6.exp_moment[0] / g10.exp_moment[0];
  double dt = now_s() - t0;
  emit(12, "subcritical cluster tail is log-linear and gamma moments stable",
       ct.fit.r2 >= 0.98 && ratio >= 0.5 && ratio <= 2.0 && dt < 300.0,
       fmt("R^2=%.4f on sizes [4,20] (%zu points); exp-moment ratio "
           "b=6/b=10 = %.2f, %.1fs",
           ct.fit.r2, ct.m_used.size(), ratio, dt));
}

void c13_determinism() {
  const std::string dir_a = "acceptance_threads_a";
  const std::string dir_b = "acceptance_threads_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  auto run_into = [](const std::string& dir) {
    nlohmann::json env_doc = {
        {"law", {{"d", 2}}},
        {"seed", 11},
        {"out_dir", dir},
        {"env_sample",
         {{"half_side", 12}, {"n", 4}, {"write_csv", true}}}};
    run_env_sample(parse_config_json(env_doc));
    nlohmann::json cls_doc = {
        {"law", {{"d", 2}}},
        {"seed", 7},
        {"out_dir", dir},
        {"classical",
         {{"n_ladder", {1000, 10000}}, {"seeds", 10}}}};
    run_classical(parse_config_json(cls_doc));
  };
  set_threads(1);
  run_into(dir_a);
  set_threads(2);
  run_into(dir_b);
  set_threads(0);
  std::map<std::string, std::string> files_a;
  for (const auto& ent : fs::directory_iterator(dir_a)) {
    std::ifstream in(ent.path(), std::ios::binary);
    files_a[ent.path().filename().string()] =
        std::string(std::istreambuf_iterator<char>(in), {});
  }
  int compared = 0;
  bool equal = true;
  for (const auto& ent : fs::directory_iterator(dir_b)) {
    std::ifstream in(ent.path(), std::ios::binary);
    std::string bytes(std::istreambuf_iterator<char>(in), {});
    auto it = files_a.find(ent.path().filename().string());
    if (it == files_a.end() || it->second != bytes) equal = false;
    ++compared;
  }
  emit(13, "experiment outputs are byte-identical across thread counts",
       equal && compared == int(files_a.size()) && compared >= 4,
       fmt("%d files from two drivers compared between 1 and 2 threads",
           compared));
}

}  // namespace

int main() {
  try {
    std::printf("acceptance: thirteen pinned desk-scale criteria\n");
    std::fflush(stdout);
    criterion(1, "tail sampler matches the closed-form mixture CDF",
              c1_tail_sampler);
    criterion(2, "homogeneous return probability hits the Bessel value",
              c2_kernel_oracle);
    criterion(3, "extrapolated lattice Green value matches the Watson constant",
              c3_green_watson);
    criterion(4, "conductance/Green duality on random fields", c4_duality);
    criterion(5, "kernel mass, symmetry and semigroup residuals",
              c5_kernel_invariants);
    criterion(6, "truncated-clock MC mean equals the kernel-sum expectation",
              c6_clock_identity);
    criterion(7, "clock deviation from 2t shrinks along the n ladder",
              c7_clock_trend);
    criterion(8, "uniform LLT ratio cells at desk scale", c8_llt_ratios);
    criterion(9, "classical partial sums: sup deviation trend and mismatch "
                 "counts",
              c9_classical);
    criterion(10, "ergodic ball averages concentrate at the closed-form mean",
              c10_ergodic);
    criterion(11, "pinned (K, a) keeps both truncation probabilities small",
              c11_truncation);
    criterion(12, "subcritical cluster tail is log-linear and gamma moments "
                  "stable",
              c12_clusters_gamma);
    criterion(13, "experiment outputs are byte-identical across thread counts",
              c13_determinism);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "acceptance: unexpected error: %s\n", ex.what());
    return 2;
  }
  std::printf("acceptance: %d/13 criteria passed\n", 13 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
