// Environment-side statistics: ergodic space averages with exact means,
// homogenization tile sums, lazy percolation-cluster probes, cluster-size
// tails, and exponential moments of the localized conductance gamma'.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <set>
#include <stdexcept>

#include "rcmlab/clusters.hpp"
#include "rcmlab/experiments.hpp"
#include "rcmlab/io.hpp"
#include "rcmlab/parallel.hpp"
#include "rcmlab/solver.hpp"

#include "experiments_internal.hpp"

namespace rcmlab {

// ---------------------------------------------------------------------------
// Ergodic averages

ErgodicResult ergodic_average(const TailLaw& law, uint64_t env_seed, int64_t n,
                              double K, double a, const SiteFunction& f,
                              const SiteFunction& g1, const SiteFunction& g2) {
  if (n < 2) throw std::invalid_argument("ergodic_average: n must be >= 2");
  if (!(K > 0.0) || !(a > 0.0))
    throw std::invalid_argument("ergodic_average: K and a must be positive");
  const int d = law.d;
  const ConductanceField field = ConductanceField::iid(law, env_seed);
  const double cutoff = a * double(n) * double(n);
  const double radius_sq = K * K * double(n) * double(n) + 1e-9;
  const int32_t r_int = int32_t(std::floor(K * double(n) + 1e-9));

  // One scan over the box [-R-1, R]^d enumerates every edge with an endpoint
  // in the Euclidean ball exactly once as (base, axis, +), so each truncated
  // edge value is hashed once and credited to both endpoint site sums.
  LatticeRegion scan = make_box(d, Point{}, r_int + 1);
  const int64_t scan_sites = scan.site_count();
  const int64_t grain = 32768;
  const int64_t chunks = (scan_sites + grain - 1) / grain;
  // per-chunk partials: s_f, s_g1, s_g2, r_f, r_g1, r_g2, count
  std::vector<double> partial(size_t(chunks) * 7, 0.0);

  parallel_chunks(scan_sites, grain, [&](int64_t lo, int64_t hi,
                                         int64_t chunk) {
    double s_f = 0.0, s_g1 = 0.0, s_g2 = 0.0;
    double r_f = 0.0, r_g1 = 0.0, r_g2 = 0.0;
    double count = 0.0;
    double xr[kMaxDim] = {0, 0, 0, 0, 0};
    double qr[kMaxDim] = {0, 0, 0, 0, 0};
    for (int64_t idx = lo; idx < hi; ++idx) {
      Point p = scan.site_at(idx);
      bool p_in = double(l2sq_norm(p, d)) <= radius_sq;
      double fp = 0.0, g1p = 0.0, g2p = 0.0;
      if (p_in) {
        for (int i = 0; i < d; ++i) xr[i] = double(p.c[i]) / double(n);
        fp = f(xr);
        g1p = g1(xr);
        g2p = g2(xr);
        r_f += fp;
        r_g1 += g1p;
        r_g2 += g2p;
        count += 1.0;
      }
      for (int axis = 0; axis < d; ++axis) {
        Point q = offset(p, axis, +1);
        bool q_in = double(l2sq_norm(q, d)) <= radius_sq;
        if (!p_in && !q_in) continue;
        double v = field.edge_value(Edge{p, int8_t(axis)});
        if (v > cutoff) continue;
        if (p_in) {
          s_f += v * fp;
          s_g1 += v * g1p;
          s_g2 += v * g2p;
        }
        if (q_in) {
          for (int i = 0; i < d; ++i) qr[i] = double(q.c[i]) / double(n);
          s_f += v * f(qr);
          s_g1 += v * g1(qr);
          s_g2 += v * g2(qr);
        }
      }
    }
    double* slot = &partial[size_t(chunk) * 7];
    slot[0] = s_f;
    slot[1] = s_g1;
    slot[2] = s_g2;
    slot[3] = r_f;
    slot[4] = r_g1;
    slot[5] = r_g2;
    slot[6] = count;
  });

  double tot[7] = {0, 0, 0, 0, 0, 0, 0};
  for (int64_t c = 0; c < chunks; ++c)
    for (int k = 0; k < 7; ++k) tot[k] += partial[size_t(c) * 7 + k];

  ErgodicResult res;
  res.n = n;
  res.K = K;
  res.a = a;
  res.sites = int64_t(tot[6] + 0.5);
  const double vol = std::pow(double(n), d);
  const double norm = 1.0 / (vol * std::log(double(n)));
  res.i_n = tot[0] * norm;
  res.i_g1 = tot[1] * norm;
  res.i_g2 = tot[2] * norm;
  res.riemann_f = tot[3] / vol;
  const double riemann_g1 = tot[4] / vol;
  const double riemann_g2 = tot[5] / vol;
  res.e_i_n = law.truncated_site_mean(cutoff) * res.riemann_f /
              std::log(double(n));
  res.rel_dev = res.e_i_n != 0.0 ? res.i_n / res.e_i_n - 1.0 : 0.0;
  res.target_f = 2.0 * res.riemann_f;
  res.j_n = res.i_g1 * res.i_g2;
  res.target_g = 4.0 * riemann_g1 * riemann_g2;
  return res;
}

// ---------------------------------------------------------------------------
// Homogenization tiles

HomogenizationResult homogenization_stat(const ConductanceField& field,
                                         int64_t n, double a, double K,
                                         double theta1, int64_t b_n,
                                         double ceff_tol,
                                         int64_t gamma_subsample) {
  const int d = field.dim();
  if (!(theta1 * d > 2.0))
    throw std::invalid_argument(
        "homogenization_stat: need theta1 > 2/d for the tile bound");
  const int64_t m =
      int64_t(std::ceil(std::pow(double(n), theta1) - 1e-9));
  if (m < 3 * b_n)
    throw std::invalid_argument(
        "homogenization_stat: tile side ceil(n^theta1) must be >= 3 b_n");
  const double cutoff = a * double(n) * double(n);
  const EnvView env = full_view(field);

  // Tiles c + [0, m-1]^d, c in m Z^d, meeting the sup-ball B(0, K n + 1).
  const int64_t rad = int64_t(std::floor(K * double(n) + 1.0 + 1e-9));
  int64_t k_lo[kMaxDim] = {0, 0, 0, 0, 0};
  int64_t k_hi[kMaxDim] = {0, 0, 0, 0, 0};
  int64_t tile_count = 1;
  for (int i = 0; i < d; ++i) {
    k_lo[i] = -((rad + m - 1) / m);  // smallest k with k m + m - 1 >= -rad
    k_hi[i] = rad / m;               // largest k with k m <= rad
    tile_count *= k_hi[i] - k_lo[i] + 1;
  }
  if (tile_count < 1)
    throw std::invalid_argument("homogenization_stat: no tiles in range");

  HomogenizationResult res;
  res.n = n;
  res.m = m;
  res.b_n = b_n;
  res.a = a;
  res.tiles.assign(size_t(tile_count), TileStat{});

  parallel_for(0, tile_count, [&](int64_t t_idx) {
    // decode tile index to its k-vector
    Point corner{};
    int64_t rem = t_idx;
    for (int i = d - 1; i >= 0; --i) {
      int64_t span = k_hi[i] - k_lo[i] + 1;
      corner.c[i] = int32_t((k_lo[i] + rem % span) * m);
      rem /= span;
    }
    TileStat& tile = res.tiles[size_t(t_idx)];
    tile.corner = corner;
    // scan E(Q) = {(x, axis, +) : x in Q} for big edges
    int64_t cells = 1;
    for (int i = 0; i < d; ++i) cells *= m;
    for (int64_t c = 0; c < cells; ++c) {
      Point x = corner;
      int64_t r2 = c;
      for (int i = d - 1; i >= 0; --i) {
        x.c[i] = int32_t(corner.c[i] + r2 % m);
        r2 /= m;
      }
      for (int axis = 0; axis < d; ++axis) {
        Edge e{x, int8_t(axis)};
        if (field.edge_value(e) >= cutoff) {
          ++tile.big_edges;
          tile.gamma_sum += gamma_edge(env, e, int32_t(b_n), ceff_tol)
                                .conductance;
        }
      }
    }
  });

  double md = std::pow(double(m), d);
  res.expected_big_per_tile =
      field.has_law() ? d * md * field.law().survival(cutoff) : 0.0;
  double sum = 0.0;
  for (const TileStat& t : res.tiles) {
    res.total_big_edges += t.big_edges;
    res.max_tile_sum = std::max(res.max_tile_sum, t.gamma_sum);
    sum += t.gamma_sum;
  }
  res.mean_tile_sum = sum / double(tile_count);
  res.max_to_mean =
      res.mean_tile_sum > 0.0 ? res.max_tile_sum / res.mean_tile_sum : 0.0;

  // gamma reference over a spaced line of edges (balls disjoint, iid values)
  if (gamma_subsample > 0) {
    const int64_t spacing = 2 * b_n + 2;
    std::vector<double> gammas(size_t(gamma_subsample), 0.0);
    parallel_for(0, gamma_subsample, [&](int64_t j) {
      Point base{};
      base.c[0] = int32_t(spacing * j);
      gammas[size_t(j)] =
          gamma_edge(env, Edge{base, 0}, int32_t(b_n), ceff_tol).conductance;
    });
    res.mean_gamma_edge = block_sum(gammas.data(), gamma_subsample) /
                          double(gamma_subsample);
  }
  res.bound_reference = md / cutoff * res.mean_gamma_edge;
  res.lambda_fit =
      res.bound_reference > 0.0 ? res.max_tile_sum / res.bound_reference : 0.0;
  return res;
}

// ---------------------------------------------------------------------------
// Cluster probes

EdgeClusterProbe probe_edge_cluster(const EnvView& env, const Edge& e,
                                    double a_p, int64_t size_cap) {
  const int d = env.dim();
  EdgeClusterProbe probe;
  std::set<Point> visited;
  std::vector<Point> frontier;
  auto push = [&](const Point& p) {
    if (visited.insert(p).second) frontier.push_back(p);
  };
  push(e.base);
  push(edge_other(e));
  int32_t lo[kMaxDim], hi[kMaxDim];
  for (int i = 0; i < d; ++i) {
    lo[i] = std::min(e.base.c[i], edge_other(e).c[i]);
    hi[i] = std::max(e.base.c[i], edge_other(e).c[i]);
  }
  while (!frontier.empty()) {
    Point x = frontier.back();
    frontier.pop_back();
    for (int i = 0; i < d; ++i) {
      lo[i] = std::min(lo[i], x.c[i]);
      hi[i] = std::max(hi[i], x.c[i]);
    }
    if (int64_t(visited.size()) >= size_cap) {
      probe.capped = true;
      break;
    }
    for (int axis = 0; axis < d; ++axis) {
      for (int dir : {+1, -1}) {
        Edge step = incident_edge(x, axis, dir > 0);
        if (env.edge_value(step) > a_p) push(offset(x, axis, dir));
      }
    }
  }
  probe.size = int64_t(visited.size());
  int64_t diam = 0;
  for (int i = 0; i < d; ++i)
    diam = std::max<int64_t>(diam, int64_t(hi[i]) - lo[i]);
  probe.sup_diameter = diam;
  return probe;
}

ClusterTailResult cluster_tail_fit(const TailLaw& law, uint64_t master_seed,
                                   double a_p, int64_t samples, int64_t m_lo,
                                   int64_t m_hi) {
  if (m_lo < 2 || m_hi <= m_lo)
    throw std::invalid_argument("cluster_tail_fit: need 2 <= m_lo < m_hi");
  if (samples < 1)
    throw std::invalid_argument("cluster_tail_fit: samples must be >= 1");
  ClusterTailResult res;
  res.a_p = a_p;
  res.p_open = law.survival(a_p);
  if (res.p_open >= bond_percolation_threshold(law.d))
    throw std::invalid_argument(
        "cluster_tail_fit: open probability is supercritical");
  res.samples = samples;
  const int64_t cap = m_hi + 1;
  const Edge e0{Point{}, 0};

  const int64_t grain = 4096;
  const int64_t chunks = (samples + grain - 1) / grain;
  // per-chunk histogram of min(size, cap); sizes start at 2
  std::vector<int64_t> hist(size_t(chunks) * size_t(cap + 1), 0);
  std::vector<double> size_sum(size_t(chunks), 0.0);
  parallel_chunks(samples, grain, [&](int64_t lo, int64_t hi, int64_t chunk) {
    int64_t* h = &hist[size_t(chunk) * size_t(cap + 1)];
    double local_sum = 0.0;
    for (int64_t i = lo; i < hi; ++i) {
      ConductanceField field =
          ConductanceField::iid(law, derive_env_seed(master_seed, uint64_t(i)));
      EnvView env = full_view(field);
      EdgeClusterProbe probe = probe_edge_cluster(env, e0, a_p, cap);
      int64_t s = std::min(probe.size, cap);
      ++h[s];
      local_sum += double(s);
    }
    size_sum[size_t(chunk)] = local_sum;
  });

  std::vector<int64_t> total(size_t(cap + 1), 0);
  for (int64_t c = 0; c < chunks; ++c)
    for (int64_t s = 0; s <= cap; ++s)
      total[size_t(s)] += hist[size_t(c) * size_t(cap + 1) + size_t(s)];
  res.mean_size = block_sum(size_sum.data(), chunks) / double(samples);

  for (int64_t m = m_lo; m <= m_hi; ++m) {
    int64_t above = 0;
    for (int64_t s = m + 1; s <= cap; ++s) above += total[size_t(s)];
    res.m_grid.push_back(m);
    res.survival.push_back(double(above) / double(samples));
    if (above > 0) {
      res.m_used.push_back(double(m));
      res.log_survival.push_back(std::log(double(above) / double(samples)));
    }
  }
  res.fit = fit_line(res.m_used, res.log_survival);
  return res;
}

GammaMomentResult gamma_moment_check(const TailLaw& law, uint64_t master_seed,
                                     double a_p, int64_t b_n,
                                     const std::vector<double>& thetas,
                                     int64_t samples, double ceff_tol) {
  if (samples < 1)
    throw std::invalid_argument("gamma_moment_check: samples must be >= 1");
  if (law.survival(a_p) >= bond_percolation_threshold(law.d))
    throw std::invalid_argument(
        "gamma_moment_check: open probability is supercritical");
  GammaMomentResult res;
  res.a_p = a_p;
  res.b_n = b_n;
  res.thetas = thetas;
  res.samples = samples;
  const Edge e0{Point{}, 0};
  const int64_t cap = 512;  // diameter >= b_n/2 long before this size

  struct Sample {
    double gamma_prime = 0.0;
    bool truncated = false;
    bool violated = false;
  };
  std::vector<Sample> out(static_cast<size_t>(samples));
  parallel_for(0, samples, [&](int64_t i) {
    ConductanceField field =
        ConductanceField::iid(law, derive_env_seed(master_seed, uint64_t(i)));
    EnvView env = full_view(field);
    EdgeClusterProbe probe = probe_edge_cluster(env, e0, a_p, cap);
    Sample& s = out[size_t(i)];
    if (probe.capped || 2 * probe.sup_diameter >= b_n) {
      s.truncated = true;  // F_n(e): gamma' = 0
      return;
    }
    double gamma = gamma_edge(env, e0, int32_t(b_n), ceff_tol).conductance;
    s.gamma_prime = gamma;
    s.violated = gamma > law.d * a_p * double(probe.size) * (1.0 + 1e-9);
  });

  std::vector<double> gp(static_cast<size_t>(samples));
  for (int64_t i = 0; i < samples; ++i) {
    const Sample& s = out[size_t(i)];
    gp[size_t(i)] = s.gamma_prime;
    if (s.truncated) ++res.truncated_count;
    if (s.violated) ++res.cut_bound_violations;
    res.max_gamma_prime = std::max(res.max_gamma_prime, s.gamma_prime);
  }
  res.mean_gamma_prime = block_sum(gp.data(), samples) / double(samples);
  for (double theta : thetas) {
    std::vector<double> ex(static_cast<size_t>(samples));
    for (int64_t i = 0; i < samples; ++i)
      ex[size_t(i)] = std::exp(theta * gp[size_t(i)]);
    SummaryStats st = summarize(ex);
    res.exp_moment.push_back(st.mean);
    res.exp_moment_se.push_back(st.std_error);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Driver: env-sample

ExperimentReport run_env_sample(const RunConfig& cfg) {
  detail::StopWatch watch;
  const nlohmann::json block = cfg.block("env_sample");
  const int64_t half_side = require_int(block, "half_side", "env_sample");
  const uint64_t env_seed =
      uint64_t(param_int(block, "env_seed",
                         int64_t(derive_env_seed(cfg.seed, 0))));
  const int64_t n = param_int(block, "n", 0);
  const double a = param_num(block, "a", 1.0);
  const bool write_binary = param_flag(block, "write_binary", true);
  const bool write_csv = param_flag(block, "write_csv", false);
  const int d = cfg.law.d;

  ConductanceField field =
      cfg.law.uniform > 0.0 ? ConductanceField::uniform(d, cfg.law.uniform)
                            : ConductanceField::iid(law_from_config(cfg.law),
                                                    env_seed);
  EnvView env = full_view(field);
  LatticeRegion region = make_box(d, Point{}, int32_t(half_side));

  // Edge scan: empirical tail fraction and (optionally) truncated mean.
  const double tail_u = 10.0;
  const double cutoff =
      n > 0 ? a * double(n) * double(n)
            : std::numeric_limits<double>::infinity();
  const int64_t sites = region.site_count();
  const int64_t grain = 32768;
  const int64_t chunks = (sites + grain - 1) / grain;
  std::vector<double> partial(size_t(chunks) * 3, 0.0);
  parallel_chunks(sites, grain, [&](int64_t lo, int64_t hi, int64_t chunk) {
    double tail_count = 0.0, trunc_sum = 0.0, big_count = 0.0;
    for (int64_t idx = lo; idx < hi; ++idx) {
      Point p = region.site_at(idx);
      for (int axis = 0; axis < d; ++axis) {
        double v = field.edge_value(Edge{p, int8_t(axis)});
        if (v > tail_u) tail_count += 1.0;
        if (v <= cutoff)
          trunc_sum += v;
        else
          big_count += 1.0;
      }
    }
    double* slot = &partial[size_t(chunk) * 3];
    slot[0] = tail_count;
    slot[1] = trunc_sum;
    slot[2] = big_count;
  });
  double tail_count = 0.0, trunc_sum = 0.0, big_count = 0.0;
  for (int64_t c = 0; c < chunks; ++c) {
    tail_count += partial[size_t(c) * 3];
    trunc_sum += partial[size_t(c) * 3 + 1];
    big_count += partial[size_t(c) * 3 + 2];
  }
  const double edges = double(sites) * d;

  ExperimentReport rep;
  rep.experiment = "env-sample";
  rep.seed = cfg.seed;
  rep.config_hash = cfg.config_hash;
  rep.params = {{"half_side", half_side}, {"env_seed", env_seed},
                {"n", n},                 {"a", a},
                {"law", detail::law_desc(cfg.law)}};
  rep.add("sites", double(sites));
  rep.add("edges", edges);
  if (field.has_law()) {
    const TailLaw& law = field.law();
    double p_tail = law.survival(tail_u);
    double se = std::sqrt(p_tail * (1.0 - p_tail) / edges);
    double z = (tail_count / edges - p_tail) / se;
    rep.add("tail_fraction_at_10", tail_count / edges, se, int64_t(edges));
    rep.add_check("tail_fraction_z", z, std::abs(z) <= 4.0,
                  "|empirical tail fraction z| <= 4 at u = 10");
    if (n > 0) {
      double tm = law.truncated_mean(cutoff);
      double tsd = std::sqrt(
          std::max(0.0, law.truncated_second_moment(cutoff) - tm * tm));
      double zc = (trunc_sum / edges - tm) / (tsd / std::sqrt(edges));
      rep.add("truncated_edge_mean", trunc_sum / edges,
              tsd / std::sqrt(edges), int64_t(edges));
      rep.add("truncated_edge_mean_exact", tm);
      rep.add_check("truncated_mean_z", zc, std::abs(zc) <= 4.0,
                    "|truncated edge mean z| <= 4");
      rep.add("big_edge_count", big_count, -1.0, int64_t(edges));
      rep.add("big_edge_expected", edges * law.survival(cutoff));
    }
  } else {
    rep.add("uniform_value", cfg.law.uniform);
  }

  char stem[64];
  snprintf(stem, sizeof(stem), "env_%016llx", (unsigned long long)env_seed);
  if (write_binary)
    write_env_binary(detail::out_path(cfg, std::string(stem) + ".bin"), env,
                     region, env_seed, detail::law_desc(cfg.law));
  if (write_csv)
    write_env_csv(detail::out_path(cfg, std::string(stem) + ".csv"),
                  cfg.config_hash, cfg.seed, env, region);
  rep.wall_seconds = watch.seconds();
  write_json_file(detail::out_path(cfg, "env_sample_summary.json"),
                  report_to_json(rep));
  return rep;
}

// ---------------------------------------------------------------------------
// Driver: ergodic

ExperimentReport run_ergodic(const RunConfig& cfg) {
  detail::StopWatch watch;
  const nlohmann::json block = cfg.block("ergodic");
  const int64_t n = require_int(block, "n", "ergodic");
  const double K = param_num(block, "K", 1.0);
  const double a = param_num(block, "a", 1.0);
  const int64_t seeds = param_int(block, "seeds", 50);
  const double threshold = param_num(block, "threshold", 0.05);
  const double pass_fraction = param_num(block, "pass_fraction", 0.9);
  const std::string f_name = param_str(block, "f", "one");
  const std::string g1_name = param_str(block, "g1", "one");
  const std::string g2_name = param_str(block, "g2", "gauss");
  const int d = cfg.law.d;
  const TailLaw law = law_from_config(cfg.law);
  const SiteFunction f = detail::site_function(f_name, d);
  const SiteFunction g1 = detail::site_function(g1_name, d);
  const SiteFunction g2 = detail::site_function(g2_name, d);

  std::vector<ErgodicResult> results(static_cast<size_t>(seeds));
  for (int64_t s = 0; s < seeds; ++s)  // inner scan is parallel
    results[size_t(s)] =
        ergodic_average(law, derive_env_seed(cfg.seed, uint64_t(s)), n, K, a,
                        f, g1, g2);

  int64_t within = 0;
  double mean_dev = 0.0, max_bias_dev = 0.0;
  const bool default_mixture = std::abs(law.tail_c - 0.5 / d) < 1e-15 &&
                               law.alpha == 1.0 && law.rho == 0.0;
  {
    CsvWriter csv(detail::out_path(cfg, "ergodic_seeds.csv"),
                  cfg.config_hash, cfg.seed,
                  {"seed_index", "i_n", "e_i_n", "rel_dev", "j_n",
                   "target_g"});
    for (int64_t s = 0; s < seeds; ++s) {
      const ErgodicResult& r = results[size_t(s)];
      if (std::abs(r.rel_dev) <= threshold) ++within;
      mean_dev += std::abs(r.rel_dev);
      if (default_mixture) {
        double ratio_emp = r.e_i_n / r.target_f;
        double ratio_formula = (2.0 * std::log(double(n)) + 2.0 * d - 1.0 +
                                std::log(a)) /
                               (2.0 * std::log(double(n)));
        max_bias_dev =
            std::max(max_bias_dev, std::abs(ratio_emp - ratio_formula));
      }
      csv.row({double(s), r.i_n, r.e_i_n, r.rel_dev, r.j_n, r.target_g});
    }
  }
  mean_dev /= double(seeds);
  const ErgodicResult& r0 = results[0];

  ExperimentReport rep;
  rep.experiment = "ergodic";
  rep.seed = cfg.seed;
  rep.config_hash = cfg.config_hash;
  rep.params = {{"n", n},         {"K", K},
                {"a", a},         {"seeds", seeds},
                {"threshold", threshold}, {"pass_fraction", pass_fraction},
                {"f", f_name},    {"g1", g1_name},
                {"g2", g2_name}};
  double frac = double(within) / double(seeds);
  char note[160];
  snprintf(note, sizeof(note),
           "fraction of seeds with |I_n/E I_n - 1| <= %g is >= %g", threshold,
           pass_fraction);
  rep.add_check("within_fraction", frac, frac >= pass_fraction, note, -1.0,
                seeds);
  rep.add("mean_abs_rel_dev", mean_dev, -1.0, seeds);
  rep.add("ball_sites", double(r0.sites));
  rep.add("riemann_f", r0.riemann_f);
  rep.add("target_f", r0.target_f);
  if (f_name == "one") {
    double vol = std::pow(M_PI, 0.5 * d) /
                 std::tgamma(0.5 * d + 1.0) * std::pow(K, d);
    rep.add("continuum_target_f", 2.0 * vol);
  }
  rep.add("j_n_seed0", r0.j_n);
  rep.add("target_g", r0.target_g);
  if (default_mixture)
    rep.add_check("bias_identity_dev", max_bias_dev, max_bias_dev <= 1e-12,
                  "closed-form mean ratio matches to 1e-12", -1.0, seeds);
  rep.wall_seconds = watch.seconds();
  write_json_file(detail::out_path(cfg, "ergodic_summary.json"),
                  report_to_json(rep));
  return rep;
}

// ---------------------------------------------------------------------------
// Driver: homogenization

ExperimentReport run_homogenization(const RunConfig& cfg) {
  detail::StopWatch watch;
  const nlohmann::json block = cfg.block("homogenization");
  const int64_t n = require_int(block, "n", "homogenization");
  const double a = param_num(block, "a", 0.5);
  const double K = param_num(block, "K", 0.25);
  const double theta1 = param_num(block, "theta1", 0.8);
  const int64_t b_n = param_int(block, "b_n", 5);
  const int64_t envs = param_int(block, "envs", 20);
  const double tol = param_num(block, "tol", 1e-8);
  const int64_t gamma_subsample = param_int(block, "gamma_subsample", 48);
  const double lambda_max = param_num(block, "lambda_max", 10.0);
  const uint64_t base_seed =
      uint64_t(param_int(block, "env_seed", 0)) != 0
          ? uint64_t(param_int(block, "env_seed", 0))
          : cfg.seed;
  const TailLaw law = law_from_config(cfg.law);

  std::vector<HomogenizationResult> results(static_cast<size_t>(envs));
  for (int64_t i = 0; i < envs; ++i) {
    ConductanceField field =
        ConductanceField::iid(law, derive_env_seed(base_seed, uint64_t(i)));
    results[size_t(i)] =
        homogenization_stat(field, n, a, K, theta1, b_n, tol, gamma_subsample);
  }

  double worst_ratio = 0.0, worst_lambda = 0.0, mean_gamma = 0.0;
  int64_t total_big = 0;
  {
    std::vector<std::string> cols = {"env_index"};
    for (int i = 0; i < law.d; ++i)
      cols.push_back("corner_x" + std::to_string(i + 1));
    cols.push_back("big_edges");
    cols.push_back("gamma_sum");
    CsvWriter csv(detail::out_path(cfg, "homogenization_tiles.csv"),
                  cfg.config_hash, cfg.seed, cols);
    for (int64_t i = 0; i < envs; ++i) {
      const HomogenizationResult& r = results[size_t(i)];
      worst_ratio = std::max(worst_ratio, r.max_to_mean);
      worst_lambda = std::max(worst_lambda, r.lambda_fit);
      mean_gamma += r.mean_gamma_edge;
      total_big += r.total_big_edges;
      for (const TileStat& t : r.tiles) {
        std::vector<double> row = {double(i)};
        for (int k = 0; k < law.d; ++k) row.push_back(double(t.corner.c[k]));
        row.push_back(double(t.big_edges));
        row.push_back(t.gamma_sum);
        csv.row(row);
      }
    }
  }
  mean_gamma /= double(envs);
  const HomogenizationResult& r0 = results[0];
  const double tiles_per_env = double(r0.tiles.size());
  const double p_big = law.survival(a * double(n) * double(n));
  const double md = std::pow(double(r0.m), law.d);
  const double expected_total =
      double(envs) * tiles_per_env * law.d * md * p_big;
  const double sd_total = std::sqrt(double(envs) * tiles_per_env * law.d * md *
                                    p_big * (1.0 - p_big));
  const double big_z = (double(total_big) - expected_total) / sd_total;

  ExperimentReport rep;
  rep.experiment = "homogenization";
  rep.seed = cfg.seed;
  rep.config_hash = cfg.config_hash;
  rep.params = {{"n", n},           {"a", a},
                {"K", K},           {"theta1", theta1},
                {"b_n", b_n},       {"envs", envs},
                {"tol", tol},       {"gamma_subsample", gamma_subsample},
                {"lambda_max", lambda_max}};
  rep.add("tile_side_m", double(r0.m));
  rep.add("tiles_per_env", tiles_per_env);
  rep.add("expected_big_per_tile", r0.expected_big_per_tile);
  rep.add("total_big_edges", double(total_big));
  rep.add_check("big_edge_z", big_z, std::abs(big_z) <= 4.0,
                "|big-edge count z| <= 4 against the closed-form mean");
  char note[128];
  snprintf(note, sizeof(note), "max-to-mean per-tile gamma sum <= %g",
           lambda_max);
  rep.add_check("max_to_mean", worst_ratio, worst_ratio <= lambda_max, note,
                -1.0, envs);
  rep.add("lambda_fit_max", worst_lambda, -1.0, envs);
  rep.add("mean_gamma_edge", mean_gamma, -1.0,
          envs * std::max<int64_t>(gamma_subsample, 1));
  rep.wall_seconds = watch.seconds();
  write_json_file(detail::out_path(cfg, "homogenization_summary.json"),
                  report_to_json(rep));
  return rep;
}

// ---------------------------------------------------------------------------
// Driver: clusters

ExperimentReport run_clusters(const RunConfig& cfg) {
  detail::StopWatch watch;
  const nlohmann::json block = cfg.block("clusters");
  const double a_p_fit = param_num(block, "a_p_fit", 1.2);
  const int64_t fit_samples = param_int(block, "fit_samples", 100000);
  const int64_t m_lo = param_int(block, "m_lo", 4);
  const int64_t m_hi = param_int(block, "m_hi", 20);
  const double r2_min = param_num(block, "r2_min", 0.98);
  const double a_p_gamma = param_num(block, "a_p_gamma", 1.2);
  const int64_t gamma_samples = param_int(block, "gamma_samples", 300);
  const std::vector<int64_t> b_n_grid =
      param_int_list(block, "b_n_grid", {6, 10});
  const std::vector<double> thetas =
      param_num_list(block, "thetas", {0.05, 0.1, 0.2});
  const double stability_band = param_num(block, "stability_band", 2.0);
  const double tol = param_num(block, "tol", 1e-8);
  const uint64_t base_seed =
      uint64_t(param_int(block, "env_seed", 0)) != 0
          ? uint64_t(param_int(block, "env_seed", 0))
          : cfg.seed;
  const TailLaw law = law_from_config(cfg.law);

  ClusterTailResult tail = cluster_tail_fit(
      law, derive_env_seed(base_seed, 1), a_p_fit, fit_samples, m_lo, m_hi);
  {
    CsvWriter csv(detail::out_path(cfg, "cluster_survival.csv"),
                  cfg.config_hash, cfg.seed, {"m", "survival"});
    for (size_t i = 0; i < tail.m_grid.size(); ++i)
      csv.row({double(tail.m_grid[i]), tail.survival[i]});
  }

  std::vector<GammaMomentResult> moments;
  moments.reserve(b_n_grid.size());
  for (size_t bi = 0; bi < b_n_grid.size(); ++bi)
    moments.push_back(gamma_moment_check(
        law, derive_env_seed(base_seed, 100 + bi), a_p_gamma, b_n_grid[bi],
        thetas, gamma_samples, tol));
  {
    CsvWriter csv(detail::out_path(cfg, "gamma_moments.csv"),
                  cfg.config_hash, cfg.seed,
                  {"b_n", "theta", "exp_moment", "std_error"});
    for (size_t bi = 0; bi < b_n_grid.size(); ++bi)
      for (size_t ti = 0; ti < thetas.size(); ++ti)
        csv.row({double(b_n_grid[bi]), thetas[ti],
                 moments[bi].exp_moment[ti], moments[bi].exp_moment_se[ti]});
  }

  ExperimentReport rep;
  rep.experiment = "clusters";
  rep.seed = cfg.seed;
  rep.config_hash = cfg.config_hash;
  rep.params = {{"a_p_fit", a_p_fit},       {"fit_samples", fit_samples},
                {"m_lo", m_lo},             {"m_hi", m_hi},
                {"r2_min", r2_min},         {"a_p_gamma", a_p_gamma},
                {"gamma_samples", gamma_samples},
                {"b_n_grid", b_n_grid},     {"thetas", thetas},
                {"stability_band", stability_band}};
  rep.add("p_open_fit", tail.p_open);
  rep.add("mean_cluster_size", tail.mean_size, -1.0, fit_samples);
  rep.add("fit_points", double(tail.m_used.size()));
  rep.add("fit_slope", tail.fit.slope, -1.0, int64_t(tail.m_used.size()));
  char note[160];
  snprintf(note, sizeof(note),
           "log-survival linear fit over m in [%lld,%lld]: R^2 >= %g, slope "
           "< 0",
           (long long)m_lo, (long long)m_hi, r2_min);
  bool fit_ok = tail.m_used.size() >= 3 && tail.fit.r2 >= r2_min &&
                tail.fit.slope < 0.0;
  rep.add_check("fit_r2", tail.fit.r2, fit_ok, note, -1.0,
                int64_t(tail.m_used.size()));

  int64_t violations = 0;
  for (const GammaMomentResult& m : moments) violations += m.cut_bound_violations;
  rep.add_check("cut_bound_violations", double(violations), violations == 0,
                "gamma(e) <= d a_p |C(e)| on every non-truncated sample");
  if (moments.size() >= 2) {
    for (size_t ti = 0; ti < thetas.size(); ++ti) {
      double lo = moments.front().exp_moment[ti];
      double hi = moments.back().exp_moment[ti];
      double ratio = hi > 0.0 ? lo / hi : 0.0;
      char key[64];
      snprintf(key, sizeof(key), "exp_moment_ratio_theta_%g", thetas[ti]);
      char note2[160];
      snprintf(note2, sizeof(note2),
               "E exp(theta gamma') ratio across b_n in [1/%g, %g]",
               stability_band, stability_band);
      bool in_band =
          ratio >= 1.0 / stability_band && ratio <= stability_band;
      if (std::abs(thetas[ti] - 0.1) < 1e-12)
        rep.add_check(key, ratio, in_band, note2, -1.0, gamma_samples);
      else
        rep.add(key, ratio, -1.0, gamma_samples);
    }
  }
  for (size_t bi = 0; bi < b_n_grid.size(); ++bi) {
    char key[64];
    snprintf(key, sizeof(key), "truncated_fraction_b%lld",
             (long long)b_n_grid[bi]);
    rep.add(key, double(moments[bi].truncated_count) / double(gamma_samples),
            -1.0, gamma_samples);
  }
  rep.wall_seconds = watch.seconds();
  write_json_file(detail::out_path(cfg, "clusters_summary.json"),
                  report_to_json(rep));
  return rep;
}

}  // namespace rcmlab
