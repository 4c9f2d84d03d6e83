#include "rcmlab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <stdexcept>
#include <unordered_map>

#include "rcmlab/parallel.hpp"

namespace rcmlab {

namespace {

// w <- P v with P = I + L/Lambda (row-stochastic up to dirichlet absorption)
void apply_uniformized(const BoxOperator& op, double lambda,
                       const std::vector<double>& v, std::vector<double>& w) {
  const int deg = op.degree;
  parallel_chunks(op.sites(), 8192, [&](int64_t lo, int64_t hi, int64_t) {
    for (int64_t i = lo; i < hi; ++i) {
      double acc = 0.0;
      const double* wt = &op.weight[size_t(i) * deg];
      const int64_t* nb = &op.nbr[size_t(i) * deg];
      for (int s = 0; s < deg; ++s) {
        if (nb[s] >= 0) acc += wt[s] * v[nb[s]];
      }
      w[i] = v[i] + (acc - op.rate[i] * v[i]) / lambda;
    }
  });
}

}  // namespace

double uniformize_evolve(const BoxOperator& op, std::vector<double>& v,
                         double tau, double tol, int64_t budget,
                         int64_t* matvecs) {
  if (tau < 0.0) throw std::invalid_argument("uniformize_evolve: tau >= 0");
  double lambda = op.max_rate;
  if (tau == 0.0 || lambda == 0.0) return 0.0;
  double nu = lambda * tau;
  // crude series length estimate for the budget check
  double k_needed = nu + 12.0 * std::sqrt(nu + 1.0) + 40.0;
  if (matvecs != nullptr && *matvecs + int64_t(k_needed) > budget)
    throw std::runtime_error(
        "uniformize_evolve: matvec budget exceeded (Lambda*t = " +
        std::to_string(nu) + "); shrink the time span, the box, or raise the "
        "budget");
  int64_t n = op.sites();
  std::vector<double> cur = v;
  std::vector<double> nxt(n);
  std::vector<double> out(n, 0.0);
  double log_w = -nu;  // log Poisson pmf at k = 0
  double cum = 0.0;
  int64_t k = 0;
  while (true) {
    double w = std::exp(log_w);
    if (w > 0.0) {
      parallel_chunks(n, 65536, [&](int64_t lo, int64_t hi, int64_t) {
        for (int64_t i = lo; i < hi; ++i) out[i] += w * cur[i];
      });
      cum += w;
    }
    if (cum >= 1.0 - tol && double(k) >= nu) break;
    apply_uniformized(op, lambda, cur, nxt);
    cur.swap(nxt);
    if (matvecs != nullptr) {
      ++*matvecs;
      if (*matvecs > budget)
        throw std::runtime_error(
            "uniformize_evolve: matvec budget exceeded; shrink the time span, "
            "the box, or raise the budget");
    }
    ++k;
    log_w += std::log(nu) - std::log(double(k));
    if (k > int64_t(k_needed) * 4 + 1000)
      throw std::runtime_error("uniformize_evolve: series failed to converge");
  }
  v.swap(out);
  return std::max(0.0, 1.0 - cum);
}

KernelField heat_kernel(const EnvView& env, const LatticeRegion& box,
                        const Point& source, std::vector<double> times,
                        double tol, int64_t budget) {
  if (times.empty()) throw std::invalid_argument("heat_kernel: no times");
  if (!std::is_sorted(times.begin(), times.end()) || times.front() < 0.0)
    throw std::invalid_argument("heat_kernel: times must ascend from >= 0");
  if (!box.contains(source))
    throw std::invalid_argument("heat_kernel: source outside box");
  KernelField kf;
  kf.box = box;
  kf.source = source;
  kf.times = times;
  kf.tol = tol;
  BoxOperator op = build_box_operator(env, box);
  kf.lambda = op.max_rate;
  std::vector<double> v(box.site_count(), 0.0);
  v[box.index_of(source)] = 1.0;
  double prev = 0.0;
  double tol_step = tol / double(times.size());
  for (double t : times) {
    kf.mass_defect +=
        uniformize_evolve(op, v, t - prev, tol_step, budget, &kf.matvecs);
    kf.values.push_back(v);
    prev = t;
  }
  return kf;
}

std::vector<double> heat_kernel_time_integral(const EnvView& env,
                                              const LatticeRegion& box,
                                              const Point& source, double T,
                                              double tol, int64_t budget,
                                              int64_t* matvecs) {
  if (T < 0.0) throw std::invalid_argument("heat_kernel_time_integral: T >= 0");
  if (!box.contains(source))
    throw std::invalid_argument("heat_kernel_time_integral: source outside box");
  int64_t n = box.site_count();
  std::vector<double> out(n, 0.0);
  if (T == 0.0) return out;
  BoxOperator op = build_box_operator(env, box);
  double lambda = op.max_rate;
  if (lambda == 0.0) {  // frozen chain: integral is T * delta
    out[box.index_of(source)] = T;
    return out;
  }
  double nu = lambda * T;
  std::vector<double> cur(n, 0.0);
  cur[box.index_of(source)] = 1.0;
  std::vector<double> nxt(n);
  double log_w = -nu;
  double cum = 0.0;
  int64_t k = 0;
  int64_t local_matvecs = 0;
  while (true) {
    double pmf = std::exp(log_w);
    cum += pmf;
    double tail = std::max(0.0, 1.0 - cum);  // P(N >= k+1)
    if (tail > 0.0) {
      double w = tail / lambda;
      parallel_chunks(n, 65536, [&](int64_t lo, int64_t hi, int64_t) {
        for (int64_t i = lo; i < hi; ++i) out[i] += w * cur[i];
      });
    }
    // Cauchy-Schwarz bound on the dropped integral mass:
    // sum_{j>k} P(N >= j+1) = E[(N-k-1)^+] <= sqrt((nu + (nu-k-1)^2) * tail)
    double dk = nu - double(k) - 1.0;
    double rem_bound = std::sqrt((nu + dk * dk) * tail);
    // 1 - cum stalls at the rounding floor of the pmf sum, which for large nu
    // can sit above tol * nu forever; past the mode the true remainder is
    // also geometric, sum_{j>k} P(N >= j+1) <= pmf_k q / (1-q)^2, q = nu/(k+1)
    if (double(k) >= nu) {
      double q = nu / double(k + 1);
      if (q < 1.0) {
        double rem_geo = pmf * q / ((1.0 - q) * (1.0 - q));
        rem_bound = std::min(rem_bound, rem_geo);
      }
    }
    if (double(k) >= nu && rem_bound <= tol * nu) break;
    apply_uniformized(op, lambda, cur, nxt);
    cur.swap(nxt);
    ++local_matvecs;
    if (matvecs != nullptr) ++*matvecs;
    if (local_matvecs > budget ||
        (matvecs != nullptr && *matvecs > budget))
      throw std::runtime_error(
          "heat_kernel_time_integral: matvec budget exceeded (Lambda*T = " +
          std::to_string(nu) + "); shrink T, the box, or raise the budget");
    ++k;
    log_w += std::log(nu) - std::log(double(k));
  }
  return out;
}

double kernel_interpolate(const KernelField& kf,
                          const std::array<double, kMaxDim>& y, double t) {
  if (kf.times.empty()) throw std::invalid_argument("kernel_interpolate: empty");
  if (t < kf.times.front() || t > kf.times.back())
    throw std::invalid_argument("kernel_interpolate: t outside stored range");
  int d = kf.box.d;
  for (int i = 0; i < d; ++i) {
    double lo = double(kf.box.center.c[i]) - kf.box.half_side;
    double hi = double(kf.box.center.c[i]) + kf.box.half_side;
    if (y[i] < lo || y[i] > hi)
      throw std::invalid_argument("kernel_interpolate: point outside hull");
  }
  auto spatial = [&](size_t ti) {
    Point base;
    double frac[kMaxDim] = {0, 0, 0, 0, 0};
    for (int i = 0; i < d; ++i) {
      double f = std::floor(y[i]);
      // clamp so the upper corner stays in the box at the far face
      double max_base = double(kf.box.center.c[i]) + kf.box.half_side - 1;
      double min_base = double(kf.box.center.c[i]) - kf.box.half_side;
      f = std::min(std::max(f, min_base), std::max(max_base, min_base));
      base.c[i] = int32_t(f);
      frac[i] = y[i] - f;
    }
    double acc = 0.0;
    for (int corner = 0; corner < (1 << d); ++corner) {
      double w = 1.0;
      Point p = base;
      for (int i = 0; i < d; ++i) {
        if (corner & (1 << i)) {
          w *= frac[i];
          p.c[i] += 1;
        } else {
          w *= 1.0 - frac[i];
        }
      }
      if (w != 0.0) acc += w * kf.values[ti][kf.box.index_of(p)];
    }
    return acc;
  };
  auto it = std::lower_bound(kf.times.begin(), kf.times.end(), t);
  size_t hi = size_t(it - kf.times.begin());
  if (hi == 0 || kf.times[hi] == t) return spatial(hi);
  size_t lo = hi - 1;
  double w = (t - kf.times[lo]) / (kf.times[hi] - kf.times[lo]);
  return (1.0 - w) * spatial(lo) + w * spatial(hi);
}

// ---- Monte Carlo kernel ----------------------------------------------------

McKernelEstimate mc_heat_kernel(const EnvView& env, const LatticeRegion& box,
                                const Point& source, std::vector<double> times,
                                int64_t walkers, uint64_t stream_key) {
  if (times.empty() || !std::is_sorted(times.begin(), times.end()) ||
      times.front() < 0.0)
    throw std::invalid_argument("mc_heat_kernel: need ascending times >= 0");
  if (!box.contains(source))
    throw std::invalid_argument("mc_heat_kernel: source outside box");
  if (walkers <= 0) throw std::invalid_argument("mc_heat_kernel: walkers > 0");
  McKernelEstimate est;
  est.box = box;
  est.source = source;
  est.times = times;
  est.walkers = walkers;
  int64_t n = box.site_count();
  size_t nt = times.size();
  est.hits.assign(nt, std::vector<uint32_t>(n, 0));
  JumpTable jt = JumpTable::build(env, box);
  int64_t start = box.index_of(source);
  double horizon = times.back();
  std::mutex merge_mutex;
  parallel_chunks(walkers, std::max<int64_t>(walkers / 256, 4096),
                  [&](int64_t lo, int64_t hi, int64_t) {
    std::vector<std::vector<uint32_t>> local(nt, std::vector<uint32_t>(n, 0));
    int64_t local_jumps = 0;
    for (int64_t wi = lo; wi < hi; ++wi) {
      CounterRng rng = derive_stream(kSaltWalker, stream_key, uint64_t(wi));
      size_t next = 0;
      while (next < nt && times[next] <= 0.0) {  // t = 0 snapshots
        ++local[next][start];
        ++next;
      }
      auto outcome = run_boxed_vsrw(
          jt, start, horizon, rng,
          [&](double, double t1, int64_t site) {
            while (next < nt && times[next] < t1) {
              ++local[next][site];
              ++next;
            }
            return true;
          },
          [&](double, int64_t) { return true; });
      local_jumps += outcome.jumps;
      if (outcome.end_site >= 0) {
        while (next < nt) {  // snapshots exactly at the horizon
          ++local[next][outcome.end_site];
          ++next;
        }
      }
    }
    std::lock_guard<std::mutex> lock(merge_mutex);  // integer adds commute
    for (size_t ti = 0; ti < nt; ++ti)
      for (int64_t i = 0; i < n; ++i) est.hits[ti][i] += local[ti][i];
    est.total_jumps += local_jumps;
  });
  return est;
}

McKernelEstimate::BallValue McKernelEstimate::ball_average(
    size_t time_idx, const std::vector<Point>& ball) const {
  if (ball.empty())
    throw std::invalid_argument("ball_average: empty ball rejected");
  BallValue bv;
  bv.ball_sites = int64_t(ball.size());
  for (const Point& p : ball) {
    if (box.contains(p)) bv.hits += hits[time_idx][box.index_of(p)];
  }
  double p_hat = double(bv.hits) / double(walkers);
  bv.mean = p_hat / double(bv.ball_sites);
  bv.std_error = std::sqrt(std::max(p_hat * (1.0 - p_hat), 0.0) /
                           double(walkers)) /
                 double(bv.ball_sites);
  return bv;
}

// ---- stationary solves -----------------------------------------------------

namespace {

struct DirichletSystem {
  // A = D - W restricted to `unknowns`; D includes every incident edge value,
  // off-diagonals only between unknowns.
  int64_t n = 0;
  int deg = 0;
  std::vector<double> diag;
  std::vector<double> wt;
  std::vector<int64_t> nbr;  // local indices, -1 elsewhere

  void apply(const std::vector<double>& v, std::vector<double>& out) const {
    parallel_chunks(n, 8192, [&](int64_t lo, int64_t hi, int64_t) {
      for (int64_t i = lo; i < hi; ++i) {
        double acc = diag[i] * v[i];
        const double* w = &wt[size_t(i) * deg];
        const int64_t* nb = &nbr[size_t(i) * deg];
        for (int s = 0; s < deg; ++s)
          if (nb[s] >= 0) acc -= w[s] * v[nb[s]];
        out[i] = acc;
      }
    });
  }
};

struct CgOutcome {
  int iters = 0;
  double rel_residual = 0.0;
};

// Jacobi-preconditioned CG for SPD systems; deterministic reductions.
CgOutcome conjugate_gradient(const DirichletSystem& sys,
                             const std::vector<double>& b,
                             std::vector<double>& x, double tol,
                             int max_iters) {
  int64_t n = sys.n;
  x.assign(n, 0.0);
  double bnorm = std::sqrt(block_dot(b.data(), b.data(), n));
  CgOutcome out;
  if (bnorm == 0.0) return out;
  std::vector<double> r = b, z(n), p(n), ap(n);
  for (int64_t i = 0; i < n; ++i) {
    if (sys.diag[i] <= 0.0)
      throw std::runtime_error(
          "conjugate_gradient: singular diagonal (isolated site)");
    z[i] = r[i] / sys.diag[i];
  }
  p = z;
  double rz = block_dot(r.data(), z.data(), n);
  if (max_iters <= 0) max_iters = int(200 + 40 * std::sqrt(double(n)));
  for (int it = 1; it <= max_iters; ++it) {
    sys.apply(p, ap);
    double pap = block_dot(p.data(), ap.data(), n);
    if (pap <= 0.0)
      throw std::runtime_error("conjugate_gradient: matrix not positive");
    double alpha = rz / pap;
    for (int64_t i = 0; i < n; ++i) x[i] += alpha * p[i];
    for (int64_t i = 0; i < n; ++i) r[i] -= alpha * ap[i];
    double rnorm = std::sqrt(block_dot(r.data(), r.data(), n));
    out.iters = it;
    out.rel_residual = rnorm / bnorm;
    if (out.rel_residual <= tol) return out;
    for (int64_t i = 0; i < n; ++i) z[i] = r[i] / sys.diag[i];
    double rz_new = block_dot(r.data(), z.data(), n);
    double beta = rz_new / rz;
    rz = rz_new;
    for (int64_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw std::runtime_error(
      "conjugate_gradient: no convergence in " + std::to_string(max_iters) +
      " iterations (rel residual " + std::to_string(out.rel_residual) + ")");
}

}  // namespace

GreenField green(const EnvView& env, const LatticeRegion& box,
                 const Point& source, double tol, int max_iters) {
  if (!box.contains(source))
    throw std::invalid_argument("green: source outside box");
  GreenField gf;
  gf.box = box;
  gf.box.boundary = Boundary::dirichlet;
  gf.source = source;
  gf.tol = tol;
  BoxOperator op = build_box_operator(env, gf.box);
  DirichletSystem sys;
  sys.n = op.sites();
  sys.deg = op.degree;
  sys.diag = op.rate;
  sys.wt = op.weight;
  sys.nbr = op.nbr;  // -1 entries (outside) already mean "no off-diagonal"
  std::vector<double> b(sys.n, 0.0);
  b[gf.box.index_of(source)] = 1.0;
  auto cg = conjugate_gradient(sys, b, gf.values, tol, max_iters);
  gf.rel_residual = cg.rel_residual;
  gf.iters = cg.iters;
  return gf;
}

CeffResult effective_conductance(const EnvView& env,
                                 const LatticeRegion& index_box,
                                 const std::vector<Point>& source_set,
                                 const std::vector<Point>& interior,
                                 double tol) {
  if (source_set.empty())
    throw std::invalid_argument("effective_conductance: empty source set");
  int d = index_box.d;
  const int deg = 2 * d;
  // local numbering of unknowns; sources marked separately
  std::vector<int64_t> local(index_box.site_count(), -1);  // -1 ground
  constexpr int64_t kSource = -2;
  for (const Point& p : source_set) {
    if (!index_box.contains(p))
      throw std::invalid_argument("effective_conductance: source outside box");
    local[index_box.index_of(p)] = kSource;
  }
  int64_t nw = 0;
  for (const Point& p : interior) {
    if (!index_box.contains(p))
      throw std::invalid_argument("effective_conductance: interior outside box");
    int64_t& slot = local[index_box.index_of(p)];
    if (slot == kSource) continue;  // sources take precedence
    if (slot == -1) slot = nw++;
  }
  std::vector<Point> wsites(nw);
  for (int64_t bi = 0; bi < index_box.site_count(); ++bi)
    if (local[bi] >= 0) wsites[local[bi]] = index_box.site_at(bi);

  auto classify = [&](const Point& p) -> int64_t {
    if (!index_box.contains(p)) return -1;
    return local[index_box.index_of(p)];
  };

  DirichletSystem sys;
  sys.n = nw;
  sys.deg = deg;
  sys.diag.assign(nw, 0.0);
  sys.wt.assign(size_t(nw) * deg, 0.0);
  sys.nbr.assign(size_t(nw) * deg, -1);
  std::vector<double> b(nw, 0.0);
  for (int64_t i = 0; i < nw; ++i) {
    const Point& x = wsites[i];
    for (int axis = 0; axis < d; ++axis) {
      for (int dir = 0; dir < 2; ++dir) {
        bool positive = dir == 0;
        double v = env.edge_value(incident_edge(x, axis, positive));
        if (v == 0.0) continue;
        sys.diag[i] += v;
        Point y = offset(x, axis, positive ? +1 : -1);
        int64_t cls = classify(y);
        if (cls >= 0) {
          size_t slot = size_t(i) * deg + 2 * axis + dir;
          sys.wt[slot] = v;
          sys.nbr[slot] = cls;
        } else if (cls == kSource) {
          b[i] += v;
        }
        // ground contributes to the diagonal only
      }
    }
  }
  CeffResult res;
  std::vector<double> h;
  if (nw > 0) {
    auto cg = conjugate_gradient(sys, b, h, tol, 0);
    res.iters = cg.iters;
    res.rel_residual = cg.rel_residual;
  }
  auto potential = [&](const Point& p) -> double {
    int64_t cls = classify(p);
    if (cls == kSource) return 1.0;
    if (cls >= 0) return h[cls];
    return 0.0;
  };
  // flux out of the source set
  double flux = 0.0;
  for (const Point& x : source_set) {
    for (int axis = 0; axis < d; ++axis) {
      for (int dir = 0; dir < 2; ++dir) {
        bool positive = dir == 0;
        double v = env.edge_value(incident_edge(x, axis, positive));
        if (v == 0.0) continue;
        Point y = offset(x, axis, positive ? +1 : -1);
        flux += v * (1.0 - potential(y));
      }
    }
  }
  // Dirichlet energy over edges touching the solved set
  double energy = 0.0;
  auto add_energy_for = [&](const Point& x) {
    double hx = potential(x);
    for (int axis = 0; axis < d; ++axis) {
      for (int dir = 0; dir < 2; ++dir) {
        bool positive = dir == 0;
        Point y = offset(x, axis, positive ? +1 : -1);
        int64_t cls = classify(y);
        bool y_in_sets = (cls == kSource || cls >= 0);
        if (y_in_sets) {
          // both endpoints enumerated: count the edge at its canonical base
          if (!positive) continue;
        }
        double v = env.edge_value(incident_edge(x, axis, positive));
        if (v == 0.0) continue;
        double dh = hx - potential(y);
        energy += v * dh * dh;
      }
    }
  };
  for (const Point& x : source_set) add_energy_for(x);
  for (const Point& x : wsites) add_energy_for(x);
  res.flux = flux;
  res.energy = energy;
  res.conductance = flux;
  return res;
}

CeffResult gamma_edge(const EnvView& env, const Edge& e, int32_t b,
                      double tol) {
  if (b < 1) throw std::invalid_argument("gamma_edge: radius >= 1");
  Point x = e.base, y = edge_other(e);
  int d = env.dim();
  LatticeRegion index_box = make_box(d, x, b + 2);
  std::vector<Point> interior;
  for (const Point& s : sup_ball_sites(d, x, b)) {
    if (sup_dist(s, y, d) > b) continue;  // B(e,b) = B(x,b) ∩ B(y,b)
    if (s == x || s == y) continue;
    interior.push_back(s);
  }
  return effective_conductance(env, index_box, {x, y}, interior, tol);
}

CeffResult gamma_site(const EnvView& env, const Point& z, int32_t b,
                      double tol) {
  if (b < 1) throw std::invalid_argument("gamma_site: radius >= 1");
  int d = env.dim();
  LatticeRegion index_box = make_box(d, z, b + 3);
  std::vector<Point> interior;
  for (const Point& s : sup_ball_sites(d, z, b + 1)) {
    if (s == z) continue;
    interior.push_back(s);
  }
  return effective_conductance(env, index_box, {z}, interior, tol);
}

// ---- analytic comparisons --------------------------------------------------

double gaussian_density(int d, double sigma2, double t, const double* x) {
  if (sigma2 <= 0.0 || t <= 0.0)
    throw std::invalid_argument("gaussian_density: sigma2, t must be > 0");
  double q = 0.0;
  for (int i = 0; i < d; ++i) q += x[i] * x[i];
  double s = sigma2 * t;
  return std::pow(2.0 * M_PI * s, -0.5 * d) * std::exp(-q / (2.0 * s));
}

double gaussian_density(int d, double sigma2, double t,
                        const std::vector<double>& x) {
  return gaussian_density(d, sigma2, t, x.data());
}

double lattice_power_sum(int d, double K, int64_t n, double p,
                         int64_t site_budget) {
  if (K <= 0.0 || n < 1) throw std::invalid_argument("lattice_power_sum: K>0, n>=1");
  int64_t R = int64_t(std::floor(K * double(n)));
  int64_t side = 2 * R + 1;
  int64_t sites = 1;
  for (int i = 0; i < d; ++i) {
    sites *= side;
    if (sites > site_budget)
      throw std::invalid_argument(
          "lattice_power_sum: enumeration over " + std::to_string(side) + "^" +
          std::to_string(d) + " sites exceeds the budget; reduce K*n");
  }
  int64_t r2max = R * R;
  std::vector<int64_t> count(size_t(r2max + 1), 0);
  // odometer over the cube accumulating exact integer |x|^2
  std::vector<int64_t> idx(d, -R);
  while (true) {
    int64_t r2 = 0;
    for (int i = 0; i < d; ++i) r2 += idx[i] * idx[i];
    if (r2 >= 1 && r2 <= r2max) ++count[size_t(r2)];
    int axis = d - 1;
    while (axis >= 0) {
      if (idx[axis] < R) {
        ++idx[axis];
        break;
      }
      idx[axis] = -R;
      --axis;
    }
    if (axis < 0) break;
  }
  double sum = 0.0;
  for (int64_t r2 = 1; r2 <= r2max; ++r2) {
    if (count[size_t(r2)] == 0) continue;
    sum += double(count[size_t(r2)]) * std::pow(double(r2), 0.5 * p);
  }
  return sum;
}

}  // namespace rcmlab
