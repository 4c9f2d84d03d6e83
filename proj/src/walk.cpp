#include "rcmlab/walk.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rcmlab {

BoxOperator build_box_operator(const EnvView& env, const LatticeRegion& region) {
  BoxOperator op;
  op.region = region;
  int d = region.d;
  op.degree = 2 * d;
  int64_t n = region.site_count();
  op.rate.assign(n, 0.0);
  op.weight.assign(size_t(n) * op.degree, 0.0);
  op.nbr.assign(size_t(n) * op.degree, -1);
  for (int64_t i = 0; i < n; ++i) {
    Point x = region.site_at(i);
    double r = 0.0;
    for (int axis = 0; axis < d; ++axis) {
      for (int dir = 0; dir < 2; ++dir) {
        bool positive = dir == 0;
        Point y = offset(x, axis, positive ? +1 : -1);
        bool inside = region.contains(y);
        if (!inside && region.boundary == Boundary::free_sites) continue;
        double v = env.edge_value(incident_edge(x, axis, positive));
        if (v == 0.0) continue;
        size_t slot = size_t(i) * op.degree + 2 * axis + dir;
        op.weight[slot] = v;
        op.nbr[slot] = inside ? region.index_of(y) : -1;
        r += v;
      }
    }
    op.rate[i] = r;
    op.max_rate = std::max(op.max_rate, r);
  }
  return op;
}

JumpTable JumpTable::build(const EnvView& env, const LatticeRegion& region) {
  JumpTable jt;
  jt.op = build_box_operator(env, region);
  const BoxOperator& op = jt.op;
  jt.cum.resize(op.weight.size());
  for (int64_t i = 0; i < op.sites(); ++i) {
    double acc = 0.0;
    for (int s = 0; s < op.degree; ++s) {
      acc += op.weight[size_t(i) * op.degree + s];
      jt.cum[size_t(i) * op.degree + s] = acc;
    }
  }
  return jt;
}

int64_t JumpTable::sample_target(int64_t i, double u) const {
  const int deg = op.degree;
  const double* c = &cum[size_t(i) * deg];
  double x = u * op.rate[i];
  int slot = deg - 1;
  for (int s = 0; s < deg; ++s) {
    if (x < c[s]) {
      slot = s;
      break;
    }
  }
  // guard against landing on a zero-weight trailing slot through rounding
  while (slot > 0 && op.weight[size_t(i) * deg + slot] == 0.0) --slot;
  return slot;
}

// ---- recorded trajectories ------------------------------------------------

const std::vector<double>& WalkTrajectory::clock_prefix() const {
  if (clock_prefix_.size() != epochs.size() + 1) {
    clock_prefix_.resize(epochs.size() + 1);
    clock_prefix_[0] = 0.0;
    for (size_t k = 0; k < epochs.size(); ++k) {
      double t1 = (k + 1 < epochs.size()) ? epochs[k + 1] : end_time;
      clock_prefix_[k + 1] = clock_prefix_[k] + rates[k] * (t1 - epochs[k]);
    }
  }
  return clock_prefix_;
}

WalkTrajectory simulate_vsrw(const EnvView& env, const Point& start,
                             double horizon, CounterRng& rng) {
  if (horizon < 0.0)
    throw std::invalid_argument("simulate_vsrw: negative horizon");
  WalkTrajectory traj;
  traj.d = env.dim();
  traj.start = start;
  traj.horizon = horizon;
  auto outcome = run_lazy_vsrw(
      env, start, horizon, rng,
      [&](double t0, double, const Point& site, const double*, double rate) {
        if (traj.epochs.empty() || traj.sites.back() != site) {
          traj.epochs.push_back(t0);
          traj.sites.push_back(site);
          traj.rates.push_back(rate);
        }
        return true;
      },
      [&](double, const Point&) { return true; });
  traj.end_time = outcome.end_time;
  traj.absorbed = false;
  return traj;
}

WalkTrajectory simulate_vsrw_boxed(const JumpTable& jt, const Point& start,
                                   double horizon, CounterRng& rng) {
  if (!jt.op.region.contains(start))
    throw std::invalid_argument("simulate_vsrw_boxed: start outside region");
  WalkTrajectory traj;
  traj.d = jt.op.region.d;
  traj.start = start;
  traj.horizon = horizon;
  auto outcome = run_boxed_vsrw(
      jt, jt.op.region.index_of(start), horizon, rng,
      [&](double t0, double, int64_t site) {
        traj.epochs.push_back(t0);
        traj.sites.push_back(jt.op.region.site_at(site));
        traj.rates.push_back(jt.op.rate[site]);
        return true;
      },
      [&](double, int64_t) { return true; });
  traj.end_time = outcome.end_time;
  traj.absorbed = outcome.absorbed;
  return traj;
}

double clock_value(const WalkTrajectory& traj, double t) {
  if (t < 0.0 || t > traj.end_time)
    throw std::invalid_argument("clock_value: t outside simulated range");
  const auto& cp = traj.clock_prefix();
  // find holding interval containing t
  auto it = std::upper_bound(traj.epochs.begin(), traj.epochs.end(), t);
  size_t k = size_t(it - traj.epochs.begin()) - 1;
  return cp[k] + traj.rates[k] * (t - traj.epochs[k]);
}

double weighted_occupation(const WalkTrajectory& traj, double t,
                           const std::function<double(const Point&)>& weight) {
  if (t < 0.0 || t > traj.end_time)
    throw std::invalid_argument("weighted_occupation: t outside range");
  double acc = 0.0;
  for (size_t k = 0; k < traj.epochs.size(); ++k) {
    double t0 = traj.epochs[k];
    if (t0 >= t) break;
    double t1 = (k + 1 < traj.epochs.size()) ? traj.epochs[k + 1] : traj.end_time;
    acc += weight(traj.sites[k]) * (std::min(t1, t) - t0);
  }
  return acc;
}

Point csrw_position(const WalkTrajectory& traj, double s) {
  const auto& cp = traj.clock_prefix();
  if (s < 0.0 || s > cp.back())
    throw std::invalid_argument(
        "csrw_position: clock value beyond simulated horizon");
  // upper_bound gives the first prefix value > s, so k satisfies
  // cp[k] <= s < cp[k+1]: the right-continuous inverse lands in interval k
  auto it = std::upper_bound(cp.begin(), cp.end(), s);
  size_t k = size_t(it - cp.begin()) - 1;
  if (k >= traj.sites.size()) k = traj.sites.size() - 1;  // terminal clock
  return traj.sites[k];
}

std::optional<double> exit_time(const WalkTrajectory& traj, const Point& center,
                                double R, ExitNorm norm) {
  for (size_t k = 0; k < traj.sites.size(); ++k) {
    double dist = (norm == ExitNorm::sup)
                      ? double(sup_dist(traj.sites[k], center, traj.d))
                      : l2_dist(traj.sites[k], center, traj.d);
    if (dist > R) return traj.epochs[k];
  }
  return std::nullopt;
}

// ---- streamed clock helpers ----------------------------------------------

namespace {

// Accumulates int w dt over segments, sampling a value at each grid time.
struct GridAccumulator {
  const std::vector<double>* grid;  // ascending times
  std::vector<double> values;
  double acc = 0.0;
  size_t next = 0;

  explicit GridAccumulator(const std::vector<double>& g)
      : grid(&g), values(g.size(), 0.0) {}

  // advance over [t0, t1) with constant weight w
  void advance(double t0, double t1, double w) {
    while (next < grid->size() && (*grid)[next] <= t1) {
      values[next] = acc + w * ((*grid)[next] - t0);
      ++next;
    }
    acc += w * (t1 - t0);
  }
  bool done() const { return next >= grid->size(); }
};

}  // namespace

std::vector<double> rescaled_clock_series(const EnvView& env, int64_t n,
                                          const std::vector<double>& t_grid,
                                          CounterRng& rng) {
  if (n < 2) throw std::invalid_argument("rescaled_clock_series: n >= 2");
  if (!std::is_sorted(t_grid.begin(), t_grid.end()))
    throw std::invalid_argument("rescaled_clock_series: grid must ascend");
  double n2 = double(n) * double(n);
  std::vector<double> scaled(t_grid.size());
  for (size_t i = 0; i < t_grid.size(); ++i) scaled[i] = n2 * t_grid[i];
  double horizon = scaled.empty() ? 0.0 : scaled.back();
  GridAccumulator ga(scaled);
  run_lazy_vsrw(
      env, Point{}, horizon, rng,
      [&](double t0, double t1, const Point&, const double*, double rate) {
        ga.advance(t0, t1, rate);
        return !ga.done();
      },
      [&](double, const Point&) { return true; });
  double denom = n2 * std::log(double(n));
  for (double& v : ga.values) v /= denom;
  return ga.values;
}

std::vector<double> rescaled_truncated_clock_series(
    const ConductanceField& field, int64_t n, const std::vector<double>& t_grid,
    double a, double K, CounterRng& rng) {
  if (n < 2)
    throw std::invalid_argument("rescaled_truncated_clock_series: n >= 2");
  EnvView env = full_view(field);  // the walk itself is not truncated
  double cutoff = a * double(n) * double(n);
  double ball_sq = K * double(n) * K * double(n);  // Euclidean |x| <= Kn
  int d = field.dim();
  double n2 = double(n) * double(n);
  std::vector<double> scaled(t_grid.size());
  for (size_t i = 0; i < t_grid.size(); ++i) scaled[i] = n2 * t_grid[i];
  double horizon = scaled.empty() ? 0.0 : scaled.back();
  GridAccumulator ga(scaled);
  run_lazy_vsrw(
      env, Point{}, horizon, rng,
      [&](double t0, double t1, const Point& site, const double* vals,
          double) {
        double w = 0.0;
        if (double(l2sq_norm(site, d)) <= ball_sq) {
          for (int s = 0; s < 2 * d; ++s)
            if (vals[s] <= cutoff) w += vals[s];
        }
        ga.advance(t0, t1, w);
        return true;  // must run to the horizon: the weight varies along the path
      },
      [&](double, const Point&) { return true; });
  double denom = n2 * std::log(double(n));
  for (double& v : ga.values) v /= denom;
  return ga.values;
}

std::vector<double> rescaled_csrw_marginal(const EnvView& env, int64_t n,
                                           double t, bool log_time_scale,
                                           CounterRng& rng) {
  if (n < 2) throw std::invalid_argument("rescaled_csrw_marginal: n >= 2");
  if (t < 0.0) throw std::invalid_argument("rescaled_csrw_marginal: t >= 0");
  int d = env.dim();
  double n2 = double(n) * double(n);
  double target = n2 * t * (log_time_scale ? std::log(double(n)) : 1.0);
  Point pos{};
  if (target > 0.0) {
    double clock = 0.0;
    bool reached = false;
    // generous real-time horizon; the clock dominates real time since mu >= 1
    // away from truncation, but guard with growth retries just in case
    double horizon = std::max(4.0 * target, 1.0);
    while (!reached) {
      clock = 0.0;
      auto outcome = run_lazy_vsrw(
          env, Point{}, horizon, rng,
          [&](double t0, double t1, const Point& site, const double*,
              double rate) {
            if (clock + rate * (t1 - t0) >= target) {
              pos = site;
              return false;  // clock target hit mid-hold
            }
            clock += rate * (t1 - t0);
            return true;
          },
          [&](double, const Point&) { return true; });
      reached = outcome.stopped_early;
      if (!reached) horizon *= 4.0;  // rerun with a longer horizon (rare)
      if (!reached && horizon > 1e12 * std::max(target, 1.0))
        throw std::runtime_error(
            "rescaled_csrw_marginal: clock target unreachable");
    }
  }
  std::vector<double> out(d);
  for (int i = 0; i < d; ++i) out[i] = double(pos.c[i]) / double(n);
  return out;
}

}  // namespace rcmlab
