#pragma once
// Continuous-time random walks among conductances.
//
// The variable-speed walk leaves x at rate mu_x (total incident conductance)
// and picks the crossing edge with probability proportional to its
// conductance.  The constant-speed walk is the same chain run by the inverse
// of the clock S_t = int_0^t mu(Y_s) ds, so positions at clock values are read
// off VSRW paths.  Two execution modes:
//   - boxed: precomputed jump tables over a region (free or absorbing
//     boundary), used by the Monte Carlo kernel estimators
//   - lazy: unbounded walks on iid fields, edge values hashed on demand
// Steppers are templates over two callbacks so the hot paths inline:
//   on_segment(t0, t1, ...) for each maximal holding interval (clipped at the
//   horizon), on_arrival(t, ...) after each jump; both return false to stop.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "rcmlab/field.hpp"
#include "rcmlab/geometry.hpp"
#include "rcmlab/rng.hpp"

namespace rcmlab {

// ---- boxed dynamics -------------------------------------------------------

// Per-site rates and incident edge values on a box.  Slot layout: 2*axis + dir
// with dir 0 = +1, dir 1 = -1.  nbr = -1 marks a missing edge (free boundary)
// or the absorbing outside (dirichlet; weight > 0 there).
struct BoxOperator {
  LatticeRegion region;
  int degree = 0;
  std::vector<double> rate;
  std::vector<double> weight;
  std::vector<int64_t> nbr;
  double max_rate = 0.0;

  int64_t sites() const { return region.site_count(); }
};

BoxOperator build_box_operator(const EnvView& env, const LatticeRegion& region);

struct JumpTable {
  BoxOperator op;
  std::vector<double> cum;  // per-site cumulative weights for target sampling

  static JumpTable build(const EnvView& env, const LatticeRegion& region);
  // Sample the jump target slot at site i; requires rate[i] > 0.
  int64_t sample_target(int64_t i, double u) const;
};

struct WalkOutcome {
  double end_time = 0.0;
  int64_t end_site = -1;   // -1 after dirichlet absorption
  bool absorbed = false;
  bool stopped_early = false;  // a callback returned false
  int64_t jumps = 0;
};

template <class Seg, class Arr>
WalkOutcome run_boxed_vsrw(const JumpTable& jt, int64_t start, double horizon,
                           CounterRng& rng, Seg&& on_segment, Arr&& on_arrival) {
  WalkOutcome out;
  const BoxOperator& op = jt.op;
  int64_t site = start;
  double t = 0.0;
  while (true) {
    double r = op.rate[site];
    if (r <= 0.0) {  // stuck (fully truncated site): holds forever
      if (!on_segment(t, horizon, site)) out.stopped_early = true;
      out.end_time = horizon;
      out.end_site = site;
      return out;
    }
    double hold = rng.next_exponential(r);
    double t1 = t + hold;
    if (t1 >= horizon) {
      if (!on_segment(t, horizon, site)) out.stopped_early = true;
      out.end_time = horizon;
      out.end_site = site;
      return out;
    }
    if (!on_segment(t, t1, site)) {
      out.stopped_early = true;
      out.end_time = t1;
      out.end_site = site;
      return out;
    }
    int64_t slot = jt.sample_target(site, rng.next_unit());
    int64_t next = op.nbr[size_t(site) * op.degree + slot];
    ++out.jumps;
    t = t1;
    if (next < 0) {  // absorbed outside (dirichlet boundary)
      out.absorbed = true;
      out.end_time = t;
      out.end_site = -1;
      return out;
    }
    site = next;
    if (!on_arrival(t, site)) {
      out.stopped_early = true;
      out.end_time = t;
      out.end_site = site;
      return out;
    }
  }
}

// ---- lazy dynamics --------------------------------------------------------

struct LazyWalkOutcome {
  double end_time = 0.0;
  Point end_site{};
  bool stopped_early = false;
  int64_t jumps = 0;
};

// Unbounded walk; callbacks additionally see the 2d incident edge values
// (slot order as above) so weighted clocks need no re-hashing.
//   on_segment(t0, t1, const Point&, const double* vals, double rate) -> bool
//   on_arrival(t, const Point&) -> bool
template <class Seg, class Arr>
LazyWalkOutcome run_lazy_vsrw(const EnvView& env, const Point& start,
                              double horizon, CounterRng& rng, Seg&& on_segment,
                              Arr&& on_arrival) {
  LazyWalkOutcome out;
  const int d = env.dim();
  Point site = start;
  double t = 0.0;
  double vals[2 * kMaxDim];
  while (true) {
    double rate = 0.0;
    for (int axis = 0; axis < d; ++axis) {
      vals[2 * axis] = env.edge_value(incident_edge(site, axis, true));
      vals[2 * axis + 1] = env.edge_value(incident_edge(site, axis, false));
      rate += vals[2 * axis] + vals[2 * axis + 1];
    }
    if (rate <= 0.0) {
      if (!on_segment(t, horizon, site, vals, rate)) out.stopped_early = true;
      out.end_time = horizon;
      out.end_site = site;
      return out;
    }
    double t1 = t + rng.next_exponential(rate);
    if (t1 >= horizon) {
      if (!on_segment(t, horizon, site, vals, rate)) out.stopped_early = true;
      out.end_time = horizon;
      out.end_site = site;
      return out;
    }
    if (!on_segment(t, t1, site, vals, rate)) {
      out.stopped_early = true;
      out.end_time = t1;
      out.end_site = site;
      return out;
    }
    double u = rng.next_unit() * rate;
    double acc = 0.0;
    int slot = 2 * d - 1;
    for (int s = 0; s < 2 * d; ++s) {
      acc += vals[s];
      if (u < acc) {
        slot = s;
        break;
      }
    }
    site = offset(site, slot / 2, (slot % 2 == 0) ? +1 : -1);
    t = t1;
    ++out.jumps;
    if (!on_arrival(t, site)) {
      out.stopped_early = true;
      out.end_time = t;
      out.end_site = site;
      return out;
    }
  }
}

// ---- recorded trajectories ------------------------------------------------

struct WalkTrajectory {
  int d = 3;
  Point start{};
  double horizon = 0.0;
  std::vector<double> epochs;  // arrival times; epochs[0] = 0
  std::vector<Point> sites;    // sites[k] held on [epochs[k], epochs[k+1])
  std::vector<double> rates;   // simulation rate mu at sites[k]
  bool absorbed = false;
  double end_time = 0.0;  // horizon, or absorption epoch

  int64_t jump_count() const { return int64_t(epochs.size()) - 1; }
  // cumulative clock at each epoch (computed once on demand)
  const std::vector<double>& clock_prefix() const;

 private:
  mutable std::vector<double> clock_prefix_;
};

// Exact VSRW path on the (optionally truncated) field, unbounded lattice.
WalkTrajectory simulate_vsrw(const EnvView& env, const Point& start,
                             double horizon, CounterRng& rng);
// Boxed variant (free or dirichlet boundary per the region).
WalkTrajectory simulate_vsrw_boxed(const JumpTable& jt, const Point& start,
                                   double horizon, CounterRng& rng);

// S_t = int_0^t mu(Y_s) ds for a recorded path; t must not exceed end_time.
double clock_value(const WalkTrajectory& traj, double t);

// int_0^t w(Y_s) ds for an arbitrary site weight.
double weighted_occupation(const WalkTrajectory& traj, double t,
                           const std::function<double(const Point&)>& weight);

// Position of the constant-speed walk at clock value s (right-continuous
// inverse of S); s must not exceed the terminal clock value.
Point csrw_position(const WalkTrajectory& traj, double s);

enum class ExitNorm { sup, euclidean };

// First arrival epoch strictly outside the ball B(center, R); nullopt if the
// path never leaves it before end_time.  Euclidean by default (the exit-time
// and truncation-event bounds are stated for |.|_2).
std::optional<double> exit_time(const WalkTrajectory& traj, const Point& center,
                                double R, ExitNorm norm = ExitNorm::euclidean);

// S^(n)_t = S_{n^2 t} / (n^2 ln n) on a t-grid, streamed (no stored path).
std::vector<double> rescaled_clock_series(const EnvView& env, int64_t n,
                                          const std::vector<double>& t_grid,
                                          CounterRng& rng);

// Truncated, ball-restricted clock along the *full* walk:
// (n^2 ln n)^{-1} int_0^{n^2 t} mu~(Y_s) 1{|Y_s|_2 <= K n} ds with
// mu~ the site sum of edges <= a n^2 (Euclidean ball, matching the
// truncation-event bounds).
std::vector<double> rescaled_truncated_clock_series(
    const ConductanceField& field, int64_t n, const std::vector<double>& t_grid,
    double a, double K, CounterRng& rng);

// Rescaled constant-speed marginal X_{tau}/n with tau = n^2 (ln n) t (heavy
// scaling) or tau = n^2 t (classical scaling for homogeneous controls).
// Returns the d displacement components divided by n.
std::vector<double> rescaled_csrw_marginal(const EnvView& env, int64_t n,
                                           double t, bool log_time_scale,
                                           CounterRng& rng);

}  // namespace rcmlab
