#pragma once
// Deterministic solvers on boxes: heat kernels by uniformization, Green
// functions and effective conductances by preconditioned conjugate gradients,
// plus the Gaussian comparison density and lattice power sums.
//
// Uniformization: with Lambda = max site rate and P = I + L/Lambda,
//   exp(tL) = sum_k pois(Lambda t; k) P^k,
// truncated when the remaining Poisson mass drops below the tolerance;
// weights are computed through log-space recursions so large Lambda*t cannot
// underflow.  The time integral int_0^T exp(sL) ds uses the same matvec
// stream with Poisson upper-tail weights P(N >= k+1)/Lambda.
//
// All reductions are fixed-order (see parallel.hpp), so results are bitwise
// reproducible for any thread count.

#include <array>
#include <cstdint>
#include <vector>

#include "rcmlab/field.hpp"
#include "rcmlab/geometry.hpp"
#include "rcmlab/walk.hpp"

namespace rcmlab {

inline constexpr int64_t kDefaultMatvecBudget = 4'000'000;

// Evolve v <- exp(tau L) v in place; returns the added mass-defect bound.
double uniformize_evolve(const BoxOperator& op, std::vector<double>& v,
                         double tau, double tol,
                         int64_t budget = kDefaultMatvecBudget,
                         int64_t* matvecs = nullptr);

struct KernelField {
  LatticeRegion box;
  Point source;
  std::vector<double> times;                // ascending
  std::vector<std::vector<double>> values;  // values[t][site index]
  double tol = 0.0;
  double mass_defect = 0.0;  // upper bound on lost Poisson mass
  double lambda = 0.0;
  int64_t matvecs = 0;

  double value_at(size_t time_idx, const Point& y) const {
    return box.contains(y) ? values[time_idx][box.index_of(y)] : 0.0;
  }
};

// p_t(source, .) on the box for each time; box boundary mode applies
// (free conserves mass, dirichlet kills it).
KernelField heat_kernel(const EnvView& env, const LatticeRegion& box,
                        const Point& source, std::vector<double> times,
                        double tol, int64_t budget = kDefaultMatvecBudget);

// G_T(y) = int_0^T p_s(source, y) ds for all y in the box.
std::vector<double> heat_kernel_time_integral(
    const EnvView& env, const LatticeRegion& box, const Point& source, double T,
    double tol, int64_t budget = kDefaultMatvecBudget,
    int64_t* matvecs = nullptr);

// Space (and time) multilinear interpolation of a kernel field.  y uses
// absolute lattice coordinates; t must lie within [times.front(),
// times.back()].
double kernel_interpolate(const KernelField& kf,
                          const std::array<double, kMaxDim>& y, double t);

// ---- Monte Carlo kernel estimates -----------------------------------------

struct McKernelEstimate {
  LatticeRegion box;
  Point source;
  std::vector<double> times;
  std::vector<std::vector<uint32_t>> hits;  // hits[t][site index]
  int64_t walkers = 0;
  int64_t total_jumps = 0;

  // Ball-averaged density estimate: hits / (walkers * ball size); stderr from
  // the binomial count.  Ball sites outside the box count as zero hits.
  struct BallValue {
    double mean = 0.0;
    double std_error = 0.0;
    int64_t hits = 0;
    int64_t ball_sites = 0;
  };
  BallValue ball_average(size_t time_idx,
                         const std::vector<Point>& ball) const;
};

// Exact-event walkers on the boxed dynamics (same operator as heat_kernel for
// the same region), positions recorded at each requested time.
McKernelEstimate mc_heat_kernel(const EnvView& env, const LatticeRegion& box,
                                const Point& source, std::vector<double> times,
                                int64_t walkers, uint64_t stream_key);

// ---- stationary solves ----------------------------------------------------

struct GreenField {
  LatticeRegion box;
  Point source;
  std::vector<double> values;
  double tol = 0.0;
  double rel_residual = 0.0;
  int iters = 0;

  double value_at(const Point& y) const {
    return box.contains(y) ? values[box.index_of(y)] : 0.0;
  }
};

// Dirichlet Green function g_B(source, .): solves (D - W) g = delta_source on
// the box with absorption outside (site rates include boundary-leaving edges).
GreenField green(const EnvView& env, const LatticeRegion& box,
                 const Point& source, double tol, int max_iters = 0);

struct CeffResult {
  double conductance = 0.0;  // flux through the source set
  double flux = 0.0;
  double energy = 0.0;  // Dirichlet energy of the solved potential
  double rel_residual = 0.0;
  int iters = 0;
};

// Effective conductance of the network between the source set A (potential 1)
// and the grounded complement of A ∪ W (potential 0); W lists the interior
// sites solved for.  Edges carry env values everywhere on Z^d (zero-valued
// edges are simply absent), so "ground" is everything not passed in.
CeffResult effective_conductance(const EnvView& env,
                                 const LatticeRegion& index_box,
                                 const std::vector<Point>& source_set,
                                 const std::vector<Point>& interior,
                                 double tol);

// C_eff[{x_e, y_e}, B(e, b)^c] with B(e,b) the intersection of the sup-norm
// b-balls around the endpoints (endpoints at potential 1, complement
// grounded).  Nonincreasing in b.
CeffResult gamma_edge(const EnvView& env, const Edge& e, int32_t b, double tol);

// C_eff[{z}, B(z, b+1)^c]
CeffResult gamma_site(const EnvView& env, const Point& z, int32_t b,
                      double tol);

// ---- analytic comparisons -------------------------------------------------

// Gaussian density k_t(x) = (2 pi s2 t)^{-d/2} exp(-|x|^2 / (2 s2 t)).
double gaussian_density(int d, double sigma2, double t, const double* x);
double gaussian_density(int d, double sigma2, double t,
                        const std::vector<double>& x);

// sum over lattice sites 1 <= |x|_2 <= K*n of |x|_2^p (exact enumeration,
// integer-radius bucketing; throws if the bounding box exceeds the budget).
double lattice_power_sum(int d, double K, int64_t n, double p,
                         int64_t site_budget = 400'000'000);

}  // namespace rcmlab
