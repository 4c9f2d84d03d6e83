#pragma once
// Marginal law of an edge conductance.
//
// Exact mixture on [1, inf): an atom at 1 with mass 1 - tail_c and a
// heavy-tailed branch with mass tail_c, arranged so that the survival function
// is exactly
//     P(mu > u) = tail_c * B(u),  u >= 1,
// with B(u) = u^{-alpha} for rho = 0 and, for rho != 0,
// B(u) = 1 on [1, u0] and B(u) = c (ln u)^rho / u beyond u0 = e (c = e so the
// branch is continuous and equal to 1 at u0; monotone for |rho| <= 1).
// With the defaults tail_c = 1/(2d), alpha = 1, rho = 0 this gives
// P(mu > u) = 1/(2du) exactly for every u >= 1.

#include <cstdint>

#include "rcmlab/rng.hpp"

namespace rcmlab {

struct TailLaw {
  int d = 3;
  double tail_c = 1.0 / 6.0;
  double alpha = 1.0;
  double rho = 0.0;
  double u0 = 1.0;        // start of the decaying part of the rho branch
  double branch_coeff = 1.0;

  double atom_mass() const { return 1.0 - tail_c; }
  double branch_survival(double u) const;  // B(u), B(1) = 1
  double survival(double u) const;         // P(mu > u)
  double cdf(double u) const;              // P(mu <= u)
  double cdf_left(double u) const;         // P(mu < u)
  double quantile(double p) const;         // generalized inverse, p in [0,1)
  double sample(CounterRng& rng) const { return quantile(rng.next_unit()); }
  double sample_from_uniform(double u) const { return quantile(u); }

  // E[mu 1{mu <= c}]; closed form for rho = 0, numeric otherwise.
  double truncated_mean(double c) const;
  // E[mu^2 1{mu <= c}]
  double truncated_second_moment(double c) const;
  // E[min(mu, c)]
  double capped_mean(double c) const;
  // 2d * truncated_mean(c): mean truncated site conductance on the full lattice
  double truncated_site_mean(double c) const { return 2.0 * d * truncated_mean(c); }
};

// Validates parameters: d in [2,5], tail_c in (0,1), alpha in (0,1],
// rho in [-1,1].  Throws std::invalid_argument on violation.
TailLaw make_tail_law(int d, double tail_c = -1.0, double alpha = 1.0,
                      double rho = 0.0);

}  // namespace rcmlab
