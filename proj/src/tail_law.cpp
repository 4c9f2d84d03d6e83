#include "rcmlab/tail_law.hpp"

#include <cmath>
#include <stdexcept>

#include "rcmlab/special.hpp"

namespace rcmlab {

double TailLaw::branch_survival(double u) const {
  if (u <= 1.0) return 1.0;
  if (rho == 0.0) return std::pow(u, -alpha);
  if (u <= u0) return 1.0;
  return branch_coeff * std::pow(std::log(u), rho) / u;
}

double TailLaw::survival(double u) const {
  if (u < 1.0) return 1.0;
  return tail_c * branch_survival(u);
}

double TailLaw::cdf(double u) const { return 1.0 - survival(u); }

double TailLaw::cdf_left(double u) const {
  if (u <= 1.0) return 0.0;
  return cdf(u);  // continuous above the atom
}

double TailLaw::quantile(double p) const {
  if (p < 0.0 || p >= 1.0)
    throw std::invalid_argument("TailLaw::quantile: p must be in [0,1)");
  double s = (1.0 - p) / tail_c;  // target branch survival
  if (s >= 1.0) return 1.0;       // atom
  if (rho == 0.0) return std::pow(s, -1.0 / alpha);
  // rho branch: solve branch_coeff (ln u)^rho / u = s, decreasing on (u0, inf)
  double lo = u0, hi = u0 * 2.0;
  while (branch_survival(hi) > s) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    double mid = std::sqrt(lo * hi);  // bisect in log space
    if (branch_survival(mid) > s)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-13 * hi) break;
  }
  return 0.5 * (lo + hi);
}

double TailLaw::truncated_mean(double c) const {
  if (c < 1.0) return 0.0;
  if (rho == 0.0) {
    double branch;
    if (alpha == 1.0)
      branch = std::log(c);
    else
      branch = alpha / (1.0 - alpha) * (std::pow(c, 1.0 - alpha) - 1.0);
    return atom_mass() + tail_c * branch;
  }
  // E[mu 1{mu<=c}] = int_0^c S(t) dt - c S(c), numeric for the log branch
  double integral =
      1.0 + adaptive_simpson([&](double t) { return survival(t); }, 1.0, c,
                             1e-12);
  return integral - c * survival(c);
}

double TailLaw::truncated_second_moment(double c) const {
  if (c < 1.0) return 0.0;
  if (rho == 0.0) {
    double branch;
    if (alpha == 1.0)
      branch = c - 1.0;
    else if (alpha == 2.0)
      branch = 2.0 * std::log(c);
    else
      branch = alpha / (2.0 - alpha) * (std::pow(c, 2.0 - alpha) - 1.0);
    return atom_mass() + tail_c * branch;
  }
  double integral =
      1.0 + adaptive_simpson([&](double t) { return 2.0 * t * survival(t); },
                             1.0, c, 1e-12);
  return integral - c * c * survival(c);
}

double TailLaw::capped_mean(double c) const {
  if (c < 1.0) return c;
  return truncated_mean(c) + c * survival(c);
}

TailLaw make_tail_law(int d, double tail_c, double alpha, double rho) {
  if (d < 2 || d > 5)
    throw std::invalid_argument("make_tail_law: d must be in [2,5]");
  if (tail_c < 0.0) tail_c = 1.0 / (2.0 * d);
  if (!(tail_c > 0.0 && tail_c < 1.0))
    throw std::invalid_argument("make_tail_law: tail_c must be in (0,1)");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("make_tail_law: alpha must be in (0,1]");
  if (rho < -1.0 || rho > 1.0)
    throw std::invalid_argument("make_tail_law: rho must be in [-1,1]");
  if (rho != 0.0 && alpha != 1.0)
    throw std::invalid_argument(
        "make_tail_law: log-corrected branch requires alpha = 1");
  TailLaw law;
  law.d = d;
  law.tail_c = tail_c;
  law.alpha = alpha;
  law.rho = rho;
  law.u0 = std::exp(1.0);
  law.branch_coeff = std::exp(1.0);  // B(u0) = 1 with u0 = e
  return law;
}

}  // namespace rcmlab
