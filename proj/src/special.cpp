#include "rcmlab/special.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rcmlab {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace {

// series expansion of P(a,x), good for x < a + 1
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// continued fraction for Q(a,x) = 1 - P(a,x), good for x >= a + 1
double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    double an = -double(i) * (double(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double reg_lower_gamma(double a, double x) {
  if (a <= 0.0) throw std::invalid_argument("reg_lower_gamma: a must be > 0");
  if (x < 0.0) throw std::invalid_argument("reg_lower_gamma: x must be >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_contfrac(a, x);
}

double chi2_cdf(int k, double x) {
  if (x <= 0.0) return 0.0;
  return reg_lower_gamma(0.5 * k, 0.5 * x);
}

double gaussian_cube_mass(int d, double s2, double K) {
  double sd = std::sqrt(s2);
  double one = 2.0 * normal_cdf(K / sd) - 1.0;
  double m = 1.0;
  for (int i = 0; i < d; ++i) m *= one;
  return m;
}

double gaussian_interval_mass(double mean, double s2, double lo, double hi) {
  double sd = std::sqrt(s2);
  return normal_cdf((hi - mean) / sd) - normal_cdf((lo - mean) / sd);
}

double gaussian_euclidean_ball_mass(int d, double s2, double K) {
  return chi2_cdf(d, K * K / s2);
}

namespace {

double simpson_rule(const std::function<double(double)>& f, double a, double fa,
                    double b, double fb, double m, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_step(const std::function<double(double)>& f, double a, double fa,
                     double b, double fb, double m, double fm, double whole,
                     double eps, int depth) {
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = simpson_rule(f, a, fa, m, fm, lm, flm);
  double right = simpson_rule(f, m, fm, b, fb, rm, frm);
  double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * eps) {
    return left + right + delta / 15.0;
  }
  return adaptive_step(f, a, fa, m, fm, lm, flm, left, 0.5 * eps, depth - 1) +
         adaptive_step(f, m, fm, b, fb, rm, frm, right, 0.5 * eps, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double rel_tol, double abs_floor,
                        int max_depth) {
  if (a == b) return 0.0;
  double fa = f(a), fb = f(b), m = 0.5 * (a + b), fm = f(m);
  double whole = simpson_rule(f, a, fa, b, fb, m, fm);
  double eps = std::max(std::fabs(whole) * rel_tol, abs_floor);
  return adaptive_step(f, a, fa, b, fb, m, fm, whole, eps, max_depth);
}

}  // namespace rcmlab
