#pragma once
// Scalar special functions and quadrature used by the deterministic targets:
// normal CDF, regularized incomplete gamma (chi-square CDFs), Gaussian
// box/ball masses, and adaptive Simpson integration.

#include <functional>

namespace rcmlab {

double normal_cdf(double x);  // standard normal

// Regularized lower incomplete gamma P(a,x) = gamma(a,x)/Gamma(a), a > 0.
double reg_lower_gamma(double a, double x);

// P(chi^2_k <= x)
double chi2_cdf(int k, double x);

// Mass of N(0, s2 * I_d) in the sup-norm cube [-K, K]^d.
double gaussian_cube_mass(int d, double s2, double K);

// Mass of N(mean, s2) in [lo, hi] (one dimension).
double gaussian_interval_mass(double mean, double s2, double lo, double hi);

// Mass of N(0, s2 * I_d) in the Euclidean ball of radius K.
double gaussian_euclidean_ball_mass(int d, double s2, double K);

// Adaptive Simpson on [a,b] to relative tolerance rel_tol (with an absolute
// floor abs_floor to avoid chasing zeros).  Deterministic.
double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double rel_tol, double abs_floor = 1e-300,
                        int max_depth = 28);

}  // namespace rcmlab
