#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rcmlab/rng.hpp"
#include "rcmlab/special.hpp"
#include "rcmlab/stats.hpp"
#include "rcmlab/tail_law.hpp"

using namespace rcmlab;

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(make_tail_law(1), std::invalid_argument);
  CHECK_THROWS_AS(make_tail_law(6), std::invalid_argument);
  CHECK_THROWS_AS(make_tail_law(3, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(make_tail_law(3, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_tail_law(3, 0.2, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(make_tail_law(3, 0.2, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(make_tail_law(3, 0.2, 1.0, 2.0), std::invalid_argument);
  // log-corrected branch only defined on top of the alpha = 1 tail
  CHECK_THROWS_AS(make_tail_law(3, 0.2, 0.5, 0.5), std::invalid_argument);
  CHECK(make_tail_law(3).tail_c == doctest::Approx(1.0 / 6.0));
  CHECK(make_tail_law(2).tail_c == doctest::Approx(0.25));
}

TEST_CASE("default law: survival is exactly tail_c / u") {
  TailLaw law = make_tail_law(3);
  CHECK(law.survival(0.5) == 1.0);
  CHECK(law.survival(1.0) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  for (double u : {1.0, 2.0, 10.0, 1e4, 1e8})
    CHECK(law.survival(u) == doctest::Approx(1.0 / (6.0 * u)).epsilon(1e-14));
  CHECK(law.cdf(1.0) == doctest::Approx(5.0 / 6.0));
  CHECK(law.cdf_left(1.0) == 0.0);  // atom at 1 carries mass 5/6
  CHECK(law.cdf_left(1.0 + 1e-9) == doctest::Approx(law.cdf(1.0)).epsilon(1e-8));
}

TEST_CASE("quantile inverts the survival function") {
  TailLaw law = make_tail_law(2);  // tail_c = 1/4
  // atom region
  CHECK(law.quantile(0.0) == 1.0);
  CHECK(law.quantile(0.5) == 1.0);
  CHECK(law.quantile(0.75) == 1.0);
  // tail region: P(mu > q) = 1 - p
  for (double p : {0.8, 0.9, 0.99, 0.999999}) {
    double q = law.quantile(p);
    CHECK(q > 1.0);
    CHECK(law.survival(q) == doctest::Approx(1.0 - p).epsilon(1e-12));
  }
  CHECK_THROWS_AS(law.quantile(1.0), std::invalid_argument);
  CHECK_THROWS_AS(law.quantile(-0.1), std::invalid_argument);

  // alpha < 1 branch
  TailLaw frac = make_tail_law(3, 0.2, 0.5);
  double q = frac.quantile(0.95);
  CHECK(frac.survival(q) == doctest::Approx(0.05).epsilon(1e-12));

  // log-corrected branch: bisection inverse, less tight but still accurate
  TailLaw logc = make_tail_law(3, 0.2, 1.0, 0.5);
  for (double p : {0.9, 0.99, 0.9999}) {
    double ql = logc.quantile(p);
    CHECK(logc.survival(ql) == doctest::Approx(1.0 - p).epsilon(1e-9));
  }
}

TEST_CASE("closed-form truncated moments, alpha = 1") {
  TailLaw law = make_tail_law(3);  // tail_c = 1/6
  const double c6 = 1.0 / 6.0;
  for (double c : {1.0, 4.0, 100.0, 1e6}) {
    CHECK(law.truncated_mean(c) ==
          doctest::Approx(5.0 / 6.0 + c6 * std::log(c)).epsilon(1e-14));
    CHECK(law.truncated_second_moment(c) ==
          doctest::Approx(5.0 / 6.0 + c6 * (c - 1.0)).epsilon(1e-14));
    CHECK(law.capped_mean(c) ==
          doctest::Approx(1.0 + c6 * std::log(c)).epsilon(1e-14));
    CHECK(law.truncated_site_mean(c) ==
          doctest::Approx(6.0 * law.truncated_mean(c)).epsilon(1e-14));
  }
  // the site-mean shape the clock scaling rests on: 2d - 1 + ln c
  CHECK(law.truncated_site_mean(256.0) ==
        doctest::Approx(5.0 + std::log(256.0)).epsilon(1e-14));
  CHECK(law.truncated_mean(0.5) == 0.0);
}

TEST_CASE("closed-form truncated moments, alpha < 1") {
  TailLaw law = make_tail_law(3, 0.25, 0.5);
  double c = 50.0;
  // branch density alpha u^{-alpha-1}: integral alpha/(1-alpha) (c^{1-a} - 1)
  double expect = 0.75 + 0.25 * (0.5 / 0.5) * (std::sqrt(c) - 1.0);
  CHECK(law.truncated_mean(c) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("capped mean equals 1 + integral of the survival function") {
  // holds for every parameter set; exercises the numeric rho branch
  for (double rho : {0.0, 0.5, -1.0}) {
    TailLaw law = make_tail_law(3, 0.2, 1.0, rho);
    for (double c : {2.0, 7.5, 40.0}) {
      double direct = 1.0 + adaptive_simpson(
                                [&](double u) { return law.survival(u); }, 1.0,
                                c, 1e-11);
      CHECK(law.capped_mean(c) == doctest::Approx(direct).epsilon(1e-9));
    }
  }
}

TEST_CASE("log-corrected branch is continuous and monotone") {
  TailLaw law = make_tail_law(3, 0.2, 1.0, 1.0);
  // flat at 1 up to u0 = e, then e (ln u)^rho / u
  CHECK(law.branch_survival(1.5) == 1.0);
  CHECK(law.branch_survival(std::exp(1.0) - 1e-9) == doctest::Approx(1.0));
  CHECK(law.branch_survival(std::exp(1.0) + 1e-9) ==
        doctest::Approx(1.0).epsilon(1e-6));
  double prev = 1.0;
  for (double u = 3.0; u < 1e6; u *= 1.7) {
    double s = law.branch_survival(u);
    CHECK(s < prev);
    prev = s;
  }
}

TEST_CASE("sampler matches the law (KS on 200k draws)") {
  TailLaw law = make_tail_law(2);
  CounterRng rng{20240817, 0};
  const int n = 200000;
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) xs[i] = law.sample(rng);
  double ks = ks_distance(
      xs, [&](double u) { return law.cdf(u); },
      [&](double u) { return law.cdf_left(u); });
  // 1% critical value 1.63/sqrt(n)
  CHECK(ks < 1.63 / std::sqrt(double(n)));

  // sample_from_uniform is the same quantile map
  CHECK(law.sample_from_uniform(0.25) == 1.0);
  CHECK(law.sample_from_uniform(0.875) == law.quantile(0.875));
}
