#pragma once
// Summary statistics, one-sample Kolmogorov-Smirnov distance, least squares.
// All reductions are sequential in index order (determinism).

#include <cstdint>
#include <functional>
#include <vector>

namespace rcmlab {

struct SummaryStats {
  int64_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased sample variance
  double std_error = 0.0;
};

SummaryStats summarize(const std::vector<double>& xs);

// Mean and standard error from disjoint batch means (index-order batches).
SummaryStats batch_summary(const std::vector<double>& xs, int batches);

// One-sample KS distance of `samples` (need not be sorted; a sorted copy is
// made) against a CDF.  `cdf_left` is the left limit F(x-); pass the same
// function as `cdf` for continuous laws.  Handles atoms correctly.
double ks_distance(std::vector<double> samples,
                   const std::function<double(double)>& cdf,
                   const std::function<double(double)>& cdf_left);
double ks_distance(std::vector<double> samples,
                   const std::function<double(double)>& cdf);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  int64_t n = 0;
};

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Pearson correlation (finite-variance inputs only).
double correlation(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace rcmlab
