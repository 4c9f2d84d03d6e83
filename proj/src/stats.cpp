#include "rcmlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rcmlab {

SummaryStats summarize(const std::vector<double>& xs) {
  SummaryStats s;
  s.n = int64_t(xs.size());
  if (s.n == 0) return s;
  double mean = 0.0, m2 = 0.0;
  int64_t k = 0;
  for (double x : xs) {
    ++k;
    double delta = x - mean;
    mean += delta / double(k);
    m2 += delta * (x - mean);
  }
  s.mean = mean;
  s.variance = (s.n > 1) ? m2 / double(s.n - 1) : 0.0;
  s.std_error = (s.n > 1) ? std::sqrt(s.variance / double(s.n)) : 0.0;
  return s;
}

SummaryStats batch_summary(const std::vector<double>& xs, int batches) {
  if (batches < 2 || int64_t(xs.size()) < batches)
    throw std::invalid_argument("batch_summary: need >= 2 batches of data");
  int64_t n = int64_t(xs.size());
  std::vector<double> means;
  means.reserve(batches);
  int64_t per = n / batches;
  for (int b = 0; b < batches; ++b) {
    int64_t lo = b * per;
    int64_t hi = (b == batches - 1) ? n : lo + per;
    double s = 0.0;
    for (int64_t i = lo; i < hi; ++i) s += xs[i];
    means.push_back(s / double(hi - lo));
  }
  SummaryStats agg = summarize(means);
  SummaryStats out;
  out.n = n;
  out.mean = agg.mean;
  out.variance = agg.variance;   // variance of batch means
  out.std_error = agg.std_error; // std error of the grand mean
  return out;
}

double ks_distance(std::vector<double> samples,
                   const std::function<double(double)>& cdf,
                   const std::function<double(double)>& cdf_left) {
  if (samples.empty()) throw std::invalid_argument("ks_distance: no samples");
  std::sort(samples.begin(), samples.end());
  double n = double(samples.size());
  double dmax = 0.0;
  for (size_t i = 0; i < samples.size(); ++i) {
    double fx = cdf(samples[i]);
    double fxm = cdf_left(samples[i]);
    double up = (double(i) + 1.0) / n - fx;    // empirical steps above F
    double dn = fxm - double(i) / n;           // F(x-) above empirical
    dmax = std::max({dmax, up, dn});
  }
  return dmax;
}

double ks_distance(std::vector<double> samples,
                   const std::function<double(double)>& cdf) {
  return ks_distance(std::move(samples), cdf, cdf);
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line: need matched arrays, n >= 2");
  LinearFit f;
  f.n = int64_t(x.size());
  double n = double(x.size());
  double sx = 0, sy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_line: degenerate x");
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = (syy == 0.0) ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

double correlation(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("correlation: need matched arrays, n >= 2");
  double n = double(x.size());
  double sx = 0, sy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace rcmlab
