#include "bifcurrent/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bifcurrent {

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  const std::vector<double> w(x.size(), 1.0);
  return linear_fit(x, y, w);
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y,
                     std::span<const double> w) {
  if (x.size() != y.size() || x.size() != w.size() || x.size() < 2)
    throw std::invalid_argument("linear_fit: need >= 2 points");
  double sw = 0, mx = 0, my = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sw += w[k];
    mx += w[k] * x[k];
    my += w[k] * y[k];
  }
  mx /= sw;
  my /= sw;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += w[k] * (x[k] - mx) * (x[k] - mx);
    sxy += w[k] * (x[k] - mx) * (y[k] - my);
    syy += w[k] * (y[k] - my) * (y[k] - my);
  }
  LinearFit f;
  f.n = x.size();
  if (sxx == 0) throw std::invalid_argument("linear_fit: degenerate abscissae");
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  const double sse = std::max(0.0, syy - f.slope * sxy);
  f.r2 = syy > 0 ? 1 - sse / syy : 1;
  // residual-scaled: weights only need to be relative
  const double n = double(x.size());
  f.slope_stderr = x.size() > 2 ? std::sqrt(sse / (n - 2) / sxx) : 0;
  return f;
}

MeanStderr mean_stderr(std::span<const double> v) {
  MeanStderr r;
  r.n = v.size();
  if (v.empty()) return r;
  double m = 0;
  for (double x : v) m += x;
  m /= double(v.size());
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  r.mean = m;
  r.stddev = v.size() > 1 ? std::sqrt(ss / double(v.size() - 1)) : 0;
  r.stderr_ = r.stddev / std::sqrt(double(v.size()));
  return r;
}

MeanStderr batch_means(std::span<const double> v, std::size_t n_batches) {
  MeanStderr r = mean_stderr(v);
  n_batches = std::min(n_batches, v.size());
  if (n_batches < 2) return r;
  const std::size_t len = v.size() / n_batches;
  std::vector<double> means;
  for (std::size_t b = 0; b < n_batches; ++b) {
    double s = 0;
    for (std::size_t k = b * len; k < (b + 1) * len; ++k) s += v[k];
    means.push_back(s / double(len));
  }
  r.stderr_ = mean_stderr(means).stderr_;
  return r;
}

ChiSquare chi_square(std::span<const double> observed, std::span<const double> expected) {
  if (observed.size() != expected.size() || observed.size() < 2)
    throw std::invalid_argument("chi_square: need >= 2 matching cells");
  ChiSquare c;
  for (std::size_t k = 0; k < observed.size(); ++k)
    c.statistic += (observed[k] - expected[k]) * (observed[k] - expected[k]) / expected[k];
  c.dof = double(observed.size() - 1);
  boost::math::chi_squared dist(c.dof);
  c.p_value = boost::math::cdf(boost::math::complement(dist, c.statistic));
  return c;
}

ChiSquare chi_square_uniform(std::span<const double> counts) {
  double total = 0;
  for (double c : counts) total += c;
  std::vector<double> expected(counts.size(), total / double(counts.size()));
  return chi_square(counts, expected);
}

KsTest ks_two_sample(std::vector<double> a, std::vector<double> b, double alpha) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double n = double(a.size()), m = double(b.size());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / n - double(j) / m));
  }
  KsTest r;
  r.statistic = d;
  // c(alpha) = sqrt(-ln(alpha / 2) / 2)
  r.critical = std::sqrt(-std::log(alpha / 2) / 2) * std::sqrt((n + m) / (n * m));
  r.reject = d > r.critical;
  return r;
}

}  // namespace bifcurrent
