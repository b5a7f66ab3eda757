#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bifcurrent {

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
  double slope_stderr = 0;
  std::size_t n = 0;
};

/// Ordinary least squares y ~ a + b x.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);
/// Weighted least squares; w are inverse variances (r2 and stderr weighted).
LinearFit linear_fit(std::span<const double> x, std::span<const double> y,
                     std::span<const double> w);

struct MeanStderr {
  double mean = 0;
  double stderr_ = 0;
  double stddev = 0;
  std::size_t n = 0;
};

MeanStderr mean_stderr(std::span<const double> v);

/// Mean with a batch-means standard error (serially correlated samples).
MeanStderr batch_means(std::span<const double> v, std::size_t n_batches = 20);

/// Pearson chi-square against equal cell probabilities; returns the p-value.
struct ChiSquare {
  double statistic = 0;
  double dof = 0;
  double p_value = 0;
};
ChiSquare chi_square_uniform(std::span<const double> counts);
ChiSquare chi_square(std::span<const double> observed, std::span<const double> expected);

/// Two-sample Kolmogorov-Smirnov statistic and its asymptotic critical value
/// c(alpha) sqrt((n + m) / (n m)).
struct KsTest {
  double statistic = 0;
  double critical = 0;
  bool reject = false;
};
KsTest ks_two_sample(std::vector<double> a, std::vector<double> b, double alpha = 0.01);

}  // namespace bifcurrent
