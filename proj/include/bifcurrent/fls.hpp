#pragma once

#include "bifcurrent/brownian.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

namespace bifcurrent {

class ChainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Euclidean radius ratio tanh(r/2) / tanh(R/2) of the two spheres seen in the
/// disk model centred at their common centre.
double harmonic_ratio(double r, double R);

/// Poisson kernel (1 - u^2) / (1 - 2u cos theta + u^2): density of the exit
/// angle from the unit disk started at radius u, relative to the exit angle
/// measure normalized to mass one; theta is measured from the start angle.
double harmonic_exit_density(double u, double theta);

/// Smallest value of the kernel, (1 - u) / (1 + u): the largest admissible p.
double harmonic_p_max(double r, double R);

struct FLSConfig {
  double r = 0.15;
  double R = 0.45;
  double p = 0.49;
  int max_cycles = 10000;
  SphereRunOptions run;

  /// Throws ConfigError unless 0 < r < R, 2R < systole, R < inradius and
  /// 0 < p <= harmonic_p_max(r, R).
  void validate(const FuchsianSurface& s) const;
};

struct DiscretizationRun {
  /// g_k with x_k on the R-sphere about (g_1 ... g_k) i
  std::vector<Word> increments;
  /// T_1 < T_2 < ... (T_0 = 0, the chain starts on the R-sphere about i)
  std::vector<double> stop_times;
  /// r-to-R cycles rejected before each acceptance
  std::vector<int> rejected_cycles;
  /// accepted exit angles on the R-sphere, measured in the centred disk
  std::vector<double> exit_angles;
  /// exit angles relative to the start on the r-sphere, every cycle
  std::vector<double> relative_angles;
  std::size_t cycles = 0;
  std::uint64_t seed = 0;

  /// g_1 ... g_k
  Word position(std::size_t k) const;
};

/// The stopping-time chain. The start is uniform on the R-sphere about i
/// unless start_angle is given.
DiscretizationRun run_chain(const FuchsianSurface& s, const FLSConfig& cfg, std::size_t n_steps,
                            std::uint64_t seed, std::optional<double> start_angle = std::nullopt);

/// tau_hat = T_n / n with a batch-means standard error over the increments
/// T_k - T_(k-1).
MeanStderr estimate_tau(const DiscretizationRun& run);

/// Normalized frequencies of the k-th increments over an ensemble of chains
/// (k = 1 by default: independent first-step draws).
std::map<Word, double> empirical_mu(const std::vector<DiscretizationRun>& runs, std::size_t k = 1);

/// Log-linear fit of the empirical survival function P(T_k - T_(k-1) > s)
/// against s, over the s grid up to the quantile 1 - 10 / n.
LinearFit stopping_time_tail(const std::vector<double>& durations, std::size_t grid = 30);

/// Point on the rho-sphere about i at disk angle theta.
HPoint sphere_point(double rho, double theta);

}  // namespace bifcurrent
