#include "bifcurrent/fls.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace bifcurrent {

double harmonic_ratio(double r, double R) { return std::tanh(r / 2) / std::tanh(R / 2); }

double harmonic_exit_density(double u, double theta) {
  if (!(u >= 0 && u < 1)) throw std::domain_error("harmonic_exit_density: u outside [0, 1)");
  return (1 - u * u) / (1 - 2 * u * std::cos(theta) + u * u);
}

double harmonic_p_max(double r, double R) {
  const double u = harmonic_ratio(r, R);
  return (1 - u) / (1 + u);
}

void FLSConfig::validate(const FuchsianSurface& s) const {
  if (!(r > 0 && r < R)) throw ConfigError("fls: need 0 < r < R");
  if (!(2 * R < s.systole)) throw ConfigError("fls: balls of radius R must be disjoint (2R < systole)");
  // the R-ball must sit inside one Dirichlet cell so that the reduced chart
  // sees the sphere about i
  if (!(R < s.inradius)) throw ConfigError("fls: R must be below the inradius of the domain");
  if (!(p > 0 && p <= harmonic_p_max(r, R))) throw ConfigError("fls: p above the Poisson kernel minimum");
  if (max_cycles < 1) throw ConfigError("fls: max_cycles must be positive");
}

Word DiscretizationRun::position(std::size_t k) const {
  Word w;
  for (std::size_t j = 0; j < k; ++j) w *= increments[j];
  return w;
}

HPoint sphere_point(double rho, double theta) {
  // w = (z - i) / (z + i) = tanh(rho/2) e^(i theta)
  const std::complex<double> i(0, 1);
  const std::complex<double> w = std::polar(std::tanh(rho / 2), theta);
  return HPoint(i * (1.0 + w) / (1.0 - w));
}

DiscretizationRun run_chain(const FuchsianSurface& s, const FLSConfig& cfg, std::size_t n_steps,
                            std::uint64_t seed, std::optional<double> start_angle) {
  cfg.validate(s);
  DiscretizationRun run;
  run.seed = seed;
  NormalSource normal(seed);
  const double angle0 = start_angle ? *start_angle : 2 * std::numbers::pi * normal.uniform();
  FrameWalker walker(s, sphere_point(cfg.R, angle0));
  const double u = harmonic_ratio(cfg.r, cfg.R);

  double t = 0;
  Word last;
  for (std::size_t k = 0; k < n_steps; ++k) {
    int rejected = 0;
    for (;;) {
      if (rejected >= cfg.max_cycles) throw ChainError("run_chain: no acceptance within max_cycles");
      t += run_to_sphere(walker, normal, cfg.r, Crossing::inward, cfg.run);
      const double from = angle_at_base(walker.z0());
      t += run_to_sphere(walker, normal, cfg.R, Crossing::outward, cfg.run);
      const double to = angle_at_base(walker.z0());
      ++run.cycles;
      run.relative_angles.push_back(std::remainder(to - from, 2 * std::numbers::pi));
      if (normal.uniform() * harmonic_exit_density(u, to - from) < cfg.p) {
        run.exit_angles.push_back(to);
        break;
      }
      ++rejected;
    }
    run.increments.push_back(last.inverse() * walker.word());
    last = walker.word();
    run.stop_times.push_back(t);
    run.rejected_cycles.push_back(rejected);
  }
  return run;
}

MeanStderr estimate_tau(const DiscretizationRun& run) {
  std::vector<double> gaps;
  double prev = 0;
  for (double t : run.stop_times) {
    gaps.push_back(t - prev);
    prev = t;
  }
  // increments are i.i.d. by the strong Markov property; batch means guards
  // against anything we missed
  return batch_means(gaps);
}

std::map<Word, double> empirical_mu(const std::vector<DiscretizationRun>& runs, std::size_t k) {
  std::map<Word, double> mu;
  double n = 0;
  for (const auto& r : runs) {
    if (r.increments.size() < k) continue;
    mu[r.increments[k - 1]] += 1;
    n += 1;
  }
  for (auto& [w, f] : mu) f /= n;
  return mu;
}

LinearFit stopping_time_tail(const std::vector<double>& durations, std::size_t grid) {
  if (durations.size() < 100) throw std::invalid_argument("stopping_time_tail: need >= 100 samples");
  std::vector<double> d = durations;
  std::sort(d.begin(), d.end());
  const double n = double(d.size());
  // stop where about 10 samples remain in the tail
  const double s_max = d[d.size() - 10];
  const double s_min = d[d.size() / 2];
  std::vector<double> xs, ys;
  for (std::size_t j = 0; j < grid; ++j) {
    const double s = s_min + (s_max - s_min) * double(j) / double(grid - 1);
    const auto above = double(d.end() - std::upper_bound(d.begin(), d.end(), s));
    xs.push_back(s);
    ys.push_back(std::log(above / n));
  }
  return linear_fit(xs, ys);
}

}  // namespace bifcurrent
