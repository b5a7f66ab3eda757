#pragma once

#include "bifcurrent/fls.hpp"
#include "bifcurrent/representation.hpp"

#include <map>
#include <string>
#include <vector>

namespace bifcurrent {

struct LyapunovEstimate {
  /// preferred estimator (see each method)
  double value = 0;
  double stderr_ = 0;
  std::string method;
  /// endpoint average of (1/t) log||rho||, or the per-draw average for the
  /// lattice methods
  double endpoint = 0;
  double endpoint_stderr = 0;
  /// regression slope of log||rho|| against time (or step)
  double slope = 0;
  double slope_stderr = 0;
  std::size_t n = 0;
  std::size_t excluded = 0;
  std::map<std::string, double> params;
};

/// Words at common checkpoints along independent randomized paths; reused
/// for every representation (common random numbers).
struct WordEnsemble {
  std::string kind;
  std::vector<double> times;
  std::vector<std::vector<Word>> words;  ///< words[path][checkpoint]
  std::map<std::string, double> params;
};

struct PathEnsembleOptions {
  double t_max = 40;
  std::size_t n_paths = 400;
  std::uint64_t seed = 1;
  /// checkpoint spacing in time units
  double checkpoint = 0.5;
  BrownianOptions brownian;
  /// geodesic rays: frame step length
  double ray_step = 0.05;
};

/// Closed Brownian loops (fundamental-domain words) from i.
WordEnsemble brownian_ensemble(const FuchsianSurface& s, const PathEnsembleOptions& opt);

/// Unit-speed geodesic rays from i in uniform random directions.
WordEnsemble geodesic_ensemble(const FuchsianSurface& s, const PathEnsembleOptions& opt);

/// Ray in a given direction (disk angle at i), words at the checkpoints.
std::vector<Word> geodesic_ray_words(const FuchsianSurface& s, double angle, double t_max,
                                     double checkpoint, double step);

/// Positions g_1 ... g_k of FLS chains, k = 1..n (time = step count).
WordEnsemble chain_ensemble(const std::vector<DiscretizationRun>& runs);

/// For every path: slope of log||rho(w_k)|| against t_k over t_k >= fit_from
/// * t_max, and the endpoint log||rho(w_last)|| / t_last. Both averaged over
/// paths with path-level standard errors. value = slope unless
/// prefer_endpoint.
LyapunovEstimate chi_from_ensemble(const WordEnsemble& e, const Representation& rho,
                                   double fit_from = 0.25, bool prefer_endpoint = false);

LyapunovEstimate chi_brown(const FuchsianSurface& s, const Representation& rho,
                           const PathEnsembleOptions& opt = {});
LyapunovEstimate chi_geodesic(const FuchsianSurface& s, const Representation& rho,
                              const PathEnsembleOptions& opt = {});
/// (1/n) log||rho(g_1 ... g_n)|| averaged over chains (value = endpoint).
LyapunovEstimate chi_mu(const Representation& rho, const std::vector<DiscretizationRun>& runs);

struct LatticeOptions {
  std::size_t n_draws = 4000;
  /// schedule r_n = r0 + n^exponent, capped at cap
  double r0 = 6;
  double exponent = 0.7;
  double cap = 12;
  /// draws with d(i, gamma i) below this are excluded
  double min_distance = 1;
  bool use_trace = false;
  std::uint64_t seed = 1;
  /// the estimate uses draws n > tail_from * n_draws
  double tail_from = 0.25;
};

double schedule_radius(const LatticeOptions& opt, std::size_t n);

/// Draws gamma_n uniform in B(r_n); shared by every representation.
struct LatticeDraws {
  std::vector<Word> words;
  std::vector<double> d;
  LatticeOptions opt;
};
LatticeDraws lattice_draws(const FuchsianSurface& s, const LatticeOptions& opt);

/// Per-draw statistic (1/(2d)) log||rho(gamma)||^2 or (1/(2d)) log|tr^2|.
/// value: slope of log||rho||^2 (resp. log|tr^2|) against 2d over the tail
/// draws, which removes the O(1) offset; endpoint: plain tail average of the
/// per-draw statistic. Draws with |tr^2| < 1e-12 are excluded for the trace.
LyapunovEstimate chi_lattice(const LatticeDraws& draws, const Representation& rho, bool use_trace);
LyapunovEstimate chi_lattice(const FuchsianSurface& s, const Representation& rho,
                             const LatticeOptions& opt = {});

/// Per-draw lattice statistics (NaN where excluded).
std::vector<double> lattice_statistics(const LatticeDraws& draws, const Representation& rho,
                                       bool use_trace);

struct CensusResult {
  double radius = 0;
  std::size_t ball_size = 0;
  std::size_t bad = 0;
  double bad_fraction = 0;
};

/// Exact count over B(r) of gamma with |(1/2r) log|tr^2 rho(gamma)| - chi_ref| > eps.
CensusResult deviation_census(const FuchsianSurface& s, const Representation& rho, double r,
                              double epsilon, double chi_ref);

struct CensusLadder {
  std::vector<CensusResult> rungs;
  /// log(bad_fraction) against r
  LinearFit fit;
  bool strictly_decreasing = false;
};
CensusLadder census_ladder(const FuchsianSurface& s, const Representation& rho,
                           const std::vector<double>& radii, double epsilon, double chi_ref);

/// max over non-identity gamma in B(r) of log||rho(gamma)|| / log||rho_can(gamma)||.
double fit_comparison_exponent(const FuchsianSurface& s, const Representation& rho, double r);

}  // namespace bifcurrent
