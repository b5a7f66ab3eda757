#include "bifcurrent/lyapunov.hpp"

#include "bifcurrent/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace bifcurrent {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Matrix2d boost_frame(double t) {
  Matrix2d a;
  a << std::exp(t / 2), 0, 0, std::exp(-t / 2);
  return a;
}

// rotation about i by the disk angle theta
Matrix2d rotation_frame(double theta) {
  Matrix2d k;
  k << std::cos(theta / 2), std::sin(theta / 2), -std::sin(theta / 2), std::cos(theta / 2);
  return k;
}

std::size_t checkpoint_stride(double checkpoint, double dt) {
  return std::max<std::size_t>(1, std::size_t(std::llround(checkpoint / dt)));
}

}  // namespace

WordEnsemble brownian_ensemble(const FuchsianSurface& s, const PathEnsembleOptions& opt) {
  BrownianOptions bo = opt.brownian;
  bo.record_every = int(checkpoint_stride(opt.checkpoint, bo.dt));
  auto paths = parallel_map(opt.n_paths, [&](std::size_t p) {
    return sample_path(s, s.base_point, opt.t_max, derive_seed(opt.seed, "brown/" + std::to_string(p)), bo);
  });
  WordEnsemble e;
  e.kind = "brown";
  e.params = {{"t_max", opt.t_max}, {"n_paths", double(opt.n_paths)}, {"dt", bo.dt},
              {"checkpoint", opt.checkpoint}, {"seed", double(opt.seed)}};
  if (!paths.empty()) e.times = paths.front().times;
  for (auto& p : paths) e.words.push_back(std::move(p.word_trace));
  return e;
}

std::vector<Word> geodesic_ray_words(const FuchsianSurface& s, double angle, double t_max,
                                     double checkpoint, double step) {
  FrameWalker walker(s, s.base_point);
  walker.set_frame(rotation_frame(angle));
  const std::size_t stride = checkpoint_stride(checkpoint, step);
  const auto n = std::size_t(std::llround(t_max / step));
  const Matrix2d a = boost_frame(step);
  std::vector<Word> words{walker.word()};
  for (std::size_t k = 1; k <= n; ++k) {
    walker.move(a);
    if (k % stride == 0 || k == n) words.push_back(walker.word());
  }
  return words;
}

WordEnsemble geodesic_ensemble(const FuchsianSurface& s, const PathEnsembleOptions& opt) {
  WordEnsemble e;
  e.kind = "geodesic";
  e.params = {{"t_max", opt.t_max}, {"n_rays", double(opt.n_paths)}, {"step", opt.ray_step},
              {"checkpoint", opt.checkpoint}, {"seed", double(opt.seed)}};
  const std::size_t stride = checkpoint_stride(opt.checkpoint, opt.ray_step);
  const auto n = std::size_t(std::llround(opt.t_max / opt.ray_step));
  e.times.push_back(0);
  for (std::size_t k = 1; k <= n; ++k)
    if (k % stride == 0 || k == n) e.times.push_back(double(k) * opt.ray_step);
  e.words = parallel_map(opt.n_paths, [&](std::size_t p) {
    Rng rng(derive_seed(opt.seed, "ray/" + std::to_string(p)));
    const double angle = std::uniform_real_distribution<double>(-std::numbers::pi, std::numbers::pi)(rng);
    return geodesic_ray_words(s, angle, opt.t_max, opt.checkpoint, opt.ray_step);
  });
  return e;
}

WordEnsemble chain_ensemble(const std::vector<DiscretizationRun>& runs) {
  WordEnsemble e;
  e.kind = "mu";
  if (runs.empty()) return e;
  const std::size_t n = runs.front().increments.size();
  for (std::size_t k = 0; k <= n; ++k) e.times.push_back(double(k));
  for (const auto& r : runs) {
    if (r.increments.size() != n) throw std::invalid_argument("chain_ensemble: chains of unequal length");
    std::vector<Word> ws{Word()};
    for (const auto& g : r.increments) ws.push_back(ws.back() * g);
    e.words.push_back(std::move(ws));
  }
  e.params = {{"n_chains", double(runs.size())}, {"n_steps", double(n)}};
  return e;
}

LyapunovEstimate chi_from_ensemble(const WordEnsemble& e, const Representation& rho, double fit_from,
                                   bool prefer_endpoint) {
  if (e.words.empty() || e.times.size() < 3) throw std::invalid_argument("chi_from_ensemble: empty ensemble");
  const double t_last = e.times.back();
  struct PathResult {
    double slope, endpoint;
  };
  auto per_path = parallel_map(e.words.size(), [&](std::size_t p) {
    PrefixProducts<std::complex<double>> prefix(rho.images);
    std::vector<double> xs, ys;
    double last = kNaN;
    for (std::size_t k = 0; k < e.times.size(); ++k) {
      const double v = prefix.update(e.words[p][k]).log_op_norm();
      if (!std::isfinite(v)) throw std::runtime_error("chi: non-finite norm (degenerate images)");
      if (e.times[k] >= fit_from * t_last) {
        xs.push_back(e.times[k]);
        ys.push_back(v);
      }
      last = v;
    }
    return PathResult{linear_fit(xs, ys).slope, last / t_last};
  });
  std::vector<double> slopes, ends;
  for (const auto& r : per_path) {
    slopes.push_back(r.slope);
    ends.push_back(r.endpoint);
  }
  const auto ms = mean_stderr(slopes), me = mean_stderr(ends);
  LyapunovEstimate est;
  est.method = e.kind;
  est.slope = ms.mean;
  est.slope_stderr = ms.stderr_;
  est.endpoint = me.mean;
  est.endpoint_stderr = me.stderr_;
  est.value = prefer_endpoint ? me.mean : ms.mean;
  est.stderr_ = prefer_endpoint ? me.stderr_ : ms.stderr_;
  est.n = e.words.size();
  est.params = e.params;
  est.params["fit_from"] = fit_from;
  return est;
}

LyapunovEstimate chi_brown(const FuchsianSurface& s, const Representation& rho, const PathEnsembleOptions& opt) {
  return chi_from_ensemble(brownian_ensemble(s, opt), rho);
}

LyapunovEstimate chi_geodesic(const FuchsianSurface& s, const Representation& rho,
                              const PathEnsembleOptions& opt) {
  return chi_from_ensemble(geodesic_ensemble(s, opt), rho);
}

LyapunovEstimate chi_mu(const Representation& rho, const std::vector<DiscretizationRun>& runs) {
  return chi_from_ensemble(chain_ensemble(runs), rho, 0.25, true);
}

//------------------------------------------------------------------------

double schedule_radius(const LatticeOptions& opt, std::size_t n) {
  return std::min(opt.cap, opt.r0 + std::pow(double(n), opt.exponent));
}

LatticeDraws lattice_draws(const FuchsianSurface& s, const LatticeOptions& opt) {
  const auto& ball = enumerate_ball(s, opt.cap);
  // the ball is sorted by d: B(r) is a prefix
  const auto first = std::size_t(std::lower_bound(ball.begin(), ball.end(), opt.min_distance,
                                                  [](const BallElement& b, double r) { return b.d < r; }) -
                                 ball.begin());
  LatticeDraws out;
  out.opt = opt;
  Rng rng(derive_seed(opt.seed, "lattice"));
  for (std::size_t n = 1; n <= opt.n_draws; ++n) {
    const double r = schedule_radius(opt, n);
    const auto end = std::size_t(std::upper_bound(ball.begin(), ball.end(), r,
                                                  [](double r, const BallElement& b) { return r < b.d; }) -
                                 ball.begin());
    if (end <= first) throw std::invalid_argument("lattice_draws: empty shell");
    const std::size_t k = std::uniform_int_distribution<std::size_t>(first, end - 1)(rng);
    out.words.push_back(ball[k].word);
    out.d.push_back(ball[k].d);
  }
  return out;
}

std::vector<double> lattice_statistics(const LatticeDraws& draws, const Representation& rho, bool use_trace) {
  std::vector<double> stat(draws.words.size(), kNaN);
  for (std::size_t k = 0; k < draws.words.size(); ++k) {
    const auto g = evaluate_scaled(draws.words[k], rho.images);
    double x;
    if (use_trace) {
      x = g.log_abs_trace_sq();
      if (!(x > std::log(1e-12))) continue;  // [Z = Lambda]-type draw
    } else {
      x = 2 * g.log_op_norm();
    }
    stat[k] = x / (2 * draws.d[k]);
  }
  return stat;
}

LyapunovEstimate chi_lattice(const LatticeDraws& draws, const Representation& rho, bool use_trace) {
  const auto stat = lattice_statistics(draws, rho, use_trace);
  const auto start = std::size_t(draws.opt.tail_from * double(stat.size()));
  std::vector<double> tail, xs, ys;
  std::size_t excluded = 0;
  for (std::size_t k = start; k < stat.size(); ++k) {
    if (std::isnan(stat[k])) {
      ++excluded;
      continue;
    }
    tail.push_back(stat[k]);
    xs.push_back(2 * draws.d[k]);
    ys.push_back(stat[k] * 2 * draws.d[k]);
  }
  LyapunovEstimate est;
  est.method = use_trace ? "lattice_trace" : "lattice_norm";
  const auto m = mean_stderr(tail);
  est.endpoint = m.mean;
  est.endpoint_stderr = m.stderr_;
  const auto fit = linear_fit(xs, ys);
  est.slope = fit.slope;
  est.slope_stderr = fit.slope_stderr;
  est.value = fit.slope;
  est.stderr_ = fit.slope_stderr;
  est.n = tail.size();
  est.excluded = excluded;
  const auto& o = draws.opt;
  est.params = {{"n_draws", double(o.n_draws)}, {"r0", o.r0},     {"exponent", o.exponent},
                {"cap", o.cap},                 {"min_d", o.min_distance}, {"seed", double(o.seed)},
                {"tail_from", o.tail_from}};
  return est;
}

LyapunovEstimate chi_lattice(const FuchsianSurface& s, const Representation& rho, const LatticeOptions& opt) {
  return chi_lattice(lattice_draws(s, opt), rho, opt.use_trace);
}

//------------------------------------------------------------------------

CensusResult deviation_census(const FuchsianSurface& s, const Representation& rho, double r, double epsilon,
                              double chi_ref) {
  const auto& ball = enumerate_ball(s, r);
  CensusResult c;
  c.radius = r;
  for (const auto& b : ball) {
    if (b.d > r) break;
    ++c.ball_size;
    const double x = evaluate_scaled(b.word, rho.images).log_abs_trace_sq();
    // a vanishing trace counts as a deviation (log -> -infinity)
    if (!(std::abs(x / (2 * r) - chi_ref) <= epsilon)) ++c.bad;
  }
  c.bad_fraction = c.ball_size ? double(c.bad) / double(c.ball_size) : 0;
  return c;
}

CensusLadder census_ladder(const FuchsianSurface& s, const Representation& rho, const std::vector<double>& radii,
                           double epsilon, double chi_ref) {
  CensusLadder out;
  std::vector<double> xs, ys;
  for (double r : radii) {
    out.rungs.push_back(deviation_census(s, rho, r, epsilon, chi_ref));
    if (out.rungs.back().bad > 0) {
      xs.push_back(r);
      ys.push_back(std::log(out.rungs.back().bad_fraction));
    }
  }
  out.strictly_decreasing = true;
  for (std::size_t k = 1; k < out.rungs.size(); ++k)
    out.strictly_decreasing = out.strictly_decreasing && out.rungs[k].bad_fraction < out.rungs[k - 1].bad_fraction;
  if (xs.size() >= 2) out.fit = linear_fit(xs, ys);
  return out;
}

double fit_comparison_exponent(const FuchsianSurface& s, const Representation& rho, double r) {
  double beta = 0;
  for (const auto& b : enumerate_ball(s, r)) {
    if (b.d > r) break;
    if (b.word.empty()) continue;
    const double can = evaluate_scaled(b.word, s.images).log_op_norm();
    const double val = evaluate_scaled(b.word, rho.images).log_op_norm();
    if (can > 0) beta = std::max(beta, val / can);
  }
  return beta;
}

}  // namespace bifcurrent
