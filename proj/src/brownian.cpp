#include "bifcurrent/brownian.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bifcurrent {

namespace {

std::complex<double> frame_point(const Matrix2d& f) {
  const std::complex<double> i(0, 1);
  return (f(0, 0) * i + f(0, 1)) / (f(1, 0) * i + f(1, 1));
}

}  // namespace

Matrix2d em_step_frame(double dw1, double dw2, double h) {
  // y solves dY = sqrt2 Y dW2 exactly, so it does not see the piece grid
  return frame_of(HPoint(std::sqrt(2.0) * dw1, std::exp(std::sqrt(2.0) * dw2 - h)));
}

FrameWalker::FrameWalker(const FuchsianSurface& s, const HPoint& start) : s_(&s) {
  const auto r = reduce_point(s, start);
  f0_ = frame_of(r.z0);
  w_ = r.w;
}

std::complex<double> FrameWalker::z0() const { return frame_point(f0_); }

double FrameWalker::lift_distance() const {
  ScaledMoebius<double> acc = evaluate_scaled(w_, s_->images);
  acc.multiply_right(f0_);
  return acc.displacement();
}

int FrameWalker::move(const Matrix2d& g) {
  f0_ = f0_ * g;
  if (++since_normalize_ >= 64) {
    f0_ /= std::sqrt(f0_.determinant());
    since_normalize_ = 0;
  }
  int applied = 0;
  std::complex<double> z = frame_point(f0_);
  if (cosh_distance_from_base(z) < std::cosh(s_->inradius)) {
    jump_.setIdentity();
    return 0;
  }
  Matrix2d jump = Matrix2d::Identity();
  if (const auto turns = cusp_turns(*s_, z)) {
    const Matrix2d t = cusp_power(*s_, *turns);
    f0_ = t * f0_;
    jump = t * jump;
    append_turns(*s_, *turns, w_);
    applied += int(2 * std::abs(turns->n));
    z = frame_point(f0_);
  }
  for (int greedy = 0;; ++greedy) {
    auto k = improving_side_pairing(*s_, z, kDefaultTol);
    if (!k) break;
    ++applied;
    if (greedy >= 1000) throw TrackingError("frame reduction does not terminate");
    f0_ = s_->side_matrices[*k] * f0_;
    jump = s_->side_matrices[*k] * jump;
    w_ *= s_->side_pairings[*k].inverse();
    z = frame_point(f0_);
  }
  jump_ = jump;
  return applied;
}

void FrameWalker::verify(double wall_tol) const {
  if (w_.empty()) return;
  // far out the comparisons in long double cosh distance stop resolving ties
  if (lift_distance() > kLongDoubleReach) return;
  const Matrix2ld u = evaluate(w_, s_->images_ld);
  // beyond 2^60 integer entries stop being exact in long double
  if (u.cwiseAbs().maxCoeff() > 1.15e18L) return;
  const Word full = reduce_lifted_ld(*s_, u, f0_.cast<long double>());
  if (full == w_) return;
  if (near_domain_wall(*s_, z0(), wall_tol)) return;
  throw TrackingError("incremental word " + w_.str() + " disagrees with full reduction " +
                      full.str());
}

//------------------------------------------------------------------------

HPoint BrownianPathSample::point(std::size_t k, const FuchsianSurface& s) const {
  return apply(s.element(word_trace[k]), reduced[k]);
}

BrownianPathSample sample_path(const FuchsianSurface& s, const HPoint& start, double t_max,
                               std::uint64_t seed, const BrownianOptions& opt) {
  if (!(t_max >= 0) || t_max > opt.t_cap) throw SamplerError("sample_path: t_max outside [0, cap]");
  if (!(opt.dt > 0)) throw SamplerError("sample_path: dt must be positive");
  BrownianPathSample path;
  path.seed = seed;
  NormalSource normal(seed);
  FrameWalker walker(s, start);

  // independent lift: the same frame recursion without any reduction
  Matrix2ld lift = evaluate(walker.word(), s.images_ld) * walker.frame().cast<long double>();

  auto record = [&](double t) {
    path.times.push_back(t);
    path.reduced.emplace_back(walker.z0());
    path.word_trace.push_back(walker.word());
    path.lift_distance.push_back(walker.lift_distance());
    if (opt.track_lift) {
      const std::complex<long double> i(0, 1);
      path.lift.emplace_back((lift(0, 0) * i + lift(0, 1)) / (lift(1, 0) * i + lift(1, 1)));
    }
  };

  record(0.0);
  const auto n_steps = static_cast<std::size_t>(std::llround(t_max / opt.dt));
  for (std::size_t k = 1; k <= n_steps; ++k) {
    const int pieces = brownian_step(normal, opt.dt, opt.step_cap, opt.max_halvings,
                                     [&](double w1, double w2, double h) {
                                       const Matrix2d g = em_step_frame(w1, w2, h);
                                       walker.move(g);
                                       if (opt.track_lift) lift = lift * g.cast<long double>();
                                       return true;
                                     });
    path.halvings += std::size_t(pieces - 1);
    ++path.steps;
    if (opt.full_check_every > 0 && k % std::size_t(opt.full_check_every) == 0) walker.verify();
    if (k % std::size_t(std::max(1, opt.record_every)) == 0 || k == n_steps)
      record(double(k) * opt.dt);
  }
  return path;
}

double angle_at_base(std::complex<double> z) {
  const std::complex<double> i(0, 1);
  return std::arg((z - i) / (z + i));
}

double run_to_sphere(FrameWalker& walker, NormalSource& normal, double radius, Crossing dir,
                     const SphereRunOptions& opt) {
  const auto& bo = opt.brownian;
  auto rho = [](const Matrix2d& f) { return distance_h2(HPoint(frame_point(f)), HPoint(0, 1)); };
  auto crossed = [&](double r) { return dir == Crossing::outward ? r >= radius : r <= radius; };
  if (crossed(rho(walker.frame()))) return 0.0;
  double t = 0;
  bool done = false;
  while (!done) {
    if (t > opt.t_limit) throw SamplerError("run_to_sphere: time limit exceeded");
    const double here = rho(walker.frame());
    const double cap = std::abs(here - radius) < opt.fine_zone ? opt.fine_cap : bo.step_cap;
    brownian_step(normal, bo.dt, cap, bo.max_halvings, [&](double w1, double w2, double h) {
      const Matrix2d before = walker.frame();
      walker.move(em_step_frame(w1, w2, h));
      if (!crossed(rho(walker.frame()))) {
        t += h;
        return true;
      }
      // previous frame expressed in the current chart
      const Matrix2d prev = walker.last_jump() * before;
      double lo = 0, hi = 1;
      for (int it = 0; it < 60; ++it) {
        const double mid = (lo + hi) / 2;
        if (crossed(rho(Matrix2d(prev * em_step_frame(mid * w1, mid * w2, mid * h)))))
          hi = mid;
        else
          lo = mid;
      }
      walker.set_frame(prev * em_step_frame(hi * w1, hi * w2, hi * h));
      t += hi * h;
      done = true;
      return false;
    });
  }
  return t;
}

std::size_t track_word(const FuchsianSurface& s, BrownianPathSample& path, double max_distance) {
  max_distance = std::min(max_distance, kLongDoubleReach);
  if (path.lift.size() != path.times.size())
    throw TrackingError("track_word needs a path sampled with track_lift");
  std::size_t disagreements = 0;
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    if (path.lift_distance[k] > max_distance) continue;
    const auto& z = path.lift[k];
    const Matrix2ld h = frame_of(z);
    const Word full = reduce_lifted_ld(s, Matrix2ld::Identity(), h);
    if (full != path.word_trace[k]) {
      if (!near_domain_wall(s, path.reduced[k].value(), 1e-6)) ++disagreements;
      path.word_trace[k] = full;
    }
  }
  return disagreements;
}

Word closed_loop_element(const BrownianPathSample& path, double t) {
  if (path.times.empty()) return Word();
  auto it = std::lower_bound(path.times.begin(), path.times.end(), t);
  std::size_t k = std::size_t(it - path.times.begin());
  if (k == path.times.size()) return path.word_trace.back();
  if (k > 0 && std::abs(path.times[k - 1] - t) <= std::abs(path.times[k] - t)) --k;
  return path.word_trace[k];
}

double HeatKernelModel::log_prefactor(double r) const {
  // (1 + 1/r)^-1 t^-1 (1 + r + t)^-1 (1 + r)
  return -std::log1p(1 / r) - std::log(t) - std::log1p(r + t) + std::log1p(r);
}

LinearFit heat_kernel_shape_fit(std::span<const double> radii, double t, double bin_width,
                                std::size_t min_count) {
  if (radii.empty()) throw std::invalid_argument("heat_kernel_shape_fit: no samples");
  const double rmax = *std::max_element(radii.begin(), radii.end());
  const std::size_t nbins = std::size_t(rmax / bin_width) + 1;
  std::vector<double> counts(nbins, 0);
  for (double r : radii) counts[std::min(nbins - 1, std::size_t(r / bin_width))] += 1;
  const HeatKernelModel model{t};
  std::vector<double> xs, ys, ws;
  for (std::size_t b = 0; b < nbins; ++b) {
    if (counts[b] < double(min_count)) continue;
    const double r = (double(b) + 0.5) * bin_width;
    const double density = counts[b] / (double(radii.size()) * bin_width);
    xs.push_back(-(r - t) * (r - t) / (4 * t));
    ys.push_back(std::log(density) - model.log_prefactor(r));
    ws.push_back(counts[b]);  // var log(count) ~ 1 / count
  }
  return linear_fit(xs, ys, ws);
}

}  // namespace bifcurrent
