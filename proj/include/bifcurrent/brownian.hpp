#pragma once

#include "bifcurrent/lattice.hpp"
#include "bifcurrent/random.hpp"
#include "bifcurrent/stats.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace bifcurrent {

class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrackingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lift distance beyond which the extended precision re-reduction is skipped.
inline constexpr double kLongDoubleReach = 28.0;

struct BrownianOptions {
  double dt = 5e-3;
  /// largest hyperbolic displacement of a single accepted step
  double step_cap = 0.1;
  int max_halvings = 40;
  /// full extended-precision re-reduction cadence, in steps
  int full_check_every = 1024;
  /// record every k-th step (always records t = 0 and the final time)
  int record_every = 1;
  /// additionally carry an independent long double lift of the path
  bool track_lift = false;
  double t_cap = 1e4;
};

/// Orthonormal frame of H^2 tracked modulo the lattice: the current frame is
/// rho(w) F0 with F0 i in the Dirichlet domain. Steps act on the right of the
/// frame, deck transformations on the left, so both commute exactly.
class FrameWalker {
 public:
  FrameWalker(const FuchsianSurface& s, const HPoint& start);

  const FuchsianSurface& surface() const { return *s_; }
  const Matrix2d& frame() const { return f0_; }
  const Word& word() const { return w_; }
  std::complex<double> z0() const;
  /// d(i, current point) measured in the lift, overflow safe.
  double lift_distance() const;

  /// Right-multiply the frame by g, then reduce; returns the number of side
  /// pairings applied.
  int move(const Matrix2d& g);

  /// Replace the reduced frame without reducing (caller keeps it in the
  /// domain).
  void set_frame(const Matrix2d& f) { f0_ = f; }
  /// Product of the side pairings applied by the last move (identity if none).
  const Matrix2d& last_jump() const { return jump_; }

  /// Extended-precision consistency check (see reduce_lifted_ld); throws
  /// TrackingError unless the words agree or the point sits on a wall.
  void verify(double wall_tol = 1e-6) const;

 private:
  const FuchsianSurface* s_;
  Matrix2d f0_;
  Word w_;
  Matrix2d jump_ = Matrix2d::Identity();
  int since_normalize_ = 0;
};

/// Angle of the point z as seen from i (disk model centred at i).
double angle_at_base(std::complex<double> z);

enum class Crossing { outward, inward };

struct SphereRunOptions {
  BrownianOptions brownian;
  /// cap used within `fine_zone` of the target radius
  double fine_cap = 0.02;
  double fine_zone = 0.2;
  /// give up after this much time
  double t_limit = 1e4;
};

/// Diffuse the walker until d(i, z0) crosses `radius` in direction `dir`
/// (z0 in the reduced frame, so inward crossings hit the r-sphere about the
/// nearest orbit point). The crossing inside the last piece is located by
/// bisection on the linearly interpolated increment and the frame is moved
/// there. Returns the elapsed time.
double run_to_sphere(FrameWalker& walker, NormalSource& normal, double radius, Crossing dir,
                     const SphereRunOptions& opt = {});

/// Frame of one piece of dZ = sqrt(2) Y (dW1 + i dW2) started at i over time
/// h: x takes the Euler increment sqrt2 dW1, y the exact exp(sqrt2 dW2 - h).
/// A plain Euler y picks up the realized quadratic variation of the pieces,
/// which halving on large increments shrinks (drift drops well below 1).
Matrix2d em_step_frame(double dw1, double dw2, double h);

/// One dt step with Brownian-bridge step halving: the increment over dt is
/// drawn once and, while a piece would move further than the cap or leave the
/// half-plane, split into two bridge halves (the y update is exact
/// so the data dependent grid does not bias the radial drift). Calls on_substep(w1, w2, h) for
/// each accepted piece in order; returning false abandons the rest of the
/// step (used at stopping times). Returns the number of pieces.
template <typename F>
int brownian_step(NormalSource& normal, double dt, double cap, int max_halvings, F&& on_substep);

/// BrownianPathSample: checkpoints of one tracked path.
struct BrownianPathSample {
  std::vector<double> times;
  std::vector<HPoint> reduced;  ///< z0 = rho(w)^-1 (point), in the domain
  std::vector<Word> word_trace;
  std::vector<double> lift_distance;  ///< d(i, point) in the lift
  std::vector<BasicHPoint<long double>> lift;  ///< only with track_lift
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  std::size_t halvings = 0;

  /// The lift point rho(w) z0 in double precision (loses digits far out).
  HPoint point(std::size_t k, const FuchsianSurface& s) const;
};

BrownianPathSample sample_path(const FuchsianSurface& s, const HPoint& start, double t_max,
                               std::uint64_t seed, const BrownianOptions& opt = {});

/// Recompute word_trace from the independent lift by a full extended
/// precision reduction at every checkpoint (requires track_lift). Returns the
/// number of checkpoints where the two disagree away from domain walls.
/// The long double lift resolves points up to roughly d = 30 from i;
/// checkpoints further out are left untouched.
std::size_t track_word(const FuchsianSurface& s, BrownianPathSample& path,
                       double max_distance = 28.0);

/// Word at the checkpoint nearest t.
Word closed_loop_element(const BrownianPathSample& path, double t);

/// Radial law of Brownian motion at time t, up to normalization: the heat
/// kernel envelope (1.3) times the area element sinh r.
struct HeatKernelModel {
  double t;
  /// log of the envelope prefactor without the Gaussian factor
  double log_prefactor(double r) const;
  double log_envelope(double r) const { return log_prefactor(r) - (r - t) * (r - t) / (4 * t); }
};

/// Histogram the radii (bins of width bin_width, keeping bins with at least
/// min_count samples), subtract the log prefactor of the model and regress
/// against -(r - t)^2 / (4t), weighting each bin by its count. A slope of 1
/// means the Gaussian factor of the envelope is reproduced. The envelope is
/// only sharp up to constants: the exact kernel at t = 20 gives about 0.94.
LinearFit heat_kernel_shape_fit(std::span<const double> radii, double t, double bin_width = 1.0,
                                std::size_t min_count = 5);

//------------------------------------------------------------------------

template <typename F>
int brownian_step(NormalSource& normal, double dt, double cap, int max_halvings, F&& on_substep) {
  struct Piece {
    double h, w1, w2;
    int depth;
  };
  const double sdt = std::sqrt(dt);
  Piece stack[128];
  int top = 0, pieces = 0;
  stack[top++] = {dt, sdt * normal(), sdt * normal(), 0};
  while (top > 0) {
    const Piece p = stack[--top];
    const double y = std::exp(std::sqrt(2.0) * p.w2 - p.h);
    const double x = std::sqrt(2.0) * p.w1;
    if (distance_h2(HPoint(0, 1), HPoint(x, y)) <= cap) {
      ++pieces;
      if (!on_substep(p.w1, p.w2, p.h)) return pieces;
      continue;
    }
    if (p.depth >= max_halvings || top + 2 > 128)
      throw SamplerError("brownian step: halving cap exceeded");
    // bridge midpoint: W(h/2) | W(h) ~ N(W(h)/2, h/4)
    const double s = std::sqrt(p.h / 4);
    const double a1 = p.w1 / 2 + s * normal(), a2 = p.w2 / 2 + s * normal();
    // second half below the first so the first half runs first
    stack[top++] = {p.h / 2, p.w1 - a1, p.w2 - a2, p.depth + 1};
    stack[top++] = {p.h / 2, a1, a2, p.depth + 1};
  }
  return pieces;
}

}  // namespace bifcurrent
