#pragma once

#include "bifcurrent/moebius.hpp"
#include "bifcurrent/word.hpp"

#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bifcurrent {

class ReductionFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A finite-area Fuchsian group given by images of the free generators X, Y,
/// together with the side pairings of its Dirichlet domain centred at i.
struct FuchsianSurface {
  std::string name;
  LetterImages<double> images;
  LetterImages<long double> images_ld;
  /// Side pairings; the order is the tie-break order of reduce_point.
  std::vector<Word> side_pairings;
  std::vector<Matrix2d> side_matrices;
  std::vector<Matrix2ld> side_matrices_ld;
  std::vector<Word> cusp_words;
  HPoint base_point;
  double area = 0;
  double systole = 0;
  /// Points closer than this to i lie in the interior of the domain.
  double inradius = 0;
  /// max over letters of d(i, g i)
  double max_generator_displacement = 0;
  /// Ideal vertices of the domain: a parabolic product of two side pairings
  /// and a chart sending its fixed point to infinity, where it acts as
  /// z -> z + width.
  struct Cusp {
    Word shift;
    Matrix2d chart;
    double width = 0;
  };
  std::vector<Cusp> cusps;

  Matrix2d matrix(const Word& w) const { return evaluate(w, images); }
  MoebiusR element(const Word& w) const { return MoebiusR(matrix(w)); }
  /// Stable identifier built from the generator entries.
  std::string hash() const;
};

/// Assemble a surface from generators and side pairings; fills derived data.
FuchsianSurface make_surface(std::string name, const Matrix2d& x, const Matrix2d& y,
                             std::vector<Word> side_pairings, std::vector<Word> cusp_words,
                             double area, double systole);

/// Commutator subgroup of PSL(2, Z) uniformizing the modular punctured torus.
FuchsianSurface modular_torus();

//------------------------------------------------------------------------
// Dirichlet reduction
//------------------------------------------------------------------------

struct ReduceOptions {
  double tol = kDefaultTol;
  int max_iter = 100000;
};

/// Index of the side pairing s minimizing d(i, s z) if that strictly improves
/// on d(i, z) by more than tol; ties resolved by side-pairing order.
std::optional<std::size_t> improving_side_pairing(const FuchsianSurface& s,
                                                  std::complex<double> z, double tol);

/// z0 = rho(w)^-1 z in the Dirichlet domain.
struct ReducedPoint {
  HPoint z0;
  Word w;
};

ReducedPoint reduce_point(const FuchsianSurface& s, const HPoint& z, ReduceOptions opt = {});

/// Deep in a cusp a short step can wrap around it many times and the greedy
/// reduction then needs two side pairings per turn. Returns (cusp, n) such
/// that applying shift^-n brings z back over the domain, or nullopt when z is
/// not deep in any cusp or no shortcut is needed.
struct CuspTurns {
  std::size_t cusp;
  long n;
};
std::optional<CuspTurns> cusp_turns(const FuchsianSurface& s, std::complex<double> z);
/// The matrix of shift^-n, and w <- w shift^n.
Matrix2d cusp_power(const FuchsianSurface& s, const CuspTurns& t);
void append_turns(const FuchsianSurface& s, const CuspTurns& t, Word& w);

/// Independent extended-precision reduction of the point u h i, where u is a
/// group element (exact for integer lattices with entries below 2^64) and h
/// is a frame near the identity. Returns w with u h i = rho(w) z0, z0 in the
/// domain. The frame u h is rebuilt from u at every step so that rounding
/// does not get amplified.
Word reduce_lifted_ld(const FuchsianSurface& s, const Matrix2ld& u, const Matrix2ld& h,
                      ReduceOptions opt = {});

/// Is z within tol (in cosh-distance) of a wall of the domain, i.e. is the
/// choice of tile ambiguous?
bool near_domain_wall(const FuchsianSurface& s, std::complex<double> z, double tol);

//------------------------------------------------------------------------
// Ball and geodesic enumeration
//------------------------------------------------------------------------

struct BallElement {
  Word word;
  double d = 0;  ///< d(i, gamma i)
  Matrix2d m;
};

struct EnumerationOptions {
  double max_radius = 14.0;
  /// Extra pruning slack, in multiples of the maximal generator displacement.
  double prune_factor = 2.0;
  bool use_cache = true;
};

/// All gamma with d(i, gamma i) <= r, sorted by (d, word).
std::vector<BallElement> enumerate_ball(const FuchsianSurface& s, double r,
                                        EnumerationOptions opt = {});

/// Visit every reduced word whose prefixes all satisfy d <= bound; the
/// callback sees (word, matrix, d) and may return false to prune.
template <typename F>
void visit_words(const FuchsianSurface& s, double bound, F&& f);

struct GeodesicClass {
  Word cyclic_word;  ///< canonical cyclic representative
  double length = 0;
  bool primitive = true;
};

struct GeodesicOptions {
  double max_length = 12.0;
  /// The axis of some conjugate passes within this distance of i.
  double axis_slack = 2.0;
  bool unoriented = false;
};

/// Conjugacy classes of loxodromic elements with translation length <= t,
/// sorted by (length, word).
std::vector<GeodesicClass> enumerate_geodesics(const FuchsianSurface& s, double t,
                                               bool primitive_only, GeodesicOptions opt = {});

/// Uniform draw from the ball B(r); reproducible from seed.
Word sample_ball_uniform(const FuchsianSurface& s, double r, std::uint64_t seed);

/// Clear the in-memory ball cache (tests).
void clear_ball_cache();

//------------------------------------------------------------------------

template <typename F>
void visit_words(const FuchsianSurface& s, double bound, F&& f) {
  struct Frame {
    Matrix2d m;
    int next;
  };
  // ||g||_2^2 = 2 cosh d
  const double frob_bound = 2.0 * std::cosh(bound);
  Word w;
  if (!f(w, Matrix2d(Matrix2d::Identity()), 0.0)) return;
  std::vector<Frame> stack;
  stack.push_back({Matrix2d::Identity(), 0});
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next == 4) {
      stack.pop_back();
      if (!stack.empty()) w.pop_back();
      continue;
    }
    const Letter l = Letter(top.next++);
    if (!w.empty() && l == inverse(w.back())) continue;
    Matrix2d m = top.m * s.images[l];
    const double fsq = m.squaredNorm();
    if (fsq > frob_bound) continue;
    w.push_back(l);
    if (!f(w, m, displacement_from_frob_sq(fsq))) {
      w.pop_back();
      continue;
    }
    stack.push_back({m, 0});
  }
}

}  // namespace bifcurrent
