#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace bifcurrent {

template <typename T>
struct real_of {
  using type = T;
};
template <typename T>
struct real_of<std::complex<T>> {
  using type = T;
};
template <typename T>
using real_of_t = typename real_of<T>::type;

template <typename T>
inline constexpr bool is_complex_v = !std::is_same_v<T, real_of_t<T>>;

template <typename Scalar>
using Matrix2 = Eigen::Matrix<Scalar, 2, 2>;

using Matrix2d = Matrix2<double>;
using Matrix2cd = Matrix2<std::complex<double>>;
using Matrix2ld = Matrix2<long double>;

class InvalidPoint : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class InvalidElement : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ClassificationError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class DegenerateElement : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline constexpr double kDefaultTol = 1e-9;

//------------------------------------------------------------------------
// Points of the upper half-plane
//------------------------------------------------------------------------

/// A point of the upper half-plane model of H^2 (curvature -1).
template <typename Real>
class BasicHPoint {
 public:
  BasicHPoint() : z_(Real(0), Real(1)) {}

  explicit BasicHPoint(std::complex<Real> z) : z_(z) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()) ||
        !(z.imag() > Real(0)))
      throw InvalidPoint("point is not in the upper half-plane");
  }

  BasicHPoint(Real x, Real y) : BasicHPoint(std::complex<Real>(x, y)) {}

  std::complex<Real> value() const { return z_; }
  Real x() const { return z_.real(); }
  Real y() const { return z_.imag(); }

  template <typename Other>
  BasicHPoint<Other> cast() const {
    return BasicHPoint<Other>(Other(z_.real()), Other(z_.imag()));
  }

 private:
  std::complex<Real> z_;
};

using HPoint = BasicHPoint<double>;

/// The base point i, fixed by SO(2).
template <typename Real = double>
BasicHPoint<Real> base_point() {
  return BasicHPoint<Real>();
}

/// Hyperbolic distance. Uses the half-angle form so that nearby points keep
/// full relative precision.
template <typename Real>
Real distance_h2(const BasicHPoint<Real>& z, const BasicHPoint<Real>& w) {
  const Real num = std::abs(z.value() - w.value());
  return Real(2) * std::asinh(num / (Real(2) * std::sqrt(z.y() * w.y())));
}

/// cosh d(i, z) = (|z|^2 + 1) / (2 Im z); monotone in d, cheap to compare.
template <typename Real>
Real cosh_distance_from_base(const std::complex<Real>& z) {
  return (std::norm(z) + Real(1)) / (Real(2) * z.imag());
}

/// Upper triangular frame h with h(i) = z.
template <typename Real>
Matrix2<Real> frame_of(const BasicHPoint<Real>& z) {
  const Real s = std::sqrt(z.y());
  Matrix2<Real> h;
  h << s, z.x() / s, Real(0), Real(1) / s;
  return h;
}

//------------------------------------------------------------------------
// Moebius elements
//------------------------------------------------------------------------

namespace detail {

template <typename Scalar>
bool in_right_half(const Scalar& v) {
  if constexpr (is_complex_v<Scalar>) {
    return v.real() > 0 || (v.real() == 0 && v.imag() > 0);
  } else {
    return v > 0;
  }
}

template <typename Scalar>
Scalar principal_sqrt(const Scalar& v) {
  if constexpr (is_complex_v<Scalar>) {
    return std::sqrt(v);
  } else {
    if (!(v > 0))
      throw InvalidElement("real matrix with non-positive determinant");
    return std::sqrt(v);
  }
}

template <typename Scalar>
bool all_finite(const Matrix2<Scalar>& m) {
  for (int k = 0; k < 4; ++k) {
    const auto& e = m(k / 2, k % 2);
    if constexpr (is_complex_v<Scalar>) {
      if (!std::isfinite(e.real()) || !std::isfinite(e.imag())) return false;
    } else {
      if (!std::isfinite(e)) return false;
    }
  }
  return true;
}

}  // namespace detail

/// An element of PSL(2, R) (real Scalar) or PSL(2, C) (complex Scalar).
///
/// The stored representative has determinant 1 and a canonical sign: the
/// first entry of (a, b, c, d) that is not negligible lies in the right
/// half-plane. Everything derived from the element (traces squared, norms,
/// classification) is invariant under the sign flip anyway.
template <typename Scalar>
class Moebius {
 public:
  using Real = real_of_t<Scalar>;

  Moebius() : m_(Matrix2<Scalar>::Identity()) {}

  Moebius(Scalar a, Scalar b, Scalar c, Scalar d) {
    m_ << a, b, c, d;
    normalize();
  }

  explicit Moebius(const Matrix2<Scalar>& m) : m_(m) { normalize(); }

  static Moebius identity() { return Moebius(); }

  const Matrix2<Scalar>& matrix() const { return m_; }
  Scalar a() const { return m_(0, 0); }
  Scalar b() const { return m_(0, 1); }
  Scalar c() const { return m_(1, 0); }
  Scalar d() const { return m_(1, 1); }

  Scalar determinant() const { return m_.determinant(); }

  Moebius inverse() const {
    Matrix2<Scalar> inv;
    inv << m_(1, 1), -m_(0, 1), -m_(1, 0), m_(0, 0);
    return Moebius(inv);
  }

  template <typename Other>
  Moebius<Other> cast() const {
    return Moebius<Other>(m_.template cast<Other>());
  }

  friend Moebius operator*(const Moebius& lhs, const Moebius& rhs) {
    return Moebius(Matrix2<Scalar>(lhs.m_ * rhs.m_));
  }

 private:
  Matrix2<Scalar> m_;

  void normalize() {
    if (!detail::all_finite(m_)) throw InvalidElement("non-finite entries");
    const Scalar det = m_.determinant();
    // rounding in ad - bc is of order eps ||m||^2; inside that band the
    // determinant is already 1 and rescaling would only add noise
    const Real band = Real(8) * std::numeric_limits<Real>::epsilon() * m_.squaredNorm();
    if (std::abs(det - Scalar(1)) > std::max(band, std::numeric_limits<Real>::epsilon())) {
      if (std::abs(det) <= band) throw InvalidElement("singular matrix");
      m_ /= detail::principal_sqrt(det);
    }

    Real scale = 0;
    for (int k = 0; k < 4; ++k) scale = std::max(scale, Real(std::abs(m_(k / 2, k % 2))));
    const Real negligible = scale * Real(1e-13);
    for (int k = 0; k < 4; ++k) {
      const Scalar& e = m_(k / 2, k % 2);
      if (std::abs(e) <= negligible) continue;
      if (!detail::in_right_half(e)) m_ = -m_;
      break;
    }
  }
};

using MoebiusR = Moebius<double>;
using MoebiusElement = Moebius<std::complex<double>>;

/// Equality in PSL(2): entries agree up to a global sign.
template <typename Scalar>
bool approx_equal(const Moebius<Scalar>& g, const Moebius<Scalar>& h,
                  double tol = kDefaultTol) {
  const auto diff = (g.matrix() - h.matrix()).cwiseAbs().maxCoeff();
  const auto sum = (g.matrix() + h.matrix()).cwiseAbs().maxCoeff();
  return std::min<double>(diff, sum) <= tol;
}

template <typename Scalar>
Scalar trace(const Moebius<Scalar>& g) {
  return g.a() + g.d();
}

template <typename Scalar>
Scalar trace_sq(const Moebius<Scalar>& g) {
  const Scalar t = trace(g);
  return t * t;
}

template <typename Real>
struct Norms {
  Real op_norm;       ///< largest singular value, >= 1
  Real frob_norm_sq;  ///< |a|^2 + |b|^2 + |c|^2 + |d|^2, >= 2
};

/// For det 1 the singular values are s and 1/s, so s^2 + s^-2 = frob^2.
template <typename Real>
Real op_norm_from_frob_sq(Real frob_sq) {
  const Real disc = std::max(Real(0), frob_sq * frob_sq - Real(4));
  return std::sqrt((frob_sq + std::sqrt(disc)) / Real(2));
}

template <typename Scalar>
Norms<real_of_t<Scalar>> norms(const Moebius<Scalar>& g) {
  using Real = real_of_t<Scalar>;
  const Real f = g.matrix().squaredNorm();
  return {op_norm_from_frob_sq(f), f};
}

/// d(i, g i) from the Frobenius norm: ||g||_2^2 = 2 cosh d.
template <typename Real>
Real displacement_from_frob_sq(Real frob_sq) {
  return Real(2) * std::asinh(std::sqrt(std::max(Real(0), frob_sq - Real(2))) / Real(2));
}

template <typename Scalar>
real_of_t<Scalar> displacement(const Moebius<Scalar>& g) {
  return displacement_from_frob_sq(g.matrix().squaredNorm());
}

/// Action on the Riemann sphere; infinity is represented by an infinite
/// real part.
template <typename Scalar>
std::complex<real_of_t<Scalar>> apply_p1(const Moebius<Scalar>& g,
                                         std::complex<real_of_t<Scalar>> z) {
  using C = std::complex<real_of_t<Scalar>>;
  const C num = C(g.a()) * z + C(g.b());
  const C den = C(g.c()) * z + C(g.d());
  if (std::abs(den) == 0) return C(std::numeric_limits<real_of_t<Scalar>>::infinity(), 0);
  return num / den;
}

template <typename Real>
BasicHPoint<Real> apply(const Moebius<Real>& g, const BasicHPoint<Real>& z) {
  static_assert(!is_complex_v<Real>, "only PSL(2,R) acts on the half-plane");
  return BasicHPoint<Real>((g.a() * z.value() + g.b()) / (g.c() * z.value() + g.d()));
}

enum class MoebiusClass { identity, parabolic, elliptic, loxodromic };

inline const char* to_string(MoebiusClass c) {
  switch (c) {
    case MoebiusClass::identity: return "identity";
    case MoebiusClass::parabolic: return "parabolic";
    case MoebiusClass::elliptic: return "elliptic";
    case MoebiusClass::loxodromic: return "loxodromic";
  }
  return "?";
}

template <typename Scalar>
MoebiusClass classify(const Moebius<Scalar>& g, double tol = kDefaultTol) {
  using Real = real_of_t<Scalar>;
  using C = std::complex<Real>;
  const C t2 = C(trace_sq(g));
  const bool off_diag_small = std::abs(g.b()) < tol && std::abs(g.c()) < tol;
  if (off_diag_small && std::abs(t2 - C(4)) < tol) {
    const C gi = apply_p1(g, C(0, 1));
    if (std::abs(gi - C(0, 1)) < tol) return MoebiusClass::identity;
  }
  if (std::abs(t2 - C(4)) < tol) return MoebiusClass::parabolic;
  if (std::abs(t2.imag()) < tol && t2.real() >= Real(0) && t2.real() < Real(4))
    return MoebiusClass::elliptic;
  return MoebiusClass::loxodromic;
}

/// Real part of the complex translation length 2 arccosh(tr/2).
template <typename Scalar>
real_of_t<Scalar> translation_length(const Moebius<Scalar>& g, double tol = kDefaultTol) {
  using Real = real_of_t<Scalar>;
  if (classify(g, tol) != MoebiusClass::loxodromic)
    throw ClassificationError("translation length requires a loxodromic element");
  const std::complex<Real> half_tr = std::complex<Real>(trace(g)) / Real(2);
  return std::abs(Real(2) * std::acosh(half_tr).real());
}

/// Chordal (Fubini-Study) distance between the two fixed points on P^1,
/// normalized so the diameter of the sphere is 1. Zero for parabolics.
template <typename Scalar>
real_of_t<Scalar> fixed_point_gap(const Moebius<Scalar>& g) {
  using Real = real_of_t<Scalar>;
  using C = std::complex<Real>;
  if (classify(g, 1e-12) == MoebiusClass::identity)
    throw DegenerateElement("identity has no isolated fixed points");
  const C a(g.a()), b(g.b()), c(g.c()), d(g.d());
  const C tr = a + d;
  const C root = std::sqrt(tr * tr - C(4));
  const C lambda[2] = {(tr + root) / Real(2), (tr - root) / Real(2)};
  Eigen::Matrix<C, 2, 2> v;
  for (int k = 0; k < 2; ++k) {
    // Two candidate eigenvectors; take the better conditioned one.
    const Eigen::Matrix<C, 2, 1> v1(b, lambda[k] - a);
    const Eigen::Matrix<C, 2, 1> v2(lambda[k] - d, c);
    v.col(k) = v1.squaredNorm() >= v2.squaredNorm() ? v1 : v2;
  }
  const Real n0 = v.col(0).norm(), n1 = v.col(1).norm();
  if (n0 == 0 || n1 == 0) return Real(0);
  return std::abs(v(0, 0) * v(1, 1) - v(1, 0) * v(0, 1)) / (n0 * n1);
}

//------------------------------------------------------------------------
// Overflow-safe products
//------------------------------------------------------------------------

/// exp(log_scale) * m, with m kept at unit order of magnitude.
template <typename Scalar>
struct ScaledMoebius {
  using Real = real_of_t<Scalar>;

  Matrix2<Scalar> m = Matrix2<Scalar>::Identity();
  Real log_scale = 0;

  void multiply_right(const Matrix2<Scalar>& g) {
    m = m * g;
    rescale_if_needed();
  }
  void multiply_left(const Matrix2<Scalar>& g) {
    m = g * m;
    rescale_if_needed();
  }

  void rescale() {
    const Real peak = m.cwiseAbs().maxCoeff();
    if (peak == 0 || !std::isfinite(peak)) return;
    m /= peak;
    log_scale += std::log(peak);
  }

  void rescale_if_needed() {
    const Real peak = m.cwiseAbs().maxCoeff();
    if (peak > Real(1e30) || peak < Real(1e-30)) rescale();
  }

  /// log of the largest singular value of exp(log_scale) m.
  Real log_op_norm() const {
    const Real f = m.squaredNorm();
    const Real det = std::abs(m.determinant());
    const Real disc = std::max(Real(0), f * f - Real(4) * det * det);
    return log_scale + Real(0.5) * std::log((f + std::sqrt(disc)) / Real(2));
  }

  /// log ||.||_2^2.
  Real log_frob_sq() const { return Real(2) * log_scale + std::log(m.squaredNorm()); }

  /// log |tr^2|; -infinity for a vanishing trace.
  Real log_abs_trace_sq() const {
    const Real t = std::abs(m.trace());
    return Real(2) * (log_scale + std::log(t));
  }

  /// tr^2 - t for a finite value; use log_abs_trace_sq for large words.
  std::complex<Real> trace_sq_minus(std::complex<Real> t) const {
    const std::complex<Real> tr = std::complex<Real>(m.trace()) * std::exp(log_scale);
    return tr * tr - t;
  }

  /// d(i, g i) for a real product; valid far beyond double overflow.
  Real displacement() const {
    const Real lf = log_frob_sq();
    if (lf < Real(40)) return displacement_from_frob_sq(std::exp(lf));
    // acosh(x/2) = log x + log(1 + sqrt(1 - 4/x^2)) - log 2 ~ log x for large x
    return lf;
  }

  Moebius<Scalar> to_moebius() const { return Moebius<Scalar>(Matrix2<Scalar>(m * std::exp(log_scale))); }
};

/// Product g_0 g_1 ... g_{n-1} with periodic renormalization; the returned
/// pair carries both the log of the operator norm and the scaled value.
template <typename Scalar>
ScaledMoebius<Scalar> scaled_product(std::span<const Moebius<Scalar>> gs) {
  ScaledMoebius<Scalar> acc;
  for (const auto& g : gs) acc.multiply_right(g.matrix());
  return acc;
}

template <typename Scalar>
struct ScaledLogNorm {
  real_of_t<Scalar> log_norm;
  ScaledMoebius<Scalar> value;
};

template <typename Scalar>
ScaledLogNorm<Scalar> scaled_log_norm_product(std::span<const Moebius<Scalar>> gs) {
  if (gs.empty()) throw std::invalid_argument("empty product");
  auto value = scaled_product(gs);
  return {value.log_op_norm(), value};
}

}  // namespace bifcurrent
