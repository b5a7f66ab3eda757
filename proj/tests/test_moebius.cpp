#include "doctest.h"

#include "bifcurrent/lattice.hpp"
#include "bifcurrent/moebius.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace bifcurrent;
using C = std::complex<double>;

namespace {

MoebiusElement cdiag(double a) { return MoebiusElement(C(a), C(0), C(0), C(1 / a)); }

// Independent distance: cosh d = 1 + |z-w|^2 / (2 Im z Im w).
double distance_oracle(C z, C w) {
  return std::acosh(1 + std::norm(z - w) / (2 * z.imag() * w.imag()));
}

MoebiusR random_real(std::mt19937_64& rng, double spread) {
  std::normal_distribution<double> n(0, spread);
  for (;;) {
    Matrix2d m;
    m << n(rng), n(rng), n(rng), n(rng);
    if (m.determinant() > 0.1) return MoebiusR(m);
  }
}

}  // namespace

TEST_CASE("distance_h2 anchors") {
  CHECK(distance_h2(HPoint(0, 1), HPoint(0, 1)) == 0);
  CHECK(distance_h2(HPoint(0, 1), HPoint(0, 2)) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(distance_h2(HPoint(0, 1), HPoint(1, 1)) == doctest::Approx(0.962424).epsilon(1e-6));
  CHECK(distance_h2(HPoint(0, 1), HPoint(1, 1)) ==
        doctest::Approx(distance_oracle(C(0, 1), C(1, 1))).epsilon(1e-14));
}

TEST_CASE("distance_h2 rejects points off the half-plane") {
  CHECK_THROWS_AS(HPoint(0, 0), InvalidPoint);
  CHECK_THROWS_AS(HPoint(0, -1), InvalidPoint);
  CHECK_THROWS_AS(HPoint(NAN, 1), InvalidPoint);
  CHECK_THROWS_AS(HPoint(0, INFINITY), InvalidPoint);
}

TEST_CASE("distance_h2 metric axioms on random triples") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3, 3), v(-4, 2);
  for (int k = 0; k < 10000; ++k) {
    HPoint a(u(rng), std::exp(v(rng))), b(u(rng), std::exp(v(rng))), c(u(rng), std::exp(v(rng)));
    const double ab = distance_h2(a, b), bc = distance_h2(b, c), ac = distance_h2(a, c);
    REQUIRE(ab >= 0);
    REQUIRE(ab == doctest::Approx(distance_h2(b, a)).epsilon(1e-12));
    REQUIRE(ac <= ab + bc + 1e-9);
    REQUIRE(ab == doctest::Approx(distance_oracle(a.value(), b.value())).epsilon(1e-8));
  }
}

TEST_CASE("normalization and sign canonicalization") {
  MoebiusElement g(C(2), C(2), C(0), C(2));  // det 4
  CHECK(std::abs(g.determinant() - C(1)) < 1e-12);
  CHECK(g.a().real() > 0);
  MoebiusElement h(C(-1), C(-1), C(0), C(-1));
  CHECK(h.a() == C(1));
  CHECK(approx_equal(h, MoebiusElement(C(1), C(1), C(0), C(1))));
  MoebiusElement z(C(0), C(-1), C(1), C(0));
  CHECK(z.b() == C(1));  // a negligible, b decides
  CHECK_THROWS_AS(MoebiusElement(C(1), C(1), C(1), C(1)), InvalidElement);
  CHECK_THROWS_AS(MoebiusR(1, 0, 0, -1), InvalidElement);

  std::mt19937_64 rng(3);
  for (int k = 0; k < 1000; ++k) {
    auto a = random_real(rng, 1.0), b = random_real(rng, 1.0);
    auto p = a * b * a.inverse();
    REQUIRE(std::abs(p.determinant() - 1) <= 1e-12);
  }
}

TEST_CASE("norms satisfy the displacement identity") {
  auto id = MoebiusElement::identity();
  CHECK(norms(id).op_norm == doctest::Approx(1));
  CHECK(norms(id).frob_norm_sq == doctest::Approx(2));
  CHECK(norms(cdiag(std::sqrt(2.0))).frob_norm_sq == doctest::Approx(2.5));
  CHECK(norms(cdiag(std::sqrt(2.0))).frob_norm_sq == doctest::Approx(2 * std::cosh(std::log(2.0))));
  CHECK(norms(cdiag(2)).frob_norm_sq == doctest::Approx(4.25));
  CHECK(norms(cdiag(2)).op_norm == doctest::Approx(2));

  // random words of length <= 20 in the modular torus generators
  auto s = modular_torus();
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(0, 20), letter(0, 3);
  for (int k = 0; k < 10000; ++k) {
    Word w;
    const int n = len(rng);
    for (int j = 0; j < n; ++j) w.push_back(Letter(letter(rng)));
    auto g = s.element(w);
    // oracle: g i = ((ac + bd) + i) / (c^2 + d^2) for det 1, evaluated in
    // exact integer arithmetic, then cosh d = (|g i|^2 + 1) / (2 Im g i)
    const Matrix2d& gm = s.matrix(w);
    const __int128 a = __int128(gm(0, 0)), b = __int128(gm(0, 1)), c = __int128(gm(1, 0)),
                   dd = __int128(gm(1, 1));
    const __int128 q = c * c + dd * dd, p = a * c + b * dd;
    const long double cosh_d = (static_cast<long double>(p * p + 1) + static_cast<long double>(q * q)) /
                               (2.0L * static_cast<long double>(q));
    const double d = double(std::acosh(cosh_d));
    const auto nm = norms(g);
    REQUIRE(nm.frob_norm_sq == doctest::Approx(double(2 * cosh_d)).epsilon(1e-9));
    // op norm against Eigen's SVD-free oracle: sqrt of the top eigenvalue of g g^T
    Eigen::SelfAdjointEigenSolver<Matrix2d> es(g.matrix() * g.matrix().transpose());
    REQUIRE(nm.op_norm == doctest::Approx(std::sqrt(es.eigenvalues()(1))).epsilon(1e-9));
    if (d >= 5) {
      REQUIRE(std::abs(2 * std::log(nm.op_norm) - d) <= 2 * std::exp(-d) + 1e-9);
    }
  }
}

TEST_CASE("classify") {
  CHECK(classify(MoebiusElement(C(1), C(1), C(0), C(1))) == MoebiusClass::parabolic);
  const double c = std::cos(std::numbers::pi / 4), sn = std::sin(std::numbers::pi / 4);
  MoebiusElement rot(C(c), C(sn), C(-sn), C(c));  // rotation by pi/2 about i
  CHECK(std::abs(trace_sq(rot) - C(2)) < 1e-12);
  CHECK(classify(rot) == MoebiusClass::elliptic);
  CHECK(classify(cdiag(2)) == MoebiusClass::loxodromic);
  CHECK(classify(MoebiusElement::identity()) == MoebiusClass::identity);
  CHECK(classify(MoebiusElement(C(0, 1), C(0), C(0), C(0, -1))) == MoebiusClass::elliptic);
  CHECK(classify(MoebiusElement(C(0, 2), C(0), C(0), C(0, -0.5))) == MoebiusClass::loxodromic);

  std::mt19937_64 rng(5);
  for (int k = 0; k < 2000; ++k) {
    auto g = random_real(rng, 1.0).cast<C>();
    auto h = random_real(rng, 1.0).cast<C>();
    auto conj = h * g * h.inverse();
    REQUIRE(std::abs(trace_sq(conj) - trace_sq(g)) <= 1e-9 * std::max(1.0, std::abs(trace_sq(g))));
    const double margin = std::abs(std::abs(trace_sq(g)) - 4);
    if (margin > 1e-6) REQUIRE(classify(conj) == classify(g));
  }
}

TEST_CASE("translation length") {
  CHECK(translation_length(cdiag(2)) == doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));
  auto s = modular_torus();
  CHECK(translation_length(s.element(Word("X"))) == doctest::Approx(1.924847).epsilon(1e-6));
  // tr = 2.0001: l = 2 acosh(1.00005) ~ 0.02
  MoebiusR near(2.0001 - 1, 1, 2.0001 - 2, 1);  // det = (1.0001) - (0.0001) = 1
  CHECK(trace(near) == doctest::Approx(2.0001));
  CHECK(translation_length(near) == doctest::Approx(2 * std::acosh(1.00005)).epsilon(1e-9));
  CHECK(translation_length(near) == doctest::Approx(0.02).epsilon(0.01));
  CHECK_THROWS_AS(translation_length(MoebiusElement(C(1), C(1), C(0), C(1))), ClassificationError);

  std::mt19937_64 rng(9);
  for (int k = 0; k < 2000; ++k) {
    auto g = random_real(rng, 1.5).cast<C>();
    if (classify(g) != MoebiusClass::loxodromic) continue;
    auto h = random_real(rng, 1.0).cast<C>();
    const double l = translation_length(g);
    REQUIRE(translation_length(g.inverse()) == doctest::Approx(l).epsilon(1e-9));
    REQUIRE(translation_length(h * g * h.inverse()) == doctest::Approx(l).epsilon(1e-8));
  }
}

TEST_CASE("fixed point gap") {
  CHECK(fixed_point_gap(cdiag(2)) == doctest::Approx(1.0));
  CHECK(fixed_point_gap(MoebiusElement(C(1), C(1), C(0), C(1))) == doctest::Approx(0).epsilon(1e-12));
  CHECK_THROWS_AS(fixed_point_gap(MoebiusElement::identity()), DegenerateElement);
}

TEST_CASE("fixed point gap bounded-error identity, calibrated constant") {
  // | 1/2 log|tr^2 - 4| - log||g|| - log delta(g) | <= C over random products
  auto s = modular_torus();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(1, 30), letter(0, 3);
  double worst = 0;
  int used = 0;
  for (int k = 0; k < 100000; ++k) {
    Word w;
    const int n = len(rng);
    for (int j = 0; j < n; ++j) w.push_back(Letter(letter(rng)));
    auto g = s.element(w).cast<C>();
    if (classify(g) != MoebiusClass::loxodromic) continue;
    const double lhs = 0.5 * std::log(std::abs(trace_sq(g) - C(4))) - std::log(norms(g).op_norm) -
                       std::log(fixed_point_gap(g));
    worst = std::max(worst, std::abs(lhs));
    ++used;
  }
  MESSAGE("calibrated constant over " << used << " samples: " << worst);
  CHECK(used > 90000);
  CHECK(worst <= 3.0);
}

TEST_CASE("scaled products") {
  std::vector<MoebiusElement> ids(10, MoebiusElement::identity());
  CHECK(scaled_log_norm_product<C>(ids).log_norm == doctest::Approx(0));
  for (int n : {1, 10, 100, 5000}) {
    std::vector<MoebiusElement> ds(n, cdiag(2));
    CHECK(scaled_log_norm_product<C>(ds).log_norm == doctest::Approx(n * std::log(2.0)).epsilon(1e-12));
  }
  CHECK_THROWS(scaled_log_norm_product<C>(std::vector<MoebiusElement>{}));

  // 500 random generator factors against a long double product
  auto s = modular_torus();
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> letter(0, 3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<MoebiusR> gs;
    Matrix2ld ld = Matrix2ld::Identity();
    long double ld_log = 0;
    for (int k = 0; k < 500; ++k) {
      const Letter l = Letter(letter(rng));
      gs.emplace_back(s.images[l]);
      ld = ld * s.images_ld[l];
      const long double peak = ld.cwiseAbs().maxCoeff();
      ld /= peak;
      ld_log += std::log(peak);
    }
    const long double f = ld.squaredNorm();
    const long double det = ld.determinant();
    const long double oracle =
        ld_log + 0.5L * std::log((f + std::sqrt(std::max(0.0L, f * f - 4 * det * det))) / 2);
    const double got = scaled_log_norm_product<double>(gs).log_norm;
    REQUIRE(std::abs(got - double(oracle)) <= 1e-6 * std::max(1.0, std::abs(double(oracle))));
  }

  // agrees with a naive product where that does not overflow
  std::vector<MoebiusR> gs;
  for (int k = 0; k < 30; ++k) gs.emplace_back(s.images[letter(rng)]);
  Matrix2d naive = Matrix2d::Identity();
  for (auto& g : gs) naive = naive * g.matrix();
  const double naive_log = std::log(op_norm_from_frob_sq(naive.squaredNorm()));
  CHECK(scaled_log_norm_product<double>(gs).log_norm == doctest::Approx(naive_log).epsilon(1e-6));
}
