#include "doctest.h"

#include "bifcurrent/lattice.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <numbers>
#include <random>
#include <set>

using namespace bifcurrent;
using C = std::complex<double>;

namespace {

const FuchsianSurface& torus() {
  static const FuchsianSurface s = modular_torus();
  return s;
}

// Every reduced word up to max_len letters, no pruning.
template <typename F>
void all_words(const FuchsianSurface& s, int max_len, F&& f) {
  struct Frame {
    Matrix2d m;
    int next;
  };
  Word w;
  f(w, Matrix2d(Matrix2d::Identity()));
  std::vector<Frame> stack{{Matrix2d::Identity(), 0}};
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next == 4 || int(stack.size()) > max_len) {
      stack.pop_back();
      if (!stack.empty()) w.pop_back();
      continue;
    }
    const Letter l = Letter(top.next++);
    if (!w.empty() && l == inverse(w.back())) continue;
    Matrix2d m = top.m * s.images[l];
    w.push_back(l);
    f(w, m);
    stack.push_back({m, 0});
  }
}

double disp(const Matrix2d& m) { return displacement_from_frob_sq(m.squaredNorm()); }

HPoint random_point(std::mt19937_64& rng, double rmax) {
  // uniform direction, radius uniform in [0, rmax]
  std::uniform_real_distribution<double> ang(0, 2 * std::numbers::pi), rad(0, rmax);
  const double r = rad(rng), th = ang(rng);
  // geodesic from i in direction th: rotate e^{r} i about i
  const double c = std::cos(th / 2), s = std::sin(th / 2);
  Matrix2d k;
  k << c, s, -s, c;
  Matrix2d a;
  a << std::exp(r / 2), 0, 0, std::exp(-r / 2);
  return apply(MoebiusR(Matrix2d(k * a)), HPoint(0, 1));
}

}  // namespace

TEST_CASE("modular torus data") {
  const auto& s = torus();
  const Matrix2d X = s.images[kX], Y = s.images[kY];
  CHECK(X.trace() == 3);
  CHECK(Y.trace() == 3);
  CHECK((X * Y).trace() == 6);
  CHECK(3 * 3 + 3 * 3 + 6 * 6 == 3 * 3 * 6);
  const Matrix2d comm = s.matrix(Word("XYxy"));
  CHECK(comm.trace() == -2);
  CHECK(classify(MoebiusR(comm)) == MoebiusClass::parabolic);
  for (const auto& w : s.cusp_words) CHECK(std::abs(std::pow(s.matrix(w).trace(), 2) - 4) < 1e-9);
  CHECK(s.area == doctest::Approx(2 * std::numbers::pi).epsilon(1e-12));
  CHECK(s.systole == doctest::Approx(1.924847).epsilon(1e-6));
  for (const auto& g : s.images) {
    CHECK(classify(MoebiusR(g)) != MoebiusClass::elliptic);
    CHECK(std::abs(g.determinant() - 1) < 1e-15);
  }
  CHECK(s.inradius == doctest::Approx(std::acosh(3.5) / 2).epsilon(1e-8));
  CHECK(s.hash() == modular_torus().hash());
}

TEST_CASE("systole from the shortest enumerated classes") {
  // minimal |trace| over all loxodromic words of length <= 8 is 3
  double min_tr = 1e300;
  all_words(torus(), 8, [&](const Word& w, const Matrix2d& m) {
    if (w.empty()) return;
    const double t = std::abs(m.trace());
    if (t > 2 + 1e-9) min_tr = std::min(min_tr, t);
  });
  CHECK(min_tr == 3);
  CHECK(2 * std::acosh(min_tr / 2) == doctest::Approx(torus().systole));
}

TEST_CASE("reduce_point anchors") {
  const auto& s = torus();
  auto r0 = reduce_point(s, HPoint(0, 1));
  CHECK(r0.w.empty());
  CHECK(r0.z0.value() == C(0, 1));
  for (const char* ws : {"Xy", "X", "yX", "XXY", "XYxy", "xYYYx"}) {
    const Word w(ws);
    auto z = apply(s.element(w), HPoint(0, 1));
    auto r = reduce_point(s, z);
    CHECK(r.w == w);
    CHECK(std::abs(r.z0.value() - C(0, 1)) < 1e-9);
  }
  CHECK_THROWS_AS(reduce_point(s, apply(s.element(Word("XYXYXYXY")), HPoint(0, 1)), {1e-9, 2}),
                  ReductionFailure);
}

TEST_CASE("reduce_point lands in the global Dirichlet domain") {
  // Oracle: z0 is at least as close to i as to every orbit point of B(7).
  const auto& s = torus();
  const auto ball = enumerate_ball(s, 7.0);
  std::mt19937_64 rng(17);
  for (int k = 0; k < 10000; ++k) {
    const HPoint z = random_point(rng, 12.0);
    const auto r = reduce_point(s, z);
    const double d0 = distance_h2(r.z0, HPoint(0, 1));
    REQUIRE(d0 <= distance_h2(z, HPoint(0, 1)) + 1e-9);
    // only orbit points within 2 d0 can compete
    for (const auto& e : ball) {
      if (e.d > 2 * d0 + 1e-9) break;
      const HPoint gi = apply(MoebiusR(e.m), HPoint(0, 1));
      REQUIRE(d0 <= distance_h2(r.z0, gi) + 1e-9);
    }
    // idempotence
    REQUIRE(reduce_point(s, r.z0).w.empty());
    // the lift is recovered
    const HPoint back = apply(s.element(r.w), r.z0);
    REQUIRE(distance_h2(back, z) < 1e-6);
  }
}

TEST_CASE("four generators alone do not give a fundamental domain") {
  // A point in the funnel between the X and Y bisectors is closer to the orbit
  // point of XY^-1 than to i: the extra pairings are required.
  const auto& s = torus();
  const HPoint z(2.2, 0.9);  // near XY^-1 i = 3 + i
  const double d_i = distance_h2(z, HPoint(0, 1));
  double best_gen = d_i;
  for (int l = 0; l < 4; ++l)
    best_gen = std::min(best_gen, distance_h2(z, apply(MoebiusR(s.images[l]), HPoint(0, 1))));
  const double d_xy = distance_h2(z, apply(s.element(Word("Xy")), HPoint(0, 1)));
  CHECK(d_xy < best_gen);
  CHECK(reduce_point(s, z).w == Word("Xy"));
}

TEST_CASE("reduce_point equivariance") {
  const auto& s = torus();
  const auto ball = enumerate_ball(s, 8.0);
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<std::size_t> pick(0, ball.size() - 1);
  int checked = 0;
  for (int k = 0; k < 3000; ++k) {
    const auto& g = ball[pick(rng)];
    const HPoint z = random_point(rng, 3.0);
    const auto rz = reduce_point(s, z);
    if (near_domain_wall(s, rz.z0.value(), 1e-6)) continue;
    const auto rgz = reduce_point(s, apply(MoebiusR(g.m), z));
    REQUIRE(rgz.w == g.word * rz.w);
    ++checked;
  }
  CHECK(checked > 2900);
}

TEST_CASE("extended-precision lifted reduction agrees") {
  const auto& s = torus();
  std::mt19937_64 rng(31);
  const auto ball = enumerate_ball(s, 10.0);
  std::uniform_int_distribution<std::size_t> pick(0, ball.size() - 1);
  for (int k = 0; k < 2000; ++k) {
    const auto& g = ball[pick(rng)];
    const HPoint z0 = reduce_point(s, random_point(rng, 2.0)).z0;
    if (near_domain_wall(s, z0.value(), 1e-6)) continue;
    const Word w = reduce_lifted_ld(s, evaluate(g.word, s.images_ld), frame_of(z0).cast<long double>());
    REQUIRE(w == g.word);
  }
}

TEST_CASE("enumerate_ball small radii") {
  const auto& s = torus();
  auto b0 = enumerate_ball(s, 0.0);
  REQUIRE(b0.size() == 1);
  CHECK(b0[0].word.empty());
  // r = 2: identity plus the words whose displacement is at most 2
  std::set<Word> expect;
  all_words(s, 3, [&](const Word& w, const Matrix2d& m) {
    if (disp(m) <= 2.0) expect.insert(w);
  });
  std::set<Word> got;
  for (const auto& e : enumerate_ball(s, 2.0)) got.insert(e.word);
  CHECK(got == expect);
  // X i = 1.5 + 0.5 i: d = acosh(3.5)
  CHECK(disp(s.images[kX]) == doctest::Approx(std::acosh(3.5)));
  CHECK(expect.size() == 5);  // identity and the four letters
  CHECK_THROWS_AS(enumerate_ball(s, 15.0), ResourceError);
}

TEST_CASE("enumerate_ball is complete against exhaustive words") {
  const auto& s = torus();
  // The exhaustive count at r <= 6 is stable between 13 and 15 letters.
  std::map<int, std::set<Word>> by_len;
  for (int L : {13, 15}) {
    std::set<Word> ws;
    all_words(s, L, [&](const Word& w, const Matrix2d& m) {
      if (disp(m) <= 6.0) ws.insert(w);
    });
    by_len[L] = ws;
  }
  REQUIRE(by_len[13] == by_len[15]);
  for (double r : {3.0, 4.5, 6.0}) {
    std::set<Word> expect;
    for (const auto& w : by_len[15])
      if (disp(s.matrix(w)) <= r) expect.insert(w);
    std::set<Word> got;
    const auto ball = enumerate_ball(s, r, {14.0, 2.0, false});
    for (const auto& e : ball) got.insert(e.word);
    CHECK(got.size() == ball.size());
    CHECK(got == expect);
    for (std::size_t k = 1; k < ball.size(); ++k) REQUIRE(ball[k - 1].d <= ball[k].d);
  }
}

TEST_CASE("enumerate_ball nesting and cache") {
  const auto& s = torus();
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "bifcurrent_cache_test";
  fs::remove_all(dir);
  setenv("BIFCURRENT_CACHE_DIR", dir.c_str(), 1);
  clear_ball_cache();
  const auto b9 = enumerate_ball(s, 9.0);
  clear_ball_cache();
  const auto b9_disk = enumerate_ball(s, 9.0);
  REQUIRE(b9.size() == b9_disk.size());
  for (std::size_t k = 0; k < b9.size(); ++k) {
    REQUIRE(b9[k].word == b9_disk[k].word);
    REQUIRE(b9[k].d == b9_disk[k].d);
    REQUIRE(b9[k].m == b9_disk[k].m);
  }
  const auto b7 = enumerate_ball(s, 7.0);
  std::set<Word> big;
  for (const auto& e : b9) big.insert(e.word);
  for (const auto& e : b7) REQUIRE(big.count(e.word));
  // fresh computation matches the filtered cache
  const auto b7_fresh = enumerate_ball(s, 7.0, {14.0, 2.0, false});
  REQUIRE(b7.size() == b7_fresh.size());
  unsetenv("BIFCURRENT_CACHE_DIR");
  fs::remove_all(dir);
}

TEST_CASE("ball growth against the hyperbolic area of balls") {
  const auto& s = torus();
  for (double r : {6.0, 8.0, 10.0}) {
    const double n = double(enumerate_ball(s, r).size());
    // Area B_H(r) = 2 pi (cosh r - 1)
    MESSAGE("r=" << r << " |B|=" << n << " |B| area/Area(B_H) = "
                 << n * s.area / (2 * std::numbers::pi * (std::cosh(r) - 1)));
    CHECK(n * s.area / (2 * std::numbers::pi * (std::cosh(r) - 1)) == doctest::Approx(1).epsilon(0.25));
  }
}

TEST_CASE("shortest geodesics") {
  const auto& s = torus();
  const double t = s.systole + 1e-6;
  const auto cls = enumerate_geodesics(s, t, false);
  // exhaustive oracle over cyclically reduced words of length <= 4
  std::set<Word> expect;
  all_words(s, 4, [&](const Word& w, const Matrix2d& m) {
    const double tr = std::abs(m.trace());
    if (w.empty() || tr <= 2) return;
    if (2 * std::acosh(tr / 2) <= t) expect.insert(conjugacy_representative(w));
  });
  std::set<Word> got;
  for (const auto& c : cls) got.insert(c.cyclic_word);
  CHECK(got == expect);
  CHECK(got.size() == 6);
  CHECK(cls.front().length == doctest::Approx(2 * std::acosh(1.5)).epsilon(1e-12));
  for (const auto& c : enumerate_geodesics(s, 6.0, false))
    REQUIRE(classify(s.element(c.cyclic_word)) == MoebiusClass::loxodromic);
}

TEST_CASE("geodesic enumeration: axis slack is sufficient") {
  const auto& s = torus();
  GeodesicOptions a, b;
  a.axis_slack = 2.0;
  b.axis_slack = 3.0;
  const auto ca = enumerate_geodesics(s, 7.0, false, a);
  const auto cb = enumerate_geodesics(s, 7.0, false, b);
  REQUIRE(ca.size() == cb.size());
  for (std::size_t k = 0; k < ca.size(); ++k) REQUIRE(ca[k].cyclic_word == cb[k].cyclic_word);
  GeodesicOptions c;
  c.axis_slack = 1.0;
  MESSAGE("classes at t=7: slack 1 -> " << enumerate_geodesics(s, 7.0, false, c).size()
                                        << ", slack 2 -> " << ca.size());
}

TEST_CASE("geodesic lengths are conjugation invariant; proper powers are rare") {
  const auto& s = torus();
  const auto cls = enumerate_geodesics(s, 10.0, false);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> letter(0, 3);
  std::size_t powers = 0;
  for (std::size_t k = 0; k < cls.size(); k += 37) {
    Word u;
    for (int j = 0; j < 4; ++j) u.push_back(Letter(letter(rng)));
    const Word conj = u * cls[k].cyclic_word * u.inverse();
    REQUIRE(conjugacy_representative(conj) == cls[k].cyclic_word);
  }
  for (const auto& c : cls) powers += !c.primitive;
  const double frac = double(powers) / double(cls.size());
  MESSAGE("classes with length <= 10: " << cls.size() << ", non-primitive fraction " << frac);
  CHECK(frac <= 0.05);
  CHECK(enumerate_geodesics(s, 10.0, true).size() == cls.size() - powers);
}

TEST_CASE("sample_ball_uniform") {
  const auto& s = torus();
  CHECK(sample_ball_uniform(s, 0.0, 1).empty());
  CHECK(sample_ball_uniform(s, 8.0, 99) == sample_ball_uniform(s, 8.0, 99));

  const auto ball = enumerate_ball(s, 6.0);
  std::map<Word, std::size_t> index;
  for (std::size_t k = 0; k < ball.size(); ++k) index[ball[k].word] = k;
  std::vector<double> counts(ball.size(), 0);
  const int n = 100000;
  for (int k = 0; k < n; ++k) counts[index.at(sample_ball_uniform(s, 6.0, 1000 + k))] += 1;
  const double expect = double(n) / double(ball.size());
  double chi2 = 0;
  for (double c : counts) chi2 += (c - expect) * (c - expect) / expect;
  boost::math::chi_squared dist(double(ball.size() - 1));
  const double p = boost::math::cdf(boost::math::complement(dist, chi2));
  MESSAGE("|B(6)|=" << ball.size() << " chi2=" << chi2 << " p=" << p);
  CHECK(p >= 0.01);
}

TEST_CASE("cusp shortcuts") {
  const auto& s = torus();
  REQUIRE(s.cusps.size() == 2);
  const Word cusp = conjugacy_representative(s.cusp_words[0], true);
  for (const auto& c : s.cusps) {
    CHECK(conjugacy_representative(c.shift, true) == cusp);
    CHECK(c.width == doctest::Approx(6.0));
    CHECK(std::abs(trace(s.element(c.shift))) == doctest::Approx(2.0));
  }
  // far round the cusp at infinity and at 0
  for (std::complex<double> z : {std::complex<double>(3023.8, 34975.0), std::complex<double>(-517.2, 2e3),
                                 std::complex<double>(-1.6e-6, 2.2e-5)}) {
    const auto r = reduce_point(s, HPoint(z));
    CHECK_FALSE(improving_side_pairing(s, r.z0.value(), kDefaultTol).has_value());
    const auto back = apply(s.element(r.w), r.z0);
    CHECK(std::abs(back.value() - z) / std::abs(z) < 1e-6);
  }
}
