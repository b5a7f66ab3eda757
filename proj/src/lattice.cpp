#include "bifcurrent/lattice.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace bifcurrent {

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

template <typename Real>
std::complex<Real> act(const Matrix2<Real>& m, std::complex<Real> z) {
  return (m(0, 0) * z + m(0, 1)) / (m(1, 0) * z + m(1, 1));
}

}  // namespace

std::string FuchsianSurface::hash() const {
  std::ostringstream os;
  os.precision(17);
  os << name;
  for (int l : {0, 2})
    for (int k = 0; k < 4; ++k) os << ';' << images[l](k / 2, k % 2);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(os.str())));
  return buf;
}

FuchsianSurface make_surface(std::string name, const Matrix2d& x, const Matrix2d& y,
                             std::vector<Word> side_pairings, std::vector<Word> cusp_words,
                             double area, double systole) {
  FuchsianSurface s;
  s.name = std::move(name);
  s.images = letter_images<double>(x, y);
  s.images_ld = letter_images<long double>(x.cast<long double>(), y.cast<long double>());
  s.side_pairings = std::move(side_pairings);
  s.cusp_words = std::move(cusp_words);
  s.area = area;
  s.systole = systole;

  double dmin = std::numeric_limits<double>::infinity();
  for (const Word& w : s.side_pairings) {
    s.side_matrices.push_back(evaluate(w, s.images));
    s.side_matrices_ld.push_back(evaluate(w, s.images_ld));
    dmin = std::min(dmin, displacement_from_frob_sq(s.side_matrices.back().squaredNorm()));
  }
  // every nontrivial orbit point is at least dmin away, so the open ball of
  // radius dmin/2 about i sits inside the Dirichlet domain
  s.inradius = dmin / 2 - 1e-9;
  for (const auto& g : s.images)
    s.max_generator_displacement =
        std::max(s.max_generator_displacement, displacement_from_frob_sq(g.squaredNorm()));
  // parabolic products of two side pairings, one per fixed point
  for (const Word& u : s.side_pairings)
    for (const Word& v : s.side_pairings) {
      const Word w = u * v;
      if (w.empty()) continue;
      const Matrix2d m = evaluate(w, s.images);
      if (std::abs(std::abs(m.trace()) - 2) > 1e-12) continue;
      Matrix2d chart = Matrix2d::Identity();
      if (std::abs(m(1, 0)) > 1e-12) {
        const double p = (m(0, 0) - m(1, 1)) / (2 * m(1, 0));
        chart << 0, -1, 1, -p;
      }
      const Matrix2d t = chart * m * chart.inverse();
      const double width = t(0, 1) / t(0, 0);
      if (width <= 0) continue;
      bool seen = false;
      for (const auto& c : s.cusps) seen = seen || (c.chart - chart).norm() < 1e-9;
      if (!seen) s.cusps.push_back({w, chart, width});
    }
  return s;
}

FuchsianSurface modular_torus() {
  Matrix2d x, y;
  x << 2, 1, 1, 1;
  y << 1, 1, 1, 2;
  // The Dirichlet domain at i has eight sides; X^±1 and Y^±1 alone leave two
  // funnels open.
  std::vector<Word> sides = {Word("X"),  Word("x"),  Word("Y"),  Word("y"),
                             Word("Xy"), Word("Yx"), Word("yX"), Word("xY")};
  return make_surface("modular_torus", x, y, std::move(sides), {Word("XYxy")},
                      2 * std::numbers::pi, 2 * std::acosh(1.5));
}

//------------------------------------------------------------------------

std::optional<std::size_t> improving_side_pairing(const FuchsianSurface& s,
                                                  std::complex<double> z, double tol) {
  const double here = cosh_distance_from_base(z);
  std::size_t n = s.side_matrices.size();
  double keys[16];
  double best = here;
  for (std::size_t k = 0; k < n; ++k) {
    keys[k] = cosh_distance_from_base(act(s.side_matrices[k], z));
    best = std::min(best, keys[k]);
  }
  if (!(best < here - tol)) return std::nullopt;
  for (std::size_t k = 0; k < n; ++k)
    if (keys[k] <= best + tol) return k;
  return std::nullopt;
}

bool near_domain_wall(const FuchsianSurface& s, std::complex<double> z, double tol) {
  const double here = cosh_distance_from_base(z);
  for (const auto& m : s.side_matrices)
    if (cosh_distance_from_base(act(m, z)) < here + tol) return true;
  return false;
}

std::optional<CuspTurns> cusp_turns(const FuchsianSurface& s, std::complex<double> z) {
  for (std::size_t k = 0; k < s.cusps.size(); ++k) {
    const auto& c = s.cusps[k];
    const auto cz = act(c.chart, z);
    if (cz.imag() < c.width) continue;
    const double n = std::round((cz.real() - act(c.chart, s.base_point.value()).real()) / c.width);
    if (std::abs(n) >= 2) return CuspTurns{k, long(n)};
    return std::nullopt;
  }
  return std::nullopt;
}

Matrix2d cusp_power(const FuchsianSurface& s, const CuspTurns& t) {
  const auto& c = s.cusps[t.cusp];
  Matrix2d shift = Matrix2d::Identity();
  shift(0, 1) = -double(t.n) * c.width;
  return c.chart.inverse() * shift * c.chart;
}

void append_turns(const FuchsianSurface& s, const CuspTurns& t, Word& w) {
  const Word& step = s.cusps[t.cusp].shift;
  const Word inv = step.inverse();
  for (long k = 0; k < std::abs(t.n); ++k) w *= t.n > 0 ? step : inv;
}

ReducedPoint reduce_point(const FuchsianSurface& s, const HPoint& z, ReduceOptions opt) {
  std::complex<double> z0 = z.value();
  Word w;
  if (distance_h2(z, s.base_point) < s.inradius) return {z, w};
  if (const auto t = cusp_turns(s, z0)) {
    z0 = act(cusp_power(s, *t), z0);
    append_turns(s, *t, w);
  }
  for (int it = 0;; ++it) {
    if (it >= opt.max_iter) throw ReductionFailure("reduce_point: iteration cap reached");
    auto k = improving_side_pairing(s, z0, opt.tol);
    if (!k) break;
    z0 = act(s.side_matrices[*k], z0);
    w *= s.side_pairings[*k].inverse();
  }
  return {HPoint(z0), w};
}

Word reduce_lifted_ld(const FuchsianSurface& s, const Matrix2ld& u, const Matrix2ld& h,
                      ReduceOptions opt) {
  using C = std::complex<long double>;
  Matrix2ld g = u;
  Word w;
  const long double tol = opt.tol;
  const std::size_t n = s.side_matrices_ld.size();
  for (int it = 0;; ++it) {
    if (it >= opt.max_iter) throw ReductionFailure("reduce_lifted_ld: iteration cap reached");
    const Matrix2ld f = g * h;
    const C z = act(f, C(0, 1));
    const long double here = cosh_distance_from_base(z);
    long double best = here;
    long double keys[16];
    for (std::size_t k = 0; k < n; ++k) {
      keys[k] = cosh_distance_from_base(act(Matrix2ld(s.side_matrices_ld[k] * f), C(0, 1)));
      best = std::min(best, keys[k]);
    }
    if (!(best < here - tol)) break;
    std::size_t pick = 0;
    while (keys[pick] > best + tol) ++pick;
    g = s.side_matrices_ld[pick] * g;
    w *= s.side_pairings[pick].inverse();
  }
  return w;
}

//------------------------------------------------------------------------
// Ball cache
//------------------------------------------------------------------------

namespace {

struct CachedBall {
  double radius = -1;
  std::shared_ptr<const std::vector<BallElement>> elements;
};

std::mutex g_cache_mutex;
std::map<std::string, CachedBall> g_ball_cache;

constexpr const char* kCacheHeader = "bifcurrent-ball v1";

std::optional<std::filesystem::path> cache_dir() {
  const char* env = std::getenv("BIFCURRENT_CACHE_DIR");
  if (!env || !*env) return std::nullopt;
  return std::filesystem::path(env);
}

std::string radius_tag(double r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", r);
  return buf;
}

std::vector<BallElement> filter_ball(const std::vector<BallElement>& all, double r) {
  std::vector<BallElement> out;
  for (const auto& e : all) {
    if (e.d > r) break;
    out.push_back(e);
  }
  return out;
}

std::optional<CachedBall> load_ball(const FuchsianSurface& s, double r) {
  auto dir = cache_dir();
  if (!dir || !std::filesystem::is_directory(*dir)) return std::nullopt;
  const std::string prefix = "ball_" + s.hash() + "_";
  std::optional<std::pair<double, std::filesystem::path>> best;
  for (const auto& entry : std::filesystem::directory_iterator(*dir)) {
    const std::string fn = entry.path().filename().string();
    if (fn.rfind(prefix, 0) != 0 || entry.path().extension() != ".txt") continue;
    const double fr = std::atof(fn.substr(prefix.size()).c_str());
    if (fr >= r && (!best || fr < best->first)) best = {fr, entry.path()};
  }
  if (!best) return std::nullopt;
  std::ifstream in(best->second);
  std::string line;
  if (!std::getline(in, line) || line != kCacheHeader) return std::nullopt;
  std::string key, hash;
  double radius = 0;
  std::size_t count = 0;
  in >> key >> hash >> key >> radius >> key >> count;
  if (hash != s.hash()) return std::nullopt;
  auto elems = std::make_shared<std::vector<BallElement>>();
  elems->reserve(count);
  std::string ws;
  double d;
  while (in >> ws >> d) {
    BallElement e;
    e.word = Word(ws);
    e.d = d;
    e.m = s.matrix(e.word);
    elems->push_back(std::move(e));
  }
  if (elems->size() != count) return std::nullopt;
  return CachedBall{radius, elems};
}

void store_ball(const FuchsianSurface& s, double r, const std::vector<BallElement>& elems) {
  auto dir = cache_dir();
  if (!dir) return;
  std::error_code ec;
  std::filesystem::create_directories(*dir, ec);
  const auto final_path = *dir / ("ball_" + s.hash() + "_" + radius_tag(r) + ".txt");
  const auto tmp_path = final_path.string() + ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp_path);
    if (!out) return;
    out.precision(17);
    out << kCacheHeader << "\nsurface " << s.hash() << "\nradius " << r << "\ncount "
        << elems.size() << "\n";
    for (const auto& e : elems) out << e.word.str() << ' ' << e.d << '\n';
    if (!out) return;
  }
  std::filesystem::rename(tmp_path, final_path, ec);
  if (ec) std::filesystem::remove(tmp_path, ec);
}

std::vector<BallElement> compute_ball(const FuchsianSurface& s, double r, double prune_factor) {
  std::vector<BallElement> out;
  const double bound = r + prune_factor * s.max_generator_displacement;
  visit_words(s, bound, [&](const Word& w, const Matrix2d& m, double d) {
    if (d <= r) out.push_back({w, d, m});
    return true;
  });
  std::sort(out.begin(), out.end(), [](const BallElement& a, const BallElement& b) {
    if (a.d != b.d) return a.d < b.d;
    if (a.word.size() != b.word.size()) return a.word.size() < b.word.size();
    return a.word < b.word;
  });
  // Orbit-point guard: the group acts freely, so distinct words should give
  // distinct matrices. Keep the first (shortest) word if numerics disagree.
  std::vector<BallElement> dedup;
  dedup.reserve(out.size());
  for (auto& e : out) {
    bool dup = false;
    for (auto it = dedup.rbegin(); it != dedup.rend() && e.d - it->d < 1e-7; ++it) {
      const double diff = std::min((e.m - it->m).cwiseAbs().maxCoeff(),
                                   (e.m + it->m).cwiseAbs().maxCoeff());
      if (diff < 1e-7) {
        dup = true;
        break;
      }
    }
    if (!dup) dedup.push_back(std::move(e));
  }
  return dedup;
}

}  // namespace

void clear_ball_cache() {
  std::lock_guard lock(g_cache_mutex);
  g_ball_cache.clear();
}

std::vector<BallElement> enumerate_ball(const FuchsianSurface& s, double r,
                                        EnumerationOptions opt) {
  if (!(r <= opt.max_radius))
    throw ResourceError("enumerate_ball: radius " + std::to_string(r) + " above cap " +
                        std::to_string(opt.max_radius));
  if (r < 0) return {};
  const std::string key = s.hash();
  if (opt.use_cache) {
    std::lock_guard lock(g_cache_mutex);
    auto it = g_ball_cache.find(key);
    if (it != g_ball_cache.end() && it->second.radius >= r)
      return filter_ball(*it->second.elements, r);
    if (auto loaded = load_ball(s, r)) {
      g_ball_cache[key] = *loaded;
      return filter_ball(*loaded->elements, r);
    }
  }
  auto elems = std::make_shared<std::vector<BallElement>>(compute_ball(s, r, opt.prune_factor));
  if (opt.use_cache) {
    store_ball(s, r, *elems);
    std::lock_guard lock(g_cache_mutex);
    auto& slot = g_ball_cache[key];
    if (slot.radius < r) slot = {r, elems};
  }
  return *elems;
}

Word sample_ball_uniform(const FuchsianSurface& s, double r, std::uint64_t seed) {
  const auto ball = enumerate_ball(s, r);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, ball.size() - 1);
  return ball[pick(rng)].word;
}

//------------------------------------------------------------------------

std::vector<GeodesicClass> enumerate_geodesics(const FuchsianSurface& s, double t,
                                               bool primitive_only, GeodesicOptions opt) {
  if (!(t <= opt.max_length))
    throw ResourceError("enumerate_geodesics: length " + std::to_string(t) + " above cap");
  const double reach = t + 2 * opt.axis_slack;
  const double bound = reach + 2 * s.max_generator_displacement;
  // |tr| <= 2 cosh(t/2)
  const double tr_max = 2 * std::cosh(t / 2) * (1 + 1e-12);
  std::unordered_map<Word, double> classes;
  visit_words(s, bound, [&](const Word& w, const Matrix2d& m, double d) {
    if (d > reach) return true;
    const double tr = std::abs(m.trace());
    if (tr <= 2 + 1e-9 || tr > tr_max) return true;
    Word rep = conjugacy_representative(w, opt.unoriented);
    if (classes.count(rep)) return true;
    const Matrix2d mr = s.matrix(rep);
    const double len = 2 * std::acosh(std::abs(mr.trace()) / 2);
    if (len <= t) classes.emplace(std::move(rep), len);
    return true;
  });
  std::vector<GeodesicClass> out;
  out.reserve(classes.size());
  for (auto& [w, len] : classes) {
    const bool prim = !is_proper_power(w);
    if (primitive_only && !prim) continue;
    out.push_back({w, len, prim});
  }
  std::sort(out.begin(), out.end(), [](const GeodesicClass& a, const GeodesicClass& b) {
    if (a.length != b.length) return a.length < b.length;
    return a.cyclic_word < b.cyclic_word;
  });
  return out;
}

}  // namespace bifcurrent
