#include "bifcurrent/bifur.hpp"

#include "bifcurrent/parallel.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>

namespace bifcurrent {

namespace {

using C = std::complex<double>;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const Word& commutator() {
  static const Word w("XYxy");
  return w;
}

}  // namespace

void GridSpec::validate() const {
  if (nx < 3 || ny < 3) throw GridError("grid needs at least 3 x 3 nodes");
  if (!(rect.re1 > rect.re0) || !(rect.im1 > rect.im0)) throw GridError("empty grid rectangle");
}

ParameterFamily maskit_family(Rect domain) {
  ParameterFamily f;
  f.name = "maskit";
  f.domain = domain;
  f.constraint_words = {commutator()};
  f.evaluator = [](C mu) {
    const C i(0, 1);
    Matrix2cd x, y;
    x << -i * mu, -i, -i, 0.0;
    y << 1.0, 2.0, 0.0, 1.0;
    return make_representation("maskit", x, y, {commutator()});
  };
  return f;
}

ParameterFamily trace_triple_family(double trace_x, Rect domain) {
  ParameterFamily f;
  f.name = "trace_triple";
  f.domain = domain;
  f.constraint_words = {commutator()};
  f.evaluator = [x = trace_x](C y) {
    const C z = (x * y + std::sqrt(x * x * y * y - 4.0 * (x * x + y * y))) / 2.0;
    // s + 1/s = z; either root works, take the larger one away from 0
    C s = (z + std::sqrt(z * z - 4.0)) / 2.0;
    if (std::abs(s) < 1) s = 1.0 / s;
    Matrix2cd a, b;
    a << x, -1.0, 1.0, 0.0;
    b << 0.0, s, -1.0 / s, y;
    return make_representation("trace_triple", a, b, {commutator()});
  };
  return f;
}

ParameterFamily constant_family(const Representation& rho, Rect domain) {
  ParameterFamily f;
  f.name = "constant:" + rho.name;
  f.domain = domain;
  f.constraint_words = rho.cusp_words;
  f.evaluator = [rho](C) { return rho; };
  return f;
}

double max_constraint_defect(const ParameterFamily& family, const GridSpec& grid) {
  double worst = 0;
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const auto rho = family(grid.node(i, j));
      for (const Word& w : family.constraint_words) {
        const C t = rho.matrix(w).trace();
        worst = std::max(worst, std::abs(t * t - 4.0));
      }
    }
  return worst;
}

//------------------------------------------------------------------------

Eigen::MatrixXd sample_field(const GridSpec& grid, const std::function<double(C)>& f) {
  Eigen::MatrixXd m(grid.ny, grid.nx);
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) m(j, i) = f(grid.node(i, j));
  return m;
}

CurrentGrid lyapunov_grid(const FuchsianSurface& s, const ParameterFamily& family, const GridSpec& grid,
                          const GridOptions& opt, std::uint64_t master_seed) {
  grid.validate();
  const bool brown = opt.estimator == GridEstimator::brown;
  const int cap = brown ? opt.max_nodes_brown : opt.max_nodes_lattice;
  if (grid.nx * grid.ny > cap)
    throw GridError("grid of " + std::to_string(grid.nx * grid.ny) + " nodes exceeds the cap " + std::to_string(cap));

  CurrentGrid out;
  out.spec = grid;
  out.estimator = brown ? "brown" : "lattice_trace";
  out.chi = Eigen::MatrixXd::Constant(grid.ny, grid.nx, kNaN);
  out.stderr_ = out.chi;

  // one ensemble for every node
  std::optional<WordEnsemble> paths;
  std::optional<LatticeDraws> draws;
  if (brown) {
    PathEnsembleOptions po = opt.paths;
    po.seed = derive_seed(master_seed, "grid/brown");
    paths = brownian_ensemble(s, po);
    out.params = paths->params;
  } else {
    LatticeOptions lo = opt.lattice;
    lo.seed = derive_seed(master_seed, "grid/lattice_trace");
    lo.use_trace = true;
    draws = lattice_draws(s, lo);
    out.params = {{"n_draws", double(lo.n_draws)}, {"r0", lo.r0},  {"exponent", lo.exponent},
                  {"cap", lo.cap},                 {"min_d", lo.min_distance}, {"seed", double(lo.seed)},
                  {"tail_from", lo.tail_from}};
  }
  out.params["master_seed"] = double(master_seed);

  struct NodeResult {
    double value = kNaN, err = kNaN;
    std::string error;
  };
  const auto results = parallel_map(std::size_t(grid.nx * grid.ny), [&](std::size_t k) {
    const int i = int(k) % grid.nx, j = int(k) / grid.nx;
    NodeResult r;
    try {
      const auto rho = family(grid.node(i, j));
      const auto e = brown ? chi_from_ensemble(*paths, rho) : chi_lattice(*draws, rho, true);
      if (!std::isfinite(e.value)) throw std::runtime_error("non-finite estimate");
      r.value = e.value;
      r.err = e.stderr_;
    } catch (const std::exception& ex) {
      r.error = ex.what();
    }
    return r;
  });
  for (std::size_t k = 0; k < results.size(); ++k) {
    const int i = int(k) % grid.nx, j = int(k) / grid.nx;
    out.chi(j, i) = results[k].value;
    out.stderr_(j, i) = results[k].err;
    if (!results[k].error.empty())
      out.hole_errors.push_back("(" + std::to_string(i) + "," + std::to_string(j) + ") " + results[k].error);
  }
  ddc_density(out);
  return out;
}

Eigen::MatrixXd ddc_of(const Eigen::MatrixXd& v, double hx, double hy) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Constant(v.rows(), v.cols(), kNaN);
  const double k = hx * hy / (2 * std::numbers::pi);
  for (Eigen::Index j = 1; j + 1 < v.rows(); ++j)
    for (Eigen::Index i = 1; i + 1 < v.cols(); ++i) {
      const double c = v(j, i);
      const double lap = (v(j, i + 1) + v(j, i - 1) - 2 * c) / (hx * hx) + (v(j + 1, i) + v(j - 1, i) - 2 * c) / (hy * hy);
      // NaN propagates: holes skip the node
      out(j, i) = k * lap;
    }
  return out;
}

Eigen::MatrixXd smooth_nonnegative(const Eigen::MatrixXd& ddc, int max_passes) {
  Eigen::MatrixXd cur = ddc;
  auto min_valid = [](const Eigen::MatrixXd& m) {
    double lo = 0;
    for (Eigen::Index k = 0; k < m.size(); ++k)
      if (std::isfinite(m.data()[k])) lo = std::min(lo, m.data()[k]);
    return lo;
  };
  for (int pass = 0; pass < max_passes && min_valid(cur) < 0; ++pass) {
    Eigen::MatrixXd next = cur;
    for (Eigen::Index j = 0; j < cur.rows(); ++j)
      for (Eigen::Index i = 0; i < cur.cols(); ++i) {
        if (!std::isfinite(cur(j, i))) continue;
        double sum = 0;
        int n = 0;
        for (Eigen::Index dj = -1; dj <= 1; ++dj)
          for (Eigen::Index di = -1; di <= 1; ++di) {
            const Eigen::Index jj = j + dj, ii = i + di;
            if (jj < 0 || ii < 0 || jj >= cur.rows() || ii >= cur.cols() || !std::isfinite(cur(jj, ii))) continue;
            sum += cur(jj, ii);
            ++n;
          }
        next(j, i) = sum / n;
      }
    cur = std::move(next);
  }
  for (Eigen::Index k = 0; k < cur.size(); ++k)
    if (std::isfinite(cur.data()[k])) cur.data()[k] = std::max(0.0, cur.data()[k]);
  return cur;
}

void ddc_density(CurrentGrid& g) {
  g.ddc = ddc_of(g.chi, g.spec.hx(), g.spec.hy());
  g.ddc_smoothed = smooth_nonnegative(g.ddc);
}

double total_mass(const Eigen::MatrixXd& m) {
  double s = 0;
  for (Eigen::Index k = 0; k < m.size(); ++k)
    if (std::isfinite(m.data()[k])) s += m.data()[k];
  return s;
}

//------------------------------------------------------------------------

namespace {

enum class WindStatus { ok, hit, unstable };

struct Wind {
  WindStatus status;
  long n = 0;
};

Wind wind(const std::function<C(C)>& f, const Rect& r, const WindingOptions& opt) {
  const C corners[4] = {{r.re0, r.im0}, {r.re1, r.im0}, {r.re1, r.im1}, {r.re0, r.im1}};
  std::optional<long> previous;
  for (int n = opt.initial; n <= opt.max_samples; n *= 2) {
    double total = 0, worst = 0;
    C first = 0, prev = 0;
    bool hit = false;
    for (int side = 0; side < 4 && !hit; ++side)
      for (int k = 0; k < n; ++k) {
        const C z = corners[side] + (corners[(side + 1) % 4] - corners[side]) * (double(k) / n);
        const C v = f(z);
        if (!(std::abs(v) > 1e-300) || !std::isfinite(std::abs(v))) {
          hit = true;
          break;
        }
        if (side == 0 && k == 0) {
          first = v;
        } else {
          const double step = std::arg(v / prev);
          total += step;
          worst = std::max(worst, std::abs(step));
        }
        prev = v;
      }
    if (hit) return {WindStatus::hit};
    const double last = std::arg(first / prev);
    total += last;
    worst = std::max(worst, std::abs(last));
    const long w = std::lround(total / (2 * std::numbers::pi));
    if (worst < std::numbers::pi / 2 && previous && *previous == w) return {WindStatus::ok, w};
    previous = w;
  }
  return {WindStatus::unstable};
}

}  // namespace

std::optional<long> winding_number(const std::function<C(C)>& f, const Rect& r, WindingOptions opt) {
  const Wind w = wind(f, r, opt);
  if (w.status != WindStatus::ok) return std::nullopt;
  return w.n;
}

long DivisorResult::total() const {
  long n = 0;
  for (const auto& c : cells) n += c.multiplicity;
  return n;
}

DivisorResult divisor_zeros(const FuchsianSurface& s, const ParameterFamily& family, const Word& word, C t,
                            const GridSpec& grid, double normalizer, WindingOptions opt) {
  grid.validate();
  DivisorResult out;
  out.normalizer = normalizer > 0 ? normalizer : distance_h2(base_point<double>(), apply(s.element(word), base_point<double>()));
  if (!(out.normalizer > 0)) throw std::invalid_argument("divisor_zeros: word with zero normalizer");
  out.mass = Eigen::MatrixXd::Constant(grid.ny, grid.nx, kNaN);

  // [Z] = 0 when f vanishes identically
  {
    bool all_zero = true;
    for (int q = 0; q < 9 && all_zero; ++q) {
      const C lambda = grid.node((grid.nx - 1) * (q % 3) / 2, (grid.ny - 1) * (q / 3) / 2) + C(1e-3 * q, 2e-3 * q);
      const C tr = family(lambda).matrix(word).trace();
      all_zero = std::abs(tr * tr - t) <= 1e-9 * (1 + std::abs(t));
    }
    if (all_zero) {
      out.whole = true;
      out.t_used = t.real();
      for (int j = 1; j + 1 < grid.ny; ++j)
        for (int i = 1; i + 1 < grid.nx; ++i) out.mass(j, i) = 0;
      return out;
    }
  }

  const double hx = grid.hx(), hy = grid.hy();
  for (int attempt = 0; attempt < 4; ++attempt) {
    const C tt = t + C(1e-9 * attempt, 0);
    auto f = [&](C lambda) {
      const C tr = family(lambda).matrix(word).trace();
      return tr * tr - tt;
    };
    struct CellResult {
      Wind w;
    };
    const int ni = grid.nx - 2, nj = grid.ny - 2;
    const auto cells = parallel_map(std::size_t(ni * nj), [&](std::size_t k) {
      const int i = 1 + int(k) % ni, j = 1 + int(k) / ni;
      const C c = grid.node(i, j);
      const Rect r{c.real() - hx / 2, c.real() + hx / 2, c.imag() - hy / 2, c.imag() + hy / 2};
      return CellResult{wind(f, r, opt)};
    });
    bool hit = false;
    for (const auto& c : cells) hit = hit || c.w.status == WindStatus::hit;
    if (hit) continue;
    out.t_used = tt.real();
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const int i = 1 + int(k) % ni, j = 1 + int(k) / ni;
      if (cells[k].w.status == WindStatus::unstable) {
        out.ambiguous.emplace_back(i, j);
        continue;
      }
      out.mass(j, i) = double(cells[k].w.n) / (2 * out.normalizer);
      if (cells[k].w.n != 0) out.cells.push_back({i, j, cells[k].w.n});
    }
    return out;
  }
  throw std::runtime_error("divisor_zeros: f vanishes on cell boundaries after perturbing t");
}

PoincareLelong grid_poincare_lelong(const FuchsianSurface& s, const ParameterFamily& family, const Word& word,
                                    C t, const GridSpec& grid, int margin) {
  const auto div = divisor_zeros(s, family, word, t, grid);
  const auto u = potential_field(family, word, C(div.t_used, t.imag()), grid, div.normalizer);
  const auto dd = ddc_of(u, grid.hx(), grid.hy());
  PoincareLelong out;
  out.ambiguous = div.ambiguous.size();
  if (div.whole) return out;
  for (int j = margin; j < grid.ny - margin; ++j)
    for (int i = margin; i < grid.nx - margin; ++i) {
      if (std::isfinite(div.mass(j, i))) out.divisor_mass += div.mass(j, i);
      if (std::isfinite(dd(j, i))) out.ddc_mass += dd(j, i);
    }
  out.zeros = std::lround(out.divisor_mass * 2 * div.normalizer);
  return out;
}

Eigen::MatrixXd bin_interior(const Eigen::MatrixXd& m, int b) {
  if (b < 1) throw std::invalid_argument("bin size must be positive");
  const Eigen::Index ni = m.cols() - 2, nj = m.rows() - 2;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero((nj + b - 1) / b, (ni + b - 1) / b);
  for (Eigen::Index j = 0; j < nj; ++j)
    for (Eigen::Index i = 0; i < ni; ++i) {
      const double v = m(j + 1, i + 1);
      if (std::isfinite(v)) out(j / b, i / b) += v;
    }
  return out;
}

//------------------------------------------------------------------------

GeodesicModel parse_geodesic_model(const std::string& name) {
  if (name == "thurston") return GeodesicModel::thurston;
  if (name == "brownian") return GeodesicModel::brownian;
  if (name == "length_based" || name == "length") return GeodesicModel::length_based;
  throw std::invalid_argument("unknown geodesic model " + name);
}

std::string model_name(GeodesicModel m) {
  switch (m) {
    case GeodesicModel::thurston: return "thurston";
    case GeodesicModel::brownian: return "brownian";
    case GeodesicModel::length_based: return "length_based";
  }
  return "?";
}

namespace {

const std::vector<GeodesicClass>& cached_geodesics(const FuchsianSurface& s, double t) {
  static std::mutex mutex;
  static std::map<std::pair<std::string, double>, std::vector<GeodesicClass>> cache;
  std::lock_guard lock(mutex);
  const auto key = std::make_pair(s.hash(), t);
  auto it = cache.find(key);
  if (it == cache.end()) {
    GeodesicOptions go;
    go.max_length = std::max(go.max_length, t);
    it = cache.emplace(key, enumerate_geodesics(s, t, true, go)).first;
  }
  return it->second;
}

}  // namespace

GeodesicSample random_geodesic(const FuchsianSurface& s, GeodesicModel model, double t, std::uint64_t seed,
                               const BrownianOptions& brownian) {
  if (!(t > 0)) throw std::invalid_argument("random_geodesic: t must be positive");
  GeodesicSample out;
  out.model = model;
  out.t = t;
  if (model == GeodesicModel::length_based) {
    const auto& classes = cached_geodesics(s, t);
    if (classes.empty()) throw std::invalid_argument("random_geodesic: no closed geodesic of length <= t");
    Rng rng(seed);
    const auto& g = classes[std::uniform_int_distribution<std::size_t>(0, classes.size() - 1)(rng)];
    out.word = g.cyclic_word;
    out.length = g.length;
    out.primitive = g.primitive;
    return out;
  }
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const std::uint64_t sd = attempt == 0 ? seed : derive_seed(seed, "redraw/" + std::to_string(attempt));
    Word w;
    if (model == GeodesicModel::thurston) {
      Rng rng(sd);
      const double angle = std::uniform_real_distribution<double>(-std::numbers::pi, std::numbers::pi)(rng);
      w = geodesic_ray_words(s, angle, t, t, 0.05).back();
    } else {
      BrownianOptions bo = brownian;
      bo.record_every = std::numeric_limits<int>::max();
      w = sample_path(s, s.base_point, t, sd, bo).word_trace.back();
    }
    const Word rep = conjugacy_representative(w);
    if (!rep.empty()) {
      const MoebiusR g = s.element(rep);
      if (classify(g) == MoebiusClass::loxodromic) {
        out.word = rep;
        out.length = translation_length(g);
        out.primitive = !is_proper_power(rep);
        return out;
      }
    }
    ++out.resampled;
  }
  throw std::runtime_error("random_geodesic: no loxodromic closure in 1000 draws");
}

//------------------------------------------------------------------------

Eigen::MatrixXd potential_field(const ParameterFamily& family, const Word& word, C t, const GridSpec& grid,
                                double normalizer, double log_clamp) {
  return sample_field(grid, [&](C lambda) {
    const auto rho = family(lambda);
    const auto g = evaluate_scaled(word, rho.images);
    const double v = std::log(std::abs(g.trace_sq_minus(t)));
    return std::max(v, log_clamp) / (2 * normalizer);
  });
}

EquidistReport equidist_experiment(const FuchsianSurface& s, const ParameterFamily& family, const CurrentGrid& chi,
                                   const EquidistOptions& opt, std::uint64_t master_seed) {
  const GridSpec& grid = chi.spec;
  if (chi.chi.rows() != grid.ny || chi.chi.cols() != grid.nx) throw GridError("equidist: chi grid not filled");
  const double cell = grid.hx() * grid.hy();
  const Eigen::MatrixXd ddc_bins = bin_interior(ddc_of(chi.chi, grid.hx(), grid.hy()), opt.bin);

  Eigen::MatrixXd bound;
  if (opt.beta_radius > 0)
    bound = sample_field(grid, [&](C lambda) { return fit_comparison_exponent(s, family(lambda), opt.beta_radius) / 2 + 0.5; });

  EquidistReport report;
  for (std::size_t n = 0; n < opt.schedule.size(); ++n) {
    EquidistStep step;
    step.r = opt.schedule[n];
    step.sample = random_geodesic(s, opt.model, step.r, derive_seed(master_seed, "equidist/" + std::to_string(n)),
                                  opt.brownian);
    const double norm = step.sample.length;
    step.u = potential_field(family, step.sample.word, opt.t, grid, norm, opt.log_clamp);
    for (Eigen::Index k = 0; k < step.u.size(); ++k) {
      const double c = chi.chi.data()[k];
      if (std::isfinite(c)) step.l1 += std::abs(step.u.data()[k] - c) * cell;
    }
    const auto div = divisor_zeros(s, family, step.sample.word, opt.t, grid, norm);
    step.whole = div.whole;
    if (div.whole) ++report.whole_draws;
    step.divisor_mass = total_mass(div.mass);
    step.mass_distance = (bin_interior(div.mass, opt.bin) - ddc_bins).cwiseAbs().sum();
    if (bound.size()) step.max_u_minus_bound = (step.u - bound).maxCoeff();
    report.steps.push_back(std::move(step));
  }
  return report;
}

//------------------------------------------------------------------------

JorgensenResult discreteness_heuristic(const Representation& rho, int depth) {
  if (depth < 1 || depth > 8) throw std::invalid_argument("discreteness_heuristic: depth must be in 1..8");
  const auto as = reduced_words(depth);
  const auto bs = reduced_words(2);
  std::vector<Matrix2cd> bm, bi;
  for (const Word& b : bs) {
    bm.push_back(rho.matrix(b));
    bi.push_back(rho.matrix(b.inverse()));
  }
  JorgensenResult best;
  best.score = std::numeric_limits<double>::infinity();
  for (const Word& a : as) {
    const Matrix2cd m = rho.matrix(a), mi = rho.matrix(a.inverse());
    const C tr = m.trace();
    const double ta = std::abs(tr * tr - 4.0);
    if (ta >= best.score) continue;
    for (std::size_t k = 0; k < bs.size(); ++k) {
      const double tc = std::abs(C((m * bm[k] * mi * bi[k]).trace()) - 2.0);
      if (tc < 1e-9) continue;
      if (ta + tc < best.score) best = {ta + tc, a, bs[k]};
    }
  }
  return best;
}

//------------------------------------------------------------------------

void write_grid_field(std::ostream& out, const GridSpec& grid, const Eigen::MatrixXd& m,
                      const std::map<std::string, std::string>& header) {
  out << std::setprecision(17);
  out << "# rect " << grid.rect.re0 << " " << grid.rect.re1 << " " << grid.rect.im0 << " " << grid.rect.im1 << "\n";
  out << "# nx " << grid.nx << "\n# ny " << grid.ny << "\n";
  for (const auto& [k, v] : header) out << "# " << k << " " << v << "\n";
  for (Eigen::Index j = 0; j < m.rows(); ++j) {
    for (Eigen::Index i = 0; i < m.cols(); ++i) out << (i ? " " : "") << m(j, i);
    out << "\n";
  }
}

Eigen::MatrixXd read_grid_field(std::istream& in, GridSpec* grid_out, std::map<std::string, std::string>* header) {
  GridSpec grid;
  grid.nx = grid.ny = 0;
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ls(line.substr(1));
      std::string key;
      ls >> key;
      if (key == "rect") {
        ls >> grid.rect.re0 >> grid.rect.re1 >> grid.rect.im0 >> grid.rect.im1;
      } else if (key == "nx") {
        ls >> grid.nx;
      } else if (key == "ny") {
        ls >> grid.ny;
      } else if (header) {
        std::string rest;
        std::getline(ls >> std::ws, rest);
        (*header)[key] = rest;
      }
      continue;
    }
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) values.push_back(std::stod(tok));  // stod reads nan
  }
  if (grid.nx <= 0 || grid.ny <= 0 || values.size() != std::size_t(grid.nx) * std::size_t(grid.ny))
    throw GridError("grid file: size does not match header");
  Eigen::MatrixXd m(grid.ny, grid.nx);
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) m(j, i) = values[std::size_t(j) * grid.nx + i];
  if (grid_out) *grid_out = grid;
  return m;
}

}  // namespace bifcurrent
