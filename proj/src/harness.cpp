#include "bifcurrent/harness.hpp"

#include "bifcurrent/parallel.hpp"
#include "bifcurrent/stats.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace bifcurrent {

namespace fs = std::filesystem;
using nlohmann::json;
using C = std::complex<double>;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

//------------------------------------------------------------------------
// config

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <typename T>
void read(const json& j, const char* key, T& v) {
  if (!j.contains(key)) return;
  try {
    v = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

void read_complex(const json& j, const char* key, C& v) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (a.is_number()) {
    v = {a.get<double>(), 0};
  } else if (a.is_array() && a.size() == 2) {
    v = {a[0].get<double>(), a[1].get<double>()};
  } else {
    throw ConfigError(std::string("'") + key + "' must be a number or [re, im]");
  }
}

void read_rect(const json& j, const char* key, Rect& r) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 4) throw ConfigError(std::string("'") + key + "' must be [re0, re1, im0, im1]");
  r = {a[0].get<double>(), a[1].get<double>(), a[2].get<double>(), a[3].get<double>()};
}

json complex_json(C z) { return json::array({z.real(), z.imag()}); }
json rect_json(const Rect& r) { return json::array({r.re0, r.re1, r.im0, r.im1}); }

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  check_keys(j, "config", {"pipeline", "master_seed", "output_dir", "surface", "representation", "family", "estimator",
                           "fls", "schedule", "grid", "census", "enumerate", "divisor", "brownian"});
  ExperimentConfig c;
  read(j, "pipeline", c.pipeline);
  read(j, "master_seed", c.master_seed);
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  read(j, "surface", c.surface);
  if (j.contains("representation")) {
    const auto& r = j.at("representation");
    check_keys(r, "representation", {"kind", "lambda", "path", "trace_x"});
    read(r, "kind", c.representation.kind);
    read_complex(r, "lambda", c.representation.lambda);
    read(r, "path", c.representation.path);
    read(r, "trace_x", c.representation.trace_x);
  }
  if (j.contains("family")) {
    const auto& f = j.at("family");
    check_keys(f, "family", {"name", "trace_x", "rect"});
    read(f, "name", c.family.name);
    read(f, "trace_x", c.family.trace_x);
    if (c.family.name == "trace_triple" && !f.contains("rect")) c.family.rect = trace_triple_family().domain;
    read_rect(f, "rect", c.family.rect);
  }
  if (j.contains("estimator")) {
    const auto& e = j.at("estimator");
    check_keys(e, "estimator", {"methods", "t_max", "n_paths", "dt", "step_cap", "checkpoint", "ray_step", "n_draws",
                                "r0", "exponent", "cap", "min_distance", "tail_from", "grid_estimator"});
    auto& p = c.estimator.paths;
    auto& l = c.estimator.lattice;
    read(e, "methods", c.estimator.methods);
    read(e, "t_max", p.t_max);
    read(e, "n_paths", p.n_paths);
    read(e, "dt", p.brownian.dt);
    read(e, "step_cap", p.brownian.step_cap);
    read(e, "checkpoint", p.checkpoint);
    read(e, "ray_step", p.ray_step);
    read(e, "n_draws", l.n_draws);
    read(e, "r0", l.r0);
    read(e, "exponent", l.exponent);
    read(e, "cap", l.cap);
    read(e, "min_distance", l.min_distance);
    read(e, "tail_from", l.tail_from);
    read(e, "grid_estimator", c.estimator.grid_estimator);
  }
  if (j.contains("fls")) {
    const auto& f = j.at("fls");
    check_keys(f, "fls", {"r", "R", "p", "max_cycles", "n_chains", "n_steps", "dt", "fine_cap"});
    read(f, "r", c.fls.config.r);
    read(f, "R", c.fls.config.R);
    read(f, "p", c.fls.config.p);
    read(f, "max_cycles", c.fls.config.max_cycles);
    read(f, "n_chains", c.fls.n_chains);
    read(f, "n_steps", c.fls.n_steps);
    read(f, "dt", c.fls.config.run.brownian.dt);
    read(f, "fine_cap", c.fls.config.run.fine_cap);
  }
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    check_keys(s, "schedule", {"radii", "model", "t", "c", "delta", "bin", "beta_radius"});
    read(s, "radii", c.schedule.radii);
    read(s, "model", c.schedule.model);
    read_complex(s, "t", c.schedule.t);
    read(s, "c", c.schedule.c);
    read(s, "delta", c.schedule.delta);
    read(s, "bin", c.schedule.bin);
    read(s, "beta_radius", c.schedule.beta_radius);
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    check_keys(g, "grid", {"nx", "ny", "rect"});
    read(g, "nx", c.grid.nx);
    read(g, "ny", c.grid.ny);
    c.grid.rect = c.family.rect;
    read_rect(g, "rect", c.grid.rect);
  } else {
    c.grid.rect = c.family.rect;
  }
  if (j.contains("census")) {
    const auto& s = j.at("census");
    check_keys(s, "census", {"radii", "epsilon", "chi_ref"});
    read(s, "radii", c.census.radii);
    read(s, "epsilon", c.census.epsilon);
    read(s, "chi_ref", c.census.chi_ref);
  }
  if (j.contains("enumerate")) {
    const auto& s = j.at("enumerate");
    check_keys(s, "enumerate", {"ball_radii", "geodesic_lengths"});
    read(s, "ball_radii", c.enumerate.ball_radii);
    read(s, "geodesic_lengths", c.enumerate.geodesic_lengths);
  }
  if (j.contains("divisor")) {
    const auto& s = j.at("divisor");
    check_keys(s, "divisor", {"words", "random_words", "min_length", "max_length", "t"});
    read(s, "words", c.divisor.words);
    read(s, "random_words", c.divisor.random_words);
    read(s, "min_length", c.divisor.min_length);
    read(s, "max_length", c.divisor.max_length);
    read_complex(s, "t", c.divisor.t);
  }
  if (j.contains("brownian")) {
    const auto& s = j.at("brownian");
    check_keys(s, "brownian", {"t", "n_paths", "heat_t", "heat_paths"});
    read(s, "t", c.brownian.t);
    read(s, "n_paths", c.brownian.n_paths);
    read(s, "heat_t", c.brownian.heat_t);
    read(s, "heat_paths", c.brownian.heat_paths);
  }
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  const auto& p = c.estimator.paths;
  const auto& l = c.estimator.lattice;
  return json{
      {"pipeline", c.pipeline},
      {"master_seed", c.master_seed},
      {"output_dir", c.output_dir.string()},
      {"surface", c.surface},
      {"representation",
       {{"kind", c.representation.kind},
        {"lambda", complex_json(c.representation.lambda)},
        {"path", c.representation.path},
        {"trace_x", c.representation.trace_x}}},
      {"family", {{"name", c.family.name}, {"trace_x", c.family.trace_x}, {"rect", rect_json(c.family.rect)}}},
      {"estimator",
       {{"methods", c.estimator.methods},
        {"t_max", p.t_max},
        {"n_paths", p.n_paths},
        {"dt", p.brownian.dt},
        {"step_cap", p.brownian.step_cap},
        {"checkpoint", p.checkpoint},
        {"ray_step", p.ray_step},
        {"n_draws", l.n_draws},
        {"r0", l.r0},
        {"exponent", l.exponent},
        {"cap", l.cap},
        {"min_distance", l.min_distance},
        {"tail_from", l.tail_from},
        {"grid_estimator", c.estimator.grid_estimator}}},
      {"fls",
       {{"r", c.fls.config.r},
        {"R", c.fls.config.R},
        {"p", c.fls.config.p},
        {"max_cycles", c.fls.config.max_cycles},
        {"n_chains", c.fls.n_chains},
        {"n_steps", c.fls.n_steps},
        {"dt", c.fls.config.run.brownian.dt},
        {"fine_cap", c.fls.config.run.fine_cap}}},
      {"schedule",
       {{"radii", c.schedule.radii},
        {"model", c.schedule.model},
        {"t", complex_json(c.schedule.t)},
        {"c", c.schedule.c},
        {"delta", c.schedule.delta},
        {"bin", c.schedule.bin},
        {"beta_radius", c.schedule.beta_radius}}},
      {"grid", {{"nx", c.grid.nx}, {"ny", c.grid.ny}, {"rect", rect_json(c.grid.rect)}}},
      {"census", {{"radii", c.census.radii}, {"epsilon", c.census.epsilon}, {"chi_ref", c.census.chi_ref}}},
      {"enumerate", {{"ball_radii", c.enumerate.ball_radii}, {"geodesic_lengths", c.enumerate.geodesic_lengths}}},
      {"divisor",
       {{"words", c.divisor.words},
        {"random_words", c.divisor.random_words},
        {"min_length", c.divisor.min_length},
        {"max_length", c.divisor.max_length},
        {"t", complex_json(c.divisor.t)}}},
      {"brownian",
       {{"t", c.brownian.t},
        {"n_paths", c.brownian.n_paths},
        {"heat_t", c.brownian.heat_t},
        {"heat_paths", c.brownian.heat_paths}}},
  };
}

ExperimentConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + file.string() + ": " + e.what());
  }
  return config_from_json(j);
}

bool schedule_admissible(const std::vector<double>& radii, double c, double delta) {
  if (radii.empty() || !(c > 0) || !(delta > 0)) return false;
  for (std::size_t n = 0; n < radii.size(); ++n) {
    if (!(radii[n] > 0)) return false;
    if (n > 0 && radii[n] < radii[n - 1]) return false;
    if (radii[n] < c * std::pow(double(n + 1), delta)) return false;
  }
  return true;
}

void ExperimentConfig::validate() const {
  static const std::set<std::string> pipelines{"lyapunov", "discretize", "brownian", "grid",
                                               "divisor",  "equidist",   "census",   "enumerate"};
  if (!pipelines.count(pipeline)) throw ConfigError("unknown pipeline '" + pipeline + "'");
  if (surface != "modular_torus") throw ConfigError("unknown surface '" + surface + "'");
  const auto& p = estimator.paths;
  if (!(p.t_max > 0) || p.t_max > 1e4) throw ConfigError("t_max must be in (0, 1e4]");
  if (p.n_paths < 1 || p.n_paths > 100000) throw ConfigError("n_paths must be in [1, 1e5]");
  if (!(p.brownian.dt > 0) || p.brownian.dt > 0.1) throw ConfigError("dt must be in (0, 0.1]");
  if (!(p.checkpoint > 0)) throw ConfigError("checkpoint must be positive");
  const auto& l = estimator.lattice;
  if (l.cap > 14 || l.r0 <= 0 || l.cap < l.r0) throw ConfigError("lattice schedule needs 0 < r0 <= cap <= 14");
  for (const auto& m : estimator.methods)
    if (m != "brown" && m != "geodesic" && m != "lattice_norm" && m != "lattice_trace" && m != "mu")
      throw ConfigError("unknown estimator '" + m + "'");
  if (estimator.grid_estimator != "brown" && estimator.grid_estimator != "lattice_trace")
    throw ConfigError("grid_estimator must be brown or lattice_trace");
  if (!schedule_admissible(schedule.radii, schedule.c, schedule.delta))
    throw ConfigError("schedule is not admissible (needs r_n >= c n^delta, nondecreasing, delta > 0)");
  try {
    parse_geodesic_model(schedule.model);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (schedule.model == "length_based" && schedule.radii.back() > 14)
    throw ConfigError("length_based schedule is capped at 14");
  grid.validate();
  const int nodes = grid.nx * grid.ny;
  if (nodes > (estimator.grid_estimator == "brown" ? 41 * 41 : 101 * 101))
    throw ConfigError("grid exceeds the node cap for " + estimator.grid_estimator);
  for (double r : enumerate.ball_radii)
    if (!(r > 0) || r > 14) throw ConfigError("ball radius must be in (0, 14]");
  for (double r : census.radii)
    if (!(r > 0) || r > 14) throw ConfigError("census radius must be in (0, 14]");
  if (fls.n_chains < 1 || fls.n_steps < 1) throw ConfigError("fls needs n_chains, n_steps >= 1");
  fls.config.validate(surface_by_name(surface));
  if (divisor.min_length < 1 || divisor.max_length < divisor.min_length)
    throw ConfigError("divisor word lengths must satisfy 1 <= min <= max");
}

//------------------------------------------------------------------------
// digests

namespace {

std::string hex(const unsigned char* d, unsigned n) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (unsigned k = 0; k < n; ++k) {
    s += digits[d[k] >> 4];
    s += digits[d[k] & 15];
  }
  return s;
}

struct Sha256 {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  Sha256() {
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx); }
  void update(const void* p, std::size_t n) { EVP_DigestUpdate(ctx, p, n); }
  std::string final() {
    unsigned char d[EVP_MAX_MD_SIZE];
    unsigned n = 0;
    EVP_DigestFinal_ex(ctx, d, &n);
    return hex(d, n);
  }
};

std::string sha256_string(const std::string& s) {
  Sha256 h;
  h.update(s.data(), s.size());
  return h.final();
}

}  // namespace

std::string sha256_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  Sha256 h;
  char buf[1 << 15];
  while (in) {
    in.read(buf, sizeof buf);
    h.update(buf, std::size_t(in.gcount()));
  }
  return h.final();
}

//------------------------------------------------------------------------

json RunManifest::to_json() const {
  json j{{"config", config},   {"code_version", code_version}, {"pipeline", pipeline},
         {"seeds", seeds},     {"wall_clock_seconds", wall_clock_seconds},
         {"workers", workers}, {"outputs", outputs},           {"ok", ok}};
  if (!error.is_null()) j["error"] = error;
  return j;
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  m.config = j.at("config");
  m.code_version = j.at("code_version").get<std::string>();
  m.pipeline = j.at("pipeline").get<std::string>();
  m.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
  m.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  m.workers = j.at("workers").get<unsigned>();
  m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
  m.ok = j.at("ok").get<bool>();
  if (j.contains("error")) m.error = j.at("error");
  return m;
}

FuchsianSurface surface_by_name(const std::string& name) {
  if (name == "modular_torus") return modular_torus();
  throw ConfigError("unknown surface '" + name + "'");
}

ParameterFamily family_from_config(const ExperimentConfig& c) {
  if (c.family.name == "maskit") return maskit_family(c.family.rect);
  if (c.family.name == "trace_triple") return trace_triple_family(c.family.trace_x, c.family.rect);
  if (c.family.name == "constant") {
    const auto s = surface_by_name(c.surface);
    return constant_family(representation_from_config(c, s), c.family.rect);
  }
  throw ConfigError("unknown family '" + c.family.name + "'");
}

Representation representation_from_config(const ExperimentConfig& c, const FuchsianSurface& s) {
  const auto& r = c.representation;
  if (r.kind == "canonical") return canonical_representation(s);
  if (r.kind == "maskit") return maskit_family()(r.lambda);
  if (r.kind == "trace_triple") return trace_triple_family(r.trace_x)(r.lambda);
  if (r.kind == "file") {
    std::ifstream in(r.path);
    if (!in) throw ConfigError("cannot open representation file " + r.path);
    return read_representation(in);
  }
  throw ConfigError("unknown representation kind '" + r.kind + "'");
}

//------------------------------------------------------------------------
// pipelines

namespace {

struct Context {
  const ExperimentConfig& cfg;
  const FuchsianSurface& surface;
  RunManifest& manifest;

  std::uint64_t seed(const std::string& task) {
    const std::uint64_t s = derive_seed(cfg.master_seed, task);
    manifest.seeds[task] = s;
    return s;
  }
  fs::path file(const std::string& name) {
    manifest.outputs[name] = "";
    return cfg.output_dir / name;
  }
};

class Csv {
 public:
  Csv(const fs::path& p, std::initializer_list<const char*> header) : out_(p) {
    if (!out_) throw std::runtime_error("cannot write " + p.string());
    bool first = true;
    for (const char* h : header) {
      out_ << (first ? "" : ",") << h;
      first = false;
    }
    out_ << "\n";
  }
  Csv& operator<<(double v) { return cell(fmt(v)); }
  Csv& operator<<(const std::string& s) { return cell(s); }
  Csv& operator<<(const char* s) { return cell(s); }
  Csv& operator<<(long v) { return cell(std::to_string(v)); }
  Csv& operator<<(int v) { return cell(std::to_string(v)); }
  Csv& operator<<(std::size_t v) { return cell(std::to_string(v)); }
  void end() {
    out_ << "\n";
    first_ = true;
  }

 private:
  Csv& cell(const std::string& s) {
    out_ << (first_ ? "" : ",") << s;
    first_ = false;
    return *this;
  }
  std::ofstream out_;
  bool first_ = true;
};

void write_grid(Context& ctx, const std::string& name, const GridSpec& g, const Eigen::MatrixXd& m,
                const std::map<std::string, std::string>& header) {
  std::ofstream out(ctx.file(name));
  write_grid_field(out, g, m, header);
}

std::vector<DiscretizationRun> run_chains(Context& ctx, const std::string& task) {
  const auto& f = ctx.cfg.fls;
  f.config.validate(ctx.surface);
  const std::uint64_t base = ctx.seed(task);
  return parallel_map(f.n_chains, [&](std::size_t k) {
    return run_chain(ctx.surface, f.config, f.n_steps, derive_seed(base, std::to_string(k)));
  });
}

void estimate_row(Csv& csv, const LyapunovEstimate& e) {
  csv << e.method << e.value << e.stderr_ << e.endpoint << e.endpoint_stderr << e.slope << e.slope_stderr << e.n
      << e.excluded;
  csv.end();
}

void pipeline_lyapunov(Context& ctx) {
  const auto& c = ctx.cfg;
  const auto rho = representation_from_config(c, ctx.surface);
  Csv csv(ctx.file("lyapunov.csv"),
          {"method", "value", "stderr", "endpoint", "endpoint_stderr", "slope", "slope_stderr", "n", "excluded"});
  std::optional<LatticeDraws> draws;
  for (const auto& m : c.estimator.methods) {
    if (m == "brown" || m == "geodesic") {
      PathEnsembleOptions po = c.estimator.paths;
      po.seed = ctx.seed("lyapunov/" + m);
      estimate_row(csv, m == "brown" ? chi_brown(ctx.surface, rho, po) : chi_geodesic(ctx.surface, rho, po));
    } else if (m == "lattice_norm" || m == "lattice_trace") {
      if (!draws) {
        LatticeOptions lo = c.estimator.lattice;
        lo.seed = ctx.seed("lyapunov/lattice");
        draws = lattice_draws(ctx.surface, lo);
      }
      estimate_row(csv, chi_lattice(*draws, rho, m == "lattice_trace"));
    } else if (m == "mu") {
      const auto runs = run_chains(ctx, "lyapunov/mu");
      const auto e = chi_mu(rho, runs);
      std::vector<double> taus;
      for (const auto& r : runs) taus.push_back(r.stop_times.back() / double(r.stop_times.size()));
      const auto tau = mean_stderr(taus);
      estimate_row(csv, e);
      LyapunovEstimate t;
      t.method = "tau";
      t.value = t.endpoint = tau.mean;
      t.stderr_ = t.endpoint_stderr = tau.stderr_;
      t.n = runs.size();
      estimate_row(csv, t);
      LyapunovEstimate q;
      q.method = "mu_over_tau";
      q.value = q.endpoint = e.value / tau.mean;
      q.stderr_ = q.endpoint_stderr = std::abs(q.value) * std::hypot(e.stderr_ / e.value, tau.stderr_ / tau.mean);
      q.n = runs.size();
      estimate_row(csv, q);
    }
  }
}

double chi2_uniform_p(const std::vector<double>& angles, int bins) {
  std::vector<double> counts(bins, 0);
  for (double a : angles) {
    double u = (a + std::numbers::pi) / (2 * std::numbers::pi);
    u -= std::floor(u);
    counts[std::min(bins - 1, int(u * bins))] += 1;
  }
  return chi_square_uniform(counts).p_value;
}

void pipeline_discretize(Context& ctx) {
  const auto runs = run_chains(ctx, "discretize/chains");
  {
    Csv csv(ctx.file("increments.csv"), {"chain", "step", "increment", "stop_time", "rejected", "exit_angle"});
    for (std::size_t k = 0; k < runs.size(); ++k)
      for (std::size_t n = 0; n < runs[k].increments.size(); ++n) {
        csv << k << n + 1 << runs[k].increments[n].str() << runs[k].stop_times[n] << runs[k].rejected_cycles[n]
            << runs[k].exit_angles[n];
        csv.end();
      }
  }
  std::vector<double> taus, gaps, angles;
  std::size_t accepted = 0, cycles = 0;
  for (const auto& r : runs) {
    taus.push_back(r.stop_times.back() / double(r.stop_times.size()));
    double prev = 0;
    for (double t : r.stop_times) {
      gaps.push_back(t - prev);
      prev = t;
    }
    angles.insert(angles.end(), r.exit_angles.begin(), r.exit_angles.end());
    accepted += r.increments.size();
    cycles += r.cycles;
  }
  const auto tau = mean_stderr(taus);
  const auto tail = stopping_time_tail(gaps);
  const auto mu = empirical_mu(runs);
  Csv csv(ctx.file("discretize_summary.csv"), {"key", "value"});
  auto row = [&](const char* k, double v) {
    csv << k << v;
    csv.end();
  };
  row("tau", tau.mean);
  row("tau_stderr", tau.stderr_);
  row("acceptances", double(accepted));
  row("acceptance_rate", double(accepted) / double(cycles));
  row("p", ctx.cfg.fls.config.p);
  row("exit_angle_chi2_p", chi2_uniform_p(angles, 20));
  row("tail_slope", tail.slope);
  row("tail_r2", tail.r2);
  row("mu_identity", mu.count(Word()) ? mu.at(Word()) : 0.0);
  row("mu_support", double(mu.size()));
}

void pipeline_brownian(Context& ctx) {
  const auto& b = ctx.cfg.brownian;
  BrownianOptions bo = ctx.cfg.estimator.paths.brownian;
  bo.record_every = std::numeric_limits<int>::max();
  auto final_distance = [&](double t, std::size_t n, const std::string& task) {
    const std::uint64_t base = ctx.seed(task);
    return parallel_map(n, [&](std::size_t k) {
      return sample_path(ctx.surface, ctx.surface.base_point, t, derive_seed(base, std::to_string(k)), bo)
          .lift_distance.back();
    });
  };
  const auto d = final_distance(b.t, b.n_paths, "brownian/drift");
  {
    Csv csv(ctx.file("brownian_paths.csv"), {"path", "t", "distance"});
    for (std::size_t k = 0; k < d.size(); ++k) {
      csv << k << b.t << d[k];
      csv.end();
    }
  }
  std::vector<double> drift;
  for (double x : d) drift.push_back(x / b.t);
  const auto m = mean_stderr(drift);
  const auto heat = final_distance(b.heat_t, b.heat_paths, "brownian/heat");
  const auto fit = heat_kernel_shape_fit(heat, b.heat_t);
  Csv csv(ctx.file("brownian_summary.csv"), {"key", "value"});
  auto row = [&](const char* k, double v) {
    csv << k << v;
    csv.end();
  };
  row("drift", m.mean);
  row("drift_stderr", m.stderr_);
  row("heat_t", b.heat_t);
  row("heat_slope", fit.slope);
  row("heat_slope_stderr", fit.slope_stderr);
  row("heat_r2", fit.r2);
}

CurrentGrid chi_grid(Context& ctx) {
  const auto& c = ctx.cfg;
  const auto family = family_from_config(c);
  GridOptions go;
  go.estimator = c.estimator.grid_estimator == "brown" ? GridEstimator::brown : GridEstimator::lattice_trace;
  go.paths = c.estimator.paths;
  go.lattice = c.estimator.lattice;
  ctx.manifest.seeds["grid/" + c.estimator.grid_estimator] = derive_seed(c.master_seed, "grid/" + c.estimator.grid_estimator);

  // optional on-disk cache of chi and its stderr, keyed by everything they
  // depend on
  const char* cache_env = std::getenv("BIFCURRENT_CACHE_DIR");
  fs::path cached;
  auto part = [&](const char* field) { return fs::path(cached.string() + "." + field + ".grid"); };
  if (cache_env && *cache_env) {
    json key = config_to_json(c);
    json k{{"family", key["family"]}, {"grid", key["grid"]},  {"estimator", key["estimator"]},
           {"seed", c.master_seed},   {"surface", c.surface}, {"version", kCodeVersion}};
    if (c.family.name == "constant") k["representation"] = key["representation"];
    cached = fs::path(cache_env) / ("chi-" + sha256_string(k.dump()));
    if (fs::exists(part("chi")) && fs::exists(part("stderr"))) {
      std::ifstream a(part("chi")), b(part("stderr"));
      CurrentGrid g;
      g.spec = c.grid;
      g.chi = read_grid_field(a);
      g.stderr_ = read_grid_field(b);
      g.estimator = c.estimator.grid_estimator;
      ddc_density(g);
      return g;
    }
  }
  auto g = lyapunov_grid(ctx.surface, family, c.grid, go, c.master_seed);
  if (!cached.empty()) {
    fs::create_directories(cached.parent_path());
    // write then rename, so a concurrent reader never sees half a file
    for (const auto& [field, m] : {std::pair{"stderr", &g.stderr_}, std::pair{"chi", &g.chi}}) {
      const fs::path tmp = part(field).string() + ".tmp";
      {
        std::ofstream out(tmp);
        write_grid_field(out, g.spec, *m);
      }
      fs::rename(tmp, part(field));
    }
  }
  return g;
}

void pipeline_grid(Context& ctx) {
  const auto g = chi_grid(ctx);
  const std::map<std::string, std::string> h{{"estimator", g.estimator},
                                             {"master_seed", std::to_string(ctx.cfg.master_seed)}};
  write_grid(ctx, "chi.grid", g.spec, g.chi, h);
  if (g.stderr_.size()) write_grid(ctx, "chi_stderr.grid", g.spec, g.stderr_, h);
  write_grid(ctx, "ddc.grid", g.spec, g.ddc, h);
  write_grid(ctx, "ddc_smoothed.grid", g.spec, g.ddc_smoothed, h);
  const auto family = family_from_config(ctx.cfg);
  Csv csv(ctx.file("grid_summary.csv"), {"key", "value"});
  auto row = [&](const char* k, double v) {
    csv << k << v;
    csv.end();
  };
  row("ddc_mass", total_mass(g.ddc));
  row("ddc_negative_mass", total_mass(g.ddc.cwiseMin(0.0)));
  row("chi_min", g.chi.minCoeff());
  row("chi_max", g.chi.maxCoeff());
  row("holes", double(g.chi.array().isNaN().count()));
  row("max_constraint_defect", max_constraint_defect(family, g.spec));
}

std::vector<Word> divisor_words(Context& ctx) {
  const auto& d = ctx.cfg.divisor;
  std::vector<Word> words;
  for (const auto& w : d.words) words.emplace_back(w);
  if (d.random_words > 0) {
    Rng rng(ctx.seed("divisor/words"));
    while (words.size() < d.words.size() + d.random_words) {
      Word w;
      const int len = std::uniform_int_distribution<int>(d.min_length, d.max_length)(rng);
      while (int(w.size()) < len) {
        const Letter l = Letter(std::uniform_int_distribution<int>(0, 3)(rng));
        if (!w.empty() && w.back() == inverse(l)) continue;
        w.push_back(l);
      }
      w = cyclic_reduce(w);
      if (!w.empty()) words.push_back(w);
    }
  }
  return words;
}

void pipeline_divisor(Context& ctx) {
  const auto family = family_from_config(ctx.cfg);
  const auto words = divisor_words(ctx);
  Csv cells(ctx.file("divisor.csv"), {"word", "cell_i", "cell_j", "multiplicity"});
  Csv summary(ctx.file("divisor_summary.csv"),
              {"word", "normalizer", "zeros", "divisor_mass", "ddc_mass", "ambiguous", "whole"});
  double div_total = 0, ddc_total = 0;
  for (const Word& w : words) {
    const auto d = divisor_zeros(ctx.surface, family, w, ctx.cfg.divisor.t, ctx.cfg.grid);
    for (const auto& c : d.cells) {
      cells << w.str() << c.i << c.j << c.multiplicity;
      cells.end();
    }
    const auto pl = grid_poincare_lelong(ctx.surface, family, w, ctx.cfg.divisor.t, ctx.cfg.grid);
    summary << w.str() << d.normalizer << d.total() << pl.divisor_mass << pl.ddc_mass << d.ambiguous.size()
            << int(d.whole);
    summary.end();
    div_total += pl.divisor_mass;
    ddc_total += pl.ddc_mass;
  }
  summary << "TOTAL" << 0.0 << 0 << div_total << ddc_total << 0 << 0;
  summary.end();
}

void pipeline_equidist(Context& ctx) {
  const auto& c = ctx.cfg;
  const auto family = family_from_config(c);
  const auto g = chi_grid(ctx);
  write_grid(ctx, "chi.grid", g.spec, g.chi, {{"estimator", g.estimator}});
  EquidistOptions eo;
  eo.model = parse_geodesic_model(c.schedule.model);
  eo.schedule = c.schedule.radii;
  eo.t = c.schedule.t;
  eo.bin = c.schedule.bin;
  eo.beta_radius = c.schedule.beta_radius;
  eo.brownian = c.estimator.paths.brownian;
  for (std::size_t n = 0; n < eo.schedule.size(); ++n) ctx.seed("equidist/" + std::to_string(n));
  const auto rep = equidist_experiment(ctx.surface, family, g, eo, c.master_seed);
  Csv csv(ctx.file("equidist.csv"), {"n", "r", "word", "length", "primitive", "l1", "mass_distance", "divisor_mass",
                                     "max_u_minus_bound", "whole"});
  for (std::size_t n = 0; n < rep.steps.size(); ++n) {
    const auto& s = rep.steps[n];
    csv << n << s.r << s.sample.word.str() << s.sample.length << int(s.sample.primitive) << s.l1 << s.mass_distance
        << s.divisor_mass << s.max_u_minus_bound << int(s.whole);
    csv.end();
    write_grid(ctx, "u_" + std::to_string(n) + ".grid", g.spec, s.u, {{"word", s.sample.word.str()}});
  }
}

void pipeline_census(Context& ctx) {
  const auto& c = ctx.cfg;
  const auto rho = representation_from_config(c, ctx.surface);
  const auto ladder = census_ladder(ctx.surface, rho, c.census.radii, c.census.epsilon, c.census.chi_ref);
  {
    Csv csv(ctx.file("census.csv"), {"radius", "ball_size", "bad", "bad_fraction"});
    for (const auto& r : ladder.rungs) {
      csv << r.radius << r.ball_size << r.bad << r.bad_fraction;
      csv.end();
    }
  }
  Csv csv(ctx.file("census_fit.csv"), {"key", "value"});
  csv << "slope" << ladder.fit.slope;
  csv.end();
  csv << "r2" << ladder.fit.r2;
  csv.end();
  csv << "strictly_decreasing" << int(ladder.strictly_decreasing);
  csv.end();
}

void pipeline_enumerate(Context& ctx) {
  const auto& c = ctx.cfg;
  {
    Csv csv(ctx.file("ball.csv"), {"radius", "count", "margulis_ratio", "area_ratio"});
    for (double r : c.enumerate.ball_radii) {
      std::size_t n = 0;
      for (const auto& b : enumerate_ball(ctx.surface, r))
        if (b.d <= r) ++n;
      // |B(r)| 2pi / e^r as in the counting statement, and against
      // Area(B_H(r)) / Area(X) = (cosh r - 1) for the torus
      csv << r << n << double(n) * 2 * std::numbers::pi / std::exp(r) << double(n) / (std::cosh(r) - 1);
      csv.end();
    }
  }
  Csv csv(ctx.file("geodesics.csv"), {"t", "count", "prime_ratio"});
  for (double t : c.enumerate.geodesic_lengths) {
    GeodesicOptions go;
    go.max_length = std::max(go.max_length, t);
    const auto classes = enumerate_geodesics(ctx.surface, t, true, go);
    csv << t << classes.size() << double(classes.size()) * t / std::exp(t);
    csv.end();
  }
}

json error_record(const std::exception& e) {
  std::string type = "runtime";
  if (dynamic_cast<const ConfigError*>(&e)) type = "config";
  else if (dynamic_cast<const GridError*>(&e)) type = "grid";
  else if (dynamic_cast<const ChainError*>(&e)) type = "chain";
  else if (dynamic_cast<const std::invalid_argument*>(&e)) type = "invalid_argument";
  return json{{"type", type}, {"message", e.what()}};
}

}  // namespace

RunManifest run_experiment(const ExperimentConfig& config) {
  RunManifest manifest;
  manifest.config = config_to_json(config);
  manifest.pipeline = config.pipeline;
  manifest.workers = default_workers();
  const auto start = std::chrono::steady_clock::now();
  fs::create_directories(config.output_dir);
  try {
    config.validate();
    const auto surface = surface_by_name(config.surface);
    Context ctx{config, surface, manifest};
    const std::string& p = config.pipeline;
    if (p == "lyapunov") pipeline_lyapunov(ctx);
    else if (p == "discretize") pipeline_discretize(ctx);
    else if (p == "brownian") pipeline_brownian(ctx);
    else if (p == "grid") pipeline_grid(ctx);
    else if (p == "divisor") pipeline_divisor(ctx);
    else if (p == "equidist") pipeline_equidist(ctx);
    else if (p == "census") pipeline_census(ctx);
    else if (p == "enumerate") pipeline_enumerate(ctx);
    for (auto& [name, digest] : manifest.outputs) digest = sha256_file(config.output_dir / name);
    manifest.ok = true;
  } catch (const std::exception& e) {
    manifest.ok = false;
    manifest.outputs.clear();
    manifest.error = error_record(e);
  }
  manifest.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ofstream(config.output_dir / "manifest.json") << manifest.to_json().dump(2) << "\n";
  return manifest;
}

RerunResult rerun(const fs::path& manifest_file, const fs::path& out_dir) {
  std::ifstream in(manifest_file);
  if (!in) throw ConfigError("cannot open manifest " + manifest_file.string());
  const auto old = RunManifest::from_json(json::parse(in));
  auto cfg = config_from_json(old.config);
  cfg.output_dir = out_dir;
  RerunResult r;
  r.manifest = run_experiment(cfg);
  r.identical = r.manifest.ok == old.ok;
  for (const auto& [name, digest] : old.outputs) {
    auto it = r.manifest.outputs.find(name);
    if (it == r.manifest.outputs.end() || it->second != digest) r.mismatches.push_back(name);
  }
  for (const auto& [name, digest] : r.manifest.outputs)
    if (!old.outputs.count(name)) r.mismatches.push_back(name);
  r.identical = r.identical && r.mismatches.empty();
  return r;
}

}  // namespace bifcurrent
