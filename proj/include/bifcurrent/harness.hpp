#pragma once

#include "bifcurrent/bifur.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace bifcurrent {

inline constexpr const char* kCodeVersion = "bifcurrent-0.3.0";

/// Everything a pipeline reads. Loaded from JSON with defaults filled in; the
/// resolved form is what the manifest stores, so a rerun sees no defaults.
struct ExperimentConfig {
  std::string pipeline = "lyapunov";
  std::uint64_t master_seed = 1;
  std::filesystem::path output_dir = "out";

  std::string surface = "modular_torus";

  // representation for lyapunov / census: canonical, maskit, trace_triple, conjugate, file
  struct Rep {
    std::string kind = "canonical";
    std::complex<double> lambda{0.5, 2.2};
    std::string path;
    double trace_x = 3;
  } representation;

  struct Family {
    std::string name = "maskit";  ///< maskit | trace_triple | constant
    double trace_x = 3;
    Rect rect;
  } family;

  struct Estimator {
    std::vector<std::string> methods{"brown"};  ///< brown geodesic lattice_norm lattice_trace mu
    PathEnsembleOptions paths;
    LatticeOptions lattice;
    std::string grid_estimator = "lattice_trace";
  } estimator;

  struct Fls {
    FLSConfig config;
    std::size_t n_chains = 80;
    std::size_t n_steps = 400;
  } fls;

  struct Schedule {
    std::vector<double> radii{8, 10, 12};
    std::string model = "length_based";
    std::complex<double> t{4, 0};
    /// admissibility: r_n >= c n^delta
    double c = 1;
    double delta = 0.5;
    int bin = 4;
    double beta_radius = 0;
  } schedule;

  GridSpec grid;

  struct Census {
    std::vector<double> radii{6, 8, 10};
    double epsilon = 0.2;
    double chi_ref = 0.5;
  } census;

  struct Enumerate {
    std::vector<double> ball_radii{8, 10, 12};
    std::vector<double> geodesic_lengths{10};
  } enumerate;

  struct Divisor {
    std::vector<std::string> words;
    std::size_t random_words = 20;
    int min_length = 3, max_length = 10;
    std::complex<double> t{4, 0};
  } divisor;

  struct Brownian {
    double t = 40;
    std::size_t n_paths = 200;
    double heat_t = 20;
    std::size_t heat_paths = 2000;
  } brownian;

  /// Range and consistency checks; throws ConfigError.
  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& file);

/// r_n >= c n^delta for n = 1, 2, ... (then sum exp(-a r_n) converges for
/// every a > 0), radii positive and nondecreasing.
bool schedule_admissible(const std::vector<double>& radii, double c, double delta);

struct RunManifest {
  nlohmann::json config;  ///< resolved snapshot
  std::string code_version = kCodeVersion;
  std::string pipeline;
  std::map<std::string, std::uint64_t> seeds;
  double wall_clock_seconds = 0;
  unsigned workers = 1;
  std::map<std::string, std::string> outputs;  ///< file name -> sha256
  bool ok = false;
  nlohmann::json error;  ///< {type, message} on failure

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

/// Runs the configured pipeline, writes its artifacts and manifest.json into
/// output_dir. Module errors are caught and recorded (ok = false).
RunManifest run_experiment(const ExperimentConfig& config);

struct RerunResult {
  RunManifest manifest;
  bool identical = false;
  std::vector<std::string> mismatches;
};

/// Re-executes the configuration stored in a manifest into out_dir and
/// compares output digests.
RerunResult rerun(const std::filesystem::path& manifest_file, const std::filesystem::path& out_dir);

/// Hex SHA-256 of a file.
std::string sha256_file(const std::filesystem::path& file);

/// 17 significant digits, enough to round-trip a double.
std::string fmt(double v);

/// Surface by name (only the modular torus is built in).
FuchsianSurface surface_by_name(const std::string& name);
ParameterFamily family_from_config(const ExperimentConfig& c);
Representation representation_from_config(const ExperimentConfig& c, const FuchsianSurface& s);

}  // namespace bifcurrent
