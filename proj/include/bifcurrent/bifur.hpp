#pragma once

#include "bifcurrent/lyapunov.hpp"

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bifcurrent {

class GridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Axis-parallel rectangle [re0, re1] x [im0, im1] in the parameter plane.
struct Rect {
  double re0 = -1, re1 = 1, im0 = 1, im1 = 2.2;
};

/// nx * ny nodes on a rectangle, corners included. Fields over the grid are
/// Eigen matrices indexed (j, i): row j along the imaginary axis, column i
/// along the real axis.
struct GridSpec {
  Rect rect;
  int nx = 41, ny = 41;

  double hx() const { return (rect.re1 - rect.re0) / (nx - 1); }
  double hy() const { return (rect.im1 - rect.im0) / (ny - 1); }
  // i / (nx - 1) is rounded once, so a refined grid reproduces the coarse
  // nodes bit for bit
  std::complex<double> node(int i, int j) const {
    return {rect.re0 + (rect.re1 - rect.re0) * (double(i) / (nx - 1)),
            rect.im0 + (rect.im1 - rect.im0) * (double(j) / (ny - 1))};
  }
  void validate() const;
};

struct ParameterFamily {
  std::string name;
  std::function<Representation(std::complex<double>)> evaluator;
  Rect domain;
  std::vector<Word> constraint_words;

  Representation operator()(std::complex<double> lambda) const { return evaluator(lambda); }
};

/// rho_mu(X) = [[-i mu, -i], [-i, 0]], rho_mu(Y) = [[1, 2], [0, 1]]; [X, Y]
/// is parabolic for every mu.
ParameterFamily maskit_family(Rect domain = {});

/// tr X = trace_x fixed, tr Y = lambda, tr XY = z on the Markov surface
/// x^2 + y^2 + z^2 = xyz:
///   z = (x y + sqrt(x^2 y^2 - 4 (x^2 + y^2))) / 2
/// with the principal square root, so the branch cut is the set of lambda
/// where x^2 y^2 - 4 (x^2 + y^2) is real and negative (for x = 3 the segment
/// |Re y| <= 6/sqrt5 of the real axis together with the whole imaginary axis).
/// Generators X = [[x, -1], [1, 0]], Y = [[0, s], [-1/s, y]] with s + 1/s = z.
ParameterFamily trace_triple_family(double trace_x = 3, Rect domain = {3, 5, -1, 1});

/// The evaluator ignores lambda.
ParameterFamily constant_family(const Representation& rho, Rect domain = {});

/// max over nodes and constraint words of |tr^2 - 4|.
double max_constraint_defect(const ParameterFamily& family, const GridSpec& grid);

//------------------------------------------------------------------------
// Lyapunov grid and dd^c

enum class GridEstimator { brown, lattice_trace };

struct GridOptions {
  GridEstimator estimator = GridEstimator::lattice_trace;
  PathEnsembleOptions paths;
  LatticeOptions lattice;
  /// node caps per estimator
  int max_nodes_lattice = 101 * 101;
  int max_nodes_brown = 41 * 41;
};

struct CurrentGrid {
  GridSpec spec;
  Eigen::MatrixXd chi;     ///< NaN marks a hole
  Eigen::MatrixXd stderr_;
  /// mass per dual cell at interior nodes; NaN on the border and next to holes
  Eigen::MatrixXd ddc;
  /// locally averaged until nonnegative (display only)
  Eigen::MatrixXd ddc_smoothed;
  std::string estimator;
  std::map<std::string, double> params;
  std::vector<std::string> hole_errors;
};

/// chi at every node from one shared ensemble (common random numbers); the
/// ensemble seed is derive_seed(master_seed, "grid/<estimator>").
CurrentGrid lyapunov_grid(const FuchsianSurface& s, const ParameterFamily& family, const GridSpec& grid,
                          const GridOptions& opt, std::uint64_t master_seed);

/// (1/2pi) * 5-point Laplacian * hx * hy at interior nodes. A node is
/// skipped (NaN) if it or one of its four neighbours is NaN.
Eigen::MatrixXd ddc_of(const Eigen::MatrixXd& values, double hx, double hy);

/// Repeated 3x3 averaging of the valid entries until no entry is negative
/// (at most max_passes; leftover negatives are then set to 0).
Eigen::MatrixXd smooth_nonnegative(const Eigen::MatrixXd& ddc, int max_passes = 200);

/// Fills ddc and ddc_smoothed.
void ddc_density(CurrentGrid& g);

/// Sum of the finite entries.
double total_mass(const Eigen::MatrixXd& m);

/// Node sample of f.
Eigen::MatrixXd sample_field(const GridSpec& grid, const std::function<double(std::complex<double>)>& f);

//------------------------------------------------------------------------
// Divisors

struct WindingOptions {
  int initial = 8;       ///< samples per side
  int max_samples = 4096;
};

/// Winding number of f around the boundary of r (counterclockwise), sampled
/// adaptively until two refinements agree and no step turns by more than
/// pi/2. nullopt if it never stabilizes or f nearly vanishes on the boundary.
std::optional<long> winding_number(const std::function<std::complex<double>(std::complex<double>)>& f,
                                   const Rect& r, WindingOptions opt = {});

struct DivisorCell {
  int i = 0, j = 0;  ///< node of the dual cell
  long multiplicity = 0;
};

struct DivisorResult {
  std::vector<DivisorCell> cells;  ///< nonzero cells only
  std::vector<std::pair<int, int>> ambiguous;
  /// multiplicity / (2 normalizer) per dual cell (interior nodes)
  Eigen::MatrixXd mass;
  double normalizer = 1;
  double t_used = 0;
  /// f vanished identically: [Z] = 0 by convention
  bool whole = false;
  long total() const;
};

/// Zeros of tr^2(rho_lambda(word)) - t counted on the dual cells
/// [x_i -+ hx/2] x [y_j -+ hy/2] of the interior nodes, the same partition as
/// ddc_of. normalizer <= 0 selects d(i, rho_can(word) i).
DivisorResult divisor_zeros(const FuchsianSurface& s, const ParameterFamily& family, const Word& word,
                            std::complex<double> t, const GridSpec& grid, double normalizer = 0,
                            WindingOptions opt = {});

struct PoincareLelong {
  double divisor_mass = 0;  ///< zeros / (2 normalizer)
  double ddc_mass = 0;      ///< ddc of log|f| / (2 normalizer)
  long zeros = 0;
  std::size_t ambiguous = 0;
};

/// Both masses summed over the interior nodes at least `margin` nodes from
/// the border. A zero on or next to the outer edge puts the log singularity
/// on a sample the stencil reads, so the frame is left out.
PoincareLelong grid_poincare_lelong(const FuchsianSurface& s, const ParameterFamily& family, const Word& word,
                                    std::complex<double> t, const GridSpec& grid, int margin = 2);

/// Sums a per-node field over blocks of b x b interior nodes.
Eigen::MatrixXd bin_interior(const Eigen::MatrixXd& m, int b);

//------------------------------------------------------------------------
// Random closed geodesics

enum class GeodesicModel { thurston, brownian, length_based };
GeodesicModel parse_geodesic_model(const std::string& name);
std::string model_name(GeodesicModel m);

struct GeodesicSample {
  Word word;  ///< canonical cyclic representative
  double length = 0;
  GeodesicModel model = GeodesicModel::thurston;
  double t = 0;
  bool primitive = true;
  /// closures that were not loxodromic and were redrawn
  int resampled = 0;
};

GeodesicSample random_geodesic(const FuchsianSurface& s, GeodesicModel model, double t, std::uint64_t seed,
                               const BrownianOptions& brownian = {});

//------------------------------------------------------------------------
// Equidistribution

struct EquidistStep {
  double r = 0;
  GeodesicSample sample;
  /// sum over nodes of |u_n - chi| hx hy
  double l1 = 0;
  /// sum over b x b bins of |divisor mass - ddc mass|
  double mass_distance = 0;
  double divisor_mass = 0;
  double max_u_minus_bound = 0;  ///< max of u_n - (beta_hat/2 + 0.5), when computed
  bool whole = false;
  Eigen::MatrixXd u;
};

struct EquidistOptions {
  GeodesicModel model = GeodesicModel::length_based;
  std::vector<double> schedule{8, 10, 12};
  std::complex<double> t{4, 0};
  double log_clamp = -40;
  int bin = 4;
  /// compute the upper bound check with beta_hat over B(beta_radius); 0 skips
  double beta_radius = 0;
  BrownianOptions brownian;
};

struct EquidistReport {
  std::vector<EquidistStep> steps;
  int whole_draws = 0;
};

/// u_n(lambda) = log|tr^2(rho_lambda(gamma_n)) - t| / (2 length(gamma_n)),
/// clamped below at log_clamp / (2 length); chi must be filled.
EquidistReport equidist_experiment(const FuchsianSurface& s, const ParameterFamily& family, const CurrentGrid& chi,
                                   const EquidistOptions& opt, std::uint64_t master_seed);

/// The potential field of one word.
Eigen::MatrixXd potential_field(const ParameterFamily& family, const Word& word, std::complex<double> t,
                                const GridSpec& grid, double normalizer, double log_clamp = -40);

//------------------------------------------------------------------------

struct JorgensenResult {
  double score = 0;
  Word a, b;
};

/// min of |tr^2 A - 4| + |tr [A, B] - 2| over A among reduced words of length
/// <= depth and B among words of length <= 2, skipping pairs with
/// tr [A, B] = 2 (elementary pairs, where the inequality does not apply).
/// score < 1 flags a violation of a necessary condition for discreteness.
JorgensenResult discreteness_heuristic(const Representation& rho, int depth = 4);

//------------------------------------------------------------------------
// Grid files: "# key value" header lines, then ny rows of nx values.

void write_grid_field(std::ostream& out, const GridSpec& grid, const Eigen::MatrixXd& m,
                      const std::map<std::string, std::string>& header = {});
Eigen::MatrixXd read_grid_field(std::istream& in, GridSpec* grid = nullptr,
                                std::map<std::string, std::string>* header = nullptr);

}  // namespace bifcurrent
