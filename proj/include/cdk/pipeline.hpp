// End-to-end graph recovery experiments: measure -> moments -> evaluator ->
// approximant on a grid -> error metrics.

#ifndef CDK_PIPELINE_HPP
#define CDK_PIPELINE_HPP

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "cdk/basis.hpp"
#include "cdk/christoffel.hpp"
#include "cdk/measures.hpp"

namespace cdk {

struct Piece {
  BoxDomain domain;
  ScalarField f;
};

enum class FunctionKind { catalog, polynomial };

/// A piecewise function on a box partition. Quadrature is done per piece, so
/// discontinuities must sit on piece boundaries.
struct FunctionSpec {
  std::string name;
  FunctionKind kind = FunctionKind::catalog;
  std::vector<Piece> pieces;
  std::vector<std::vector<double>> critical_x;
  /// Exact polynomial degree when f is a polynomial, -1 otherwise.
  int polynomial_degree = -1;

  std::size_t dim() const { return pieces.empty() ? 0 : pieces.front().domain.dim(); }
  /// Bounding box of all pieces.
  BoxDomain domain() const;
  /// Value from the first piece containing x; throws std::domain_error outside.
  double operator()(std::span<const double> x) const;
  void validate() const;
};

struct PolynomialTerm {
  std::vector<int> exponents;
  double coefficient = 0.0;
};

/// sum_k c_k prod_j x_j^{e_kj} on a single box.
FunctionSpec polynomial_function(std::vector<PolynomialTerm> terms, BoxDomain domain);

/// poly-quadratic, poly-cubic, sign, abs, step3, sqrt01, exp, runge.
FunctionSpec catalog(std::string_view name);
const std::vector<std::string>& catalog_names();

struct TikhonovMode {};

struct SmoothedMode {
  double epsilon = 0.1;
  bool normalize_slice = true;
  int y_quad_order = 0;  // 0 -> 2 (d + 1) + 10
};

struct EmpiricalMode {
  std::size_t samples = 10000;
  double sigma = 0.0;
  int replication = 1;
  std::uint64_t seed = 0;
};

using MeasureMode = std::variant<TikhonovMode, SmoothedMode, EmpiricalMode>;

std::string describe(const MeasureMode& mode);

struct ExperimentSpec {
  FunctionSpec function;
  std::vector<int> degrees;
  double beta = 1e-8;
  MeasureMode mode = TikhonovMode{};
  int grid_points = 1001;  // per x dimension
  double delta1 = 0.0;
  Family family = Family::legendre;
  int quad_order = 0;  // 0 -> 2 (d + 1) per dimension, or d p + 1 for a degree-p polynomial if larger
  /// Affinely maps the domain box and the range of f onto [-1, 1] before
  /// building moments; results are reported in the original units.
  bool normalize_coordinates = true;
  int coarse_points = 257;
  int refine_candidates = 5;
  double refine_tol = 1e-10;
  bool record_timing = false;
  unsigned threads = 0;

  void validate() const;
};

struct ErrorRow {
  int d = 0;
  double sup_error_global = 0.0;
  double sup_error_masked = 0.0;
  double l1_error = 0.0;
  double max_q_on_graph = 0.0;
  double runtime_ms = 0.0;
};

struct ErrorReport {
  std::vector<ErrorRow> rows;
  std::string mask_description;
  std::size_t masked_points = 0;
  std::size_t grid_size = 0;
};

struct ApproximantRecord {
  std::vector<double> x;
  double f = 0.0;
  double y_star = 0.0;
  double q_min = 0.0;
};

struct ExperimentResult {
  ErrorReport report;
  /// samples[i] belongs to report.rows[i].
  std::vector<std::vector<ApproximantRecord>> samples;
};

/// Raised by run_experiment with the failing stage in the message.
class StageError : public std::runtime_error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

ExperimentResult run_experiment(const ExperimentSpec& spec);

/// Moment matrix of the experiment's measure at degree d, in the experiment's
/// working coordinates (normalized when spec.normalize_coordinates).
MomentMatrix experiment_moments(const ExperimentSpec& spec, int d);

/// max |f - y| over masked entries; throws std::invalid_argument for an all-false mask.
double sup_error(std::span<const double> f_values, std::span<const double> y_values, const std::vector<bool>& mask);

/// Trapezoidal integral of |f - y| over a uniform 1-D grid.
double l1_error(std::span<const double> f_values, std::span<const double> y_values, std::span<const double> x_grid);

/// Least-squares slope of log(sup_error_masked) against log(d), ignoring rows
/// below 10 machine epsilons.
double rate_fit(const ErrorReport& report);

/// Uniform tensor grid over a box, first coordinate slowest.
std::vector<std::vector<double>> uniform_grid(const BoxDomain& box, int points_per_dim);

}  // namespace cdk

#endif  // CDK_PIPELINE_HPP
