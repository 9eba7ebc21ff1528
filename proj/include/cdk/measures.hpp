// Measures supported on (or near) the graph of a function and their moment
// matrices.
//
// Every assembly routine also records a square-root factor R with M = R^T R
// (weighted basis evaluations, QR-compressed). The Christoffel evaluator uses
// R to resolve eigenvalues far below the rounding floor of M itself, which is
// what makes kernel detection of degenerate measures work past degree ~8.

#ifndef CDK_MEASURES_HPP
#define CDK_MEASURES_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cdk/basis.hpp"

namespace cdk {

enum class Normalization { lebesgue, probability };

std::string_view to_string(Normalization n);
Normalization parse_normalization(std::string_view name);

struct BoxDomain {
  std::vector<double> lower;
  std::vector<double> upper;
  Normalization normalization = Normalization::lebesgue;

  std::size_t dim() const { return lower.size(); }
  double volume() const;
  /// Total mass of the uniform measure on the box under the chosen normalization.
  double mass() const { return normalization == Normalization::lebesgue ? volume() : 1.0; }
  /// Throws std::invalid_argument unless lower < upper componentwise and dims agree.
  void validate() const;
  bool contains(std::span<const double> x, double tol = 0.0) const;
  /// Distance from an interior point to the nearest face (0 outside).
  double boundary_distance(std::span<const double> x) const;

  static BoxDomain interval(double lo, double hi, Normalization n = Normalization::lebesgue) {
    return BoxDomain{{lo}, {hi}, n};
  }
};

/// Thrown when an assembled quantity is numerically unusable (non-finite
/// integrand, failed mass check, solver non-convergence).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule on [-1, 1]; exact for polynomials of degree <= 2*order - 1.
QuadratureRule gauss_legendre_rule(int order);

using ScalarField = std::function<double(std::span<const double>)>;

/// d mu(x, y) = d lambda(x) delta_{f(x) = y}(y) restricted to a box.
struct GraphMeasure {
  ScalarField f;
  BoxDomain domain;
  int quad_order = 1;
};

/// The graph measure smeared along y with the truncated Gaussian density
/// exp(-(f(x) - y)^2 / eps^2) / (sqrt(2 pi) eps erf(1)) on |y - f(x)| <= eps.
/// Each slice carries mass 1/sqrt(2) unless normalize_slice is set.
struct SmoothedMeasure {
  GraphMeasure base;
  double epsilon = 0.1;
  int y_quad_order = 16;
  bool normalize_slice = false;
};

/// m points of dimension dim stored row-major.
class SampleSet {
 public:
  explicit SampleSet(int dim);
  SampleSet(int dim, std::vector<double> flat);

  int dim() const { return dim_; }
  std::size_t size() const { return data_.size() / static_cast<std::size_t>(dim_); }
  std::span<const double> point(std::size_t i) const {
    return {data_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  void add(std::span<const double> p);
  const std::vector<double>& data() const { return data_; }

 private:
  int dim_;
  std::vector<double> data_;
};

enum class Provenance { quadrature, monte_carlo, regularized };

std::string_view to_string(Provenance p);

struct MomentMatrix {
  BasisSpec spec;
  Normalization normalization = Normalization::lebesgue;
  Provenance provenance = Provenance::quadrature;
  Eigen::MatrixXd entries;
  /// Square root with entries == root^T * root up to rounding; absent for
  /// matrices read back from files.
  std::optional<Eigen::MatrixXd> root;
  /// Total Tikhonov shift applied so far; root does not include it.
  double shift = 0.0;
  /// Box hull of the x-support, when known.
  std::optional<BoxDomain> support;

  Eigen::Index size() const { return entries.rows(); }
  /// Integral of the constant polynomial (b_0 == 1 in every family).
  double mass() const { return entries(0, 0); }
};

struct MomentMatrixCheck {
  double symmetry_error = 0.0;     // max |M - M^T| / max |M|
  double min_eigenvalue_ratio = 0.0;  // lambda_min / lambda_max
  bool ok = false;
};

/// Symmetric to 1e-14 relative and lambda_min >= -1e-10 lambda_max.
MomentMatrixCheck check_moment_matrix(const MomentMatrix& m);

MomentMatrix graph_moment_matrix(const GraphMeasure& measure, const BasisSpec& spec);

MomentMatrix smoothed_moment_matrix(const SmoothedMeasure& measure, const BasisSpec& spec);

/// Moment matrix of the full-dimensional uniform measure on a box with
/// box.dim() == spec.nvars.
MomentMatrix box_moment_matrix(const BoxDomain& box, const BasisSpec& spec, int quad_order);

/// Sum of moment matrices of measures on disjoint pieces.
MomentMatrix combine(std::span<const MomentMatrix> parts);

/// M + beta * I.
MomentMatrix regularize(const MomentMatrix& m, double beta);

/// (1/m) sum_i b(z_i) b(z_i)^T.
MomentMatrix empirical_moment_matrix(const SampleSet& samples, const BasisSpec& spec);

/// Emits `replication` copies of every sample with y perturbed by N(0, sigma^2)
/// noise drawn from a generator seeded with `seed`.
SampleSet jitter_samples(const SampleSet& samples, double sigma, int replication, std::uint64_t seed);

}  // namespace cdk

#endif  // CDK_MEASURES_HPP
