// Needle polynomials and the certified upper/lower Christoffel bounds that
// decide at which degree on-graph and off-graph points separate.

#ifndef CDK_BOUNDS_HPP
#define CDK_BOUNDS_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cdk {

struct NeedleSpec {
  std::vector<double> center;
  double delta = 0.5;
  int degree = 1;

  void validate() const;
};

/// T_d(1 + delta^2 - |z - z~|^2) / T_d(1 + delta^2).
double needle_eval(const NeedleSpec& spec, std::span<const double> z_tilde);

/// 2^{2 - 2 delta3 floor(d/2)}: Christoffel upper bound at variety points
/// away from the support (unit-mass measure).
double upper_bound_off_graph(double delta3, int d);

/// 2 vol(X) / (sqrt(2 pi) erf(1) e (1+d)^{2n}): lower bound on the graph.
double lower_bound_on_graph(double vol_x, int d, int n);

/// delta1 / (delta1 + delta_max).
double delta3(double delta1, double delta_max);

/// Twice the diameter of the point cloud; exact up to 2000 points, bounding-box
/// diagonal beyond that.
double delta_max_estimate(const std::vector<std::vector<double>>& points);

/// vol(X) / (2 sqrt(2 pi) erf(1) e).
double separation_constant(double vol_x);

struct SeparationInputs {
  double vol_x = 1.0;
  double delta1 = 1.0;
  double delta_max = 1.0;
  int n = 1;
  int d_max = 64;

  void validate() const;
  double delta3() const { return cdk::delta3(delta1, delta_max); }
};

struct CertificateRow {
  int d = 0;
  double lhs = 0.0;  // (1+d)^{2n} / 2^{2 delta3 floor(d/2)}
  double rhs = 0.0;  // separation constant
  bool separated = false;
};

struct DegreeCertificate {
  double constant_c = 0.0;
  double delta3 = 0.0;
  std::optional<int> d_star_sep;
  std::vector<CertificateRow> table;

  bool found() const { return d_star_sep.has_value(); }
};

/// Scans d = 1..d_max and returns the smallest d from which the separation
/// inequality holds for every degree up to d_max.
DegreeCertificate separating_degree(const SeparationInputs& inp);

/// Same scan with delta3 given directly instead of delta1/delta_max.
DegreeCertificate separating_degree_for(double vol_x, double delta3, int n, int d_max);

struct RemarkQuantities {
  int d0 = 0;
  double epsilon_gap = 0.0;
  /// Denominator (epsilon - 1) delta3 of the sufficient-degree formula.
  double denominator = 0.0;
  std::optional<double> sufficient_d;
  std::string invalid_reason;
};

RemarkQuantities remark_degree_quantities(double constant_c, double delta3, int n);

}  // namespace cdk

#endif  // CDK_BOUNDS_HPP
