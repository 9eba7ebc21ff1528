// Christoffel function of a (possibly degenerate) moment matrix and the
// graph approximant obtained by minimizing its inverse along y.

#ifndef CDK_CHRISTOFFEL_HPP
#define CDK_CHRISTOFFEL_HPP

#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "cdk/basis.hpp"
#include "cdk/measures.hpp"

namespace cdk {

/// Default relative eigenvalue cutoff when only the Gram matrix is known.
inline constexpr double kGramRankTol = 1e-10;
/// Default relative eigenvalue cutoff when the matrix carries a square-root
/// factor; squared singular values are resolved down to ~1e-30 there.
inline constexpr double kRootRankTol = 1e-24;
/// A point is in the kernel branch when its kernel component exceeds this
/// fraction of |b(z)|.
inline constexpr double kKernelTol = 1e-10;

/// Inverts M + beta I.
struct Regularized {
  double beta = 1e-8;
};

/// Moore-Penrose inverse; eigenvalues below rank_tol * lambda_max are zero.
struct PseudoInverse {
  std::optional<double> rank_tol;  // defaults to kRootRankTol or kGramRankTol
  double kernel_tol = kKernelTol;
};

using EvaluatorMode = std::variant<Regularized, PseudoInverse>;

struct YSearchConfig {
  double y_lo = -2.0;
  double y_hi = 2.0;
  int coarse_points = 257;
  int refine_candidates = 5;
  double refine_tol = 1e-10;

  void validate() const;
};

struct YMinimum {
  double y_star = 0.0;
  double q_min = 0.0;
};

struct ApproximantSample {
  std::vector<double> x;
  double y_star = 0.0;
  double q_min = 0.0;
};

/// Immutable after build(); all queries are const and thread-safe.
class ChristoffelEvaluator {
 public:
  static ChristoffelEvaluator build(const MomentMatrix& m, const EvaluatorMode& mode);

  const BasisSpec& spec() const { return basis_.spec(); }
  bool regularized() const { return regularized_; }
  /// Eigenvalues of the inverted matrix (regularization included), ascending.
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const Eigen::MatrixXd& eigenvectors() const { return eigenvectors_; }
  /// Number of eigenvalues treated as nonzero.
  Eigen::Index rank() const { return rank_; }
  double rank_tol() const { return rank_tol_; }
  double mass() const { return mass_; }
  const std::optional<BoxDomain>& support() const { return support_; }

  /// Lambda_d(z); zero in pseudoinverse mode when b(z) leaves the range of M.
  double lambda(std::span<const double> z) const;
  /// b(z)^T M^{-1} b(z), or b(z)^T M^+ b(z) in pseudoinverse mode.
  double inverse_lambda(std::span<const double> z) const;
  /// |P_ker b(z)| / |b(z)|; zero in regularized mode.
  double kernel_fraction(std::span<const double> z) const;

  /// Minimizes y -> b(x, y)^T M_beta^{-1} b(x, y). Regularized mode only.
  YMinimum minimize_over_y(std::span<const double> x, const YSearchConfig& cfg) const;

  /// Evaluates g(y) for a fixed x at each y in ys (used for brute-force checks).
  std::vector<double> inverse_lambda_along_y(std::span<const double> x, std::span<const double> ys) const;

 private:
  explicit ChristoffelEvaluator(const BasisSpec& spec) : basis_(spec) {}

  // Upper-triangular R with g(y) = |R p(y)|^2, p(y) the univariate basis in y.
  Eigen::MatrixXd reduce_along_y(std::span<const double> x) const;

  Basis basis_;
  bool regularized_ = false;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenvectors_;
  Eigen::Index rank_ = 0;
  double rank_tol_ = 0.0;
  double kernel_tol_ = kKernelTol;
  double mass_ = 0.0;
  std::optional<BoxDomain> support_;
  // Range eigenvectors scaled by lambda^{-1/2}: inverse_lambda(z) = |scaled^T b|^2.
  Eigen::MatrixXd scaled_;
  Eigen::MatrixXd kernel_;
};

inline ChristoffelEvaluator build_evaluator(const MomentMatrix& m, const EvaluatorMode& mode) {
  return ChristoffelEvaluator::build(m, mode);
}

inline double lambda_value(const ChristoffelEvaluator& ev, std::span<const double> z) { return ev.lambda(z); }

inline YMinimum minimize_over_y(const ChristoffelEvaluator& ev, std::span<const double> x, const YSearchConfig& cfg) {
  return ev.minimize_over_y(x, cfg);
}

/// minimize_over_y at every grid point, result order matching the grid.
/// threads == 0 picks the hardware concurrency.
std::vector<ApproximantSample> approximant_on_grid(const ChristoffelEvaluator& ev,
                                                   const std::vector<std::vector<double>>& x_grid,
                                                   const YSearchConfig& cfg, unsigned threads = 0);

struct UnitBoxBound {
  double sum = 0.0;
  double cap = 0.0;
};

/// sum_{i<=d} (P_i(0)^2)^n and its cap (1+d)^{2n}.
UnitBoxBound unit_box_bound_sum(int d, int n);

}  // namespace cdk

#endif  // CDK_CHRISTOFFEL_HPP
