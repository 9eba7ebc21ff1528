// Total-degree multivariate polynomial bases over the joint variables (x, y).
//
// Every basis element is a tensor product of univariate polynomials from a
// single family. Elements are ordered graded-lexicographically: by total
// degree first, then by descending exponent of the first variable, and so on.
// The last variable is always the function value y.

#ifndef CDK_BASIS_HPP
#define CDK_BASIS_HPP

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace cdk {

enum class Family { monomial, chebyshev, legendre };

std::string_view to_string(Family family);

/// Parses "monomial", "chebyshev" or "legendre"; throws std::invalid_argument otherwise.
Family parse_family(std::string_view name);

/// Raised when a basis is too large to index.
class SizingError : public std::overflow_error {
 public:
  using std::overflow_error::overflow_error;
};

struct MultiIndex {
  std::vector<int> exponents;
  int total_degree = 0;

  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
};

struct BasisSpec {
  int nvars = 2;
  int degree = 0;
  Family family = Family::legendre;

  /// Throws std::invalid_argument if nvars < 1 or degree < 0.
  void validate() const;
  std::size_t size() const;

  friend bool operator==(const BasisSpec&, const BasisSpec&) = default;
};

/// binomial(nvars + degree, degree). Throws SizingError when the count does
/// not fit in std::size_t.
std::size_t basis_size(int nvars, int degree);

std::vector<MultiIndex> enumerate_multiindices(const BasisSpec& spec);

/// T_k(t), P_k(t) (standard, unnormalized Legendre) or t^k.
double eval_univariate(Family family, int k, double t);

/// Fills out[k] with the family polynomial of degree k at t, k = 0..out.size()-1.
void eval_univariate_all(Family family, double t, std::span<double> out);

Eigen::VectorXd eval_basis_vector(const BasisSpec& spec, std::span<const double> point);

/// A basis with its enumeration cached. Cheap to copy relative to the
/// matrices it helps assemble; immutable after construction.
class Basis {
 public:
  explicit Basis(const BasisSpec& spec);

  const BasisSpec& spec() const { return spec_; }
  std::size_t size() const { return indices_.size(); }
  const std::vector<MultiIndex>& indices() const { return indices_; }

  Eigen::VectorXd evaluate(std::span<const double> point) const;

  /// Writes the basis vector into out (length size()). Uses caller-provided
  /// scratch of length nvars * (degree + 1) to avoid reallocations.
  void evaluate_into(std::span<const double> point, std::span<double> scratch,
                     Eigen::Ref<Eigen::VectorXd> out) const;

  std::size_t scratch_size() const {
    return static_cast<std::size_t>(spec_.nvars) * static_cast<std::size_t>(spec_.degree + 1);
  }

 private:
  BasisSpec spec_;
  std::vector<MultiIndex> indices_;
};

}  // namespace cdk

#endif  // CDK_BASIS_HPP
