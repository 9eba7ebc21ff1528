#include "cdk/basis.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace cdk {

std::string_view to_string(Family family) {
  switch (family) {
    case Family::monomial:
      return "monomial";
    case Family::chebyshev:
      return "chebyshev";
    case Family::legendre:
      return "legendre";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  if (name == "monomial") return Family::monomial;
  if (name == "chebyshev") return Family::chebyshev;
  if (name == "legendre") return Family::legendre;
  throw std::invalid_argument("unknown basis family '" + std::string(name) + "'");
}

void BasisSpec::validate() const {
  if (nvars < 1) throw std::invalid_argument("basis: nvars must be >= 1");
  if (degree < 0) throw std::invalid_argument("basis: degree must be >= 0");
}

std::size_t BasisSpec::size() const { return basis_size(nvars, degree); }

std::size_t basis_size(int nvars, int degree) {
  if (nvars < 1 || degree < 0) throw std::invalid_argument("basis_size: need nvars >= 1 and degree >= 0");
  // binomial(nvars + degree, degree) built as prod_{i=1..k} (n - k + i) / i with
  // k = min(nvars, degree); every partial product is itself a binomial.
  const auto n = static_cast<std::size_t>(nvars) + static_cast<std::size_t>(degree);
  const auto k = static_cast<std::size_t>(std::min(nvars, degree));
  constexpr auto max = std::numeric_limits<std::size_t>::max();
  std::size_t result = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    const std::size_t factor = n - k + i;
    const std::size_t g = std::gcd(result, i);
    std::size_t r = result / g;
    const std::size_t f = factor / (i / g);
    if (r != 0 && f > max / r) throw SizingError("basis size overflows for nvars=" + std::to_string(nvars) +
                                                 ", degree=" + std::to_string(degree));
    result = r * f;
  }
  return result;
}

namespace {

// Appends all exponent vectors with the given total degree, first variable
// descending (graded-lex tail).
void append_degree(int nvars, int total, std::vector<int>& current, int var,
                   std::vector<MultiIndex>& out, int full_total) {
  if (var == nvars - 1) {
    current[static_cast<std::size_t>(var)] = total;
    out.push_back({current, full_total});
    return;
  }
  for (int a = total; a >= 0; --a) {
    current[static_cast<std::size_t>(var)] = a;
    append_degree(nvars, total - a, current, var + 1, out, full_total);
  }
}

}  // namespace

std::vector<MultiIndex> enumerate_multiindices(const BasisSpec& spec) {
  spec.validate();
  std::vector<MultiIndex> out;
  out.reserve(basis_size(spec.nvars, spec.degree));
  std::vector<int> current(static_cast<std::size_t>(spec.nvars), 0);
  for (int t = 0; t <= spec.degree; ++t) append_degree(spec.nvars, t, current, 0, out, t);
  return out;
}

void eval_univariate_all(Family family, double t, std::span<double> out) {
  if (out.empty()) return;
  out[0] = 1.0;
  if (out.size() == 1) return;
  out[1] = t;
  for (std::size_t k = 1; k + 1 < out.size(); ++k) {
    switch (family) {
      case Family::monomial:
        out[k + 1] = out[k] * t;
        break;
      case Family::chebyshev:
        out[k + 1] = 2.0 * t * out[k] - out[k - 1];
        break;
      case Family::legendre: {
        const auto kk = static_cast<double>(k);
        out[k + 1] = ((2.0 * kk + 1.0) * t * out[k] - kk * out[k - 1]) / (kk + 1.0);
        break;
      }
    }
  }
}

double eval_univariate(Family family, int k, double t) {
  if (k < 0) throw std::invalid_argument("eval_univariate: negative degree");
  std::vector<double> values(static_cast<std::size_t>(k) + 1);
  eval_univariate_all(family, t, values);
  return values.back();
}

Basis::Basis(const BasisSpec& spec) : spec_(spec), indices_(enumerate_multiindices(spec)) {}

Eigen::VectorXd Basis::evaluate(std::span<const double> point) const {
  std::vector<double> scratch(scratch_size());
  Eigen::VectorXd out(static_cast<Eigen::Index>(size()));
  evaluate_into(point, scratch, out);
  return out;
}

void Basis::evaluate_into(std::span<const double> point, std::span<double> scratch,
                          Eigen::Ref<Eigen::VectorXd> out) const {
  const auto nvars = static_cast<std::size_t>(spec_.nvars);
  if (point.size() != nvars)
    throw std::invalid_argument("basis: point has " + std::to_string(point.size()) + " coordinates, expected " +
                                std::to_string(nvars));
  const auto stride = static_cast<std::size_t>(spec_.degree + 1);
  for (std::size_t v = 0; v < nvars; ++v) eval_univariate_all(spec_.family, point[v], scratch.subspan(v * stride, stride));
  for (std::size_t j = 0; j < indices_.size(); ++j) {
    double value = 1.0;
    const auto& e = indices_[j].exponents;
    for (std::size_t v = 0; v < nvars; ++v) value *= scratch[v * stride + static_cast<std::size_t>(e[v])];
    out[static_cast<Eigen::Index>(j)] = value;
  }
}

Eigen::VectorXd eval_basis_vector(const BasisSpec& spec, std::span<const double> point) {
  return Basis(spec).evaluate(point);
}

}  // namespace cdk
