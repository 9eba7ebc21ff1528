#include "cdk/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "cdk/basis.hpp"

namespace cdk {

namespace {

// sqrt(2 pi) erf(1) e
double gaussian_band_constant() {
  return std::sqrt(2.0 * std::numbers::pi) * std::erf(1.0) * std::numbers::e;
}

}  // namespace

void NeedleSpec::validate() const {
  if (center.empty()) throw std::invalid_argument("needle: empty center");
  if (!(delta > 0 && delta < 1)) throw std::invalid_argument("needle: delta must lie in (0, 1)");
  if (degree < 1) throw std::invalid_argument("needle: degree must be >= 1");
}

double needle_eval(const NeedleSpec& spec, std::span<const double> z_tilde) {
  spec.validate();
  if (z_tilde.size() != spec.center.size()) throw std::invalid_argument("needle: dimension mismatch");
  double dist2 = 0.0;
  for (std::size_t j = 0; j < z_tilde.size(); ++j) {
    const double diff = spec.center[j] - z_tilde[j];
    dist2 += diff * diff;
  }
  const double top = 1.0 + spec.delta * spec.delta;
  return eval_univariate(Family::chebyshev, spec.degree, top - dist2) /
         eval_univariate(Family::chebyshev, spec.degree, top);
}

double upper_bound_off_graph(double delta3, int d) {
  if (!(delta3 > 0 && delta3 <= 1)) throw std::invalid_argument("upper bound: delta3 must lie in (0, 1]");
  if (d < 0) throw std::invalid_argument("upper bound: d must be >= 0");
  return std::exp2(2.0 - 2.0 * delta3 * static_cast<double>(d / 2));
}

double lower_bound_on_graph(double vol_x, int d, int n) {
  if (!(vol_x > 0)) throw std::invalid_argument("lower bound: vol_x must be positive");
  if (d < 0 || n < 1) throw std::invalid_argument("lower bound: need d >= 0 and n >= 1");
  return 2.0 * vol_x / (gaussian_band_constant() * std::pow(1.0 + d, 2.0 * n));
}

double delta3(double delta1, double delta_max) {
  if (!(delta1 > 0) || !(delta_max > 0)) throw std::invalid_argument("delta3: inputs must be positive");
  return delta1 / (delta1 + delta_max);
}

double delta_max_estimate(const std::vector<std::vector<double>>& points) {
  if (points.empty()) throw std::invalid_argument("delta_max_estimate: no points");
  const std::size_t dim = points.front().size();
  for (const auto& p : points)
    if (p.size() != dim) throw std::invalid_argument("delta_max_estimate: inconsistent point dimensions");
  double diameter2 = 0.0;
  if (points.size() <= 2000) {
    for (std::size_t i = 0; i < points.size(); ++i)
      for (std::size_t k = i + 1; k < points.size(); ++k) {
        double s = 0.0;
        for (std::size_t j = 0; j < dim; ++j) s += (points[i][j] - points[k][j]) * (points[i][j] - points[k][j]);
        diameter2 = std::max(diameter2, s);
      }
  } else {
    for (std::size_t j = 0; j < dim; ++j) {
      double lo = points.front()[j];
      double hi = lo;
      for (const auto& p : points) {
        lo = std::min(lo, p[j]);
        hi = std::max(hi, p[j]);
      }
      diameter2 += (hi - lo) * (hi - lo);
    }
  }
  return 2.0 * std::sqrt(diameter2);
}

double separation_constant(double vol_x) {
  if (!(vol_x > 0)) throw std::invalid_argument("separation constant: vol_x must be positive");
  return vol_x / (2.0 * gaussian_band_constant());
}

void SeparationInputs::validate() const {
  if (!(vol_x > 0)) throw std::invalid_argument("separation: vol_x must be positive");
  if (!(delta1 > 0) || !(delta_max > 0)) throw std::invalid_argument("separation: delta1 and delta_max must be positive");
  if (n < 1) throw std::invalid_argument("separation: n must be >= 1");
  if (d_max < 1) throw std::invalid_argument("separation: d_max must be >= 1");
}

DegreeCertificate separating_degree_for(double vol_x, double delta3, int n, int d_max) {
  if (!(delta3 > 0 && delta3 <= 1)) throw std::invalid_argument("separation: delta3 must lie in (0, 1]");
  if (n < 1 || d_max < 1) throw std::invalid_argument("separation: need n >= 1 and d_max >= 1");
  DegreeCertificate cert;
  cert.constant_c = separation_constant(vol_x);
  cert.delta3 = delta3;
  cert.table.reserve(static_cast<std::size_t>(d_max));
  for (int d = 1; d <= d_max; ++d) {
    const double lhs = std::pow(1.0 + d, 2.0 * n) / std::exp2(2.0 * delta3 * static_cast<double>(d / 2));
    cert.table.push_back({d, lhs, cert.constant_c, lhs < cert.constant_c});
  }
  // The floor makes lhs non-monotone in d, so walk back from d_max.
  for (auto it = cert.table.rbegin(); it != cert.table.rend() && it->separated; ++it) cert.d_star_sep = it->d;
  return cert;
}

DegreeCertificate separating_degree(const SeparationInputs& inp) {
  inp.validate();
  return separating_degree_for(inp.vol_x, inp.delta3(), inp.n, inp.d_max);
}

RemarkQuantities remark_degree_quantities(double constant_c, double delta3, int n) {
  if (!(constant_c > 0)) throw std::invalid_argument("remark: constant must be positive");
  if (!(delta3 > 0 && delta3 <= 1)) throw std::invalid_argument("remark: delta3 must lie in (0, 1]");
  if (n < 1) throw std::invalid_argument("remark: n must be >= 1");
  const double nn = static_cast<double>(n);
  const double root = std::pow(constant_c, 1.0 / (2.0 * nn));
  const double ceil_term = std::ceil(root * nn / delta3);
  RemarkQuantities out;
  out.d0 = static_cast<int>(ceil_term) - 1;
  out.epsilon_gap = root * nn / (ceil_term * delta3);
  // (epsilon - 1) delta3 == C^{1/(2n)} n / (1 + d0) - delta3
  out.denominator = root * nn / (1.0 + out.d0) - delta3;
  if (out.denominator > 0) {
    out.sufficient_d = nn / out.denominator * std::log2(1.0 / root);
  } else {
    out.invalid_reason = "denominator (epsilon - 1) * delta3 = " + std::to_string(out.denominator) + " is not positive";
  }
  return out;
}

}  // namespace cdk
