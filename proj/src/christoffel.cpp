#include "cdk/christoffel.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include <Eigen/SVD>

namespace cdk {

void YSearchConfig::validate() const {
  if (!std::isfinite(y_lo) || !std::isfinite(y_hi) || !(y_lo < y_hi))
    throw std::invalid_argument("y-search: need finite y_lo < y_hi");
  if (coarse_points < 3) throw std::invalid_argument("y-search: coarse_points must be >= 3");
  if (refine_candidates < 1) throw std::invalid_argument("y-search: refine_candidates must be >= 1");
  if (!(refine_tol > 0)) throw std::invalid_argument("y-search: refine_tol must be positive");
}

ChristoffelEvaluator ChristoffelEvaluator::build(const MomentMatrix& m, const EvaluatorMode& mode) {
  const Eigen::Index n = m.size();
  if (n == 0 || m.entries.cols() != n) throw std::invalid_argument("evaluator: moment matrix must be square and nonempty");
  if (static_cast<std::size_t>(n) != m.spec.size())
    throw std::invalid_argument("evaluator: moment matrix size does not match its basis");

  ChristoffelEvaluator ev(m.spec);
  ev.support_ = m.support;

  double beta = 0.0;
  if (const auto* reg = std::get_if<Regularized>(&mode)) {
    if (!(reg->beta > 0) || !std::isfinite(reg->beta)) throw std::invalid_argument("evaluator: beta must be positive");
    beta = reg->beta;
    ev.regularized_ = true;
  } else {
    const auto& pinv = std::get<PseudoInverse>(mode);
    ev.rank_tol_ = pinv.rank_tol.value_or(m.root ? kRootRankTol : kGramRankTol);
    if (!(ev.rank_tol_ > 0 && ev.rank_tol_ < 1)) throw std::invalid_argument("evaluator: rank_tol must lie in (0, 1)");
    if (!(pinv.kernel_tol > 0 && pinv.kernel_tol < 1))
      throw std::invalid_argument("evaluator: kernel_tol must lie in (0, 1)");
    ev.kernel_tol_ = pinv.kernel_tol;
  }

  Eigen::VectorXd lambda(n);
  Eigen::MatrixXd vectors(n, n);
  if (m.root) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(*m.root, Eigen::ComputeFullV);
    if (svd.info() != Eigen::Success) throw NumericalError("evaluator: SVD of the moment factor failed");
    const Eigen::VectorXd& sigma = svd.singularValues();
    // Singular values come sorted descending; store ascending.
    for (Eigen::Index k = 0; k < n; ++k) {
      const Eigen::Index src = n - 1 - k;
      const double s = src < sigma.size() ? sigma[src] : 0.0;
      lambda[k] = s * s + m.shift;
      vectors.col(k) = svd.matrixV().col(src);
    }
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.entries);
    if (es.info() != Eigen::Success) throw NumericalError("evaluator: eigendecomposition failed");
    lambda = es.eigenvalues();
    vectors = es.eigenvectors();
  }
  lambda.array() += beta;
  ev.mass_ = m.mass() + beta;

  if (ev.regularized_) {
    ev.rank_ = n;
  } else {
    const double lmax = lambda.maxCoeff();
    Eigen::Index kernel_dim = 0;
    if (lmax > 0) {
      while (kernel_dim < n && lambda[kernel_dim] < ev.rank_tol_ * lmax) ++kernel_dim;
    } else {
      kernel_dim = n;
    }
    ev.rank_ = n - kernel_dim;
    ev.kernel_ = vectors.leftCols(kernel_dim);
  }
  const Eigen::Index first = n - ev.rank_;
  ev.scaled_ = vectors.rightCols(ev.rank_) * lambda.tail(ev.rank_).cwiseSqrt().cwiseInverse().asDiagonal();
  for (Eigen::Index k = 0; k < first; ++k) lambda[k] = std::max(lambda[k], 0.0);
  ev.eigenvalues_ = std::move(lambda);
  ev.eigenvectors_ = std::move(vectors);
  return ev;
}

double ChristoffelEvaluator::inverse_lambda(std::span<const double> z) const {
  const Eigen::VectorXd b = basis_.evaluate(z);
  return (scaled_.transpose() * b).squaredNorm();
}

double ChristoffelEvaluator::kernel_fraction(std::span<const double> z) const {
  if (kernel_.cols() == 0) return 0.0;
  const Eigen::VectorXd b = basis_.evaluate(z);
  return (kernel_.transpose() * b).norm() / b.norm();
}

double ChristoffelEvaluator::lambda(std::span<const double> z) const {
  for (double v : z)
    if (!std::isfinite(v)) throw std::invalid_argument("lambda: point is not finite");
  const Eigen::VectorXd b = basis_.evaluate(z);
  if (kernel_.cols() > 0 && (kernel_.transpose() * b).norm() > kernel_tol_ * b.norm()) return 0.0;
  if (rank_ == 0) return 0.0;
  return 1.0 / (scaled_.transpose() * b).squaredNorm();
}

Eigen::MatrixXd ChristoffelEvaluator::reduce_along_y(std::span<const double> x) const {
  const BasisSpec& spec = basis_.spec();
  const auto n = static_cast<std::size_t>(spec.nvars) - 1;
  const auto stride = static_cast<std::size_t>(spec.degree + 1);
  std::vector<double> uni(std::max<std::size_t>(n, 1) * stride);
  for (std::size_t v = 0; v < n; ++v)
    eval_univariate_all(spec.family, x[v], std::span<double>(uni).subspan(v * stride, stride));

  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(scaled_.cols(), spec.degree + 1);
  const auto& indices = basis_.indices();
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const auto& e = indices[j].exponents;
    double xpart = 1.0;
    for (std::size_t v = 0; v < n; ++v) xpart *= uni[v * stride + static_cast<std::size_t>(e[v])];
    h.col(e[n]) += xpart * scaled_.row(static_cast<Eigen::Index>(j)).transpose();
  }
  if (h.rows() <= h.cols()) return h;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(h);
  return qr.matrixQR().topRows(h.cols()).triangularView<Eigen::Upper>();
}

namespace {

class ReducedObjective {
 public:
  ReducedObjective(Eigen::MatrixXd r, Family family) : r_(std::move(r)), family_(family), p_(r_.cols()) {}

  double operator()(double y) {
    eval_univariate_all(family_, y, std::span<double>(p_.data(), static_cast<std::size_t>(p_.size())));
    return (r_.triangularView<Eigen::Upper>() * p_).squaredNorm();
  }

 private:
  Eigen::MatrixXd r_;
  Family family_;
  Eigen::VectorXd p_;
};

struct Candidate {
  double y;
  double g;
};

bool better(const Candidate& a, const Candidate& b) { return a.g < b.g || (a.g == b.g && a.y < b.y); }

Candidate golden_section(ReducedObjective& g, double a, double b, double tol, Candidate best) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double gc = g(c);
  double gd = g(d);
  while (b - a > tol) {
    if (gc <= gd) {
      b = d;
      d = c;
      gd = gc;
      c = b - inv_phi * (b - a);
      gc = g(c);
    } else {
      a = c;
      c = d;
      gc = gd;
      d = a + inv_phi * (b - a);
      gd = g(d);
    }
    // Width can stop shrinking once it reaches a few ulps.
    if (c >= d) break;
  }
  for (Candidate cand : {Candidate{c, gc}, Candidate{d, gd}})
    if (better(cand, best)) best = cand;
  return best;
}

}  // namespace

std::vector<double> ChristoffelEvaluator::inverse_lambda_along_y(std::span<const double> x,
                                                                 std::span<const double> ys) const {
  if (x.size() + 1 != static_cast<std::size_t>(spec().nvars))
    throw std::invalid_argument("y-search: x has the wrong dimension");
  ReducedObjective g(reduce_along_y(x), spec().family);
  std::vector<double> out(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) out[i] = g(ys[i]);
  return out;
}

YMinimum ChristoffelEvaluator::minimize_over_y(std::span<const double> x, const YSearchConfig& cfg) const {
  if (!regularized_) throw std::logic_error("minimize_over_y requires a regularized evaluator");
  cfg.validate();
  if (x.size() + 1 != static_cast<std::size_t>(spec().nvars))
    throw std::invalid_argument("y-search: x has the wrong dimension");
  if (support_ && !support_->contains(x, 1e-12))
    throw std::domain_error("y-search: x lies outside the measure's domain box");

  ReducedObjective g(reduce_along_y(x), spec().family);
  const auto count = static_cast<std::size_t>(cfg.coarse_points);
  std::vector<Candidate> coarse(count);
  const double h = (cfg.y_hi - cfg.y_lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) {
    const double y = i + 1 == count ? cfg.y_hi : cfg.y_lo + h * static_cast<double>(i);
    coarse[i] = {y, g(y)};
  }
  std::vector<std::size_t> minima;
  for (std::size_t i = 0; i < count; ++i) {
    const bool left = i == 0 || coarse[i].g <= coarse[i - 1].g;
    const bool right = i + 1 == count || coarse[i].g <= coarse[i + 1].g;
    if (left && right) minima.push_back(i);
  }
  std::sort(minima.begin(), minima.end(),
            [&](std::size_t a, std::size_t b) { return better(coarse[a], coarse[b]); });
  if (minima.size() > static_cast<std::size_t>(cfg.refine_candidates))
    minima.resize(static_cast<std::size_t>(cfg.refine_candidates));

  Candidate best{cfg.y_hi, std::numeric_limits<double>::infinity()};
  for (std::size_t i : minima) {
    const double a = coarse[i == 0 ? 0 : i - 1].y;
    const double b = coarse[std::min(i + 1, count - 1)].y;
    best = golden_section(g, a, b, cfg.refine_tol, better(coarse[i], best) ? coarse[i] : best);
  }
  std::vector<double> z(x.begin(), x.end());
  z.push_back(best.y);
  return {best.y, inverse_lambda(z)};
}

std::vector<ApproximantSample> approximant_on_grid(const ChristoffelEvaluator& ev,
                                                   const std::vector<std::vector<double>>& x_grid,
                                                   const YSearchConfig& cfg, unsigned threads) {
  cfg.validate();
  std::vector<ApproximantSample> out(x_grid.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(x_grid.size(), 1)));
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](unsigned t) {
    try {
      for (std::size_t i = t; i < x_grid.size(); i += threads) {
        const YMinimum m = ev.minimize_over_y(x_grid[i], cfg);
        out[i] = {x_grid[i], m.y_star, m.q_min};
      }
    } catch (...) {
      errors[t] = std::current_exception();
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

UnitBoxBound unit_box_bound_sum(int d, int n) {
  if (d < 0 || n < 1) throw std::invalid_argument("unit_box_bound_sum: need d >= 0 and n >= 1");
  std::vector<double> p(static_cast<std::size_t>(d) + 1);
  eval_univariate_all(Family::legendre, 0.0, p);
  UnitBoxBound out;
  for (double v : p) out.sum += std::pow(v * v, n);
  out.cap = std::pow(1.0 + d, 2.0 * n);
  return out;
}

}  // namespace cdk
