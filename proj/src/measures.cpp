#include "cdk/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace cdk {

std::string_view to_string(Normalization n) {
  return n == Normalization::lebesgue ? "lebesgue" : "probability";
}

Normalization parse_normalization(std::string_view name) {
  if (name == "lebesgue") return Normalization::lebesgue;
  if (name == "probability") return Normalization::probability;
  throw std::invalid_argument("unknown normalization '" + std::string(name) + "'");
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::quadrature:
      return "quadrature";
    case Provenance::monte_carlo:
      return "monte-carlo";
    case Provenance::regularized:
      return "regularized";
  }
  return "unknown";
}

double BoxDomain::volume() const {
  double v = 1.0;
  for (std::size_t j = 0; j < lower.size(); ++j) v *= upper[j] - lower[j];
  return v;
}

void BoxDomain::validate() const {
  if (lower.empty() || lower.size() != upper.size())
    throw std::invalid_argument("box: lower/upper must be nonempty and of equal length");
  for (std::size_t j = 0; j < lower.size(); ++j) {
    if (!std::isfinite(lower[j]) || !std::isfinite(upper[j]) || !(lower[j] < upper[j]))
      throw std::invalid_argument("box: need finite lower < upper in coordinate " + std::to_string(j));
  }
}

bool BoxDomain::contains(std::span<const double> x, double tol) const {
  if (x.size() != lower.size()) return false;
  for (std::size_t j = 0; j < x.size(); ++j)
    if (x[j] < lower[j] - tol || x[j] > upper[j] + tol) return false;
  return true;
}

double BoxDomain::boundary_distance(std::span<const double> x) const {
  if (!contains(x)) return 0.0;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < x.size(); ++j) d = std::min({d, x[j] - lower[j], upper[j] - x[j]});
  return d;
}

QuadratureRule gauss_legendre_rule(int order) {
  if (order < 1) throw std::invalid_argument("gauss_legendre_rule: order must be >= 1");
  const auto n = static_cast<std::size_t>(order);
  QuadratureRule rule{std::vector<double>(n), std::vector<double>(n)};
  const std::size_t half = (n + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    // Tricomi's initial guess for the i-th largest root.
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    bool converged = false;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 1; k < n; ++k) {
        const auto kk = static_cast<double>(k);
        const double p2 = ((2.0 * kk + 1.0) * x * p1 - kk * p0) / (kk + 1.0);
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      const double step = p1 / dp;
      x -= step;
      if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(x))) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      // Tolerance may stall one ulp away; accept if the residual is tiny.
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 1; k < n; ++k) {
        const auto kk = static_cast<double>(k);
        const double p2 = ((2.0 * kk + 1.0) * x * p1 - kk * p0) / (kk + 1.0);
        p0 = p1;
        p1 = p2;
      }
      if (!(std::abs(p1) < 1e-13))
        throw NumericalError("gauss_legendre_rule: Newton iteration did not converge for node " + std::to_string(i) +
                             " of order " + std::to_string(order));
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

SampleSet::SampleSet(int dim) : dim_(dim) {
  if (dim < 1) throw std::invalid_argument("sample set: dimension must be >= 1");
}

SampleSet::SampleSet(int dim, std::vector<double> flat) : dim_(dim), data_(std::move(flat)) {
  if (dim < 1) throw std::invalid_argument("sample set: dimension must be >= 1");
  if (data_.size() % static_cast<std::size_t>(dim) != 0)
    throw std::invalid_argument("sample set: data length is not a multiple of the dimension");
}

void SampleSet::add(std::span<const double> p) {
  if (p.size() != static_cast<std::size_t>(dim_)) throw std::invalid_argument("sample set: point dimension mismatch");
  data_.insert(data_.end(), p.begin(), p.end());
}

namespace {

// Rank-one updates of the upper triangle with Neumaier compensation, applied
// in call order so that results are reproducible at fixed node order.
class GramAccumulator {
 public:
  explicit GramAccumulator(Eigen::Index n) : sum_(Eigen::MatrixXd::Zero(n, n)), comp_(Eigen::MatrixXd::Zero(n, n)) {}

  void add(double weight, const Eigen::VectorXd& b) {
    const Eigen::Index n = sum_.rows();
    for (Eigen::Index j = 0; j < n; ++j) {
      const double wb = weight * b[j];
      for (Eigen::Index i = 0; i <= j; ++i) {
        const double term = wb * b[i];
        double& s = sum_(i, j);
        const double t = s + term;
        if (std::abs(s) >= std::abs(term))
          comp_(i, j) += (s - t) + term;
        else
          comp_(i, j) += (term - t) + s;
        s = t;
      }
    }
  }

  Eigen::MatrixXd finish() const {
    Eigen::MatrixXd m = sum_ + comp_;
    for (Eigen::Index j = 0; j < m.rows(); ++j)
      for (Eigen::Index i = j + 1; i < m.rows(); ++i) m(i, j) = m(j, i);
    return m;
  }

 private:
  Eigen::MatrixXd sum_;
  Eigen::MatrixXd comp_;
};

// Stacks sqrt(w) b rows and keeps them QR-compressed to at most N rows, so
// memory stays O(N^2) however many nodes or samples are added.
class RootAccumulator {
 public:
  explicit RootAccumulator(Eigen::Index n) : n_(n), buffer_(2 * n, n) {}

  void add(double weight, const Eigen::VectorXd& b) {
    if (filled_ == buffer_.rows()) flush();
    buffer_.row(filled_++) = std::sqrt(weight) * b.transpose();
  }

  Eigen::MatrixXd finish() {
    flush();
    return factor_;
  }

  static Eigen::MatrixXd compress(Eigen::MatrixXd a) {
    if (a.rows() <= a.cols()) return a;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    return qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  }

 private:
  void flush() {
    Eigen::MatrixXd stacked(factor_.rows() + filled_, n_);
    stacked.topRows(factor_.rows()) = factor_;
    stacked.bottomRows(filled_) = buffer_.topRows(filled_);
    factor_ = compress(std::move(stacked));
    filled_ = 0;
  }

  Eigen::Index n_;
  Eigen::MatrixXd buffer_;
  Eigen::Index filled_ = 0;
  Eigen::MatrixXd factor_ = Eigen::MatrixXd(0, n_);
};

struct TensorNode {
  std::vector<double> x;
  double weight;
};

// Tensor Gauss-Legendre nodes mapped into the box, first coordinate slowest.
std::vector<TensorNode> tensor_nodes(const BoxDomain& box, int order) {
  const QuadratureRule rule = gauss_legendre_rule(order);
  const std::size_t dim = box.dim();
  const std::size_t q = rule.nodes.size();
  const double scale = box.normalization == Normalization::probability ? 1.0 / box.volume() : 1.0;
  std::vector<TensorNode> out;
  std::vector<std::size_t> idx(dim, 0);
  while (true) {
    TensorNode node{std::vector<double>(dim), scale};
    for (std::size_t j = 0; j < dim; ++j) {
      const double half = 0.5 * (box.upper[j] - box.lower[j]);
      const double mid = 0.5 * (box.upper[j] + box.lower[j]);
      node.x[j] = mid + half * rule.nodes[idx[j]];
      node.weight *= half * rule.weights[idx[j]];
    }
    out.push_back(std::move(node));
    std::size_t j = dim;
    while (j > 0) {
      --j;
      if (++idx[j] < q) break;
      idx[j] = 0;
      if (j == 0) return out;
    }
    if (dim == 0) return out;
  }
}

std::string describe_point(std::span<const double> x) {
  std::ostringstream os;
  os.precision(17);
  os << "(";
  for (std::size_t j = 0; j < x.size(); ++j) os << (j ? ", " : "") << x[j];
  os << ")";
  return os.str();
}

double evaluate_finite(const ScalarField& f, std::span<const double> x) {
  const double y = f(x);
  if (!std::isfinite(y)) throw NumericalError("function is not finite at quadrature node x = " + describe_point(x));
  return y;
}

void check_mass(const Eigen::MatrixXd& m, double expected, int quad_order) {
  if (std::abs(m(0, 0) - expected) > 1e-10 * std::max(1.0, std::abs(expected)))
    throw NumericalError("moment matrix mass " + std::to_string(m(0, 0)) + " differs from expected " +
                         std::to_string(expected) + " at quad order " + std::to_string(quad_order) +
                         "; increase the quadrature order");
}

void check_graph_inputs(const GraphMeasure& measure, const BasisSpec& spec) {
  spec.validate();
  measure.domain.validate();
  if (!measure.f) throw std::invalid_argument("graph measure: function is empty");
  if (measure.quad_order < 1) throw std::invalid_argument("graph measure: quad_order must be >= 1");
  if (static_cast<std::size_t>(spec.nvars) != measure.domain.dim() + 1)
    throw std::invalid_argument("graph measure: basis nvars must equal domain dimension + 1");
}

}  // namespace

MomentMatrixCheck check_moment_matrix(const MomentMatrix& m) {
  MomentMatrixCheck c;
  const double scale = std::max(m.entries.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  c.symmetry_error = (m.entries - m.entries.transpose()).cwiseAbs().maxCoeff() / scale;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.entries, Eigen::EigenvaluesOnly);
  const double lmax = es.eigenvalues().maxCoeff();
  c.min_eigenvalue_ratio = lmax > 0 ? es.eigenvalues().minCoeff() / lmax : 0.0;
  c.ok = c.symmetry_error <= 1e-14 && es.eigenvalues().minCoeff() >= -1e-10 * std::max(lmax, 0.0);
  return c;
}

MomentMatrix graph_moment_matrix(const GraphMeasure& measure, const BasisSpec& spec) {
  check_graph_inputs(measure, spec);
  const Basis basis(spec);
  const auto n = static_cast<Eigen::Index>(basis.size());
  GramAccumulator gram(n);
  RootAccumulator root(n);
  std::vector<double> scratch(basis.scratch_size());
  std::vector<double> z(measure.domain.dim() + 1);
  Eigen::VectorXd b(n);
  for (const auto& node : tensor_nodes(measure.domain, measure.quad_order)) {
    std::copy(node.x.begin(), node.x.end(), z.begin());
    z.back() = evaluate_finite(measure.f, node.x);
    basis.evaluate_into(z, scratch, b);
    gram.add(node.weight, b);
    root.add(node.weight, b);
  }
  MomentMatrix m{spec, measure.domain.normalization, Provenance::quadrature, gram.finish(), root.finish(), 0.0,
                 measure.domain};
  check_mass(m.entries, measure.domain.mass(), measure.quad_order);
  return m;
}

MomentMatrix smoothed_moment_matrix(const SmoothedMeasure& measure, const BasisSpec& spec) {
  check_graph_inputs(measure.base, spec);
  if (!(measure.epsilon > 0) || !std::isfinite(measure.epsilon))
    throw std::invalid_argument("smoothed measure: epsilon must be positive");
  if (measure.y_quad_order < 1) throw std::invalid_argument("smoothed measure: y_quad_order must be >= 1");

  const QuadratureRule yrule = gauss_legendre_rule(measure.y_quad_order);
  // Substituting y = f(x) + eps t cancels eps against the density prefactor.
  const double prefactor = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * std::erf(1.0));
  std::vector<double> slice(yrule.nodes.size());
  double slice_mass = 0.0;
  for (std::size_t k = 0; k < slice.size(); ++k) {
    slice[k] = yrule.weights[k] * prefactor * std::exp(-yrule.nodes[k] * yrule.nodes[k]);
    slice_mass += slice[k];
  }
  if (measure.normalize_slice)
    for (double& s : slice) s /= slice_mass;

  const Basis basis(spec);
  const auto n = static_cast<Eigen::Index>(basis.size());
  GramAccumulator gram(n);
  RootAccumulator root(n);
  std::vector<double> scratch(basis.scratch_size());
  std::vector<double> z(measure.base.domain.dim() + 1);
  Eigen::VectorXd b(n);
  for (const auto& node : tensor_nodes(measure.base.domain, measure.base.quad_order)) {
    std::copy(node.x.begin(), node.x.end(), z.begin());
    const double fx = evaluate_finite(measure.base.f, node.x);
    for (std::size_t k = 0; k < slice.size(); ++k) {
      z.back() = fx + measure.epsilon * yrule.nodes[k];
      basis.evaluate_into(z, scratch, b);
      gram.add(node.weight * slice[k], b);
      root.add(node.weight * slice[k], b);
    }
  }
  MomentMatrix m{spec, measure.base.domain.normalization, Provenance::quadrature, gram.finish(), root.finish(), 0.0,
                 measure.base.domain};
  const double expected = measure.base.domain.mass() * (measure.normalize_slice ? 1.0 : slice_mass);
  check_mass(m.entries, expected, measure.base.quad_order);
  return m;
}

MomentMatrix box_moment_matrix(const BoxDomain& box, const BasisSpec& spec, int quad_order) {
  spec.validate();
  box.validate();
  if (box.dim() != static_cast<std::size_t>(spec.nvars))
    throw std::invalid_argument("box moment matrix: box dimension must equal nvars");
  if (quad_order < 1) throw std::invalid_argument("box moment matrix: quad_order must be >= 1");
  const Basis basis(spec);
  const auto n = static_cast<Eigen::Index>(basis.size());
  GramAccumulator gram(n);
  RootAccumulator root(n);
  std::vector<double> scratch(basis.scratch_size());
  Eigen::VectorXd b(n);
  for (const auto& node : tensor_nodes(box, quad_order)) {
    basis.evaluate_into(node.x, scratch, b);
    gram.add(node.weight, b);
    root.add(node.weight, b);
  }
  MomentMatrix m{spec, box.normalization, Provenance::quadrature, gram.finish(), root.finish(), 0.0, std::nullopt};
  check_mass(m.entries, box.mass(), quad_order);
  return m;
}

MomentMatrix combine(std::span<const MomentMatrix> parts) {
  if (parts.empty()) throw std::invalid_argument("combine: no parts");
  // Separately normalized probability pieces would sum to more than one.
  if (parts.front().normalization == Normalization::probability && parts.size() > 1)
    throw std::invalid_argument("combine: probability-normalized parts cannot be summed; use lebesgue pieces");
  MomentMatrix out = parts.front();
  bool have_root = out.root.has_value();
  std::vector<const Eigen::MatrixXd*> roots;
  if (have_root) roots.push_back(&*out.root);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const MomentMatrix& p = parts[i];
    if (!(p.spec == out.spec) || p.normalization != out.normalization)
      throw std::invalid_argument("combine: parts must share basis and normalization");
    out.entries += p.entries;
    out.shift += p.shift;
    if (p.provenance == Provenance::regularized) out.provenance = Provenance::regularized;
    if (p.root)
      roots.push_back(&*p.root);
    else
      have_root = false;
    if (out.support && p.support && out.support->dim() == p.support->dim()) {
      for (std::size_t j = 0; j < out.support->dim(); ++j) {
        out.support->lower[j] = std::min(out.support->lower[j], p.support->lower[j]);
        out.support->upper[j] = std::max(out.support->upper[j], p.support->upper[j]);
      }
    } else {
      out.support.reset();
    }
  }
  if (have_root && parts.size() > 1) {
    Eigen::Index rows = 0;
    for (const auto* r : roots) rows += r->rows();
    Eigen::MatrixXd stacked(rows, out.size());
    Eigen::Index at = 0;
    for (const auto* r : roots) {
      stacked.middleRows(at, r->rows()) = *r;
      at += r->rows();
    }
    out.root = RootAccumulator::compress(std::move(stacked));
  } else if (!have_root) {
    out.root.reset();
  }
  return out;
}

MomentMatrix regularize(const MomentMatrix& m, double beta) {
  if (!(beta > 0) || !std::isfinite(beta)) throw std::invalid_argument("regularize: beta must be positive and finite");
  MomentMatrix out = m;
  out.entries.diagonal().array() += beta;
  out.shift += beta;
  out.provenance = Provenance::regularized;
  return out;
}

MomentMatrix empirical_moment_matrix(const SampleSet& samples, const BasisSpec& spec) {
  spec.validate();
  if (samples.size() == 0) throw std::invalid_argument("empirical moments: no samples");
  if (samples.dim() != spec.nvars)
    throw std::invalid_argument("empirical moments: sample dimension " + std::to_string(samples.dim()) +
                                " does not match nvars " + std::to_string(spec.nvars));
  const Basis basis(spec);
  const auto n = static_cast<Eigen::Index>(basis.size());
  GramAccumulator gram(n);
  RootAccumulator root(n);
  std::vector<double> scratch(basis.scratch_size());
  Eigen::VectorXd b(n);
  const double w = 1.0 / static_cast<double>(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto z = samples.point(i);
    for (double v : z)
      if (!std::isfinite(v)) throw std::invalid_argument("empirical moments: sample " + std::to_string(i) + " is not finite");
    basis.evaluate_into(z, scratch, b);
    gram.add(w, b);
    root.add(w, b);
  }
  return MomentMatrix{spec, Normalization::probability, Provenance::monte_carlo, gram.finish(), root.finish(), 0.0,
                      std::nullopt};
}

SampleSet jitter_samples(const SampleSet& samples, double sigma, int replication, std::uint64_t seed) {
  if (!(sigma >= 0) || !std::isfinite(sigma)) throw std::invalid_argument("jitter: sigma must be >= 0");
  if (replication < 1) throw std::invalid_argument("jitter: replication must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  SampleSet out(samples.dim());
  std::vector<double> p(static_cast<std::size_t>(samples.dim()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto z = samples.point(i);
    for (int r = 0; r < replication; ++r) {
      std::copy(z.begin(), z.end(), p.begin());
      const double xi = noise(rng);
      if (sigma > 0) p.back() += sigma * xi;
      out.add(p);
    }
  }
  return out;
}

}  // namespace cdk
