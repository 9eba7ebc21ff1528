#include "cdk/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>

namespace cdk {

BoxDomain FunctionSpec::domain() const {
  if (pieces.empty()) throw std::invalid_argument("function '" + name + "' has no pieces");
  BoxDomain hull = pieces.front().domain;
  for (const auto& p : pieces)
    for (std::size_t j = 0; j < hull.dim(); ++j) {
      hull.lower[j] = std::min(hull.lower[j], p.domain.lower[j]);
      hull.upper[j] = std::max(hull.upper[j], p.domain.upper[j]);
    }
  return hull;
}

double FunctionSpec::operator()(std::span<const double> x) const {
  for (const auto& p : pieces)
    if (p.domain.contains(x)) return p.f(x);
  throw std::domain_error("function '" + name + "' is not defined at the requested point");
}

void FunctionSpec::validate() const {
  if (pieces.empty()) throw std::invalid_argument("function '" + name + "' has no pieces");
  const std::size_t dim = pieces.front().domain.dim();
  double covered = 0.0;
  for (std::size_t a = 0; a < pieces.size(); ++a) {
    pieces[a].domain.validate();
    if (pieces[a].domain.dim() != dim) throw std::invalid_argument("function pieces have different dimensions");
    if (!pieces[a].f) throw std::invalid_argument("function piece has no definition");
    covered += pieces[a].domain.volume();
    for (std::size_t b = a + 1; b < pieces.size(); ++b) {
      bool overlap = true;
      for (std::size_t j = 0; j < dim; ++j)
        overlap = overlap && std::max(pieces[a].domain.lower[j], pieces[b].domain.lower[j]) <
                                 std::min(pieces[a].domain.upper[j], pieces[b].domain.upper[j]);
      if (overlap) throw std::invalid_argument("function pieces overlap");
    }
  }
  const double hull = domain().volume();
  if (std::abs(covered - hull) > 1e-12 * hull) throw std::invalid_argument("function pieces do not cover their bounding box");
  for (const auto& c : critical_x)
    if (c.size() != dim) throw std::invalid_argument("critical point has the wrong dimension");
}

FunctionSpec polynomial_function(std::vector<PolynomialTerm> terms, BoxDomain domain) {
  domain.validate();
  int degree = 0;
  for (const auto& t : terms) {
    if (t.exponents.size() != domain.dim()) throw std::invalid_argument("polynomial term has the wrong number of exponents");
    if (!std::isfinite(t.coefficient)) throw std::invalid_argument("polynomial coefficient is not finite");
    int total = 0;
    for (int e : t.exponents) {
      if (e < 0) throw std::invalid_argument("polynomial exponent is negative");
      total += e;
    }
    if (t.coefficient != 0.0) degree = std::max(degree, total);
  }
  FunctionSpec spec;
  spec.name = "polynomial";
  spec.kind = FunctionKind::polynomial;
  spec.polynomial_degree = degree;
  spec.pieces.push_back({std::move(domain), [terms = std::move(terms)](std::span<const double> x) {
                           double sum = 0.0;
                           for (const auto& t : terms) {
                             double v = t.coefficient;
                             for (std::size_t j = 0; j < x.size(); ++j)
                               for (int k = 0; k < t.exponents[j]; ++k) v *= x[j];
                             sum += v;
                           }
                           return sum;
                         }});
  return spec;
}

namespace {

using Fn1 = double (*)(double);

Piece piece1(double lo, double hi, Fn1 f) {
  return {BoxDomain::interval(lo, hi), [f](std::span<const double> x) { return f(x[0]); }};
}

FunctionSpec make(std::string name, std::vector<Piece> pieces, std::vector<double> critical = {}, int degree = -1) {
  FunctionSpec s;
  s.name = std::move(name);
  s.pieces = std::move(pieces);
  for (double c : critical) s.critical_x.push_back({c});
  s.polynomial_degree = degree;
  return s;
}

}  // namespace

const std::vector<std::string>& catalog_names() {
  static const std::vector<std::string> names = {"poly-quadratic", "poly-cubic", "sign",  "abs",
                                                 "step3",          "sqrt01",     "exp",   "runge"};
  return names;
}

FunctionSpec catalog(std::string_view name) {
  if (name == "poly-quadratic") return make("poly-quadratic", {piece1(-1, 1, [](double x) { return x * x - 0.5; })}, {}, 2);
  if (name == "poly-cubic")
    return make("poly-cubic", {piece1(-1, 1, [](double x) { return x * x * x - 0.5 * x; })}, {}, 3);
  if (name == "sign")
    return make("sign", {piece1(-1, 0, [](double) { return -1.0; }), piece1(0, 1, [](double) { return 1.0; })}, {0.0});
  if (name == "abs")
    return make("abs", {piece1(-1, 0, [](double x) { return -x; }), piece1(0, 1, [](double x) { return x; })}, {0.0});
  if (name == "step3")
    return make("step3",
                {piece1(-1, -1.0 / 3.0, [](double) { return -1.0; }), piece1(-1.0 / 3.0, 1.0 / 3.0, [](double) { return 0.0; }),
                 piece1(1.0 / 3.0, 1, [](double) { return 1.0; })},
                {-1.0 / 3.0, 1.0 / 3.0});
  if (name == "sqrt01") return make("sqrt01", {piece1(0, 1, [](double x) { return std::sqrt(x); })}, {0.0});
  if (name == "exp") return make("exp", {piece1(-1, 1, [](double x) { return std::exp(x); })});
  if (name == "runge") return make("runge", {piece1(-1, 1, [](double x) { return 1.0 / (1.0 + 25.0 * x * x); })});
  throw std::invalid_argument("unknown catalog function '" + std::string(name) + "'");
}

std::string describe(const MeasureMode& mode) {
  std::ostringstream os;
  os.precision(17);
  if (std::holds_alternative<TikhonovMode>(mode)) {
    os << "tikhonov";
  } else if (const auto* s = std::get_if<SmoothedMode>(&mode)) {
    os << "smoothed(epsilon=" << s->epsilon << (s->normalize_slice ? ", unit slices" : ", raw slices") << ")";
  } else {
    const auto& e = std::get<EmpiricalMode>(mode);
    os << "empirical(m=" << e.samples << ", sigma=" << e.sigma << ", replication=" << e.replication
       << ", seed=" << e.seed << ")";
  }
  return os.str();
}

void ExperimentSpec::validate() const {
  function.validate();
  if (degrees.empty()) throw std::invalid_argument("experiment: no degrees");
  for (int d : degrees)
    if (d < 0) throw std::invalid_argument("experiment: degrees must be >= 0");
  if (!(beta > 0) || !std::isfinite(beta)) throw std::invalid_argument("experiment: beta must be positive");
  if (grid_points < 2) throw std::invalid_argument("experiment: grid_points must be >= 2");
  if (!(delta1 >= 0) || !std::isfinite(delta1)) throw std::invalid_argument("experiment: delta1 must be >= 0");
  if (quad_order < 0) throw std::invalid_argument("experiment: quad_order must be >= 0");
  if (const auto* s = std::get_if<SmoothedMode>(&mode)) {
    if (!(s->epsilon > 0)) throw std::invalid_argument("experiment: epsilon must be positive");
    if (s->y_quad_order < 0) throw std::invalid_argument("experiment: y_quad_order must be >= 0");
  }
  if (const auto* e = std::get_if<EmpiricalMode>(&mode)) {
    if (e->samples < 1) throw std::invalid_argument("experiment: need at least one sample");
    if (!(e->sigma >= 0)) throw std::invalid_argument("experiment: sigma must be >= 0");
    if (e->replication < 1) throw std::invalid_argument("experiment: replication must be >= 1");
  }
  YSearchConfig{-1.0, 1.0, coarse_points, refine_candidates, refine_tol}.validate();
}

std::vector<std::vector<double>> uniform_grid(const BoxDomain& box, int points_per_dim) {
  box.validate();
  if (points_per_dim < 2) throw std::invalid_argument("uniform grid: need at least 2 points per dimension");
  const std::size_t dim = box.dim();
  const auto p = static_cast<std::size_t>(points_per_dim);
  std::vector<std::vector<double>> out;
  std::vector<std::size_t> idx(dim, 0);
  while (true) {
    std::vector<double> x(dim);
    for (std::size_t j = 0; j < dim; ++j)
      x[j] = idx[j] + 1 == p ? box.upper[j]
                             : box.lower[j] + (box.upper[j] - box.lower[j]) * static_cast<double>(idx[j]) /
                                                  static_cast<double>(p - 1);
    out.push_back(std::move(x));
    std::size_t j = dim;
    while (j > 0) {
      --j;
      if (++idx[j] < p) break;
      idx[j] = 0;
      if (j == 0) return out;
    }
  }
}

double sup_error(std::span<const double> f_values, std::span<const double> y_values, const std::vector<bool>& mask) {
  if (f_values.size() != y_values.size() || mask.size() != f_values.size())
    throw std::invalid_argument("sup_error: length mismatch");
  bool any = false;
  double worst = 0.0;
  for (std::size_t i = 0; i < f_values.size(); ++i) {
    if (!mask[i]) continue;
    any = true;
    worst = std::max(worst, std::abs(f_values[i] - y_values[i]));
  }
  if (!any) throw std::invalid_argument("sup_error: mask excludes every point");
  return worst;
}

double l1_error(std::span<const double> f_values, std::span<const double> y_values, std::span<const double> x_grid) {
  if (f_values.size() != y_values.size() || x_grid.size() != f_values.size())
    throw std::invalid_argument("l1_error: length mismatch");
  if (x_grid.size() < 2) throw std::invalid_argument("l1_error: need at least 2 grid points");
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < x_grid.size(); ++i)
    sum += 0.5 * (x_grid[i + 1] - x_grid[i]) *
           (std::abs(f_values[i] - y_values[i]) + std::abs(f_values[i + 1] - y_values[i + 1]));
  return sum;
}

double rate_fit(const ErrorReport& report) {
  constexpr double floor = 10.0 * std::numeric_limits<double>::epsilon();
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : report.rows)
    if (r.d > 0 && std::isfinite(r.sup_error_masked) && r.sup_error_masked > floor)
      pts.emplace_back(std::log(static_cast<double>(r.d)), std::log(r.sup_error_masked));
  if (pts.size() < 3) throw std::invalid_argument("rate_fit: fewer than 3 usable rows");
  double mx = 0.0;
  double my = 0.0;
  for (const auto& [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (const auto& [x, y] : pts) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
  }
  if (sxx == 0.0) throw std::invalid_argument("rate_fit: degrees are all equal");
  return sxy / sxx;
}

namespace {

// Affine map between user coordinates and the working box [-1, 1]^n x [-1, 1].
struct Frame {
  std::vector<double> x_mid;
  std::vector<double> x_half;
  double y_mid = 0.0;
  double y_half = 1.0;

  std::vector<double> to_unit(std::span<const double> x) const {
    std::vector<double> t(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) t[j] = (x[j] - x_mid[j]) / x_half[j];
    return t;
  }
  std::vector<double> from_unit(std::span<const double> t) const {
    std::vector<double> x(t.size());
    for (std::size_t j = 0; j < t.size(); ++j) x[j] = x_mid[j] + x_half[j] * t[j];
    return x;
  }
  double y_to_unit(double y) const { return (y - y_mid) / y_half; }
  double y_from_unit(double s) const { return y_mid + y_half * s; }
  BoxDomain box_to_unit(const BoxDomain& b) const {
    BoxDomain out = b;
    out.lower = to_unit(b.lower);
    out.upper = to_unit(b.upper);
    return out;
  }
};

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
};

Range function_range(const FunctionSpec& fn, const std::vector<std::vector<double>>& grid,
                     const std::vector<double>& grid_values) {
  Range r;
  for (double v : grid_values) r.add(v);
  for (const auto& p : fn.pieces)
    for (const auto& x : uniform_grid(p.domain, 33)) {
      const double v = p.f(x);
      if (std::isfinite(v)) r.add(v);
    }
  (void)grid;
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi)) throw std::runtime_error("function has no finite values");
  return r;
}

Frame make_frame(const ExperimentSpec& spec, const Range& range) {
  const BoxDomain hull = spec.function.domain();
  Frame fr;
  fr.x_mid.assign(hull.dim(), 0.0);
  fr.x_half.assign(hull.dim(), 1.0);
  if (!spec.normalize_coordinates) return fr;
  for (std::size_t j = 0; j < hull.dim(); ++j) {
    fr.x_mid[j] = 0.5 * (hull.lower[j] + hull.upper[j]);
    fr.x_half[j] = 0.5 * (hull.upper[j] - hull.lower[j]);
  }
  fr.y_mid = 0.5 * (range.lo + range.hi);
  const double half = 0.5 * (range.hi - range.lo);
  fr.y_half = half > 0 ? half : 1.0;
  return fr;
}

MomentMatrix scaled(MomentMatrix m, double factor) {
  m.entries *= factor;
  if (m.root) *m.root *= std::sqrt(factor);
  return m;
}

// 2(d+1) nodes per dimension, raised to d p + 1 when f is a polynomial of
// degree p so the graph integrands (degree 2 d p) are integrated exactly.
int default_quad_order(const FunctionSpec& f, int d) {
  return std::max(2 * (d + 1), f.polynomial_degree > 0 ? d * f.polynomial_degree + 1 : 0);
}

MomentMatrix assemble(const ExperimentSpec& spec, const Frame& frame, int d) {
  const BasisSpec basis{static_cast<int>(spec.function.dim()) + 1, d, spec.family};
  const int quad = spec.quad_order > 0 ? spec.quad_order : default_quad_order(spec.function, d);

  auto unit_piece = [&](const Piece& p) {
    ScalarField g = [&frame, f = p.f](std::span<const double> t) {
      const auto x = frame.from_unit(t);
      return frame.y_to_unit(f(x));
    };
    return GraphMeasure{std::move(g), frame.box_to_unit(p.domain), quad};
  };

  if (std::holds_alternative<TikhonovMode>(spec.mode)) {
    std::vector<MomentMatrix> parts;
    for (const auto& p : spec.function.pieces) parts.push_back(graph_moment_matrix(unit_piece(p), basis));
    return combine(parts);
  }
  if (const auto* s = std::get_if<SmoothedMode>(&spec.mode)) {
    std::vector<MomentMatrix> parts;
    for (const auto& p : spec.function.pieces) {
      SmoothedMeasure sm{unit_piece(p), s->epsilon / frame.y_half,
                         s->y_quad_order > 0 ? s->y_quad_order : 2 * (d + 1) + 10, s->normalize_slice};
      parts.push_back(smoothed_moment_matrix(sm, basis));
    }
    return combine(parts);
  }
  const auto& e = std::get<EmpiricalMode>(spec.mode);
  const BoxDomain hull = spec.function.domain();
  std::mt19937_64 rng(e.seed);
  std::vector<std::uniform_real_distribution<double>> coords;
  for (std::size_t j = 0; j < hull.dim(); ++j) coords.emplace_back(hull.lower[j], hull.upper[j]);
  SampleSet exact(basis.nvars);
  std::vector<double> z(static_cast<std::size_t>(basis.nvars));
  std::vector<double> x(hull.dim());
  for (std::size_t i = 0; i < e.samples; ++i) {
    for (std::size_t j = 0; j < hull.dim(); ++j) x[j] = coords[j](rng);
    const auto t = frame.to_unit(x);
    std::copy(t.begin(), t.end(), z.begin());
    z.back() = frame.y_to_unit(spec.function(x));
    exact.add(z);
  }
  // Jitter draws from its own stream so that the x sample does not depend on sigma.
  const SampleSet noisy = jitter_samples(exact, e.sigma / frame.y_half, e.replication, e.seed ^ 0x9e3779b97f4a7c15ULL);
  MomentMatrix m = empirical_moment_matrix(noisy, basis);
  // Estimate the Lebesgue-normalized matrix so every mode shares one scale.
  m = scaled(std::move(m), frame.box_to_unit(hull).volume());
  m.normalization = Normalization::lebesgue;
  m.support = frame.box_to_unit(hull);
  return m;
}

template <typename F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

MomentMatrix experiment_moments(const ExperimentSpec& spec, int d) {
  staged("spec", [&] { spec.validate(); return 0; });
  const BoxDomain hull = spec.function.domain();
  const auto grid = uniform_grid(hull, spec.grid_points);
  std::vector<double> values;
  for (const auto& x : grid) values.push_back(spec.function(x));
  const Frame frame = make_frame(spec, function_range(spec.function, grid, values));
  return staged("moments", [&] { return assemble(spec, frame, d); });
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  staged("spec", [&] { spec.validate(); return 0; });
  const BoxDomain hull = spec.function.domain();
  const std::size_t dim = hull.dim();

  const auto grid = staged("grid", [&] { return uniform_grid(hull, spec.grid_points); });
  std::vector<double> f_values(grid.size());
  staged("function", [&] {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      f_values[i] = spec.function(grid[i]);
      if (!std::isfinite(f_values[i])) throw std::runtime_error("function is not finite on the grid");
    }
    return 0;
  });
  const Range range = staged("function", [&] { return function_range(spec.function, grid, f_values); });
  const Frame frame = make_frame(spec, range);

  std::vector<bool> mask(grid.size());
  std::size_t masked = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    bool keep = hull.boundary_distance(grid[i]) > spec.delta1;
    for (const auto& c : spec.function.critical_x) {
      double s = 0.0;
      for (std::size_t j = 0; j < dim; ++j) s += (grid[i][j] - c[j]) * (grid[i][j] - c[j]);
      keep = keep && std::sqrt(s) > spec.delta1;
    }
    mask[i] = keep;
    masked += keep ? 1 : 0;
  }
  if (masked == 0) throw StageError("mask", "every grid point lies within delta1 of the critical set or the boundary");

  // Tensor trapezoid weights for the L1 metric.
  std::vector<double> l1_weights(grid.size(), 1.0);
  {
    const auto p = static_cast<std::size_t>(spec.grid_points);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      std::size_t rest = i;
      for (std::size_t j = dim; j > 0; --j) {
        const std::size_t k = rest % p;
        rest /= p;
        const double h = (hull.upper[j - 1] - hull.lower[j - 1]) / static_cast<double>(p - 1);
        l1_weights[i] *= (k == 0 || k + 1 == p) ? 0.5 * h : h;
      }
    }
  }

  std::vector<std::vector<double>> unit_grid;
  unit_grid.reserve(grid.size());
  for (const auto& x : grid) unit_grid.push_back(frame.to_unit(x));
  YSearchConfig cfg{frame.y_to_unit(range.lo - 1.0), frame.y_to_unit(range.hi + 1.0), spec.coarse_points,
                    spec.refine_candidates, spec.refine_tol};

  ExperimentResult result;
  std::ostringstream mask_desc;
  mask_desc << "x with distance > " << format_double(spec.delta1) << " from the boundary";
  if (!spec.function.critical_x.empty()) mask_desc << " and from " << spec.function.critical_x.size() << " critical point(s)";
  mask_desc << "; " << masked << " of " << grid.size() << " grid points";
  result.report.mask_description = mask_desc.str();
  result.report.masked_points = masked;
  result.report.grid_size = grid.size();

  std::vector<int> degrees = spec.degrees;
  std::sort(degrees.begin(), degrees.end());
  degrees.erase(std::unique(degrees.begin(), degrees.end()), degrees.end());
  for (int d : degrees) {
    const auto start = std::chrono::steady_clock::now();
    const MomentMatrix m = staged("moments", [&] { return assemble(spec, frame, d); });
    const ChristoffelEvaluator ev =
        staged("evaluator", [&] { return ChristoffelEvaluator::build(m, Regularized{spec.beta}); });
    const auto approx = staged("approximant", [&] { return approximant_on_grid(ev, unit_grid, cfg, spec.threads); });

    ErrorRow row;
    row.d = d;
    std::vector<double> y_star(grid.size());
    std::vector<ApproximantRecord> records(grid.size());
    std::vector<double> z(dim + 1);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      y_star[i] = frame.y_from_unit(approx[i].y_star);
      records[i] = {grid[i], f_values[i], y_star[i], approx[i].q_min};
      const double err = std::abs(f_values[i] - y_star[i]);
      row.l1_error += l1_weights[i] * err;
      std::copy(unit_grid[i].begin(), unit_grid[i].end(), z.begin());
      z.back() = frame.y_to_unit(f_values[i]);
      row.max_q_on_graph = std::max(row.max_q_on_graph, ev.inverse_lambda(z));
    }
    row.sup_error_global = sup_error(f_values, y_star, std::vector<bool>(grid.size(), true));
    row.sup_error_masked = sup_error(f_values, y_star, mask);
    if (spec.record_timing)
      row.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.report.rows.push_back(row);
    result.samples.push_back(std::move(records));
  }
  return result;
}

}  // namespace cdk
