#include <doctest.h>

#include <cmath>
#include <random>

#include "cdk/christoffel.hpp"
#include "oracles.hpp"

using namespace cdk;

namespace {

const BoxDomain kUnit = BoxDomain::interval(-1, 1);

MomentMatrix from_entries(const BasisSpec& spec, const Eigen::MatrixXd& e) {
  MomentMatrix m;
  m.spec = spec;
  m.entries = e;
  return m;
}

MomentMatrix sign_moments(int d) {
  const std::vector<MomentMatrix> parts{
      graph_moment_matrix({[](std::span<const double>) { return -1.0; }, BoxDomain::interval(-1, 0), d + 1},
                          {2, d, Family::legendre}),
      graph_moment_matrix({[](std::span<const double>) { return 1.0; }, BoxDomain::interval(0, 1), d + 1},
                          {2, d, Family::legendre})};
  return combine(parts);
}

double pt_lambda(const ChristoffelEvaluator& ev, double x, double y) {
  const std::vector<double> z{x, y};
  return ev.lambda(z);
}

}  // namespace

TEST_CASE("identity matrix with beta 1") {
  const auto ev = build_evaluator(from_entries({2, 1, Family::monomial}, Eigen::MatrixXd::Identity(3, 3)), Regularized{1.0});
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(1.0 / ev.eigenvalues()(i) == doctest::Approx(0.5));
  CHECK(ev.rank() == 3);
}

TEST_CASE("rank-one matrix in pseudoinverse mode") {
  const BasisSpec spec{2, 1, Family::monomial};
  const auto b = eval_basis_vector(spec, std::vector<double>{0.4, -0.2});
  const auto ev = build_evaluator(from_entries(spec, b * b.transpose()), PseudoInverse{});
  CHECK(ev.rank() == 1);
}

TEST_CASE("graph of y = x has a one-dimensional kernel along x - y") {
  const auto m = graph_moment_matrix({[](std::span<const double> x) { return x[0]; }, kUnit, 4}, {2, 1, Family::monomial});
  for (const MomentMatrix& mm : {m, from_entries(m.spec, m.entries)}) {
    const auto ev = build_evaluator(mm, PseudoInverse{});
    CHECK(ev.rank() == 2);
    const Eigen::Vector3d k = ev.eigenvectors().col(0);
    CHECK(std::abs(std::abs(k.dot(Eigen::Vector3d(0, 1, -1) / std::sqrt(2.0))) - 1.0) < 1e-12);
    CHECK(pt_lambda(ev, 0.5, -0.5) == 0.0);
    CHECK(pt_lambda(ev, 0.5, 0.5) > 0.0);
  }
}

TEST_CASE("uniform probability interval") {
  const auto box = BoxDomain::interval(-1, 1, Normalization::probability);
  const auto ev0 = build_evaluator(box_moment_matrix(box, {1, 0, Family::legendre}, 2), PseudoInverse{});
  for (double t : {-1.0, 0.0, 0.3, 1.0}) CHECK(ev0.lambda(std::vector<double>{t}) == doctest::Approx(1.0).epsilon(1e-14));
  const auto ev1 = build_evaluator(box_moment_matrix(box, {1, 1, Family::monomial}, 2), PseudoInverse{});
  CHECK(std::abs(ev1.lambda(std::vector<double>{1.0}) - 0.25) < 1e-14);
}

TEST_CASE("lambda agrees with the constrained-minimization oracle") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (const BasisSpec spec : {BasisSpec{2, 1, Family::monomial}, BasisSpec{2, 2, Family::legendre}}) {
    const auto n = static_cast<Eigen::Index>(spec.size());
    for (int trial = 0; trial < 50; ++trial) {
      Eigen::MatrixXd a(n, n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = g(rng);
      const Eigen::MatrixXd m = a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
      const std::vector<double> z{u(rng), u(rng)};
      const auto b = eval_basis_vector(spec, z);
      const double beta = 1e-3;
      const auto pinv = build_evaluator(from_entries(spec, m), PseudoInverse{});
      const auto reg = build_evaluator(from_entries(spec, m), Regularized{beta});
      const double want = oracle::constrained_min(m, b);
      const double want_reg = oracle::constrained_min(m + beta * Eigen::MatrixXd::Identity(n, n), b);
      CHECK(std::abs(lambda_value(pinv, z) - want) <= 1e-10 * want);
      CHECK(std::abs(lambda_value(reg, z) - want_reg) <= 1e-10 * want_reg);
    }
  }
}

TEST_CASE("lambda is monotone in degree, in beta, and bounded by mass") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const BoxDomain box{{-1, -1}, {1, 1}};
  std::vector<ChristoffelEvaluator> evs;
  for (int d = 0; d <= 9; ++d) evs.push_back(build_evaluator(box_moment_matrix(box, {2, d, Family::legendre}, d + 2), PseudoInverse{}));
  const auto graph = graph_moment_matrix({[](std::span<const double> x) { return x[0] * x[0]; }, kUnit, 12},
                                         {2, 5, Family::legendre});
  const auto big = build_evaluator(graph, Regularized{1e-2});
  const auto small = build_evaluator(graph, Regularized{1e-5});
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> z{u(rng), u(rng)};
    for (int d = 0; d < 9; ++d) CHECK(evs[static_cast<std::size_t>(d + 1)].lambda(z) <= evs[static_cast<std::size_t>(d)].lambda(z) + 1e-12);
    for (const auto& ev : evs) CHECK(ev.lambda(z) <= ev.mass() * (1 + 1e-12));
    CHECK(big.lambda(z) >= small.lambda(z));
    CHECK(small.lambda(z) <= graph.mass() * (1 + 1e-12));
  }
}

TEST_CASE("build rejects bad parameters") {
  const auto m = from_entries({2, 1, Family::monomial}, Eigen::MatrixXd::Identity(3, 3));
  CHECK_THROWS_AS(build_evaluator(m, Regularized{0.0}), std::invalid_argument);
  CHECK_THROWS_AS(build_evaluator(m, PseudoInverse{1.5}), std::invalid_argument);
  CHECK_THROWS_AS(build_evaluator(m, PseudoInverse{0.0}), std::invalid_argument);
}

TEST_CASE("minimize over y recovers y = x") {
  const auto m = graph_moment_matrix({[](std::span<const double> x) { return x[0]; }, kUnit, 6}, {2, 2, Family::legendre});
  const auto ev = build_evaluator(m, Regularized{1e-8});
  const std::vector<double> x{0.3};
  const auto r = minimize_over_y(ev, x, YSearchConfig{});
  CHECK(std::abs(r.y_star - 0.3) < 1e-4);
  CHECK(std::abs(r.q_min - 1.0 / ev.lambda(std::vector<double>{0.3, r.y_star})) <= 1e-12 * r.q_min);

  std::vector<double> ys(100001);
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = -2.0 + 4.0 * static_cast<double>(i) / 100000.0;
  const auto g = ev.inverse_lambda_along_y(x, ys);
  CHECK(std::abs(ys[oracle::argmin(g)] - 0.3) < 1e-4);
}

TEST_CASE("minimize over y recovers sign at x = 0.5") {
  for (int d : {6, 8, 10}) {
    const auto ev = build_evaluator(sign_moments(d), Regularized{1e-8});
    const auto r = minimize_over_y(ev, std::vector<double>{0.5}, YSearchConfig{});
    CHECK(std::abs(r.y_star - 1.0) < 1e-3);
    const auto r2 = minimize_over_y(ev, std::vector<double>{-0.5}, YSearchConfig{});
    CHECK(std::abs(r2.y_star + 1.0) < 1e-3);
  }
}

TEST_CASE("minimize over y errors") {
  const auto m = graph_moment_matrix({[](std::span<const double> x) { return x[0]; }, kUnit, 6}, {2, 2, Family::legendre});
  const auto reg = build_evaluator(m, Regularized{1e-8});
  CHECK_THROWS(minimize_over_y(reg, std::vector<double>{1.5}, YSearchConfig{}));
  CHECK_THROWS_AS(minimize_over_y(reg, std::vector<double>{0.0}, YSearchConfig{1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(minimize_over_y(reg, std::vector<double>{0.0}, YSearchConfig{-1.0, 1.0, 2}), std::invalid_argument);
  const auto pinv = build_evaluator(m, PseudoInverse{});
  CHECK_THROWS(minimize_over_y(pinv, std::vector<double>{0.0}, YSearchConfig{}));
}

TEST_CASE("approximant on a grid") {
  const auto m = graph_moment_matrix({[](std::span<const double> x) { return x[0] * x[0]; }, kUnit, 64}, {2, 4, Family::legendre});
  const auto ev = build_evaluator(m, Regularized{1e-9});
  std::vector<std::vector<double>> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back({-1.0 + 0.02 * i});
  const auto out = approximant_on_grid(ev, grid, YSearchConfig{}, 4);
  REQUIRE(out.size() == grid.size());
  double worst = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i].x == grid[i]);
    worst = std::max(worst, std::abs(out[i].y_star - grid[i][0] * grid[i][0]));
  }
  CHECK(worst <= 1e-3);

  const auto single = approximant_on_grid(ev, {{0.25}}, YSearchConfig{}, 1);
  REQUIRE(single.size() == 1);
  const auto direct = minimize_over_y(ev, std::vector<double>{0.25}, YSearchConfig{});
  CHECK(single[0].y_star == direct.y_star);
  CHECK(single[0].q_min == direct.q_min);

  const auto serial = approximant_on_grid(ev, grid, YSearchConfig{}, 1);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(serial[i].y_star == out[i].y_star);
}

TEST_CASE("unit box bound sum") {
  auto r = unit_box_bound_sum(0, 1);
  CHECK(r.sum == 1.0);
  CHECK(r.cap == 1.0);
  r = unit_box_bound_sum(2, 1);
  CHECK(r.sum == doctest::Approx(1.25).epsilon(1e-15));
  CHECK(r.cap == 9.0);
  r = unit_box_bound_sum(50, 3);
  CHECK(r.sum <= r.cap);
  // P_{2m}(0)^2 = (binom(2m, m) / 4^m)^2, odd terms vanish
  double direct = 0;
  double c = 1.0;
  for (int m = 0; 2 * m <= 50; ++m) {
    if (m > 0) c *= (2.0 * m - 1) / (2.0 * m);
    direct += std::pow(c * c, 3);
  }
  CHECK(r.sum == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("sign pseudoinverse separates on and off the graph") {
  const auto ev = build_evaluator(sign_moments(12), PseudoInverse{});
  for (int i = 0; i <= 100; ++i) {
    const double x = -1.0 + 0.02 * i;
    if (std::abs(x) < 0.25) continue;
    const double f = x > 0 ? 1.0 : -1.0;
    CHECK(pt_lambda(ev, x, f) > pt_lambda(ev, x, -f));
  }
}
