#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "cdk/measures.hpp"
#include "oracles.hpp"

using namespace cdk;

namespace {

const BoxDomain kUnit = BoxDomain::interval(-1, 1);

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

ScalarField identity_f() {
  return [](std::span<const double> x) { return x[0]; };
}

}  // namespace

TEST_CASE("gauss-legendre small orders") {
  const auto r1 = gauss_legendre_rule(1);
  REQUIRE(r1.nodes.size() == 1);
  CHECK(r1.nodes[0] == doctest::Approx(0.0));
  CHECK(r1.weights[0] == doctest::Approx(2.0));

  const auto r2 = gauss_legendre_rule(2);
  REQUIRE(r2.nodes.size() == 2);
  CHECK(std::abs(std::abs(r2.nodes[0]) - 1 / std::sqrt(3.0)) < 1e-15);
  CHECK(r2.weights[0] == doctest::Approx(1.0));
  double t2 = 0;
  for (int i = 0; i < 2; ++i) t2 += r2.weights[static_cast<std::size_t>(i)] * r2.nodes[static_cast<std::size_t>(i)] * r2.nodes[static_cast<std::size_t>(i)];
  CHECK(std::abs(t2 - 2.0 / 3.0) < 1e-15);
}

TEST_CASE("gauss-legendre weights sum to 2 and integrate monomials exactly") {
  for (int q : {1, 2, 3, 5, 8, 13, 32, 64, 100, 200}) {
    const auto r = gauss_legendre_rule(q);
    double w = 0;
    for (double x : r.weights) w += x;
    CHECK(std::abs(w - 2.0) < 1e-14);
    for (int p = 0; p <= std::min(2 * q - 1, 40); ++p) {
      double s = 0;
      for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * std::pow(r.nodes[i], p);
      CHECK(std::abs(s - oracle::monomial_integral(p)) < 1e-13);
    }
  }
  CHECK_THROWS_AS(gauss_legendre_rule(0), std::invalid_argument);
}

TEST_CASE("graph moment matrix of y = x, monomial degree 1") {
  const auto m = graph_moment_matrix({identity_f(), kUnit, 4}, {2, 1, Family::monomial});
  Eigen::Matrix3d expected;
  expected << 2, 0, 0, 0, 2.0 / 3, 2.0 / 3, 0, 2.0 / 3, 2.0 / 3;
  CHECK(max_abs_diff(m.entries, expected) < 1e-14);
  CHECK(m.provenance == Provenance::quadrature);
}

TEST_CASE("graph moment matrix of y = 0, monomial degree 1") {
  const auto m = graph_moment_matrix({[](std::span<const double>) { return 0.0; }, kUnit, 4}, {2, 1, Family::monomial});
  Eigen::Matrix3d expected;
  expected << 2, 0, 0, 0, 2.0 / 3, 0, 0, 0, 0;
  CHECK(max_abs_diff(m.entries, expected) < 1e-14);
}

TEST_CASE("graph moments of y = x match closed-form integrals at degree 4") {
  const BasisSpec spec{2, 4, Family::monomial};
  const auto m = graph_moment_matrix({identity_f(), kUnit, 10}, spec);
  const auto idx = enumerate_multiindices(spec);
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const int p = idx[i].total_degree + idx[j].total_degree;
      CHECK(std::abs(m.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) -
                     oracle::monomial_integral(p)) < 1e-13);
    }
}

TEST_CASE("moment matrix root reproduces the entries") {
  const auto m = graph_moment_matrix({[](std::span<const double> x) { return std::exp(x[0]); }, kUnit, 20},
                                     {2, 6, Family::legendre});
  REQUIRE(m.root.has_value());
  const Eigen::MatrixXd rr = m.root->transpose() * *m.root;
  CHECK(max_abs_diff(rr, m.entries) < 1e-12 * m.entries.cwiseAbs().maxCoeff());
}

TEST_CASE("graph moment matrix invariants and errors") {
  const auto m = graph_moment_matrix({[](std::span<const double> x) { return std::sin(3 * x[0]); }, kUnit, 16},
                                     {2, 5, Family::chebyshev});
  const auto chk = check_moment_matrix(m);
  CHECK(chk.ok);
  CHECK(chk.symmetry_error <= 1e-14);
  CHECK(m.mass() == doctest::Approx(2.0).epsilon(1e-12));

  CHECK_THROWS_AS(graph_moment_matrix({[](std::span<const double> x) { return 1.0 / x[0]; }, kUnit, 3},
                                      {2, 1, Family::legendre}),
                  NumericalError);
  CHECK_THROWS_AS(graph_moment_matrix({identity_f(), kUnit, 4}, {3, 1, Family::legendre}), std::invalid_argument);
}

TEST_CASE("probability normalization divides by the volume") {
  const auto leb = graph_moment_matrix({identity_f(), BoxDomain::interval(0, 3), 8}, {2, 2, Family::legendre});
  const auto prob = graph_moment_matrix({identity_f(), BoxDomain::interval(0, 3, Normalization::probability), 8},
                                        {2, 2, Family::legendre});
  CHECK(prob.mass() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(max_abs_diff(leb.entries / 3.0, prob.entries) < 1e-13);
}

TEST_CASE("smoothed measure mass with and without slice normalization") {
  GraphMeasure base{identity_f(), kUnit, 8};
  const auto raw = smoothed_moment_matrix({base, 0.1, 40, false}, {2, 2, Family::legendre});
  CHECK(std::abs(raw.mass() - 2.0 / std::sqrt(2.0)) < 1e-8);
  const auto unit = smoothed_moment_matrix({base, 0.1, 40, true}, {2, 2, Family::legendre});
  CHECK(std::abs(unit.mass() - 2.0) < 1e-10);
  CHECK_THROWS_AS(smoothed_moment_matrix({base, 0.0, 40, true}, {2, 2, Family::legendre}), std::invalid_argument);
}

TEST_CASE("smoothed moments approach graph moments as epsilon halves") {
  const BasisSpec spec{2, 2, Family::monomial};
  const auto graph = graph_moment_matrix({identity_f(), kUnit, 8}, spec);
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {0.2, 0.1, 0.05, 0.025}) {
    const auto sm = smoothed_moment_matrix({{identity_f(), kUnit, 8}, eps, 30, true}, spec);
    const double dist = max_abs_diff(sm.entries, graph.entries);
    CHECK(dist < prev);
    prev = dist;
  }
}

TEST_CASE("additivity over a split domain") {
  const ScalarField f = [](std::span<const double> x) { return std::sin(2 * x[0]) + 0.3; };
  const BasisSpec spec{2, 5, Family::legendre};
  const auto whole = graph_moment_matrix({f, kUnit, 30}, spec);
  const std::vector<MomentMatrix> halves{graph_moment_matrix({f, BoxDomain::interval(-1, 0), 30}, spec),
                                         graph_moment_matrix({f, BoxDomain::interval(0, 1), 30}, spec)};
  const auto sum = combine(halves);
  CHECK(max_abs_diff(sum.entries, whole.entries) < 1e-10);
  REQUIRE(sum.root.has_value());
  CHECK(max_abs_diff(sum.root->transpose() * *sum.root, whole.entries) < 1e-10);
}

TEST_CASE("combine rejects mismatched or probability parts") {
  const auto a = graph_moment_matrix({identity_f(), BoxDomain::interval(-1, 0), 4}, {2, 2, Family::legendre});
  const auto b = graph_moment_matrix({identity_f(), BoxDomain::interval(0, 1), 4}, {2, 3, Family::legendre});
  CHECK_THROWS_AS(combine(std::vector<MomentMatrix>{a, b}), std::invalid_argument);
  const auto p = graph_moment_matrix({identity_f(), BoxDomain::interval(0, 1, Normalization::probability), 4},
                                     {2, 2, Family::legendre});
  CHECK_THROWS_AS(combine(std::vector<MomentMatrix>{p, p}), std::invalid_argument);
  CHECK_THROWS_AS(combine(std::vector<MomentMatrix>{}), std::invalid_argument);
}

TEST_CASE("orthonormal legendre basis has identity moments on the probability box") {
  const BasisSpec spec{2, 6, Family::legendre};
  const auto m = box_moment_matrix(BoxDomain{{-1, -1}, {1, 1}, Normalization::probability}, spec, 8);
  const auto idx = enumerate_multiindices(spec);
  Eigen::VectorXd scale(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    double s = 1.0;
    for (int e : idx[i].exponents) s *= std::sqrt(2.0 * e + 1.0);
    scale(static_cast<Eigen::Index>(i)) = s;
  }
  const Eigen::MatrixXd normed = scale.asDiagonal() * m.entries * scale.asDiagonal();
  CHECK(max_abs_diff(normed, Eigen::MatrixXd::Identity(normed.rows(), normed.cols())) < 1e-10);
}

TEST_CASE("regularize shifts the spectrum") {
  MomentMatrix zero;
  zero.spec = {2, 1, Family::monomial};
  zero.entries = Eigen::MatrixXd::Zero(3, 3);
  const auto id = regularize(zero, 1.0);
  CHECK(max_abs_diff(id.entries, Eigen::MatrixXd::Identity(3, 3)) == 0.0);
  CHECK(id.provenance == Provenance::regularized);

  const auto m = graph_moment_matrix({identity_f(), kUnit, 8}, {2, 3, Family::legendre});
  const double beta = 1e-3;
  const auto r = regularize(m, beta);
  for (Eigen::Index i = 0; i < m.size(); ++i) CHECK(r.entries(i, i) == m.entries(i, i) + beta);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e0(m.entries), e1(r.entries);
  CHECK((e1.eigenvalues() - e0.eigenvalues() - Eigen::VectorXd::Constant(m.size(), beta)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(e1.eigenvalues().minCoeff() >= beta - 1e-12);
  CHECK(e1.eigenvalues().maxCoeff() / e1.eigenvalues().minCoeff() <= (e0.eigenvalues().maxCoeff() + beta) / beta * (1 + 1e-12));
  CHECK(r.shift == beta);

  CHECK_THROWS_AS(regularize(m, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(regularize(m, std::numeric_limits<double>::infinity()), std::invalid_argument);
}

TEST_CASE("empirical moments of one or repeated samples") {
  const BasisSpec spec{2, 3, Family::legendre};
  const std::vector<double> z{0.3, -0.7};
  const auto one = empirical_moment_matrix(SampleSet(2, z), spec);
  const auto b = eval_basis_vector(spec, z);
  CHECK(max_abs_diff(one.entries, b * b.transpose()) < 1e-15);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(one.entries);
  lu.setThreshold(1e-12);
  CHECK(lu.rank() == 1);
  CHECK(one.provenance == Provenance::monte_carlo);
  CHECK(one.normalization == Normalization::probability);

  std::vector<double> flat;
  for (int i = 0; i < 7; ++i) flat.insert(flat.end(), z.begin(), z.end());
  const auto seven = empirical_moment_matrix(SampleSet(2, flat), spec);
  CHECK(max_abs_diff(seven.entries, one.entries) < 1e-15);

  CHECK_THROWS_AS(empirical_moment_matrix(SampleSet(3, {0, 0, 0}), spec), std::invalid_argument);
  CHECK_THROWS_AS(empirical_moment_matrix(SampleSet(2), spec), std::invalid_argument);
}

TEST_CASE("jitter without noise copies samples") {
  const SampleSet s(2, {0.1, 0.2, 0.3, 0.4});
  const auto j = jitter_samples(s, 0.0, 3, 5);
  REQUIRE(j.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(j.point(i)[0] == s.point(i / 3)[0]);
    CHECK(j.point(i)[1] == s.point(i / 3)[1]);
  }
  CHECK(jitter_samples(s, 0.5, 4, 1).size() == 8);
  CHECK_THROWS_AS(jitter_samples(s, -1.0, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(jitter_samples(s, 0.1, 0, 0), std::invalid_argument);
}

TEST_CASE("jitter noise is centred and seeded") {
  const SampleSet s(2, {0.0, 0.5});
  const auto j = jitter_samples(s, 0.1, 1000, 42);
  double mean = 0.0;
  for (std::size_t i = 0; i < j.size(); ++i) {
    CHECK(j.point(i)[0] == 0.0);
    mean += j.point(i)[1] - 0.5;
  }
  mean /= 1000.0;
  CHECK(std::abs(mean) <= 3 * 0.1 / std::sqrt(1000.0));
  CHECK(jitter_samples(s, 0.1, 1000, 42).data() == j.data());
  CHECK(jitter_samples(s, 0.1, 1000, 43).data() != j.data());
}

TEST_CASE("assembly is bit-for-bit reproducible") {
  const GraphMeasure g{[](std::span<const double> x) { return std::cos(x[0]); }, kUnit, 24};
  const auto a = graph_moment_matrix(g, {2, 8, Family::legendre});
  const auto b = graph_moment_matrix(g, {2, 8, Family::legendre});
  CHECK((a.entries.array() == b.entries.array()).all());
}

TEST_CASE("box domain helpers") {
  const BoxDomain b{{0, -1}, {2, 3}};
  CHECK(b.volume() == 8.0);
  CHECK(b.mass() == 8.0);
  CHECK(b.contains(std::vector<double>{1.0, 0.0}));
  CHECK_FALSE(b.contains(std::vector<double>{2.5, 0.0}));
  CHECK(b.boundary_distance(std::vector<double>{0.5, 1.0}) == doctest::Approx(0.5));
  CHECK_THROWS_AS((BoxDomain{{1}, {0}}.validate()), std::invalid_argument);
}
