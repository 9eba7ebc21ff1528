#include "cdk/cli.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "cdk/basis.hpp"
#include "cdk/bounds.hpp"
#include "cdk/christoffel.hpp"
#include "cdk/io.hpp"
#include "cdk/measures.hpp"
#include "cdk/pipeline.hpp"

namespace cdk::cli {

namespace {

/// Flag validation failure; maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& flag, const std::string& what) {
  if (!ok) throw UsageError(flag + ": " + what);
}

struct ExperimentFlags {
  std::string function;
  int degree = -1;
  std::string degrees;
  double beta = 1e-8;
  int grid = 1001;
  std::optional<double> epsilon;
  std::optional<long long> samples;
  double sigma = 0.0;
  int replication = 1;
  std::uint64_t seed = 0;
  double delta1 = 0.0;
  std::string basis = "legendre";
  int quad = 0;
  std::string out;
  bool timing = false;
};

void add_experiment_flags(CLI::App* cmd, ExperimentFlags& f) {
  cmd->add_option("--function", f.function, "catalog function name")->required();
  cmd->add_option("--beta", f.beta, "Tikhonov parameter (> 0)")->capture_default_str();
  cmd->add_option("--grid", f.grid, "grid points per x dimension (>= 2)")->capture_default_str();
  cmd->add_option("--epsilon", f.epsilon, "Gaussian band half-width: use the smoothed measure");
  cmd->add_option("--samples", f.samples, "number of uniform-x samples: use empirical moments");
  cmd->add_option("--sigma", f.sigma, "y jitter standard deviation for empirical moments")->capture_default_str();
  cmd->add_option("--replication", f.replication, "jittered copies per sample")->capture_default_str();
  cmd->add_option("--seed", f.seed, "random seed")->capture_default_str();
  cmd->add_option("--delta1", f.delta1, "exclusion radius around critical points and the boundary")
      ->capture_default_str();
  cmd->add_option("--basis", f.basis, "monomial | chebyshev | legendre")->capture_default_str();
  cmd->add_option("--quad", f.quad, "Gauss-Legendre order per dimension (0: 2(d+1), raised for polynomials)")->capture_default_str();
  cmd->add_flag("--timing", f.timing, "record wall-clock runtime in the report");
}

ExperimentSpec experiment_from_flags(const ExperimentFlags& f, std::vector<int> degrees) {
  ExperimentSpec spec;
  try {
    spec.function = catalog(f.function);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--function: ") + e.what());
  }
  require(f.beta > 0 && std::isfinite(f.beta), "--beta", "must be positive");
  require(f.grid >= 2, "--grid", "must be at least 2");
  require(f.delta1 >= 0 && std::isfinite(f.delta1), "--delta1", "must be >= 0");
  require(f.quad >= 0, "--quad", "must be >= 0");
  require(f.sigma >= 0 && std::isfinite(f.sigma), "--sigma", "must be >= 0");
  require(f.replication >= 1, "--replication", "must be >= 1");
  require(!(f.epsilon && f.samples), "--epsilon", "cannot be combined with --samples");
  try {
    spec.family = parse_family(f.basis);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--basis: ") + e.what());
  }
  spec.degrees = std::move(degrees);
  spec.beta = f.beta;
  spec.grid_points = f.grid;
  spec.delta1 = f.delta1;
  spec.quad_order = f.quad;
  spec.record_timing = f.timing;
  if (f.epsilon) {
    require(*f.epsilon > 0 && std::isfinite(*f.epsilon), "--epsilon", "must be positive");
    spec.mode = SmoothedMode{*f.epsilon, true, 0};
  } else if (f.samples) {
    require(*f.samples >= 1, "--samples", "must be >= 1");
    spec.mode = EmpiricalMode{static_cast<std::size_t>(*f.samples), f.sigma, f.replication, f.seed};
  }
  return spec;
}

nlohmann::ordered_json provenance(const std::string& command, const ExperimentFlags& f, const ExperimentSpec& spec) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["function"] = f.function;
  if (command == "approximate")
    j["degree"] = f.degree;
  else
    j["degrees"] = spec.degrees;
  j["beta"] = f.beta;
  j["grid"] = f.grid;
  j["delta1"] = f.delta1;
  j["basis"] = f.basis;
  j["quad"] = f.quad;
  const int p = spec.function.polynomial_degree;
  j["quad_rule"] = f.quad > 0    ? std::to_string(f.quad)
                   : p > 2       ? "max(2(d+1), " + std::to_string(p) + "d+1)"
                                 : std::string("2(d+1)");
  j["mode"] = describe(spec.mode);
  j["seed"] = f.seed;
  return j;
}

std::string report_row_text(const ErrorReport& report) {
  return io::report_csv(report);
}

int cmd_approximate(const ExperimentFlags& f, std::ostream& out) {
  require(f.degree >= 0, "--degree", "must be >= 0");
  const ExperimentSpec spec = experiment_from_flags(f, {f.degree});
  const std::string prefix = f.out.empty() ? "approximate" : f.out;
  const ExperimentResult result = run_experiment(spec);
  auto j = provenance("approximate", f, spec);
  j["report"] = io::report_to_json(result.report);
  io::write_atomic(prefix + ".csv", io::approximant_csv(result.samples.front()));
  io::write_atomic(prefix + ".json", io::dump(j));
  out << report_row_text(result.report);
  return kExitOk;
}

std::vector<int> parse_degree_range(const std::string& text) {
  int lo = 0;
  int step = 0;
  int hi = 0;
  char c1 = 0;
  char c2 = 0;
  std::istringstream is(text);
  if (!(is >> lo >> c1 >> step >> c2 >> hi) || c1 != ':' || c2 != ':' || !is.eof())
    throw UsageError("--degrees: expected lo:step:hi, got '" + text + "'");
  require(lo >= 0, "--degrees", "lower degree must be >= 0");
  require(step >= 1, "--degrees", "step must be >= 1");
  require(lo <= hi, "--degrees", "empty range (lo > hi)");
  std::vector<int> out;
  for (int d = lo; d <= hi; d += step) out.push_back(d);
  return out;
}

int cmd_sweep(const ExperimentFlags& f, std::ostream& out) {
  const ExperimentSpec spec = experiment_from_flags(f, parse_degree_range(f.degrees));
  const std::string prefix = f.out.empty() ? "sweep" : f.out;
  const ExperimentResult result = run_experiment(spec);
  auto j = provenance("sweep", f, spec);
  j["report"] = io::report_to_json(result.report);
  try {
    j["slope"] = rate_fit(result.report);
  } catch (const std::invalid_argument& e) {
    j["slope"] = nullptr;
    j["slope_note"] = e.what();
  }
  io::write_atomic(prefix + ".csv", io::report_csv(result.report));
  io::write_atomic(prefix + ".json", io::dump(j));
  out << io::report_csv(result.report);
  out << "slope " << (j["slope"].is_null() ? std::string("null") : io::format_double(j["slope"].get<double>())) << "\n";
  return kExitOk;
}

struct BoundsFlags {
  double volx = 0.0;
  double delta1 = 0.0;
  std::optional<double> deltamax;
  std::string points;
  int n = 1;
  int dmax = 64;
  std::string out;
};

int cmd_bounds(const BoundsFlags& f, std::ostream& out) {
  require(f.volx > 0 && std::isfinite(f.volx), "--volx", "must be positive");
  require(f.delta1 > 0 && std::isfinite(f.delta1), "--delta1", "must be positive");
  require(f.n >= 1, "--n", "must be >= 1");
  require(f.dmax >= 1, "--dmax", "must be >= 1");
  require(f.deltamax.has_value() != !f.points.empty(), "--deltamax", "give exactly one of --deltamax and --points");
  double delta_max = 0.0;
  if (f.deltamax) {
    require(*f.deltamax > 0 && std::isfinite(*f.deltamax), "--deltamax", "must be positive");
    delta_max = *f.deltamax;
  } else {
    SampleSet pts(1);
    try {
      pts = io::read_samples_csv(std::filesystem::path(f.points));
    } catch (const io::FormatError& e) {
      throw UsageError(std::string("--points: ") + e.what());
    }
    std::vector<std::vector<double>> cloud;
    for (std::size_t i = 0; i < pts.size(); ++i) cloud.emplace_back(pts.point(i).begin(), pts.point(i).end());
    delta_max = delta_max_estimate(cloud);
    require(delta_max > 0, "--points", "point cloud has zero diameter");
  }
  const DegreeCertificate cert = separating_degree({f.volx, f.delta1, delta_max, f.n, f.dmax});
  const std::string text = io::dump(io::certificate_to_json(cert));
  if (!f.out.empty()) io::write_atomic(f.out, text);
  out << text;
  return kExitOk;
}

struct MomentsFlags {
  std::string samples;
  int degree = -1;
  std::string basis = "legendre";
  double sigma = 0.0;
  int replication = 1;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_moments(const MomentsFlags& f, std::ostream& out) {
  require(f.degree >= 0, "--degree", "must be >= 0");
  require(f.sigma >= 0 && std::isfinite(f.sigma), "--sigma", "must be >= 0");
  require(f.replication >= 1, "--replication", "must be >= 1");
  Family family{};
  try {
    family = parse_family(f.basis);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--basis: ") + e.what());
  }
  SampleSet samples(1);
  try {
    samples = io::read_samples_csv(std::filesystem::path(f.samples));
  } catch (const io::FormatError& e) {
    throw UsageError(std::string("--samples: ") + e.what());
  }
  const SampleSet jittered = jitter_samples(samples, f.sigma, f.replication, f.seed);
  const MomentMatrix m = empirical_moment_matrix(jittered, BasisSpec{samples.dim(), f.degree, family});
  const std::string text = io::dump(io::moment_matrix_to_json(m));
  if (f.out.empty())
    out << text;
  else
    io::write_atomic(f.out, text);
  return kExitOk;
}

struct Check {
  std::string name;
  std::function<bool()> run;
};

std::vector<Check> selftest_checks() {
  return {
      {"erf(1) = 0.8427007929497149", [] { return std::abs(std::erf(1.0) - 0.8427007929497149) <= 1e-15; }},
      {"legendre and chebyshev recurrences match closed forms",
       [] {
         std::mt19937_64 rng(7);
         std::uniform_real_distribution<double> u(-2.0, 2.0);
         for (int i = 0; i < 100; ++i) {
           const double t = u(rng);
           const double p4 = (35 * std::pow(t, 4) - 30 * t * t + 3) / 8;
           const double t5 = 16 * std::pow(t, 5) - 20 * std::pow(t, 3) + 5 * t;
           if (std::abs(eval_univariate(Family::legendre, 4, t) - p4) > 1e-12 * std::max(1.0, std::abs(p4))) return false;
           if (std::abs(eval_univariate(Family::chebyshev, 5, t) - t5) > 1e-12 * std::max(1.0, std::abs(t5))) return false;
         }
         return true;
       }},
      {"gauss-legendre rules integrate degree 2q-1 exactly",
       [] {
         for (int q = 1; q <= 40; ++q) {
           const auto rule = gauss_legendre_rule(q);
           const int k = 2 * q - 2;  // highest even degree within exactness
           double s = 0.0;
           double w = 0.0;
           for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
             s += rule.weights[i] * std::pow(rule.nodes[i], k);
             w += rule.weights[i];
           }
           if (std::abs(s - 2.0 / (k + 1)) > 1e-13 || std::abs(w - 2.0) > 1e-14) return false;
         }
         return true;
       }},
      {"needle polynomial normalization and decay",
       [] {
         std::mt19937_64 rng(11);
         std::uniform_real_distribution<double> u(0.0, 1.0);
         for (int s = 0; s < 20; ++s) {
           NeedleSpec spec{{u(rng), u(rng)}, 0.1 + 0.8 * u(rng), 1 + static_cast<int>(u(rng) * 30)};
           if (std::abs(needle_eval(spec, spec.center) - 1.0) > 1e-12) return false;
           for (int k = 0; k < 200; ++k) {
             const double r = u(rng);
             const double a = 2 * 3.141592653589793 * u(rng);
             const std::vector<double> z{spec.center[0] + r * std::cos(a), spec.center[1] + r * std::sin(a)};
             const double v = std::abs(needle_eval(spec, z));
             if (v > 1.0 + 1e-12) return false;
             if (r >= spec.delta && v > std::exp2(1.0 - spec.delta * spec.degree) + 1e-12) return false;
           }
         }
         return true;
       }},
      {"separating degree for vol 2, delta3 1, n 1 is 10",
       [] {
         const auto cert = separating_degree_for(2.0, 1.0, 1, 64);
         return cert.d_star_sep == 10;
       }},
      {"basis size matches enumeration",
       [] {
         for (int nv = 1; nv <= 4; ++nv)
           for (int d = 0; d <= 8; ++d)
             if (enumerate_multiindices({nv, d, Family::legendre}).size() != basis_size(nv, d)) return false;
         return true;
       }},
      {"lambda of the uniform probability interval at t=1 for d=1 is 1/4",
       [] {
         const auto m = box_moment_matrix(BoxDomain::interval(-1, 1, Normalization::probability),
                                          {1, 1, Family::legendre}, 4);
         const auto ev = ChristoffelEvaluator::build(m, PseudoInverse{});
         const double one = 1.0;
         return std::abs(ev.lambda(std::span<const double>(&one, 1)) - 0.25) < 1e-12;
       }},
  };
}

int cmd_selftest(std::ostream& out) {
  int failures = 0;
  for (const auto& c : selftest_checks()) {
    bool ok = false;
    try {
      ok = c.run();
    } catch (const std::exception&) {
      ok = false;
    }
    out << (ok ? "PASS  " : "FAIL  ") << c.name << "\n";
    failures += ok ? 0 : 1;
  }
  out << (failures == 0 ? "all checks passed" : std::to_string(failures) + " check(s) failed") << "\n";
  return failures == 0 ? kExitOk : kExitFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph recovery with Christoffel-Darboux kernels", "cdk"};
  app.require_subcommand(1);

  ExperimentFlags approx_flags;
  auto* approximate = app.add_subcommand("approximate", "recover f at one degree and report errors");
  add_experiment_flags(approximate, approx_flags);
  approximate->add_option("--degree", approx_flags.degree, "polynomial degree d")->required();
  approximate->add_option("--out", approx_flags.out, "output prefix for <out>.csv and <out>.json");

  ExperimentFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "degree sweep with a log-log rate fit");
  add_experiment_flags(sweep, sweep_flags);
  sweep->add_option("--degrees", sweep_flags.degrees, "lo:step:hi")->required();
  sweep->add_option("--out", sweep_flags.out, "output prefix for <out>.csv and <out>.json");

  BoundsFlags bounds_flags;
  auto* bounds = app.add_subcommand("bounds", "separating-degree certificate");
  bounds->add_option("--volx", bounds_flags.volx, "volume of the domain X")->required();
  bounds->add_option("--delta1", bounds_flags.delta1, "exclusion radius")->required();
  bounds->add_option("--deltamax", bounds_flags.deltamax, "twice the diameter of the variety");
  bounds->add_option("--points", bounds_flags.points, "CSV point cloud to estimate delta_max from");
  bounds->add_option("--n", bounds_flags.n, "dimension of X")->capture_default_str();
  bounds->add_option("--dmax", bounds_flags.dmax, "largest degree to scan")->capture_default_str();
  bounds->add_option("--out", bounds_flags.out, "write the certificate JSON here");

  MomentsFlags moments_flags;
  auto* moments = app.add_subcommand("moments", "empirical moment matrix from a sample CSV");
  moments->add_option("--samples", moments_flags.samples, "CSV with header x1,...,xn,y")->required();
  moments->add_option("--degree", moments_flags.degree, "polynomial degree d")->required();
  moments->add_option("--basis", moments_flags.basis, "monomial | chebyshev | legendre")->capture_default_str();
  moments->add_option("--sigma", moments_flags.sigma, "y jitter standard deviation")->capture_default_str();
  moments->add_option("--replication", moments_flags.replication, "jittered copies per sample")->capture_default_str();
  moments->add_option("--seed", moments_flags.seed, "random seed")->capture_default_str();
  moments->add_option("--out", moments_flags.out, "write the matrix JSON here instead of stdout");

  auto* selftest = app.add_subcommand("selftest", "run the embedded invariant checks");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (approximate->parsed()) return cmd_approximate(approx_flags, out);
    if (sweep->parsed()) return cmd_sweep(sweep_flags, out);
    if (bounds->parsed()) return cmd_bounds(bounds_flags, out);
    if (moments->parsed()) return cmd_moments(moments_flags, out);
    if (selftest->parsed()) return cmd_selftest(out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace cdk::cli
