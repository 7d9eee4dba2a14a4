#ifndef PARSIMAX_CLI_HPP
#define PARSIMAX_CLI_HPP

// Command-line front end. `run` parses arguments, executes one command and
// returns the exit code together with what would go to stdout and stderr,
// so the whole surface is testable in-process.
//
// Exit codes: 0 success, 2 data or usage error, 3 numerical error.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "parsimax/covariance.hpp"
#include "parsimax/csv.hpp"
#include "parsimax/error.hpp"
#include "parsimax/harness.hpp"
#include "parsimax/identities.hpp"
#include "parsimax/maxtest.hpp"

namespace parsimax::cli {

using json = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 2;
inline constexpr int kExitNumericalError = 3;

struct Outcome {
  int exit_code = 0;
  std::string out;
  std::string err;
};

/// Everything a command may need; which fields matter depends on `command`.
struct RunSpec {
  std::string command;
  // test
  std::string input_path;
  std::string y_column;
  std::vector<std::string> z_columns;
  std::vector<std::string> x_columns;
  // shared
  std::size_t draws = 10000;
  std::uint64_t seed = 0;
  std::string estimator = "restricted_closed_form";
  std::string sampler = "cholesky_then_eigen";
  double alpha = 0.05;
  bool plus_one = false;
  bool timings = false;
  std::string output_path;
  // experiments
  long n = 200;
  long p = 2;
  long h = 10;
  std::string regressors = "iid";
  double rho = 0.0;
  double phi = 0.5;
  std::string errors = "heteroscedastic";
  double sigma = 1.0;
  double hetero_intercept = 0.5;
  std::vector<double> hetero_coef;
  std::vector<double> a;
  std::vector<double> b;
  std::size_t replications = 1000;
  bool wald = false;
  std::vector<long> n_grid{100, 1000, 10000};
  std::size_t atoms = 0;
  bool homoscedastic_population = false;
};

namespace detail {

inline Estimator parse_estimator(const std::string& s) {
  if (s == "restricted_closed_form") return Estimator::restricted_closed_form;
  if (s == "ghm_blockwise") return Estimator::ghm_blockwise;
  throw Error(ErrorKind::invalid_argument, "unknown estimator '" + s + "'");
}

inline SamplerPolicy parse_sampler(const std::string& s) {
  if (s == "cholesky_then_eigen") return SamplerPolicy::cholesky_then_eigen;
  if (s == "eigen_only") return SamplerPolicy::eigen_only;
  throw Error(ErrorKind::invalid_argument, "unknown sampler '" + s + "'");
}

inline json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json vector_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

inline json certificate_json(const PDCertificate& c) {
  return json{{"status", std::string(to_string(c.status))},
              {"min_eigenvalue", c.min_eigenvalue},
              {"tolerance", c.tolerance_used}};
}

inline json report_json(const ExperimentReport& r) {
  json out;
  out["replications"] = r.replications;
  if (!r.frobenius_errors.empty()) {
    json pts = json::array();
    for (const auto& pt : r.frobenius_errors) {
      pts.push_back(json{{"n", pt.n},
                         {"restricted_error", pt.restricted_error},
                         {"ghm_error", pt.ghm_error},
                         {"mutual_distance", pt.mutual_distance}});
    }
    out["frobenius_errors"] = std::move(pts);
    return out;
  }
  if (!r.sampler_counts.empty()) {
    out["alpha"] = r.alpha;
    out["rejection_rate"] = r.rejection_rate;
    out["rejection_se"] = r.rejection_se;
    if (r.wald_rejection_rate) out["wald_rejection_rate"] = *r.wald_rejection_rate;
  }
  json est = json::object();
  for (const auto& [name, s] : r.estimators) {
    est[name] = json{{"mean_min_eigenvalue", s.mean_min_eigenvalue},
                     {"pd_failure_count", s.pd_failure_count},
                     {"evaluated", s.evaluated}};
  }
  out["estimators"] = std::move(est);
  return out;
}

inline DgpConfig dgp_from_spec(const RunSpec& s) {
  DgpConfig cfg;
  cfg.n = s.n;
  cfg.p = s.p;
  cfg.h = s.h;
  cfg.seed = s.seed;
  cfg.a = s.a;
  cfg.b = s.b;
  if (s.regressors == "iid") {
    cfg.regressors = IidGaussian{s.rho};
  } else if (s.regressors == "ar1") {
    cfg.regressors = Ar1Gaussian{s.phi, s.rho};
  } else {
    throw Error(ErrorKind::invalid_argument, "unknown regressor model '" + s.regressors + "'");
  }
  if (s.errors == "homoscedastic") {
    cfg.errors = Homoscedastic{s.sigma};
  } else if (s.errors == "heteroscedastic") {
    cfg.errors = HeteroscedasticScale{s.hetero_intercept, s.hetero_coef};
  } else {
    throw Error(ErrorKind::invalid_argument, "unknown error model '" + s.errors + "'");
  }
  return cfg;
}

inline MaxTestConfig test_config(const RunSpec& s) {
  MaxTestConfig cfg;
  cfg.draws = s.draws;
  cfg.seed = s.seed;
  cfg.estimator = parse_estimator(s.estimator);
  cfg.sampler = parse_sampler(s.sampler);
  cfg.plus_one = s.plus_one;
  return cfg;
}

inline void validate(const RunSpec& s) {
  if (!(s.alpha > 0.0 && s.alpha < 1.0)) {
    throw Error(ErrorKind::invalid_argument, "--alpha must lie in (0, 1), got " + csv::format_double(s.alpha));
  }
  if (s.draws < 1) throw Error(ErrorKind::invalid_argument, "--draws must be >= 1");
  parse_estimator(s.estimator);
  parse_sampler(s.sampler);
  if (s.command == "test") {
    std::vector<std::string> all{s.y_column};
    all.insert(all.end(), s.z_columns.begin(), s.z_columns.end());
    all.insert(all.end(), s.x_columns.begin(), s.x_columns.end());
    std::sort(all.begin(), all.end());
    if (std::adjacent_find(all.begin(), all.end()) != all.end()) {
      throw Error(ErrorKind::invalid_argument, "--y, --z and --x must name disjoint columns");
    }
  }
}

inline json config_echo(const RunSpec& s) {
  json c;
  if (s.command == "test") {
    c["input"] = s.input_path;
    c["y"] = s.y_column;
    c["z"] = s.z_columns;
    c["x"] = s.x_columns;
  }
  if (s.command != "verify-identities") {
    if (s.command != "census" && s.command != "consistency") {
      c["draws"] = s.draws;
      c["estimator"] = s.estimator;
      c["sampler"] = s.sampler;
      c["alpha"] = s.alpha;
      c["plus_one"] = s.plus_one;
    }
  }
  c["seed"] = s.seed;
  if (s.command == "size" || s.command == "power" || s.command == "census") {
    c["n"] = s.n;
    c["p"] = s.p;
    c["h"] = s.h;
    c["regressors"] = s.regressors;
    if (s.regressors == "ar1") c["phi"] = s.phi;
    c["rho"] = s.rho;
    c["errors"] = s.errors;
    if (s.errors == "homoscedastic") {
      c["sigma"] = s.sigma;
    } else {
      c["hetero_intercept"] = s.hetero_intercept;
      c["hetero_coef"] = s.hetero_coef;
    }
    c["a"] = s.a;
    c["b"] = s.b;
    c["replications"] = s.replications;
    if (s.command != "census") c["wald"] = s.wald;
  }
  if (s.command == "consistency") {
    c["p"] = s.p;
    c["h"] = s.h;
    c["n_grid"] = s.n_grid;
    c["atoms"] = s.atoms;
    c["homoscedastic_population"] = s.homoscedastic_population;
    c["replications"] = s.replications;
  }
  return c;
}

inline int exit_code_for(ErrorKind k) { return is_numerical(k) ? kExitNumericalError : kExitDataError; }

inline std::string error_json(std::string_view kind, const std::string& message) {
  return json{{"error", json{{"kind", kind}, {"message", message}}}}.dump() + "\n";
}

}  // namespace detail

/// Executes a validated spec and returns the JSON document.
inline json execute(const RunSpec& s, int& exit_code) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  json result;
  json diagnostics;
  exit_code = kExitOk;

  if (s.command == "test") {
    const Dataset d = ingest_csv(s.input_path, ColumnSpec{s.y_column, s.z_columns, s.x_columns});
    const MaxTestResult r = run_max_test(d, detail::test_config(s));
    result["n"] = d.n();
    result["p"] = d.p();
    result["h"] = d.h();
    result["betas"] = detail::vector_json(r.betas);
    result["statistic"] = r.statistic;
    result["p_value"] = r.p_value;
    result["reject"] = parsimax::detail::rejects(r.p_value, s.alpha);
    result["draws"] = r.draws;
    result["estimator"] = std::string(to_string(r.covariance.method));
    result["covariance"] = detail::matrix_json(r.covariance.v.matrix());
    diagnostics["sampler_used"] = std::string(to_string(r.sampler_used));
    diagnostics["pd_certificate"] = detail::certificate_json(r.covariance.certificate);
  } else if (s.command == "size" || s.command == "power") {
    const DgpConfig cfg = detail::dgp_from_spec(s);
    const ExperimentReport r =
        s.command == "size" ? size_experiment(cfg, detail::test_config(s), s.replications, s.alpha, s.wald)
                            : power_experiment(cfg, detail::test_config(s), s.replications, s.alpha, s.wald);
    result = detail::report_json(r);
    diagnostics["sampler_used"] = r.sampler_counts;
    diagnostics["pd_certificate"] = result["estimators"];
  } else if (s.command == "census") {
    const ExperimentReport r = pd_failure_census(detail::dgp_from_spec(s), s.replications);
    result = detail::report_json(r);
    diagnostics["pd_certificate"] = result["estimators"];
  } else if (s.command == "consistency") {
    DgpConfig cfg;
    cfg.p = s.p;
    cfg.h = s.h;
    cfg.seed = s.seed;
    auto pop = std::make_shared<const FinitePopulation>(
        random_population(s.p, s.h, s.seed, !s.homoscedastic_population, s.atoms));
    cfg.regressors = PopulationRegressors{pop};
    const Matrix v = v_closed_form(population_moments(*pop)).v.matrix();
    std::vector<Eigen::Index> grid(s.n_grid.begin(), s.n_grid.end());
    const ExperimentReport r = consistency_experiment(cfg, grid, s.replications);
    result = detail::report_json(r);
    result["population_v"] = detail::matrix_json(v);
  } else if (s.command == "verify-identities") {
    const IdentityReport r = run_identity_suite(s.seed);
    json cases = json::array();
    for (const auto& c : r.cases) {
      cases.push_back(json{{"p", c.p},
                           {"h", c.h},
                           {"closed_vs_blockwise", c.closed_vs_blockwise},
                           {"homoscedastic_gap", c.homoscedastic_gap},
                           {"omega_term_homoscedastic", c.omega_term_homoscedastic},
                           {"selector_gap", c.selector_gap},
                           {"lambda_pd", c.lambda_pd},
                           {"closed_form_pd", c.closed_form_pd}});
    }
    result["tolerance"] = r.tolerance;
    result["max_closed_vs_blockwise"] = r.max_closed_vs_blockwise();
    result["max_homoscedastic_gap"] = r.max_homoscedastic_gap();
    result["max_selector_gap"] = r.max_selector_gap();
    result["passed"] = r.passed();
    result["cases"] = std::move(cases);
    if (!r.passed()) exit_code = kExitNumericalError;
  }

  if (s.timings) {
    diagnostics["timings"] = json{
        {"total_seconds", std::chrono::duration<double>(clock::now() - start).count()},
        {"worker_threads", worker_threads()}};
  }
  json doc;
  doc["command"] = s.command;
  doc["config_echo"] = detail::config_echo(s);
  doc["result"] = std::move(result);
  doc["diagnostics"] = std::move(diagnostics);
  return doc;
}

inline Outcome run(const std::vector<std::string>& args) {
  RunSpec s;
  CLI::App app{"parsimax: max test for many zero restrictions via parsimonious regressions", "parsimax"};
  app.set_config("--config", "", "INI/TOML file with option values (sections per command)");
  app.require_subcommand(1);
  app.fallthrough();
  // --h is the key-regressor count, so help is long-form only.
  app.set_help_flag("--help", "Print this help message and exit");

  auto add_common = [&](CLI::App* c, bool sampling) {
    c->set_help_flag("--help", "Print this help message and exit");
    c->add_option("--seed", s.seed, "Master seed")->capture_default_str();
    c->add_flag("--timings", s.timings, "Include wall-clock timings in diagnostics");
    c->add_option("--output", s.output_path, "Write the JSON document to this file instead of stdout");
    if (!sampling) return;
    c->add_option("--draws", s.draws, "Monte Carlo draws M for the simulated p-value")->capture_default_str();
    c->add_option("--estimator", s.estimator, "restricted_closed_form | ghm_blockwise")->capture_default_str();
    c->add_option("--sampler", s.sampler, "cholesky_then_eigen | eigen_only")->capture_default_str();
    c->add_option("--alpha", s.alpha, "Nominal level")->capture_default_str();
    c->add_flag("--plus-one", s.plus_one, "Use (1 + #exceed) / (M + 1)");
  };
  auto add_dgp = [&](CLI::App* c) {
    c->add_option("--n", s.n, "Sample size")->capture_default_str();
    c->add_option("--p", s.p, "Protected regressors, constant included")->capture_default_str();
    c->add_option("--h", s.h, "Key regressors")->capture_default_str();
    c->add_option("--regressors", s.regressors, "iid | ar1")->capture_default_str();
    c->add_option("--rho", s.rho, "Cross-regressor correlation")->capture_default_str();
    c->add_option("--phi", s.phi, "AR(1) coefficient over time")->capture_default_str();
    c->add_option("--errors", s.errors, "homoscedastic | heteroscedastic")->capture_default_str();
    c->add_option("--sigma", s.sigma, "Homoscedastic error scale")->capture_default_str();
    c->add_option("--hetero-intercept", s.hetero_intercept, "Variance intercept")->capture_default_str();
    c->add_option("--hetero-coef", s.hetero_coef, "Variance loadings on x_i^2")->delimiter(',');
    c->add_option("--a", s.a, "Coefficients on Z")->delimiter(',');
    c->add_option("--b", s.b, "Coefficients on X")->delimiter(',');
    c->add_option("--reps", s.replications, "Replications")->capture_default_str();
  };

  auto* test = app.add_subcommand("test", "Run the max test on a CSV file");
  add_common(test, true);
  test->add_option("--input", s.input_path, "CSV file with a header row")->required();
  test->add_option("--y", s.y_column, "Response column")->required();
  test->add_option("--z", s.z_columns, "Protected regressor columns")->delimiter(',')->required();
  test->add_option("--x", s.x_columns, "Key regressor columns")->delimiter(',')->required();

  for (const char* name : {"size", "power"}) {
    auto* c = app.add_subcommand(name, std::string(name) + " experiment for the max test");
    add_common(c, true);
    add_dgp(c);
    c->add_flag("--wald", s.wald, "Also record the robust Wald baseline");
  }
  auto* census = app.add_subcommand("census", "Count non-positive-definite covariance estimates");
  add_common(census, false);
  add_dgp(census);

  auto* consistency = app.add_subcommand("consistency", "Distance of the estimators to the exact V");
  add_common(consistency, false);
  consistency->add_option("--p", s.p, "Protected regressors")->capture_default_str();
  consistency->add_option("--h", s.h, "Key regressors")->capture_default_str();
  consistency->add_option("--n-grid", s.n_grid, "Sample sizes")->delimiter(',');
  consistency->add_option("--reps", s.replications, "Replications per sample size")->capture_default_str();
  consistency->add_option("--atoms", s.atoms, "Population atoms (0 = 4(p+h)+8)")->capture_default_str();
  consistency->add_flag("--homoscedastic-population", s.homoscedastic_population, "sigma2 = 1 at every atom");

  auto* verify = app.add_subcommand("verify-identities", "Check the covariance identities on built-in populations");
  add_common(verify, false);

  Outcome outcome;
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream out, err;
    const int code = app.exit(e, out, err);
    outcome.out = out.str();
    if (code == 0) {
      outcome.exit_code = kExitOk;
      outcome.err = err.str();
    } else {
      outcome.exit_code = kExitDataError;
      outcome.err = detail::error_json("UsageError", e.what());
    }
    return outcome;
  }
  s.command = app.get_subcommands().front()->get_name();

  try {
    detail::validate(s);
    int code = kExitOk;
    const json doc = execute(s, code);
    const std::string text = doc.dump(2) + "\n";
    if (!s.output_path.empty()) {
      std::ofstream f(s.output_path, std::ios::binary);
      if (!f) throw Error(ErrorKind::file_not_found, "cannot write '" + s.output_path + "'");
      f << text;
    } else {
      outcome.out = text;
    }
    outcome.exit_code = code;
  } catch (const Error& e) {
    outcome.exit_code = detail::exit_code_for(e.kind());
    outcome.err = detail::error_json(to_string(e.kind()), e.what());
  } catch (const std::exception& e) {
    outcome.exit_code = kExitNumericalError;
    outcome.err = detail::error_json("InternalError", e.what());
  }
  return outcome;
}

}  // namespace parsimax::cli

#endif  // PARSIMAX_CLI_HPP
