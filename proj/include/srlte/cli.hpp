#pragma once

// `srlte` command line: fit, estimate, compare, tune, simulate.
//
// Exit codes: 0 success, 1 input/IO error, 2 numerical failure, 3 partial
// simulation (some cells failed).

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "srlte/analysis.hpp"
#include "srlte/errors.hpp"
#include "srlte/estimators.hpp"
#include "srlte/io.hpp"
#include "srlte/model.hpp"
#include "srlte/simulation.hpp"
#include "srlte/tuning.hpp"

namespace srlte::cli {

enum ExitCode : int { kOk = 0, kInputError = 1, kNumericalError = 2, kPartial = 3 };

inline constexpr const char* kThreadsEnv = "SRLTE_THREADS";

struct CommonArgs {
  std::string data;
  std::string response = "y";
  std::string restriction;
  std::string out;
  std::string format = "json";
  std::optional<double> k;
  std::optional<double> d;
};

struct SimulateArgs {
  std::string config;
  std::vector<long> n;
  std::vector<double> rho;
  std::optional<int> reps;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::vector<std::string> estimators;
  std::string out = ".";
  std::string format = "text";
  bool resume = false;
  bool fix_design = false;
};

namespace detail {

inline void write_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("io", "cannot write " + path);
  f << text;
}

inline std::string dump(const io::json& j) { return j.dump(2) + "\n"; }

inline int default_threads() {
  if (const char* env = std::getenv(kThreadsEnv)) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  return 1;
}

struct Prepared {
  io::LoadedData loaded;
  MleFit fit;
  std::optional<RestrictionSpec> restriction;
};

inline Prepared prepare(const CommonArgs& a, bool need_restriction) {
  auto loaded = io::load_dataset(a.data, a.response);
  std::optional<RestrictionSpec> r;
  const auto dim = loaded.data.p() + 1;
  if (!a.restriction.empty()) r = io::load_restriction(a.restriction, dim);
  if (need_restriction && !r)
    throw InputError("a restriction file (--restriction) is required for restricted estimators");
  MleFit fit = fit_mle(loaded.data);
  if (!fit.converged)
    throw NumericalError("not-converged", "IRLS did not converge in " +
                                              std::to_string(fit.iterations) + " iterations");
  return {std::move(loaded), std::move(fit), std::move(r)};
}

// SRLTE parameters: tuned, with either value replaceable by an override.
inline EstimatorParams srlte_params(const CommonArgs& a, const SpectralContext& ctx) {
  const double d = a.d.value_or(select_d(ctx).d);
  const double k = a.k.value_or(select_k(ctx, d).k);
  return {k, d};
}

inline Vec parse_vector(const std::string& text, const std::string& flag) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) vals.push_back(io::parse_number(item, flag));
  return Eigen::Map<Vec>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

inline std::string fit_text(const io::json& j) {
  std::ostringstream os;
  os << "converged: " << (j["converged"].get<bool>() ? "yes" : "no")
     << "  iterations: " << j["iterations"] << "\n";
  os << "condition number of X'WX: " << j["condition_number"] << "\n";
  for (std::size_t i = 0; i < j["coefficients"].size(); ++i) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-16s %14.8f\n", j["names"][i].get<std::string>().c_str(),
                  j["coefficients"][i].get<double>());
    os << buf;
  }
  return os.str();
}

// ------------------------------------------------------------------ commands

inline int cmd_fit(const CommonArgs& a, std::ostream& out) {
  auto loaded = io::load_dataset(a.data, a.response);
  const MleFit fit = fit_mle(loaded.data);
  const auto report = io::fit_report(fit, loaded.predictor_names);
  if (!fit.converged)
    throw NumericalError("not-converged", "IRLS did not converge in " +
                                              std::to_string(fit.iterations) + " iterations");
  write_output(a.out, a.format == "text" ? fit_text(report) : dump(report), out);
  return kOk;
}

inline int cmd_estimate(const CommonArgs& a, const std::vector<std::string>& names,
                        std::ostream& out) {
  std::vector<EstimatorKind> kinds;
  for (const auto& n : names) {
    if (n == "all") {
      kinds.assign(kAllEstimators.begin(), kAllEstimators.end());
      break;
    }
    kinds.push_back(parse_estimator(n));
  }
  bool need_r = false;
  for (auto k : kinds) need_r = need_r || uses_restriction(k);
  if (need_r && a.restriction.empty())
    throw InputError("estimators SRE, SRLE and SRLTE need --restriction");
  const auto prep = prepare(a, need_r);

  io::json estimates = io::json::array();
  io::json tuning = nullptr;
  for (auto kind : kinds) {
    std::optional<EstimatorParams> params;
    std::string source;
    if (kind == EstimatorKind::SRLTE) {
      const auto ctx = spectral_context(prep.fit, prep.restriction);
      const auto tuned = select_params(ctx);
      tuning = io::tuning_report(ctx, tuned);
      params = srlte_params(a, ctx);
      source = (a.k && a.d) ? "override" : (a.k || a.d) ? "partial-override" : "tuned";
    } else if (uses_params(kind)) {
      params = default_params_for(kind, prep.fit, {a.k, a.d});
      source = (a.k || a.d) ? "override" : "default";
    }
    auto est = estimate(kind, prep.fit, prep.restriction, params);
    auto j = io::to_json(est);
    if (!source.empty()) j["params_source"] = source;
    if (kind == EstimatorKind::SRLTE) j["tuning"] = tuning;
    estimates.push_back(j);
  }
  io::json report{{"estimates", estimates},
                  {"mle", {{"converged", prep.fit.converged}, {"iterations", prep.fit.iterations}}}};
  write_output(a.out, dump(report), out);
  return kOk;
}

inline int cmd_compare(const CommonArgs& a, const std::string& beta_true_text,
                       std::ostream& out) {
  const auto prep = prepare(a, true);
  const bool plug_in = beta_true_text.empty();
  const Vec beta_true = plug_in ? prep.fit.beta : parse_vector(beta_true_text, "--beta-true");
  if (beta_true.size() != prep.fit.dim())
    throw InputError("--beta-true needs " + std::to_string(prep.fit.dim()) +
                     " entries (intercept first)");
  const auto ctx = spectral_context(prep.fit, prep.restriction);
  const EstimatorParams sp = srlte_params(a, ctx);
  const EstimatorParams liu_p = default_params_for(EstimatorKind::LE, prep.fit);
  io::json verdicts = io::json::array();
  for (auto t : {Theorem::T1, Theorem::T2, Theorem::T3, Theorem::T4})
    verdicts.push_back(io::to_json(compare(t, prep.fit, *prep.restriction, sp, liu_p, beta_true)));
  io::json report{{"plug_in_beta", plug_in},
                  {"beta_true", io::to_json(beta_true)},
                  {"srlte_params", io::to_json(sp)},
                  {"liu_d", io::number(liu_p.d)},
                  {"verdicts", verdicts}};
  write_output(a.out, dump(report), out);
  return kOk;
}

inline int cmd_tune(const CommonArgs& a, std::ostream& out) {
  const auto prep = prepare(a, false);
  const auto ctx = spectral_context(prep.fit, prep.restriction);
  const auto tuned = select_params(ctx);
  auto report = io::tuning_report(ctx, tuned);
  report["smse_selected"] = io::number(smse_spectral(ctx, tuned.params.k, tuned.params.d));
  report["smse_sre"] = io::number(ctx.b_diag.sum());
  io::json sweep = io::json::array();
  for (int i = 0; i <= 24; ++i) {
    const double k = std::pow(10.0, -3.0 + 0.25 * i);
    sweep.push_back({{"k", k}, {"smse", io::number(smse_spectral(ctx, k, tuned.params.d))}});
  }
  report["sweep_at_selected_d"] = sweep;
  if (a.format == "text") {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof buf, "k = %.10g\nd = %.10g\noff-diagonal energy ratio = %.6g\n",
                  tuned.params.k, tuned.params.d, ctx.offdiag_energy_ratio);
    os << buf;
    std::snprintf(buf, sizeof buf, "%5s %14s %14s %14s %14s %14s\n", "i", "lambda", "alpha", "b",
                  "d_bound", "k_i");
    os << buf;
    for (Eigen::Index i = 0; i < ctx.lambda.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%5ld %14.6g %14.6g %14.6g %14.6g %14.6g\n",
                    static_cast<long>(i), ctx.lambda[i], ctx.alpha[i], ctx.b_diag[i],
                    tuned.d_selection.bounds[i],
                    tuned.k_selection.k_values[static_cast<std::size_t>(i)]);
      os << buf;
    }
    write_output(a.out, os.str(), out);
  } else {
    write_output(a.out, dump(report), out);
  }
  return kOk;
}

inline SimulationConfig simulation_config(const SimulateArgs& a) {
  SimulationConfig cfg;
  cfg.threads = default_threads();
  if (!a.config.empty()) cfg = io::config_from_json(io::parse_json(io::read_file(a.config), a.config), cfg);
  if (!a.n.empty()) cfg.n_values.assign(a.n.begin(), a.n.end());
  if (!a.rho.empty()) cfg.rho_values = a.rho;
  if (a.reps) cfg.reps = *a.reps;
  if (a.seed) cfg.seed = *a.seed;
  if (a.threads) cfg.threads = *a.threads;
  if (a.fix_design) cfg.fix_design_per_cell = true;
  if (!a.estimators.empty()) {
    cfg.estimators.clear();
    for (const auto& e : a.estimators) {
      if (e == "all") {
        cfg.estimators.assign(kAllEstimators.begin(), kAllEstimators.end());
        break;
      }
      cfg.estimators.push_back(parse_estimator(e));
    }
  }
  cfg.validate();
  return cfg;
}

inline int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  const SimulationConfig cfg = simulation_config(a);
  namespace fs = std::filesystem;
  const fs::path dir(a.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("io", "cannot create output directory " + a.out);
  const fs::path progress = dir / "progress.json";

  std::vector<CellReport> done;
  if (a.resume && fs::exists(progress)) {
    const auto j = io::parse_json(io::read_file(progress.string()), progress.string());
    if (j.at("config") != io::to_json(cfg))
      throw InputError("--resume: " + progress.string() + " was written with a different configuration");
    for (const auto& c : j.at("cells")) done.push_back(io::cell_from_json(c));
  }

  io::json partial{{"config", io::to_json(cfg)}, {"cells", io::json::array()}};
  for (const auto& c : done) partial["cells"].push_back(io::to_json(c));
  const auto on_cell = [&](const CellReport& c, std::size_t i, std::size_t total) {
    const bool reused = std::any_of(done.begin(), done.end(), [&](const CellReport& d) {
      return d.n == c.n && d.rho == c.rho;
    });
    if (!reused) {
      partial["cells"].push_back(io::to_json(c));
      write_output(progress.string(), dump(partial), out);
    }
    err << "cell " << i << "/" << total << ": n=" << c.n << " rho=" << io::format_g17(c.rho)
        << (reused ? " (resumed)" : "") << " successes=" << c.successes
        << " failures=" << c.failures << (c.failed ? " FAILED" : "") << "\n";
  };
  const SimulationReport report = run_simulation(cfg, done, on_cell);

  write_output((dir / "mse.csv").string(), io::table_csv(report, io::Metric::Mse), out);
  write_output((dir / "pmse.csv").string(), io::table_csv(report, io::Metric::Pmse), out);
  write_output((dir / "report.json").string(), dump(io::to_json(report)), out);
  fs::remove(progress, ec);

  if (a.format == "text") {
    out << io::table_text(report, io::Metric::Mse) << "\n" << io::table_text(report, io::Metric::Pmse);
  } else if (a.format == "csv") {
    out << io::table_csv(report, io::Metric::Mse);
  } else {
    out << dump(io::to_json(report));
  }
  return report.any_failed() ? kPartial : kOk;
}

}  // namespace detail

// Entry point shared by the `srlte` binary and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Stochastic restricted Liu-type logistic regression"};
  app.require_subcommand(1);

  CommonArgs common;
  std::vector<std::string> estimator_names{"srlte"};
  std::string beta_true;
  SimulateArgs sim;

  auto add_data = [&](CLI::App* sub, bool restriction) {
    sub->add_option("--data", common.data, "CSV file with header row")->required();
    sub->add_option("--response", common.response, "name of the 0/1 response column");
    if (restriction)
      sub->add_option("--restriction", common.restriction, "restriction JSON {H, h, Psi}");
    sub->add_option("--out", common.out, "output file (default stdout)");
    sub->add_option("--format", common.format, "json or text")
        ->check(CLI::IsMember({"json", "text"}));
  };
  auto add_params = [&](CLI::App* sub) {
    sub->add_option("--k", common.k, "override the biasing parameter k");
    sub->add_option("--d", common.d, "override the biasing parameter d");
  };

  auto* fit = app.add_subcommand("fit", "maximum likelihood fit by IRLS");
  add_data(fit, false);
  auto* est = app.add_subcommand("estimate", "compute estimator coefficients");
  add_data(est, true);
  add_params(est);
  est->add_option("--estimator", estimator_names, "mle|le|lte|sre|srle|srlte|all (repeatable)")
      ->take_all();
  auto* cmp = app.add_subcommand("compare", "MSEM superiority checks of SRLTE");
  add_data(cmp, true);
  add_params(cmp);
  cmp->add_option("--beta-true", beta_true, "comma-separated true coefficients (default: MLE)");
  auto* tune = app.add_subcommand("tune", "select (k, d) for SRLTE");
  add_data(tune, true);

  auto* simc = app.add_subcommand("simulate", "Monte Carlo comparison of the estimators");
  simc->add_option("--config", sim.config, "JSON configuration file");
  simc->add_option("--n", sim.n, "sample sizes")->delimiter(',');
  simc->add_option("--rho", sim.rho, "collinearity levels")->delimiter(',');
  simc->add_option("--reps", sim.reps, "replications per cell");
  simc->add_option("--seed", sim.seed, "master seed");
  simc->add_option("--threads", sim.threads,
                   std::string("worker threads (default $") + kThreadsEnv + " or 1)");
  simc->add_option("--estimator", sim.estimators, "subset of estimators")->delimiter(',');
  simc->add_option("--out", sim.out, "output directory");
  simc->add_option("--format", sim.format, "stdout summary: text, csv or json")
      ->check(CLI::IsMember({"text", "csv", "json"}));
  simc->add_flag("--resume", sim.resume, "reuse cells from an interrupted run");
  simc->add_flag("--fix-design", sim.fix_design, "draw X once per cell");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*fit) return detail::cmd_fit(common, out);
    if (*est) return detail::cmd_estimate(common, estimator_names, out);
    if (*cmp) return detail::cmd_compare(common, beta_true, out);
    if (*tune) return detail::cmd_tune(common, out);
    if (*simc) return detail::cmd_simulate(sim, out, err);
  } catch (const NumericalError& e) {
    out << detail::dump(io::error_record(e));
    err << "error (" << e.code() << "): " << e.what() << "\n";
    return kNumericalError;
  } catch (const Error& e) {
    err << "error (" << e.code() << "): " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace srlte::cli
