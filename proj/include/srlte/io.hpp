#pragma once

// CSV ingestion and JSON/CSV serialization of fits, estimates, MSEM
// reports, verdicts, tuning diagnostics and simulation reports.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "srlte/analysis.hpp"
#include "srlte/errors.hpp"
#include "srlte/estimators.hpp"
#include "srlte/model.hpp"
#include "srlte/simulation.hpp"
#include "srlte/tuning.hpp"

namespace srlte::io {

using json = nlohmann::ordered_json;

inline constexpr std::string_view kVersion = "1.0.0";

// ---------------------------------------------------------------- CSV input

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_of_row;  // 1-based source line of each row
};

// RFC-4180: quoted fields, doubled quotes, CRLF or LF line endings.
inline CsvTable parse_csv(std::string_view text, const std::string& source = "<csv>") {
  CsvTable table;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t line = 1;
  std::size_t record_line = 1;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = record.size() == 1 && record[0].empty();
    if (!blank) {
      if (table.header.empty()) {
        table.header = std::move(record);
      } else {
        if (record.size() != table.header.size())
          throw InputError("parse", source + ":" + std::to_string(record_line) + ": expected " +
                                        std::to_string(table.header.size()) + " fields, got " +
                                        std::to_string(record.size()));
        table.rows.push_back(std::move(record));
        table.line_of_row.push_back(record_line);
      }
    }
    record.clear();
    record_line = line;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started)
          throw InputError("parse", source + ":" + std::to_string(line) +
                                        ": quote inside an unquoted field");
        quoted = true;
        field_started = true;
        break;
      case ',': end_field(); break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        ++line;
        end_record();
        break;
      case '\n':
        ++line;
        end_record();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (quoted) throw InputError("parse", source + ": unterminated quoted field");
  if (!field.empty() || !record.empty()) end_record();
  if (table.header.empty()) throw InputError("parse", source + ": missing header row");
  return table;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("io", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline double parse_number(std::string_view s, const std::string& where) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
    throw InputError("parse", where + ": '" + std::string(s) + "' is not a finite number");
  return v;
}

struct LoadedData {
  Dataset data;
  std::vector<std::string> predictor_names;
};

// Response column `response`; every other column is a predictor. The
// intercept column is added here.
inline LoadedData dataset_from_csv(std::string_view text, const std::string& response,
                                   const std::string& source = "<csv>") {
  const CsvTable table = parse_csv(text, source);
  std::optional<std::size_t> ycol;
  std::vector<std::size_t> xcols;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (table.header[j] == response) {
      ycol = j;
    } else {
      xcols.push_back(j);
      names.push_back(table.header[j]);
    }
  }
  if (!ycol) throw InputError("parse", source + ":1: no response column named '" + response + "'");
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  Mat predictors(n, static_cast<Eigen::Index>(xcols.size()));
  Vec y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    const std::string where = source + ":" + std::to_string(table.line_of_row[static_cast<std::size_t>(i)]);
    y[i] = parse_number(row[*ycol], where);
    if (y[i] != 0.0 && y[i] != 1.0)
      throw InputError("parse", where + ": response must be 0 or 1");
    for (std::size_t j = 0; j < xcols.size(); ++j)
      predictors(i, static_cast<Eigen::Index>(j)) = parse_number(row[xcols[j]], where);
  }
  return {Dataset::from_predictors(predictors, std::move(y)), std::move(names)};
}

inline LoadedData load_dataset(const std::string& path, const std::string& response) {
  return dataset_from_csv(read_file(path), response, path);
}

// --------------------------------------------------------------- JSON basics

inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const Vec& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(number(v[i]));
  return arr;
}

// Row-major nested arrays.
inline json to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Vec(m.row(i).transpose())));
  return rows;
}

inline Vec vec_from_json(const json& j, const std::string& key) {
  if (!j.is_array()) throw InputError("parse", "key '" + key + "' must be an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw InputError("parse", "key '" + key + "' entry " + std::to_string(i) + " is not a number");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline Mat mat_from_json(const json& j, const std::string& key) {
  if (!j.is_array()) throw InputError("parse", "key '" + key + "' must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = -1;
  Mat m;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Vec row = vec_from_json(j[i], key);
    if (cols < 0) {
      cols = row.size();
      m.resize(rows, cols);
    } else if (row.size() != cols) {
      throw InputError("parse", "key '" + key + "' has ragged rows");
    }
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  if (cols < 0) m.resize(0, 0);
  return m;
}

inline json parse_json(std::string_view text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError("parse", source + ": invalid JSON: " + e.what());
  }
}

// {"H": [[...]], "h": [...], "Psi": [[...]]}
inline RestrictionSpec restriction_from_json(const json& j, Eigen::Index dim,
                                             const std::string& source = "<restriction>") {
  if (!j.is_object()) throw InputError("parse", source + ": restriction must be a JSON object");
  for (const char* key : {"H", "h", "Psi"})
    if (!j.contains(key)) throw InputError("parse", source + ": missing key '" + key + "'");
  Mat h_matrix = mat_from_json(j.at("H"), "H");
  if (h_matrix.rows() == 0) h_matrix.resize(0, dim);
  if (h_matrix.cols() != dim)
    throw InputError("parse", source + ": key 'H' must have " + std::to_string(dim) +
                                  " columns (intercept + predictors)");
  const Vec h = vec_from_json(j.at("h"), "h");
  const Mat psi = mat_from_json(j.at("Psi"), "Psi");
  if (h.size() != h_matrix.rows())
    throw InputError("parse", source + ": key 'h' must have one entry per row of H");
  if (psi.rows() != h_matrix.rows() || psi.cols() != h_matrix.rows())
    throw InputError("parse", source + ": key 'Psi' must be q x q with q = rows of H");
  try {
    return RestrictionSpec(h_matrix, h, psi);
  } catch (const InputError& e) {
    const std::string msg = e.what();
    const std::string key = msg.find("Psi") != std::string::npos ? "Psi" : "H";
    throw InputError("parse", source + ": key '" + key + "': " + msg);
  }
}

inline RestrictionSpec load_restriction(const std::string& path, Eigen::Index dim) {
  return restriction_from_json(parse_json(read_file(path), path), dim, path);
}

inline json to_json(const RestrictionSpec& r) {
  return json{{"H", to_json(r.h_matrix())}, {"h", to_json(r.h())}, {"Psi", to_json(r.psi())}};
}

inline json error_record(const Error& e) {
  return json{{"error", {{"code", e.code()}, {"message", e.what()}}}};
}

// ------------------------------------------------------------ model / tuning

inline json fit_report(const MleFit& fit, const std::vector<std::string>& predictor_names = {}) {
  json names = json::array({"(intercept)"});
  for (const auto& n : predictor_names) names.push_back(n);
  const Vec ev = linalg::sym_eigenvalues(fit.info).reverse();
  return json{{"coefficients", to_json(fit.beta)},
              {"names", names},
              {"converged", fit.converged},
              {"iterations", fit.iterations},
              {"log_likelihood", number(fit.log_likelihood)},
              {"condition_number", number(ev[0] / ev[ev.size() - 1])},
              {"eigenvalues", to_json(ev)}};
}

inline json to_json(const EstimatorParams& p) { return json{{"k", number(p.k)}, {"d", number(p.d)}}; }

inline json tuning_report(const SpectralContext& ctx, const TunedParams& tuned) {
  json per_index = json::array();
  for (Eigen::Index i = 0; i < ctx.lambda.size(); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const bool skipped = std::find(tuned.k_selection.skipped.begin(),
                                   tuned.k_selection.skipped.end(), i) != tuned.k_selection.skipped.end();
    per_index.push_back(json{{"index", i},
                             {"lambda", number(ctx.lambda[i])},
                             {"alpha", number(ctx.alpha[i])},
                             {"b", number(ctx.b_diag[i])},
                             {"d_bound", number(tuned.d_selection.bounds[i])},
                             {"k_i", number(tuned.k_selection.k_values[idx])},
                             {"skipped", skipped}});
  }
  return json{{"k", number(tuned.params.k)},
              {"d", number(tuned.params.d)},
              {"d_index", tuned.d_selection.index},
              {"k_index", tuned.k_selection.index ? json(*tuned.k_selection.index) : json(nullptr)},
              {"k_fallback", tuned.k_selection.fallback},
              {"offdiag_energy_ratio", number(ctx.offdiag_energy_ratio)},
              {"per_index", per_index}};
}

inline json to_json(const EstimateResult& r) {
  json out{{"estimator", std::string(to_string(r.kind))}, {"coefficients", to_json(r.beta)}};
  if (r.params) {
    if (r.kind == EstimatorKind::LE || r.kind == EstimatorKind::SRLE)
      out["d"] = number(r.params->d);
    else
      out["k"] = number(r.params->k), out["d"] = number(r.params->d);
  }
  return out;
}

inline json to_json(const MsemReport& r) {
  return json{{"estimator", std::string(to_string(r.kind))},
              {"bias", to_json(r.bias)},
              {"cov", to_json(r.cov)},
              {"msem", to_json(r.msem)},
              {"smse", number(r.smse)}};
}

inline json to_json(const ComparisonVerdict& v) {
  auto opt_num = [](const std::optional<double>& x) { return x ? number(*x) : json(nullptr); };
  auto opt_bool = [](const std::optional<bool>& x) { return x ? json(*x) : json(nullptr); };
  return json{{"theorem", std::string(to_string(v.theorem))},
              {"pair", {"SRLTE", std::string(to_string(v.other))}},
              {"eigencondition_value", opt_num(v.eigencondition_value)},
              {"eigencondition_holds", opt_bool(v.eigencondition_holds)},
              {"quadform_value", opt_num(v.quadform_value)},
              {"quadform_holds", opt_bool(v.quadform_holds)},
              {"delta_psd", v.delta_psd},
              {"delta_min_eigenvalue", number(v.delta_min_eigenvalue)},
              {"delta_norm", number(v.delta_norm)},
              {"tie", v.tie}};
}

// ----------------------------------------------------------------- simulation

inline std::string_view to_string(BetaScheme s) {
  switch (s) {
    case BetaScheme::UniformNormalized: return "uniform-normalized";
    case BetaScheme::OnesNormalized: return "ones-normalized";
    case BetaScheme::UserSupplied: return "user";
  }
  return "?";
}

inline BetaScheme parse_beta_scheme(std::string_view s) {
  for (auto scheme : {BetaScheme::UniformNormalized, BetaScheme::OnesNormalized,
                      BetaScheme::UserSupplied})
    if (to_string(scheme) == s) return scheme;
  throw InputError("parse", "unknown beta_scheme '" + std::string(s) + "'");
}

inline std::string_view to_string(KRule r) { return r == KRule::Stationary ? "stationary" : "printed"; }

inline json to_json(const SimulationConfig& c) {
  json overrides = json::object();
  for (const auto& [kind, ov] : c.overrides) {
    json o = json::object();
    if (ov.k) o["k"] = *ov.k;
    if (ov.d) o["d"] = *ov.d;
    overrides[std::string(to_string(kind))] = o;
  }
  json estimators = json::array();
  for (auto k : c.estimators) estimators.push_back(std::string(to_string(k)));
  const auto tmpl = c.restriction_template();
  json out{{"n_values", c.n_values},
           {"p", c.p},
           {"rho_values", c.rho_values},
           {"reps", c.reps},
           {"seed", c.seed},
           {"beta_scheme", std::string(to_string(c.beta_scheme))},
           {"estimators", estimators},
           {"overrides", overrides},
           {"fix_design_per_cell", c.fix_design_per_cell},
           {"k_rule", std::string(to_string(c.k_rule))},
           {"restriction", {{"H", to_json(tmpl.h_matrix)}, {"Psi", to_json(tmpl.psi)}}},
           {"fit", {{"tol", c.fit.tol}, {"max_iter", c.fit.max_iter}}}};
  if (c.user_beta) out["beta"] = to_json(*c.user_beta);
  return out;
}

// Keys absent from `j` keep the values already in `base`.
inline SimulationConfig config_from_json(const json& j, SimulationConfig base = {}) {
  if (!j.is_object()) throw InputError("parse", "simulation config must be a JSON object");
  try {
    if (j.contains("n_values")) {
      base.n_values.clear();
      for (const auto& v : j.at("n_values")) base.n_values.push_back(v.get<Eigen::Index>());
    }
    if (j.contains("p")) base.p = j.at("p").get<Eigen::Index>();
    if (j.contains("rho_values")) base.rho_values = j.at("rho_values").get<std::vector<double>>();
    if (j.contains("reps")) base.reps = j.at("reps").get<int>();
    if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("beta_scheme")) base.beta_scheme = parse_beta_scheme(j.at("beta_scheme").get<std::string>());
    if (j.contains("beta")) {
      base.user_beta = vec_from_json(j.at("beta"), "beta");
      if (!j.contains("beta_scheme")) base.beta_scheme = BetaScheme::UserSupplied;
    }
    if (j.contains("estimators")) {
      base.estimators.clear();
      for (const auto& e : j.at("estimators")) base.estimators.push_back(parse_estimator(e.get<std::string>()));
    }
    if (j.contains("overrides")) {
      base.overrides.clear();
      for (const auto& [name, o] : j.at("overrides").items()) {
        ParamOverrides ov;
        if (o.contains("k")) ov.k = o.at("k").get<double>();
        if (o.contains("d")) ov.d = o.at("d").get<double>();
        base.overrides[parse_estimator(name)] = ov;
      }
    }
    if (j.contains("fix_design_per_cell")) base.fix_design_per_cell = j.at("fix_design_per_cell").get<bool>();
    if (j.contains("threads")) base.threads = j.at("threads").get<int>();
    if (j.contains("k_rule")) {
      const auto r = j.at("k_rule").get<std::string>();
      if (r == "stationary") base.k_rule = KRule::Stationary;
      else if (r == "printed") base.k_rule = KRule::Printed;
      else throw InputError("parse", "unknown k_rule '" + r + "'");
    }
    if (j.contains("restriction")) {
      const auto& r = j.at("restriction");
      base.restriction = RestrictionTemplate{mat_from_json(r.at("H"), "restriction.H"),
                                             mat_from_json(r.at("Psi"), "restriction.Psi")};
    }
    if (j.contains("fit")) {
      const auto& f = j.at("fit");
      if (f.contains("tol")) base.fit.tol = f.at("tol").get<double>();
      if (f.contains("max_iter")) base.fit.max_iter = f.at("max_iter").get<int>();
    }
  } catch (const json::exception& e) {
    throw InputError("parse", std::string("simulation config: ") + e.what());
  }
  return base;
}

inline json to_json(const CellReport& c) {
  json est = json::object();
  for (const auto& e : c.estimators) {
    json s{{"mse", c.failed ? json(nullptr) : number(e.mse)},
           {"pmse", c.failed ? json(nullptr) : number(e.pmse)},
           {"pmse_true", c.failed ? json(nullptr) : number(e.pmse_true)}};
    if (e.mean_params) s["mean_params"] = to_json(*e.mean_params);
    est[std::string(to_string(e.kind))] = s;
  }
  return json{{"n", c.n},         {"rho", c.rho},           {"successes", c.successes},
              {"failures", c.failures}, {"failed", c.failed}, {"beta_true", to_json(c.beta_true)},
              {"estimators", est}};
}

inline CellReport cell_from_json(const json& j) {
  CellReport c;
  c.n = j.at("n").get<Eigen::Index>();
  c.rho = j.at("rho").get<double>();
  c.successes = j.at("successes").get<int>();
  c.failures = j.at("failures").get<int>();
  c.failed = j.at("failed").get<bool>();
  c.beta_true = vec_from_json(j.at("beta_true"), "beta_true");
  for (const auto& [name, s] : j.at("estimators").items()) {
    EstimatorSummary e;
    e.kind = parse_estimator(name);
    if (!c.failed) {
      e.mse = s.at("mse").get<double>();
      e.pmse = s.at("pmse").get<double>();
      e.pmse_true = s.at("pmse_true").get<double>();
    }
    if (s.contains("mean_params"))
      e.mean_params = EstimatorParams{s.at("mean_params").at("k").get<double>(),
                                      s.at("mean_params").at("d").get<double>()};
    c.estimators.push_back(e);
  }
  return c;
}

inline json to_json(const SimulationReport& r) {
  json cells = json::array();
  for (const auto& c : r.cells) cells.push_back(to_json(c));
  return json{{"metadata",
               {{"software", "srlte"},
                {"version", std::string(kVersion)},
                {"seed", r.config.seed},
                {"average_divisor", "successful replications"},
                {"pmse", "sum_i pi_i(1-pi_i) + sum_i (pi~_i - pi_i)^2 (expected error "
                         "against a fresh response); pmse_true omits the first term"},
                {"config", to_json(r.config)}}},
              {"cells", cells}};
}

// 17 significant digits: doubles round-trip exactly.
inline std::string format_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

enum class Metric { Mse, Pmse };

// One row per (rho, n) cell, one column per estimator.
inline std::string table_csv(const SimulationReport& r, Metric metric) {
  std::string out = "rho,n";
  for (auto k : r.config.estimators) out += "," + std::string(to_string(k));
  out += "\r\n";
  for (const auto& c : r.cells) {
    out += format_g17(c.rho) + "," + std::to_string(c.n);
    for (const auto& e : c.estimators) {
      out += ",";
      if (!c.failed) out += format_g17(metric == Metric::Mse ? e.mse : e.pmse);
    }
    out += "\r\n";
  }
  return out;
}

// Aligned, 5 decimals, rho block headers.
inline std::string table_text(const SimulationReport& r, Metric metric) {
  std::string out;
  char buf[64];
  std::string head;
  std::snprintf(buf, sizeof buf, "%6s", "n");
  head += buf;
  for (auto k : r.config.estimators) {
    std::snprintf(buf, sizeof buf, " %12s", std::string(to_string(k)).c_str());
    head += buf;
  }
  out += (metric == Metric::Mse ? "Simulated MSE\n" : "Simulated PMSE\n") + head + "\n";
  std::optional<double> block;
  for (const auto& c : r.cells) {
    if (!block || *block != c.rho) {
      out += "  rho = " + format_g17(c.rho) + "\n";
      block = c.rho;
    }
    std::snprintf(buf, sizeof buf, "%6ld", static_cast<long>(c.n));
    out += buf;
    for (const auto& e : c.estimators) {
      if (c.failed)
        std::snprintf(buf, sizeof buf, " %12s", "failed");
      else
        std::snprintf(buf, sizeof buf, " %12.5f", metric == Metric::Mse ? e.mse : e.pmse);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace srlte::io
