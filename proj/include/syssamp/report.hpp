#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "syssamp/error.hpp"
#include "syssamp/mc.hpp"
#include "syssamp/moments.hpp"
#include "syssamp/table.hpp"
#include "syssamp/theory.hpp"

namespace syssamp {

using Json = nlohmann::ordered_json;

// PRE values are reported to 4 decimals, MSEs to 6 significant digits.
inline double round_decimals(double v, int decimals) {
  if (!std::isfinite(v)) return v;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return std::strtod(buf, nullptr);
}

inline double round_significant(double v, int digits) {
  if (!std::isfinite(v)) return v;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*e", digits - 1, v);
  return std::strtod(buf, nullptr);
}

inline std::string fixed(double v, int decimals) {
  if (std::isnan(v)) return "NaN";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::string sig(double v, int digits = 6) {
  if (std::isnan(v)) return "NaN";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// nlohmann writes NaN as null; keep that explicit.
inline Json number_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

// ---------------------------------------------------------------------------
// Moments

inline Json to_json(const PopulationMoments& m) {
  Json j;
  j["N"] = m.N;
  j["n"] = m.n;
  j["k"] = m.k;
  j["mean_y"] = m.mean_y;
  j["mean_x"] = m.mean_x;
  j["s2_y"] = m.s2_y;
  j["s2_x"] = m.s2_x;
  j["rho"] = m.rho;
  j["rho_y_intra"] = m.rho_y_intra;
  j["rho_x_intra"] = m.rho_x_intra;
  j["s2_y2"] = m.s2_y2 ? Json(*m.s2_y2) : Json(nullptr);
  return j;
}

inline Json to_json(const DerivedCoefficients& d) {
  Json j;
  j["theta"] = d.theta;
  j["c_y"] = d.c_y;
  j["c_x"] = d.c_x;
  j["c0"] = d.c0;
  j["c1"] = d.c1;
  j["rho_star"] = number_or_null(d.rho_star);
  j["k1"] = d.k1;
  j["rho_c0_c1"] = d.cross;
  return j;
}

// Flat object whose keys mirror PopulationMoments. k may be omitted (derived
// from N/n); s2_y2 may be omitted or null; intraclass values are required by
// the time this is called (the CLI merges flag overrides first).
inline PopulationMoments moments_from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorCode::parse, "moments: expected a JSON object");
  static const char* known[] = {"N", "n", "k", "mean_y", "mean_x", "s2_y", "s2_x",
                                "rho", "rho_y_intra", "rho_x_intra", "s2_y2"};
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
        std::end(known)) {
      fail(ErrorCode::parse, "moments: unknown field '" + key + "'");
    }
  }
  auto count = [&](const char* key) -> std::size_t {
    if (!j.contains(key)) fail(ErrorCode::missing_value, std::string("moments: missing field '") + key + "'");
    const auto& v = j.at(key);
    if (!v.is_number()) fail(ErrorCode::parse, std::string("moments: field '") + key + "' must be a number");
    const double d = v.get<double>();
    if (!(d >= 0.0) || d != std::floor(d)) {
      fail(ErrorCode::parse, std::string("moments: field '") + key + "' must be a non-negative integer");
    }
    return static_cast<std::size_t>(d);
  };
  auto real = [&](const char* key) -> double {
    if (!j.contains(key) || j.at(key).is_null()) {
      std::string hint;
      if (std::string_view(key).find("intra") != std::string_view::npos) {
        hint = " (supply it in the file or with --rho-intra)";
      }
      fail(ErrorCode::missing_value, std::string("moments: missing field '") + key + "'" + hint);
    }
    const auto& v = j.at(key);
    if (!v.is_number()) fail(ErrorCode::parse, std::string("moments: field '") + key + "' must be a number");
    return v.get<double>();
  };
  PopulationMoments m;
  m.N = count("N");
  m.n = count("n");
  m.k = j.contains("k") ? count("k") : (m.n == 0 ? 0 : m.N / m.n);
  m.mean_y = real("mean_y");
  m.mean_x = real("mean_x");
  m.s2_y = real("s2_y");
  m.s2_x = real("s2_x");
  m.rho = real("rho");
  m.rho_y_intra = real("rho_y_intra");
  m.rho_x_intra = real("rho_x_intra");
  if (j.contains("s2_y2") && !j.at("s2_y2").is_null()) m.s2_y2 = real("s2_y2");
  m.validate();
  return m;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::parse, "'" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Estimator specs

inline Json to_json(const EstimatorSpec& s) {
  Json j;
  j["kind"] = std::string(to_string(s.kind));
  switch (s.kind) {
    case EstimatorKind::t1: j["alpha"] = s.alpha; break;
    case EstimatorKind::t2: j["a"] = s.a; j["b"] = s.b; j["p"] = s.p; break;
    case EstimatorKind::t3: j["w"] = s.w; break;
    case EstimatorKind::t4: j["alpha"] = s.alpha; break;
    case EstimatorKind::t5: j["a"] = s.a; j["b"] = s.b; j["p"] = s.p; break;
    case EstimatorKind::t6: j["w"] = s.w; break;
    default: break;
  }
  if (is_shrinkage(s.kind)) {
    j["k_main"] = s.k_main;
    j["k_aux"] = s.k_aux;
  }
  if (s.kind == EstimatorKind::regression) j["slope"] = "least squares over measured units";
  return j;
}

inline std::string describe(const EstimatorSpec& s) {
  std::ostringstream os;
  os << to_string(s.kind);
  auto add = [&](const char* name, double v, bool first) {
    os << (first ? "(" : ", ") << name << "=" << sig(v);
  };
  switch (s.kind) {
    case EstimatorKind::t1: add("alpha", s.alpha, true); os << ")"; break;
    case EstimatorKind::t2: add("a", s.a, true); add("b", s.b, false); add("p", s.p, false); os << ")"; break;
    case EstimatorKind::t3: add("w", s.w, true); os << ")"; break;
    case EstimatorKind::t4: add("alpha", s.alpha, true); add("K", s.k_main, false); add("K'", s.k_aux, false); os << ")"; break;
    case EstimatorKind::t5:
      add("a", s.a, true); add("b", s.b, false); add("p", s.p, false);
      add("K", s.k_main, false); add("K'", s.k_aux, false); os << ")";
      break;
    case EstimatorKind::t6: add("w", s.w, true); add("K", s.k_main, false); add("K'", s.k_aux, false); os << ")"; break;
    default: break;
  }
  return os.str();
}

inline Json to_json(const MseReport& r) {
  Json j;
  j["estimator"] = to_json(r.estimator);
  j["bias"] = round_significant(r.bias, 6);
  j["mse"] = round_significant(r.mse, 6);
  j["sampling_component"] = round_significant(r.sampling_component, 6);
  j["nr_component"] = round_significant(r.nr_component, 6);
  j["constants_provenance"] = std::string(to_string(r.constants_provenance));
  return j;
}

// ---------------------------------------------------------------------------
// analyze

inline Json analysis_json(const PopulationMoments& m, const DerivedCoefficients& d) {
  Json j;
  j["kind"] = "analysis";
  j["moments"] = to_json(m);
  j["derived"] = to_json(d);
  return j;
}

inline std::string analysis_markdown(const PopulationMoments& m, const DerivedCoefficients& d) {
  std::ostringstream os;
  os << "## Population moments\n\n| quantity | value |\n|---|---|\n";
  os << "| N | " << m.N << " |\n| n | " << m.n << " |\n| k | " << m.k << " |\n";
  os << "| mean_y | " << sig(m.mean_y, 8) << " |\n| mean_x | " << sig(m.mean_x, 8) << " |\n";
  os << "| s2_y | " << sig(m.s2_y, 8) << " |\n| s2_x | " << sig(m.s2_x, 8) << " |\n";
  os << "| rho | " << fixed(m.rho, 4) << " |\n";
  os << "| rho_y_intra | " << fixed(m.rho_y_intra, 4) << " |\n";
  os << "| rho_x_intra | " << fixed(m.rho_x_intra, 4) << " |\n";
  os << "| s2_y2 | " << (m.s2_y2 ? sig(*m.s2_y2, 8) : std::string("absent")) << " |\n\n";
  os << "## Derived coefficients\n\n| quantity | value |\n|---|---|\n";
  os << "| theta | " << sig(d.theta, 8) << " |\n| c_y | " << sig(d.c_y) << " |\n";
  os << "| c_x | " << sig(d.c_x) << " |\n| c0 | " << sig(d.c0) << " |\n";
  os << "| c1 | " << sig(d.c1) << " |\n| rho_star | " << sig(d.rho_star) << " |\n";
  os << "| K1 | " << sig(d.k1) << " |\n| rho*c0*c1 | " << sig(d.cross) << " |\n";
  return os.str();
}

inline std::string analysis_csv(const PopulationMoments& m, const DerivedCoefficients& d) {
  std::ostringstream os;
  os.precision(10);
  os << "quantity,value\n";
  os << "N," << m.N << "\nn," << m.n << "\nk," << m.k << "\n";
  os << "mean_y," << m.mean_y << "\nmean_x," << m.mean_x << "\ns2_y," << m.s2_y << "\ns2_x," << m.s2_x
     << "\nrho," << m.rho << "\nrho_y_intra," << m.rho_y_intra << "\nrho_x_intra," << m.rho_x_intra
     << "\ns2_y2," << (m.s2_y2 ? std::to_string(*m.s2_y2) : std::string()) << "\n";
  os << "theta," << d.theta << "\nc_y," << d.c_y << "\nc_x," << d.c_x << "\nc0," << d.c0 << "\nc1,"
     << d.c1 << "\nrho_star," << d.rho_star << "\nk1," << d.k1 << "\nrho_c0_c1," << d.cross << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// pre-table

inline std::string column_label(EstimatorKind k) {
  return k == EstimatorKind::hh_mean ? std::string("hh") : std::string(to_string(k));
}

inline Json to_json(const PreTable& t) {
  Json j;
  Json cols = Json::array();
  for (auto c : t.columns) cols.push_back(column_label(c));
  j["columns"] = cols;
  Json rows = Json::array();
  for (const auto& r : t.rows) {
    Json row;
    row["K"] = r.k_rate;
    row["L"] = r.l_factor;
    row["reference_variance"] = round_significant(r.reference_variance, 6);
    Json pre = Json::object();
    Json oracle = Json::object();
    Json constants = Json::object();
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      pre[column_label(t.columns[c])] = round_decimals(r.pre[c], 4);
      oracle[column_label(t.columns[c])] = number_or_null(round_decimals(r.oracle_pre[c], 4));
      constants[column_label(t.columns[c])] = to_json(r.reports[c]);
    }
    row["pre"] = pre;
    row["oracle_pre"] = oracle;
    row["mse"] = constants;
    rows.push_back(row);
  }
  j["rows"] = rows;
  return j;
}

inline Json to_json(const DiscrepancyReport& rep) {
  Json j;
  j["t1_vs_t3_max_rel"] = number_or_null(rep.t1_vs_t3_max_rel);
  j["t4_alpha"] = rep.t4_alpha ? Json(*rep.t4_alpha) : Json("matching");
  Json cols = Json::array();
  for (const auto& c : rep.columns) {
    Json col;
    col["estimator"] = column_label(c.family);
    col["status"] = std::string(to_string(c.status));
    col["tolerance"] = {{"relative", c.tolerance.relative},
                        {"value", number_or_null(c.tolerance.value)}};
    col["max_abs_dev"] = round_significant(c.max_abs_dev, 6);
    col["max_rel_dev"] = round_significant(c.max_rel_dev, 6);
    col["note"] = c.note;
    Json cells = Json::array();
    for (const auto& cell : c.cells) {
      cells.push_back({{"K", cell.k_rate},
                       {"L", cell.l_factor},
                       {"computed", round_decimals(cell.computed, 4)},
                       {"published", cell.published},
                       {"pass", cell.pass}});
    }
    col["cells"] = cells;
    cols.push_back(col);
  }
  j["columns"] = cols;
  return j;
}

inline Json pre_table_json(const PopulationMoments& m, const PreTable& t,
                           const DiscrepancyReport& rep) {
  Json j;
  j["kind"] = "pre_table";
  j["moments"] = to_json(m);
  j["table"] = to_json(t);
  j["discrepancy"] = to_json(rep);
  return j;
}

inline std::string pre_table_markdown(const PreTable& t) {
  std::ostringstream os;
  os << "| K | L |";
  for (auto c : t.columns) os << ' ' << column_label(c) << " |";
  os << "\n|---|---|";
  for (std::size_t c = 0; c < t.columns.size(); ++c) os << "---|";
  os << '\n';
  for (const auto& r : t.rows) {
    os << "| " << sig(r.k_rate) << " | " << sig(r.l_factor) << " |";
    for (double v : r.pre) os << ' ' << fixed(v, 4) << " |";
    os << '\n';
  }
  return os.str();
}

inline std::string discrepancy_markdown(const DiscrepancyReport& rep) {
  std::ostringstream os;
  os << "| estimator | status | tolerance | max abs dev | max rel dev | constants |\n";
  os << "|---|---|---|---|---|---|\n";
  for (const auto& c : rep.columns) {
    std::string tol = std::isinf(c.tolerance.value)
                          ? std::string("inf")
                          : (c.tolerance.relative ? sig(c.tolerance.value * 100.0) + "%"
                                                  : sig(c.tolerance.value));
    os << "| " << column_label(c.family) << " | " << to_string(c.status) << " | " << tol << " | "
       << fixed(c.max_abs_dev, 4) << " | " << sig(c.max_rel_dev, 4) << " | " << c.note << " |\n";
  }
  for (const auto& c : rep.columns) {
    bool header = false;
    for (const auto& cell : c.cells) {
      if (cell.pass) continue;
      if (!header) {
        os << "\nFlagged " << column_label(c.family) << " cells (computed vs published):\n\n";
        header = true;
      }
      os << "- K=" << sig(cell.k_rate) << ", L=" << sig(cell.l_factor) << ": " << fixed(cell.computed, 4)
         << " vs " << fixed(cell.published, 4) << '\n';
    }
  }
  return os.str();
}

inline std::string pre_table_csv(const PreTable& t) {
  std::ostringstream os;
  os << "K,L";
  for (auto c : t.columns) os << ',' << column_label(c);
  os << '\n';
  for (const auto& r : t.rows) {
    os << sig(r.k_rate) << ',' << sig(r.l_factor);
    for (double v : r.pre) os << ',' << fixed(v, 4);
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// simulate

inline Json to_json(const EmpiricalReport& r) {
  Json j;
  j["replications"] = r.replications;
  j["base_seed"] = r.base_seed;
  j["mechanism"] = to_string(r.mechanism);
  j["start_selection"] = to_string(r.start_selection);
  j["theory_k_rate"] = r.theory_k_rate;
  j["L"] = r.l_factor;
  j["true_mean"] = r.true_mean;
  j["theory_moments"] = to_json(r.theory_moments);
  Json entries = Json::array();
  for (const auto& e : r.entries) {
    Json x;
    x["estimator"] = to_json(e.estimator);
    x["empirical_bias"] = round_significant(e.empirical_bias, 6);
    x["empirical_mse"] = round_significant(e.empirical_mse, 6);
    x["monte_carlo_se"] = round_significant(e.monte_carlo_se, 6);
    x["theoretical"] = to_json(e.theoretical);
    x["ratio"] = round_significant(e.ratio, 6);
    x["failures"] = e.failures;
    entries.push_back(x);
  }
  j["entries"] = entries;
  return j;
}

inline Json to_json(const Comparison& c) {
  Json j;
  j["z_limit"] = c.z_limit;
  j["rel_limit"] = c.rel_limit;
  j["all_pass"] = c.all_pass();
  Json entries = Json::array();
  for (const auto& e : c.entries) {
    entries.push_back({{"estimator", describe(e.estimator)},
                       {"empirical_mse", round_significant(e.empirical_mse, 6)},
                       {"theoretical_mse", round_significant(e.theoretical_mse, 6)},
                       {"z_score", number_or_null(round_significant(e.z_score, 6))},
                       {"rel_gap", number_or_null(round_significant(e.rel_gap, 6))},
                       {"pass", e.pass}});
  }
  j["entries"] = entries;
  return j;
}

inline Json simulation_json(const EmpiricalReport& r, const Comparison& c) {
  Json j;
  j["kind"] = "simulation";
  j["empirical"] = to_json(r);
  j["comparison"] = to_json(c);
  return j;
}

inline std::string simulation_markdown(const EmpiricalReport& r, const Comparison& c) {
  std::ostringstream os;
  os << "Replications: " << r.replications << ", seed " << r.base_seed << ", mechanism "
     << to_string(r.mechanism) << ", starts " << to_string(r.start_selection) << ", K(theory) "
     << sig(r.theory_k_rate) << ", L " << sig(r.l_factor) << "\n\n";
  os << "| estimator | empirical bias | empirical MSE | MC s.e. | theoretical MSE | ratio | z | status |\n";
  os << "|---|---|---|---|---|---|---|---|\n";
  for (std::size_t i = 0; i < r.entries.size(); ++i) {
    const auto& e = r.entries[i];
    const auto& cmp = c.entries[i];
    os << "| " << describe(e.estimator) << " | " << sig(e.empirical_bias) << " | "
       << sig(e.empirical_mse) << " | " << sig(e.monte_carlo_se) << " | " << sig(e.theoretical.mse)
       << " | " << fixed(e.ratio, 4) << " | " << fixed(cmp.z_score, 2) << " | "
       << (cmp.pass ? "PASS" : "FAIL") << " |\n";
  }
  return os.str();
}

inline std::string simulation_csv(const EmpiricalReport& r, const Comparison& c) {
  std::ostringstream os;
  os << "estimator,empirical_bias,empirical_mse,monte_carlo_se,theoretical_mse,ratio,z_score,pass\n";
  for (std::size_t i = 0; i < r.entries.size(); ++i) {
    const auto& e = r.entries[i];
    os << to_string(e.estimator.kind) << ',' << sig(e.empirical_bias) << ',' << sig(e.empirical_mse)
       << ',' << sig(e.monte_carlo_se) << ',' << sig(e.theoretical.mse) << ',' << fixed(e.ratio, 6)
       << ',' << fixed(c.entries[i].z_score, 4) << ',' << (c.entries[i].pass ? 1 : 0) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// report: consolidate previously written JSON documents

inline std::string document_markdown(const std::string& name, const Json& doc) {
  std::ostringstream os;
  os << "## " << name << "\n\n";
  const std::string kind = doc.value("kind", std::string("unknown"));
  if (kind == "pre_table") {
    const auto& t = doc.at("table");
    std::vector<std::string> cols;
    for (const auto& c : t.at("columns")) cols.push_back(c.get<std::string>());
    os << "| K | L |";
    for (const auto& c : cols) os << ' ' << c << " |";
    os << "\n|---|---|";
    for (std::size_t i = 0; i < cols.size(); ++i) os << "---|";
    os << '\n';
    for (const auto& row : t.at("rows")) {
      os << "| " << sig(row.at("K").get<double>()) << " | " << sig(row.at("L").get<double>()) << " |";
      for (const auto& c : cols) os << ' ' << fixed(row.at("pre").at(c).get<double>(), 4) << " |";
      os << '\n';
    }
    os << "\n| estimator | status | note |\n|---|---|---|\n";
    for (const auto& c : doc.at("discrepancy").at("columns")) {
      os << "| " << c.at("estimator").get<std::string>() << " | " << c.at("status").get<std::string>()
         << " | " << c.at("note").get<std::string>() << " |\n";
    }
  } else if (kind == "simulation") {
    const auto& cmp = doc.at("comparison");
    os << "| estimator | empirical MSE | theoretical MSE | z | relative gap | status |\n";
    os << "|---|---|---|---|---|---|\n";
    for (const auto& e : cmp.at("entries")) {
      auto num = [&](const char* key) {
        return e.at(key).is_null() ? std::string("n/a") : sig(e.at(key).get<double>());
      };
      os << "| " << e.at("estimator").get<std::string>() << " | " << num("empirical_mse") << " | "
         << num("theoretical_mse") << " | " << num("z_score") << " | " << num("rel_gap") << " | "
         << (e.at("pass").get<bool>() ? "PASS" : "FAIL") << " |\n";
    }
  } else if (kind == "analysis") {
    os << "| quantity | value |\n|---|---|\n";
    for (const auto& [key, value] : doc.at("moments").items()) {
      os << "| " << key << " | " << (value.is_null() ? std::string("absent") : value.dump()) << " |\n";
    }
    for (const auto& [key, value] : doc.at("derived").items()) {
      os << "| " << key << " | " << (value.is_null() ? std::string("n/a") : value.dump()) << " |\n";
    }
  } else {
    os << "(unrecognized document)\n";
  }
  return os.str();
}

}  // namespace syssamp
