#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "syssamp/syssamp.hpp"

namespace fs = std::filesystem;
using namespace syssamp;

namespace {

constexpr int exit_domain = 1;
constexpr int exit_usage = 2;
constexpr int exit_io = 3;

// Bad flag values found after CLI11 parsing; reported like unknown flags.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& s, char delim = ',') {
  std::vector<std::string> out;
  for (auto part : syssamp::detail::split(s, delim)) {
    if (!part.empty()) out.emplace_back(part);
  }
  return out;
}

double parse_number(const std::string& text, const std::string& flag) {
  const auto v = syssamp::detail::parse_double(text);
  if (!v) throw UsageError(flag + ": '" + text + "' is not a number");
  return *v;
}

std::vector<double> parse_grid(const std::string& text, const std::string& flag) {
  std::vector<double> grid;
  for (const auto& item : split_list(text)) grid.push_back(parse_number(item, flag));
  if (grid.empty()) throw UsageError(flag + ": grid must not be empty");
  return grid;
}

EstimatorKind parse_kind(const std::string& name) {
  const auto k = parse_estimator_kind(name);
  if (!k) throw UsageError("--estimators: unknown estimator '" + name + "'");
  return *k;
}

struct EstimatorRequest {
  EstimatorKind kind;
  std::map<std::string, double> constants;
};

// Comma list of names, ranges such as t1..t6, and optional constants
// attached with colons: t3:w=10, t6:w=1.1:k_main=0.9.
std::vector<EstimatorRequest> parse_estimators(const std::string& text, bool allow_constants) {
  std::vector<EstimatorRequest> out;
  for (const auto& item : split_list(text)) {
    const auto range = item.find("..");
    if (range != std::string::npos) {
      const auto lo = parse_kind(item.substr(0, range));
      const auto hi = parse_kind(item.substr(range + 2));
      const auto& all = all_estimator_kinds;
      auto first = std::find(all.begin(), all.end(), lo);
      auto last = std::find(all.begin(), all.end(), hi);
      if (first > last) throw UsageError("--estimators: empty range '" + item + "'");
      for (auto it = first; it <= last; ++it) out.push_back({*it, {}});
      continue;
    }
    const auto parts = split_list(item, ':');
    EstimatorRequest req{parse_kind(parts.at(0)), {}};
    if (parts.size() > 1 && !allow_constants) {
      throw UsageError("--estimators: constants are not accepted here ('" + item + "')");
    }
    const auto names = free_constant_names(req.kind);
    for (std::size_t i = 1; i < parts.size(); ++i) {
      const auto eq = parts[i].find('=');
      if (eq == std::string::npos) throw UsageError("--estimators: expected key=value in '" + item + "'");
      const auto key = parts[i].substr(0, eq);
      static const std::map<EstimatorKind, std::vector<std::string>> base_names{
          {EstimatorKind::t4, {"alpha"}}, {EstimatorKind::t5, {"a", "b", "p"}}, {EstimatorKind::t6, {"w"}}};
      bool known = std::find(names.begin(), names.end(), key) != names.end();
      if (auto it = base_names.find(req.kind); it != base_names.end()) {
        known = known || std::find(it->second.begin(), it->second.end(), key) != it->second.end();
      }
      if (!known) {
        throw UsageError("--estimators: " + std::string(to_string(req.kind)) + " has no constant '" + key + "'");
      }
      req.constants[key] = parse_number(parts[i].substr(eq + 1), "--estimators");
    }
    out.push_back(std::move(req));
  }
  if (out.empty()) throw UsageError("--estimators: no estimators given");
  return out;
}

void set_constant(EstimatorSpec& s, const std::string& key, double v) {
  if (key == "alpha") s.alpha = v;
  else if (key == "a") s.a = v;
  else if (key == "b") s.b = v;
  else if (key == "p") s.p = v;
  else if (key == "w") s.w = v;
  else if (key == "k_main") s.k_main = v;
  else if (key == "k_aux") s.k_aux = v;
}

// Closed-form optimum unless constants were supplied. A shrinkage family
// given only its base constants gets the optimum pair for that base.
std::pair<EstimatorSpec, ConstantsProvenance> resolve_spec(const EstimatorRequest& req,
                                                           const DerivedCoefficients& d,
                                                           const PopulationMoments& m, double K,
                                                           double L) {
  if (req.constants.empty()) return {optimum_constants(req.kind, d, m, K, L), ConstantsProvenance::closed_form};
  EstimatorSpec s = optimum_constants(req.kind, d, m, K, L);
  for (const auto& [key, v] : req.constants) set_constant(s, key, v);
  if (is_shrinkage(req.kind) && !req.constants.count("k_main") && !req.constants.count("k_aux")) {
    s = optimum_shrinkage(s, d, m, K, L);
  }
  return {s, ConstantsProvenance::user_supplied};
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(out_path);
  if (!out) fail(ErrorCode::io, "cannot write '" + out_path + "'");
  out << text;
  if (!out) fail(ErrorCode::io, "error while writing '" + out_path + "'");
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// Options shared by commands that need population moments.
struct MomentSource {
  std::string data;
  std::string moments;
  std::size_t n = 0;
  std::string y_col = "y";
  std::string x_col = "x";
  std::optional<double> rho_intra;
  std::vector<std::string> overrides;

  void add_to(CLI::App* cmd, bool with_moments_file) {
    cmd->add_option("--data", data, "Population file (header row, one unit per row)");
    if (with_moments_file) {
      cmd->add_option("--moments", moments, "Flat JSON object of population moments");
      cmd->add_option("--rho-intra", rho_intra, "Intraclass correlation used for both y and x");
    }
    cmd->add_option("--n", n, "Systematic sample size");
    cmd->add_option("--y", y_col, "Column of the study variable (name or 0-based index)");
    cmd->add_option("--x", x_col, "Column of the auxiliary variable (name or 0-based index)");
    cmd->add_option("--set", overrides, "Override a moment: key=value (repeatable)");
  }

  [[nodiscard]] PopulationMoments resolve() const {
    if (data.empty() == moments.empty()) throw UsageError("give exactly one of --data or --moments");
    Json j;
    if (!moments.empty()) {
      j = read_json_file(moments);
      if (!j.is_object()) fail(ErrorCode::parse, "'" + moments + "': expected a JSON object");
      if (n != 0) j["n"] = n;
    } else {
      if (n == 0) throw UsageError("--data requires --n");
      const auto pop = load_population(data, ColumnMapping{y_col, x_col, std::nullopt, ','});
      j = to_json(compute_moments(pop, n));
    }
    if (rho_intra) {
      j["rho_y_intra"] = *rho_intra;
      j["rho_x_intra"] = *rho_intra;
    }
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw UsageError("--set: expected key=value, got '" + o + "'");
      const auto key = o.substr(0, eq);
      const auto value = o.substr(eq + 1);
      if (!to_json(PopulationMoments{}).contains(key)) throw UsageError("--set: unknown moment '" + key + "'");
      if (value == "null") {
        j[key] = nullptr;
      } else {
        j[key] = parse_number(value, "--set " + key);
      }
    }
    if (j.contains("k") && j.contains("N") && j.contains("n") && (!moments.empty() || !overrides.empty())) {
      j.erase("k");  // re-derived from N and n after overrides
    }
    return moments_from_json(j);
  }
};

// ---------------------------------------------------------------------------

int cmd_analyze(const MomentSource& src, const std::string& format, const std::string& out) {
  const auto m = src.resolve();
  const auto d = derive_coefficients(m);
  if (format == "json") emit(dump(analysis_json(m, d)), out);
  else if (format == "csv") emit(analysis_csv(m, d), out);
  else emit(analysis_markdown(m, d), out);
  return 0;
}

struct PreTableArgs {
  std::string k_grid = "0.1,0.2,0.3,0.4";
  std::string l_grid = "2,2.5,3,3.5";
  std::string estimators = "t1..t6";
  std::string t4_alpha = "0";
  bool no_oracle = false;
};

int cmd_pre_table(const MomentSource& src, const PreTableArgs& args, const std::string& format,
                  const std::string& out) {
  const auto m = src.resolve();
  const auto d = derive_coefficients(m);
  std::vector<EstimatorKind> families{EstimatorKind::hh_mean};
  for (const auto& req : parse_estimators(args.estimators, false)) {
    if (std::find(families.begin(), families.end(), req.kind) == families.end()) {
      families.push_back(req.kind);
    }
  }
  PreTableOptions opt;
  if (args.t4_alpha == "opt") {
    opt.t4_alpha.reset();
  } else {
    opt.t4_alpha = parse_number(args.t4_alpha, "--t4-alpha");
  }
  opt.oracle_check = !args.no_oracle;
  const auto table =
      pre_table(m, d, families, parse_grid(args.k_grid, "--k-grid"), parse_grid(args.l_grid, "--l-grid"), opt);
  const auto rep = discrepancy_report(m, d, table, opt);
  if (format == "json") emit(dump(pre_table_json(m, table, rep)), out);
  else if (format == "csv") emit(pre_table_csv(table), out);
  else emit(pre_table_markdown(table) + "\n" + discrepancy_markdown(rep), out);
  return 0;
}

struct SimulateArgs {
  std::size_t reps = 10000;
  double K = 0.0;
  double L = 1.0;
  std::uint64_t seed = 0;
  std::string mechanism = "bernoulli";
  std::string start = "cycle";
  std::string stratum = "nr";
  std::string estimators = "hh,ratio,product,regression,t1..t6";
  std::string trace;
  unsigned threads = 1;
};

int cmd_simulate(const MomentSource& src, const SimulateArgs& args, const std::string& format,
                 const std::string& out) {
  if (src.data.empty()) throw UsageError("simulate requires --data");
  if (src.n == 0) throw UsageError("simulate requires --n");
  ColumnMapping cols{src.y_col, src.x_col, std::nullopt, ','};
  if (args.mechanism == "stratum") cols.stratum = args.stratum;
  const auto pop = load_population(src.data, cols);

  SimulationConfig cfg;
  cfg.n = src.n;
  cfg.replications = args.reps;
  cfg.base_seed = args.seed;
  cfg.mechanism = args.mechanism == "stratum" ? NonResponseMechanism::Kind::stratum
                                              : NonResponseMechanism::Kind::bernoulli;
  cfg.K = args.K;
  cfg.L = args.L;
  cfg.start_selection =
      args.start == "random" ? StartSelection::uniform_random : StartSelection::exhaustive_cycle;
  if (!args.trace.empty()) cfg.trace_path = args.trace;
  cfg.threads = args.threads;

  const auto [tm, theory_k] = theory_inputs(pop, cfg);
  const auto d = derive_coefficients(tm);
  std::vector<ConstantsProvenance> provenance;
  for (const auto& req : parse_estimators(args.estimators, true)) {
    auto [spec, prov] = resolve_spec(req, d, tm, theory_k, cfg.L);
    cfg.estimators.push_back(spec);
    provenance.push_back(prov);
  }
  auto emp = run_replications(pop, cfg);
  for (std::size_t i = 0; i < emp.entries.size(); ++i) {
    emp.entries[i].theoretical.constants_provenance = provenance[i];
  }
  const auto cmp = compare_theory_empirical(emp);
  if (format == "json") emit(dump(simulation_json(emp, cmp)), out);
  else if (format == "csv") emit(simulation_csv(emp, cmp), out);
  else emit(simulation_markdown(emp, cmp), out);
  return 0;
}

struct GenArgs {
  std::size_t N = 0;
  std::size_t n = 0;
  double rho = 0.0;
  std::optional<double> intra;
  bool sorted = false;
  double nr_frac = 0.0;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_gen(const GenArgs& args) {
  SynthesisOptions opt;
  opt.sorted = args.sorted;
  const double intra = args.intra.value_or(args.rho);
  const auto pop = synthesize_population(args.N, args.n, args.rho, intra, args.nr_frac, args.seed, opt);
  save_population(args.out, pop);
  const auto m = compute_moments(pop, args.n);
  std::cerr << "wrote " << pop.size() << " units to " << args.out << " (rho " << fixed(m.rho, 4)
            << ", intraclass y " << fixed(m.rho_y_intra, 4) << ", x " << fixed(m.rho_x_intra, 4)
            << ", stratum " << pop.stratum_size() << ")\n";
  return 0;
}

int cmd_report(const std::string& in, const std::string& format, const std::string& out) {
  std::error_code ec;
  if (!fs::is_directory(in, ec)) fail(ErrorCode::io, "'" + in + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(in, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  if (ec) fail(ErrorCode::io, "cannot list '" + in + "': " + ec.message());
  if (files.empty()) fail(ErrorCode::io, "no .json documents in '" + in + "'");
  std::sort(files.begin(), files.end());
  if (format == "json") {
    Json all = Json::array();
    for (const auto& f : files) {
      all.push_back({{"name", f.filename().string()}, {"document", read_json_file(f.string())}});
    }
    emit(dump(all), out);
  } else {
    std::string text = "# Consolidated results\n";
    for (const auto& f : files) {
      text += "\n" + document_markdown(f.filename().string(), read_json_file(f.string()));
    }
    emit(text, out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Systematic sampling estimators under non-response"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every command");

  const std::vector<std::string> formats{"json", "csv", "markdown"};

  MomentSource analyze_src;
  std::string analyze_format = "markdown";
  std::string analyze_out;
  auto* analyze = app.add_subcommand("analyze", "Population moments and derived coefficients");
  analyze_src.add_to(analyze, true);
  analyze->add_option("--format", analyze_format)->check(CLI::IsMember(formats));
  analyze->add_option("--out", analyze_out, "Write to this file instead of stdout");

  MomentSource table_src;
  PreTableArgs table_args;
  std::string table_format = "markdown";
  std::string table_out;
  auto* table = app.add_subcommand("pre-table", "Relative efficiencies over a (K, L) grid");
  table_src.add_to(table, true);
  table->add_option("--k-grid", table_args.k_grid, "Non-response rates, comma separated");
  table->add_option("--l-grid", table_args.l_grid, "Subsampling factors, comma separated");
  table->add_option("--estimators", table_args.estimators, "Columns, e.g. t1..t6 or ratio,t3");
  table->add_option("--t4-alpha", table_args.t4_alpha, "Base alpha of t4, or 'opt'");
  table->add_flag("--no-oracle", table_args.no_oracle, "Skip the numeric cross-check");
  table->add_option("--format", table_format)->check(CLI::IsMember(formats));
  table->add_option("--out", table_out, "Write to this file instead of stdout");

  MomentSource sim_src;
  SimulateArgs sim_args;
  std::string sim_format = "json";
  std::string sim_out;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo check of the MSE formulas");
  sim_src.add_to(simulate, false);
  simulate->add_option("--reps", sim_args.reps, "Replications")->check(CLI::PositiveNumber);
  simulate->add_option("--K", sim_args.K, "Non-response rate (bernoulli mechanism)");
  simulate->add_option("--L", sim_args.L, "Subsampling factor");
  simulate->add_option("--seed", sim_args.seed, "Base seed");
  simulate->add_option("--mechanism", sim_args.mechanism, "bernoulli or stratum")
      ->check(CLI::IsMember({"bernoulli", "stratum"}));
  simulate->add_option("--stratum", sim_args.stratum, "Stratum flag column for --mechanism stratum");
  simulate->add_option("--start", sim_args.start, "cycle (every start in turn) or random")
      ->check(CLI::IsMember({"cycle", "random"}));
  simulate->add_option("--estimators", sim_args.estimators,
                       "Estimators, optionally with constants: t3:w=1.1");
  simulate->add_option("--trace", sim_args.trace, "Per-replication CSV trace");
  simulate->add_option("--threads", sim_args.threads, "Worker threads (0 = all cores)");
  simulate->add_option("--format", sim_format)->check(CLI::IsMember(formats));
  simulate->add_option("--out", sim_out, "Write to this file instead of stdout");

  GenArgs gen_args;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic population file");
  gen->add_option("--N", gen_args.N, "Population size")->required();
  gen->add_option("--n", gen_args.n, "Systematic sample size")->required();
  gen->add_option("--rho", gen_args.rho, "Correlation between y and x")->required();
  gen->add_option("--intra", gen_args.intra, "Intraclass correlation when sorted (default: --rho)");
  gen->add_flag("--sorted", gen_args.sorted, "Cluster similar units into the same systematic sample");
  gen->add_option("--nr-frac", gen_args.nr_frac, "Share of units in the non-response stratum");
  gen->add_option("--seed", gen_args.seed, "Seed");
  gen->add_option("--out", gen_args.out, "Output file")->required();

  std::string report_in;
  std::string report_format = "markdown";
  std::string report_out;
  auto* report = app.add_subcommand("report", "Consolidate JSON outputs in a directory");
  report->add_option("--in", report_in, "Directory of JSON documents")->required();
  report->add_option("--format", report_format)->check(CLI::IsMember({"json", "markdown"}));
  report->add_option("--out", report_out, "Write to this file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_usage;
  }

  try {
    if (*analyze) return cmd_analyze(analyze_src, analyze_format, analyze_out);
    if (*table) return cmd_pre_table(table_src, table_args, table_format, table_out);
    if (*simulate) return cmd_simulate(sim_src, sim_args, sim_format, sim_out);
    if (*gen) return cmd_gen(gen_args);
    if (*report) return cmd_report(report_in, report_format, report_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return e.is_input_error() ? exit_io : exit_domain;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error [parse]: " << e.what() << "\n";
    return exit_io;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_domain;
  }
  return exit_usage;
}
