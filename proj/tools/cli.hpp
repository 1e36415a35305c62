#ifndef BILARX_TOOLS_CLI_HPP
#define BILARX_TOOLS_CLI_HPP

#include "bilarx/bilarx.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace bilarx::cli {

using json = nlohmann::json;

enum ExitCode : int { kOk = 0, kUsage = 1, kNotConverged = 2, kBadData = 3 };

/// Malformed file or argument; maps to exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Config {
  ArxOrders orders;
  double epsilon = 0.0;
  double lambda = 1.0;
  double gamma = 0.5;
  SolverOptions solver;
  std::optional<std::string> data;  // data file, relative to the config file
};

struct Dataset {
  std::vector<OutputSeries> series;
  std::vector<std::optional<Vector>> inputs;  // optional u column per series
};

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string read_file(const std::string& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + what + " '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << text;
}

inline Config load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path, "config file"));
  } catch (const json::parse_error& e) {
    throw UsageError("config '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw UsageError("config '" + path + "' must be a JSON object");
  Config c;
  auto number = [&](const std::string& key, const json& v) {
    if (!v.is_number()) throw UsageError("config field '" + key + "' must be a number");
    return v.get<double>();
  };
  auto integer = [&](const std::string& key, const json& v) {
    if (!v.is_number_integer()) throw UsageError("config field '" + key + "' must be an integer");
    return v.get<int>();
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "n_a") c.orders.n_a = integer(key, v);
    else if (key == "n_b") c.orders.n_b = integer(key, v);
    else if (key == "n_k") c.orders.n_k = integer(key, v);
    else if (key == "epsilon") c.epsilon = number(key, v);
    else if (key == "lambda") c.lambda = number(key, v);
    else if (key == "gamma") c.gamma = number(key, v);
    else if (key == "rho") c.solver.rho = number(key, v);
    else if (key == "max_iters") c.solver.max_iters = integer(key, v);
    else if (key == "tol") c.solver.tol_primal = c.solver.tol_dual = number(key, v);
    else if (key == "data") {
      if (!v.is_string()) throw UsageError("config field 'data' must be a string");
      const std::filesystem::path p(v.get<std::string>());
      c.data = p.is_absolute() ? p.string()
                               : (std::filesystem::path(path).parent_path() / p).string();
    } else {
      throw UsageError("config field '" + key + "' is not recognised");
    }
  }
  return c;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, sep)) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

inline double parse_number(const std::string& s, const std::string& field, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError("line " + std::to_string(line) + ": field '" + field + "' is not a number: '" +
                     s + "'");
  }
}

/// CSV with header t,y or t,y,series; extra columns z and u are accepted.
inline Dataset load_data(const std::string& path) {
  std::stringstream in(read_file(path, "data file"));
  std::string line;
  if (!std::getline(in, line)) throw UsageError("data file '" + path + "' is empty");
  const auto header = split(line, ',');
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* need : {"t", "y"})
    if (!col.count(need)) throw UsageError("data file '" + path + "' lacks a '" + need + "' column");
  const bool has_series = col.count("series") > 0;
  const bool has_u = col.count("u") > 0;

  struct Acc {
    std::vector<double> y, u;
  };
  std::vector<std::string> order;
  std::map<std::string, Acc> acc;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \r\t") == std::string::npos) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size())
      throw UsageError("line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                       " fields, got " + std::to_string(cells.size()));
    const std::string key = has_series ? cells[col["series"]] : "series1";
    if (!acc.count(key)) order.push_back(key);
    Acc& a = acc[key];
    const double t = parse_number(cells[col["t"]], "t", lineno);
    if (t != static_cast<double>(a.y.size() + 1))
      throw InvalidInput("line " + std::to_string(lineno) + ": field 't' must count 1, 2, ... within series '" +
                         key + "', got " + cells[col["t"]]);
    a.y.push_back(parse_number(cells[col["y"]], "y", lineno));
    if (has_u) a.u.push_back(parse_number(cells[col["u"]], "u", lineno));
  }
  if (order.empty()) throw UsageError("data file '" + path + "' has no samples");
  Dataset d;
  for (const auto& key : order) {
    d.series.push_back({acc[key].y, key});
    d.inputs.push_back(has_u ? std::optional<Vector>(detail::to_vector(acc[key].u)) : std::nullopt);
  }
  return d;
}

inline json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Vector vector_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw UsageError("result field '" + field + "' must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw UsageError("result field '" + field + "' must hold numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline json diagnostics_json(const SolverDiagnostics& d) {
  return {{"iterations", d.iterations},
          {"primal_residual", d.primal_residual},
          {"dual_residual", d.dual_residual},
          {"converged", d.converged},
          {"final_rho", d.final_rho}};
}

inline json solution_json(const ProblemSpec& spec, const BilSolution& s, double gamma) {
  json r;
  r["lambda"] = s.lambda;
  r["objective"] = s.objective;
  r["a"] = to_json(s.a_est);
  r["b"] = s.b_est ? to_json(*s.b_est) : json(nullptr);
  r["scale_note"] = "u and b are determined up to a common scalar factor; b is scaled to unit norm";
  json labels = json::array(), us = json::array(), cps = json::array();
  for (std::size_t j = 0; j < spec.num_sequences(); ++j) {
    labels.push_back(spec.sequence(j).label);
    us.push_back(to_json(s.u_est[j]));
    cps.push_back(change_points(s.u_est[j], gamma));
  }
  r["series"] = labels;
  r["u"] = us;
  r["singular_values"] = to_json(s.singular_values);
  r["rank_gap"] = s.rank_gap;
  r["gamma"] = gamma;
  r["change_points"] = cps;
  r["diagnostics"] = diagnostics_json(s.diagnostics);
  return r;
}

inline void emit_json(const json& j, const std::string& out_path, std::ostream& out) {
  const std::string text = j.dump(2) + "\n";
  if (out_path.empty()) out << text;
  else write_file(out_path, text);
}

/// Per-figure CSVs: measured vs simulated output, input estimate (with the
/// planted input rescaled onto it when the data carries one), singular values.
inline void write_plots(const std::string& dir, const ProblemSpec& spec, const Dataset& data,
                        const Vector& a, const Vector& b, const std::vector<Vector>& u,
                        const Vector& singular_values) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  for (std::size_t j = 0; j < spec.num_sequences(); ++j) {
    const std::string& label = spec.sequence(j).label;
    const Vector y = detail::to_vector(spec.sequence(j).samples);
    const Vector yhat = b.size() ? simulate_arx(a, b, spec.orders(), u[j]) : Vector::Zero(y.size());
    std::ostringstream fit;
    fit << "t,y,y_hat\n";
    for (Eigen::Index t = 0; t < y.size(); ++t) fit << t + 1 << ',' << fmt(y(t)) << ',' << fmt(yhat(t)) << '\n';
    write_file((base / ("output_" + label + ".csv")).string(), fit.str());

    std::ostringstream in;
    const auto& truth = data.inputs[j];
    in << (truth ? "t,u_est,u_true_rescaled\n" : "t,u_est\n");
    double scale = 1.0;
    if (truth && truth->squaredNorm() > 0.0) scale = truth->dot(u[j]) / truth->squaredNorm();
    for (Eigen::Index t = 0; t < u[j].size(); ++t) {
      in << t + 1 << ',' << fmt(u[j](t));
      if (truth) in << ',' << fmt(scale * (*truth)(t));
      in << '\n';
    }
    write_file((base / ("input_" + label + ".csv")).string(), in.str());
  }
  std::ostringstream sv;
  sv << "index,singular_value\n";
  for (Eigen::Index i = 0; i < singular_values.size(); ++i) sv << i + 1 << ',' << fmt(singular_values(i)) << '\n';
  write_file((base / "singular_values.csv").string(), sv.str());
}

struct Common {
  std::string config;
  std::string data;
  std::string out;
  std::string plot_dir;
};

inline std::pair<Config, Dataset> load_inputs(const Common& c) {
  Config cfg = load_config(c.config);
  std::string data_path = c.data;
  if (data_path.empty()) {
    if (!cfg.data) throw UsageError("no data file: pass --data or set 'data' in the config");
    data_path = *cfg.data;
  }
  return {cfg, load_data(data_path)};
}

inline ProblemSpec make_spec(const Config& cfg, const Dataset& d) {
  return build_problem(d.series, cfg.orders, cfg.epsilon);
}

inline int finish(const BilSolution& s, std::ostream& err) {
  if (s.diagnostics.converged) return kOk;
  err << "warning: solver stopped after " << s.diagnostics.iterations
      << " iterations without meeting the tolerances (primal " << s.diagnostics.primal_residual
      << ", dual " << s.diagnostics.dual_residual << ")\n";
  return kNotConverged;
}

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  int i = 0;
  for (const auto& cell : split(s, ',')) out.push_back(parse_number(cell, "lambdas", ++i));
  if (out.empty()) throw UsageError("--lambdas is empty");
  return out;
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Blind identification of ARX models with piecewise constant inputs"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* opt = sub->add_option("--config", common.config, "JSON configuration file");
    if (need_config) opt->required();
    sub->add_option("--data", common.data, "CSV data file (t,y[,series])");
    sub->add_option("--out", common.out, "output file (default: stdout)");
    sub->add_option("--plot-dir", common.plot_dir, "directory for plot-data CSVs");
  };

  auto* identify = app.add_subcommand("identify", "solve the lifted convex program at one lambda");
  add_common(identify, true);

  auto* refine = app.add_subcommand("refine", "re-solve with lambda = 0 and frozen small input steps");
  add_common(refine, true);
  std::string from;
  std::optional<double> gamma;
  refine->add_option("--from", from, "result JSON of a previous identify/sweep run")->required();
  refine->add_option("--gamma", gamma, "freeze threshold on |u(i) - u(i+1)|");

  auto* sweep = app.add_subcommand("sweep", "scan a lambda grid for a rank-one solution");
  add_common(sweep, true);
  std::string lambdas = "1e2,1e3,1e4,1e5";
  double gap_target = 1e-4;
  sweep->add_option("--lambdas", lambdas, "comma-separated lambda grid");
  sweep->add_option("--gap-target", gap_target, "rank gap accepted as rank one");

  auto* baseline = app.add_subcommand("baseline", "two-step segmentation + least squares estimate");
  add_common(baseline, true);
  int segments = 0;
  baseline->add_option("--segments", segments, "maximum number of constant segments")->required();

  auto* ripcheck = app.add_subcommand("ripcheck", "restricted isometry constant and uniqueness check");
  add_common(ripcheck, false);
  std::string operator_file;
  int n1 = 0, n2 = 0, k = 1;
  long long budget = kDefaultPatternBudget;
  ripcheck->add_option("--operator", operator_file, "CSV matrix acting on column-major vec(Z)");
  ripcheck->add_option("--n1", n1, "rows of Z (with --operator)");
  ripcheck->add_option("--n2", n2, "columns of Z (with --operator)");
  ripcheck->add_option("--k", k, "number of row changes");
  ripcheck->add_option("--budget", budget, "maximum number of support patterns");

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic scenario");
  std::string scenario_name, sim_out, config_out;
  std::optional<std::uint64_t> seed;
  simulate->add_option("--scenario", scenario_name, "scenario name")
      ->required()
      ->check(CLI::IsMember(scenario_names()));
  simulate->add_option("--seed", seed, "noise seed (default: $BILARX_SEED or 1)");
  simulate->add_option("--out", sim_out, "CSV output (default: stdout)");
  simulate->add_option("--config-out", config_out, "also write a matching JSON config");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  try {
    if (identify->parsed()) {
      auto [cfg, data] = load_inputs(common);
      const ProblemSpec spec = make_spec(cfg, data);
      const BilSolution s = solve_bil(spec, cfg.lambda, cfg.solver);
      emit_json(solution_json(spec, s, cfg.gamma), common.out, out);
      if (!common.plot_dir.empty())
        write_plots(common.plot_dir, spec, data, s.a_est, s.b_est.value_or(Vector()), s.u_est, s.singular_values);
      return finish(s, err);
    }
    if (refine->parsed()) {
      auto [cfg, data] = load_inputs(common);
      const ProblemSpec spec = make_spec(cfg, data);
      json prev;
      try {
        prev = json::parse(read_file(from, "result file"));
      } catch (const json::parse_error& e) {
        throw UsageError("result '" + from + "' is not valid JSON: " + e.what());
      }
      if (!prev.contains("u") || !prev["u"].is_array())
        throw UsageError("result '" + from + "' lacks the 'u' field");
      if (prev["u"].size() != spec.num_sequences())
        throw UsageError("result '" + from + "' holds " + std::to_string(prev["u"].size()) +
                         " input estimates, data has " + std::to_string(spec.num_sequences()) + " series");
      std::vector<Vector> u;
      for (const auto& item : prev["u"]) u.push_back(vector_from_json(item, "u"));
      const double g = gamma.value_or(cfg.gamma);
      const BilSolution s = refine_pipeline(spec, u, g, cfg.solver);
      json r = solution_json(spec, s, g);
      if (prev.contains("rank_gap")) r["rank_gap_before"] = prev["rank_gap"];
      emit_json(r, common.out, out);
      if (!common.plot_dir.empty())
        write_plots(common.plot_dir, spec, data, s.a_est, s.b_est.value_or(Vector()), s.u_est, s.singular_values);
      return finish(s, err);
    }
    if (sweep->parsed()) {
      auto [cfg, data] = load_inputs(common);
      const ProblemSpec spec = make_spec(cfg, data);
      const LambdaSweep sw = sweep_lambda(spec, parse_list(lambdas), gap_target, cfg.solver);
      json r = solution_json(spec, sw.solution, cfg.gamma);
      r["sweep"] = {{"lambdas", sw.lambdas}, {"rank_gaps", sw.rank_gaps},
                    {"selected_lambda", sw.lambda}, {"qualified", sw.qualified},
                    {"gap_target", gap_target}};
      emit_json(r, common.out, out);
      if (!common.plot_dir.empty()) {
        const BilSolution& s = sw.solution;
        write_plots(common.plot_dir, spec, data, s.a_est, s.b_est.value_or(Vector()), s.u_est, s.singular_values);
        std::ostringstream csv;
        csv << "lambda,rank_gap\n";
        for (std::size_t i = 0; i < sw.lambdas.size(); ++i) csv << fmt(sw.lambdas[i]) << ',' << fmt(sw.rank_gaps[i]) << '\n';
        write_file((std::filesystem::path(common.plot_dir) / "sweep.csv").string(), csv.str());
      }
      if (!sw.qualified) err << "warning: no lambda reached rank gap " << gap_target << "\n";
      return finish(sw.solution, err);
    }
    if (baseline->parsed()) {
      auto [cfg, data] = load_inputs(common);
      const ProblemSpec spec = make_spec(cfg, data);
      const NaiveResult nr = naive_identify(spec, segments);
      // Same unit-norm convention on b as the lifted solution.
      const double nb = nr.b_est.norm();
      Eigen::Index idx = 0;
      nr.b_est.cwiseAbs().maxCoeff(&idx);
      const double scale = nb > 0.0 ? (nr.b_est(idx) < 0 ? -nb : nb) : 1.0;
      std::vector<Vector> u;
      for (const auto& uh : nr.u_hat) u.push_back(uh * scale);
      json r;
      r["a"] = to_json(nr.a_est);
      r["b"] = to_json(nr.b_est / scale);
      r["scale_note"] = "u and b are determined up to a common scalar factor; b is scaled to unit norm";
      json labels = json::array(), us = json::array();
      for (std::size_t j = 0; j < spec.num_sequences(); ++j) {
        labels.push_back(spec.sequence(j).label);
        us.push_back(to_json(u[j]));
      }
      r["series"] = labels;
      r["u"] = us;
      r["change_points"] = nr.change_points;
      r["segments"] = segments;
      r["residual_sum"] = nr.residual_sum;
      emit_json(r, common.out, out);
      if (!common.plot_dir.empty())
        write_plots(common.plot_dir, spec, data, nr.a_est, nr.b_est / scale, u, Vector());
      return kOk;
    }
    if (ripcheck->parsed()) {
      Matrix op;
      if (!operator_file.empty()) {
        if (n1 <= 0 || n2 <= 0) throw UsageError("--operator needs --n1 and --n2");
        std::stringstream in(read_file(operator_file, "operator file"));
        std::vector<std::vector<double>> rows;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
          ++lineno;
          if (line.find_first_not_of(" \r\t") == std::string::npos) continue;
          std::vector<double> row;
          for (const auto& cell : split(line, ',')) row.push_back(parse_number(cell, "operator", lineno));
          if (!rows.empty() && row.size() != rows.front().size())
            throw UsageError("line " + std::to_string(lineno) + ": operator rows differ in length");
          rows.push_back(std::move(row));
        }
        if (rows.empty()) throw UsageError("operator file '" + operator_file + "' is empty");
        op.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
        for (std::size_t r = 0; r < rows.size(); ++r)
          for (std::size_t c = 0; c < rows[r].size(); ++c)
            op(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
      } else {
        if (common.config.empty()) throw UsageError("ripcheck needs --operator or --config with data");
        auto [cfg, data] = load_inputs(common);
        const ProblemSpec spec = make_spec(cfg, data);
        if (spec.num_sequences() != 1) throw UsageError("ripcheck on data supports a single series");
        op = build_lifted_operator(spec).x_part(0);
        n1 = spec.length(0);
        n2 = cfg.orders.n_b;
      }
      const RipReport rep = rip_report(op, n1, n2, k, budget);
      json r = {{"k", rep.k},
                {"rip_epsilon", rep.rip_epsilon},
                {"rip_epsilon_2k", rep.rip_epsilon_2k},
                {"patterns_checked", rep.patterns_checked},
                {"certified_unique", rep.certified_unique},
                {"min_gain", rep.min_gain},
                {"max_gain", rep.max_gain}};
      emit_json(r, common.out, out);
      return kOk;
    }
    if (simulate->parsed()) {
      std::uint64_t s = kDefaultScenarioSeed;
      if (seed) {
        s = *seed;
      } else if (const char* env = std::getenv("BILARX_SEED")) {
        try {
          s = std::stoull(env);
        } catch (const std::exception&) {
          throw UsageError("BILARX_SEED must be a non-negative integer, got '" + std::string(env) + "'");
        }
      }
      const Scenario sc = scenario(scenario_name, s);
      const bool multi = sc.spec.num_sequences() > 1;
      std::ostringstream csv;
      csv << (multi ? "t,z,y,u,series\n" : "t,z,y,u\n");
      for (std::size_t j = 0; j < sc.spec.num_sequences(); ++j) {
        const auto& seq = sc.spec.sequence(j);
        for (int t = 1; t <= static_cast<int>(seq.size()); ++t) {
          csv << t << ',' << fmt(sc.truth.noise_free[j](t - 1)) << ',' << fmt(seq.at(t)) << ','
              << fmt(sc.truth.inputs[j](t - 1));
          if (multi) csv << ',' << seq.label;
          csv << '\n';
        }
      }
      if (sim_out.empty()) out << csv.str();
      else write_file(sim_out, csv.str());
      if (!config_out.empty()) {
        const ArxOrders& o = sc.spec.orders();
        json c = {{"n_a", o.n_a}, {"n_b", o.n_b}, {"n_k", o.n_k}, {"epsilon", sc.spec.epsilon()}};
        if (!sim_out.empty())
          c["data"] = std::filesystem::relative(std::filesystem::absolute(sim_out),
                                                std::filesystem::absolute(config_out).parent_path())
                          .string();
        write_file(config_out, c.dump(2) + "\n");
      }
      return kOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const BudgetExceeded& e) {
    err << "error: " << e.what() << " (raise --budget)\n";
    return kUsage;
  } catch (const InvalidInput& e) {
    err << "invalid data: " << e.what() << "\n";
    return kBadData;
  } catch (const RankDeficient& e) {
    err << "invalid data: " << e.what() << "\n";
    return kBadData;
  } catch (const NoIdentifiableComponent& e) {
    err << "invalid data: " << e.what() << "\n";
    return kBadData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace bilarx::cli

#endif  // BILARX_TOOLS_CLI_HPP
