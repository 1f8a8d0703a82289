/*
 * reachsynth - staged synthesis pipeline front-end.
 *
 *   scenario    print or write a bundled scenario configuration
 *   certify     generate/import and check the tracking certificate
 *   abstract    build the finite abstraction at the certified bound
 *   synthesize  solve the game and write the controller table
 *   simulate    Monte Carlo closed-loop runs with monitor verdicts
 *   plot        re-render the planar figure from stored traces
 *
 * Exit codes: 0 success, 1 usage or IO failure, 2 infeasible
 * specification or falsified certificate.
 */

#include "reachsynth/pipeline.hpp"
#include "reachsynth/svg.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace reachsynth;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInfeasible = 2;

Vec parse_eps_override(const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
  Vec v(vals.size());
  for (size_t i = 0; i < vals.size(); ++i) v[i] = vals[i];
  return v;
}

/* epsilon handoff: explicit override > epsilon file > config */
Vec resolve_epsilon(const ScenarioConfig& config, const std::string& eps_file,
                    const std::string& eps_override, int n_x) {
  if (!eps_override.empty()) {
    Vec v = parse_eps_override(eps_override);
    if (v.size() == n_x) return v;
    Vec full = Vec::Zero(n_x);
    if (v.size() != static_cast<Eigen::Index>(config.epsilon_dims.size()))
      throw std::runtime_error("--eps-override: expected " + std::to_string(n_x) + " or " +
                               std::to_string(config.epsilon_dims.size()) + " values");
    for (size_t i = 0; i < config.epsilon_dims.size(); ++i)
      full[config.epsilon_dims[i]] = v[i];
    return full;
  }
  if (!eps_file.empty()) return load_epsilon(eps_file, config.hash());
  if (auto eps = config.epsilon_full(n_x)) return *eps;
  throw std::runtime_error(
      "no error bound available: pass --eps FILE (from certify) or --eps-override, or set "
      "funnel.epsilon in the config");
}

json check_to_json(const CheckResult& r) {
  json j;
  j["verdict"] = to_string(r.verdict);
  j["boxes_processed"] = r.boxes_processed;
  j["samples_drawn"] = r.samples_drawn;
  if (!r.detail.empty()) j["detail"] = r.detail;
  if (r.witness.size()) {
    json w = json::array();
    for (Eigen::Index i = 0; i < r.witness.size(); ++i) w.push_back(r.witness[i]);
    j["witness"] = w;
    j["witness_value"] = r.witness_value;
  }
  return j;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << j.dump(2) << '\n';
}

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Trajectory read_csv_trajectory(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::string header;
  std::getline(is, header);
  int n_x = 0;
  {
    std::stringstream ss(header);
    std::string col;
    while (std::getline(ss, col, ','))
      if (col.size() > 1 && col[0] == 'x') ++n_x;
  }
  Trajectory traj;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    Vec state(n_x);
    for (int i = 0; i < n_x; ++i) state[i] = row.at(1 + i);
    traj.append(row.at(0), state, Vec(0), Vec(0));
  }
  return traj;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"offline reach-avoid-stay synthesis via continuous and discrete abstractions"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", eps_file, eps_override;
  int threads = 0;

  /* scenario */
  auto* sc_scenario = app.add_subcommand("scenario", "print a bundled scenario configuration");
  std::string scenario_name = "ship", scenario_out;
  sc_scenario->add_option("name", scenario_name, "scenario name (ship)");
  sc_scenario->add_option("--out", scenario_out, "write to a file instead of stdout");

  /* certify */
  auto* sc_certify = app.add_subcommand("certify", "generate and check the tracking certificate");
  std::string import_cert;
  bool allow_inconclusive = false;
  sc_certify->add_option("--config", config_path, "scenario configuration")->required();
  sc_certify->add_option("--out", out_dir, "output directory");
  sc_certify->add_option("--import", import_cert, "verify an existing certificate file");
  sc_certify->add_flag("--allow-inconclusive", allow_inconclusive,
                       "exit 0 even when checks are inconclusive");

  /* abstract */
  auto* sc_abstract = app.add_subcommand("abstract", "build the finite abstraction");
  bool text_export = false;
  sc_abstract->add_option("--config", config_path, "scenario configuration")->required();
  sc_abstract->add_option("--out", out_dir, "output directory");
  sc_abstract->add_option("--eps", eps_file, "epsilon file from certify");
  sc_abstract->add_option("--eps-override", eps_override, "comma-separated epsilon values");
  sc_abstract->add_option("--threads", threads, "worker threads (0 = hardware)");
  sc_abstract->add_flag("--text-export", text_export, "also dump a text listing");

  /* synthesize */
  auto* sc_synth = app.add_subcommand("synthesize", "solve the game on a stored abstraction");
  std::string ts_path;
  sc_synth->add_option("--config", config_path, "scenario configuration")->required();
  sc_synth->add_option("--ts", ts_path, "transition system file")->required();
  sc_synth->add_option("--out", out_dir, "output directory");
  sc_synth->add_option("--eps", eps_file, "epsilon file from certify");
  sc_synth->add_option("--eps-override", eps_override, "comma-separated epsilon values");
  sc_synth->add_flag("--text-export", text_export, "also dump a text listing");

  /* simulate */
  auto* sc_sim = app.add_subcommand("simulate", "closed-loop Monte Carlo runs");
  std::string controller_path, certificate_path;
  int runs = 1;
  std::uint64_t seed = 0;
  bool have_seed = false;
  sc_sim->add_option("--config", config_path, "scenario configuration")->required();
  sc_sim->add_option("--controller", controller_path, "controller table file")->required();
  sc_sim->add_option("--certificate", certificate_path, "certificate file")->required();
  sc_sim->add_option("--out", out_dir, "output directory");
  sc_sim->add_option("--eps", eps_file, "epsilon file from certify");
  sc_sim->add_option("--eps-override", eps_override, "comma-separated epsilon values");
  sc_sim->add_option("--runs", runs, "number of Monte Carlo runs");
  sc_sim->add_option("--seed", seed, "run seed (default: config seed)")
      ->each([&](const std::string&) { have_seed = true; });

  /* plot */
  auto* sc_plot = app.add_subcommand("plot", "render the planar figure from stored traces");
  std::string trace_path, abstract_trace_path, plot_out = "figure.svg";
  sc_plot->add_option("--config", config_path, "scenario configuration")->required();
  sc_plot->add_option("--trace", trace_path, "concrete trajectory csv")->required();
  sc_plot->add_option("--abstract-trace", abstract_trace_path, "abstract trajectory csv")
      ->required();
  sc_plot->add_option("--eps", eps_file, "epsilon file from certify");
  sc_plot->add_option("--eps-override", eps_override, "comma-separated epsilon values");
  sc_plot->add_option("--out", plot_out, "output svg path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sc_scenario->parsed()) {
      if (scenario_name != "ship") {
        std::cerr << "unknown scenario '" << scenario_name << "' (available: ship)\n";
        return kExitUsage;
      }
      ScenarioConfig config = ship_scenario();
      if (scenario_out.empty())
        std::cout << config.to_json_text();
      else
        config.save(scenario_out);
      return kExitOk;
    }

    ScenarioConfig config = ScenarioConfig::load(config_path);
    ScenarioSystem system = make_system(config);
    fs::create_directories(out_dir);

    if (sc_certify->parsed()) {
      CertifyResult res = run_certify(
          config, import_cert.empty() ? std::nullopt : std::make_optional(import_cert));
      res.cert.save(out_dir + "/certificate.cert");
      save_epsilon(out_dir + "/epsilon.json", res.applied_epsilon, res.epsilon_from_config,
                   config.hash());
      json report;
      report["initial_containment"] = check_to_json(res.initial);
      report["decrease"] = check_to_json(res.decrease);
      report["jump"] = check_to_json(res.jump);
      report["gamma"] = res.cert.gamma;
      report["certificate_epsilon"] = vec_to_json(res.cert_epsilon);
      report["applied_epsilon"] = vec_to_json(res.applied_epsilon);
      report["epsilon_source"] = res.epsilon_from_config ? "config" : "certificate";
      write_json(out_dir + "/certify_report.json", report);

      std::cout << "certificate: gamma = " << res.cert.gamma << '\n'
                << "  initial containment: " << to_string(res.initial.verdict) << '\n'
                << "  level-set decrease:  " << to_string(res.decrease.verdict) << '\n'
                << "  input-jump:          " << to_string(res.jump.verdict) << '\n'
                << "  certificate epsilon: [" << res.cert_epsilon.transpose() << "]\n"
                << "  applied epsilon:     [" << res.applied_epsilon.transpose() << "] ("
                << (res.epsilon_from_config ? "config" : "certificate") << ")\n";
      if (res.any_falsified()) {
        std::cout << "falsified: a check produced a concrete counterexample (see report)\n";
        return kExitInfeasible;
      }
      if (!res.all_verified() && !allow_inconclusive) {
        std::cout << "inconclusive checks; rerun with --allow-inconclusive to proceed\n";
        return kExitInfeasible;
      }
      return kExitOk;
    }

    if (sc_abstract->parsed()) {
      Vec eps = resolve_epsilon(config, eps_file, eps_override, system.n_x);
      AbstractionResult res = run_abstract(config, eps, threads);
      res.ts.save(out_dir + "/abstraction.rts");
      if (text_export) {
        std::ofstream os(out_dir + "/abstraction.txt");
        res.ts.write_text(os);
      }
      std::int64_t safe = 0;
      for (CellIndex s = 0; s < res.grid.total_cells(); ++s)
        if (res.ts.is_safe(s)) ++safe;
      std::cout << "abstraction: " << res.grid.total_cells() << " cells (+Out), "
                << res.inputs.size() << " inputs, " << safe << " safe cells, "
                << res.ts.transition_count() << " transition entries, built in "
                << res.build_seconds << " s\n";
      return kExitOk;
    }

    if (sc_synth->parsed()) {
      Vec eps = resolve_epsilon(config, eps_file, eps_override, system.n_x);
      TransitionSystem ts = TransitionSystem::load(ts_path);
      if (ts.config_hash() != config.hash()) {
        std::cerr << "transition system was built for a different configuration\n";
        return kExitUsage;
      }
      SynthesisResult res = run_synthesize(config, eps, ts);
      res.table.save(out_dir + "/controller.rsc");
      if (text_export) {
        std::ofstream os(out_dir + "/controller.txt");
        res.table.write_text(os);
      }
      json report;
      report["target_cells"] = res.game.target_cells.size();
      report["stay_inputs"] = res.game.stay_inputs.size();
      report["stay_set"] = res.table.stay_count();
      report["winning_set"] = res.table.win_count();
      report["coverage"] = res.table.coverage();
      report["safety_iterations"] = res.safety.iterations;
      report["reach_iterations"] = res.reach.iterations;
      write_json(out_dir + "/synthesize_report.json", report);
      std::cout << "game: " << res.game.target_cells.size() << " target cells, |S| = "
                << res.table.stay_count() << ", |R| = " << res.table.win_count()
                << ", coverage = " << res.table.coverage() << " of cells, solved in "
                << res.solve_seconds << " s\n";
      return kExitOk;
    }

    if (sc_sim->parsed()) {
      Vec eps = resolve_epsilon(config, eps_file, eps_override, system.n_x);
      ControllerTable table = ControllerTable::load(controller_path);
      if (table.config_hash != config.hash()) {
        std::cerr << "controller was synthesized for a different configuration\n";
        return kExitUsage;
      }
      FunnelCertificate cert = FunnelCertificate::load(certificate_path);
      if (cert.t_s != config.sampling_period) {
        std::cerr << "certificate sampling period differs from the configuration\n";
        return kExitUsage;
      }
      AbstractionResult abstraction;
      abstraction.spec = deform_spec(config, eps);
      abstraction.grid = PartitionGrid(abstraction.spec.xhat_domain, config.state_cells);
      abstraction.inputs =
          InputGrid(abstraction.spec.input_box, config.input_values, abstraction.spec.input_avoid);
      if (table.n_cells != abstraction.grid.total_cells() ||
          table.n_inputs != abstraction.inputs.size()) {
        std::cerr << "controller dimensions do not match the configuration\n";
        return kExitUsage;
      }
      HierarchicalController hc =
          make_controller(config, system, cert, eps, abstraction, table);
      SimulateResult res = run_simulate(config, system, hc, runs,
                                        have_seed ? seed : config.seed, out_dir);
      json report;
      report["runs"] = runs;
      report["satisfied"] = res.satisfied;
      report["violated"] = res.violated;
      report["not_in_winning_set"] = res.rejected;
      json rows = json::array();
      for (const RunRecord& r : res.records) {
        json row;
        row["run"] = r.run;
        row["in_winning_set"] = r.in_winning_set;
        row["x0"] = vec_to_json(r.x0);
        if (r.in_winning_set) {
          row["satisfied"] = r.verdict.satisfied;
          row["t_reach"] = r.verdict.t_reach;
          if (!r.verdict.reason.empty()) row["reason"] = r.verdict.reason;
          row["max_abs_error"] = vec_to_json(r.max_abs_error);
          row["clamp_events"] = r.clamp_events;
        }
        rows.push_back(row);
      }
      report["records"] = rows;
      write_json(out_dir + "/verdicts.json", report);
      std::cout << "simulate: " << res.satisfied << " satisfied, " << res.violated
                << " violated, " << res.rejected << " outside the winning initial set\n";
      return kExitOk;
    }

    if (sc_plot->parsed()) {
      Vec eps = resolve_epsilon(config, eps_file, eps_override, system.n_x);
      Trajectory concrete = read_csv_trajectory(trace_path);
      Trajectory abstract_traj = read_csv_trajectory(abstract_trace_path);
      write_run_svg(plot_out, config, eps, concrete, abstract_traj, config.sampling_period);
      std::cout << "wrote " << plot_out << '\n';
      return kExitOk;
    }
  } catch (const InfeasibleError& ex) {
    std::cerr << "infeasible: " << ex.what() << '\n';
    return kExitInfeasible;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
