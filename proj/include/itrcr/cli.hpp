#pragma once

// Command-line front end: simulate, fit, predict, policy, evaluate,
// benchmark. Exit codes: 0 ok, 2 usage, 3 data error, 4 numeric/fit error.
// The ITRCR_SEED environment variable overrides --seed when set.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "itrcr/evalbench.hpp"
#include "itrcr/itr.hpp"
#include "itrcr/sim.hpp"
#include "itrcr/survdata.hpp"

#include "CLI11.hpp"
#include "json.hpp"

namespace itrcr::cli {

namespace detail {

inline std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("ITRCR_SEED");
  if (!raw || !*raw) return std::nullopt;
  try {
    return static_cast<std::uint64_t>(
        itrcr::detail::parse_int(raw, "ITRCR_SEED"));
  } catch (const std::invalid_argument&) {
    throw DataError("ITRCR_SEED is not an integer");
  }
}

struct FitFlags {
  double alpha_phi = 0.07;
  double tau = 0.0;
  ForestParams params;

  void attach(CLI::App* cmd) {
    cmd->add_option("--alpha-phi", alpha_phi,
                    "Phase-1 tolerance in (0,1) [default 0.07]");
    cmd->add_option("--tau", tau,
                    "Horizon; 0 takes it from the dataset sidecar/quantile");
    cmd->add_option("--n-tree", params.n_tree, "Trees per forest [300]");
    cmd->add_option("--n-min", params.n_min, "Terminal-node size floor [5]");
    cmd->add_option("--n-minevent", params.n_minevent,
                    "All-cause event floor per node [2]");
    cmd->add_option("--alpha-reg", params.alpha_reg,
                    "Child fraction floor in (0,0.5] [0.1]");
    cmd->add_option("--psi-split", params.psi_split,
                    "Random split-variable probability in (0,1) [0.1]");
    cmd->add_option("--subsample-fraction", params.subsample_fraction,
                    "Per-tree subsample rate in (0,1] [0.8]");
    cmd->add_option("--seed", params.seed, "Master seed [0]");
  }

  ItrConfig config() const {
    ItrConfig c;
    c.alpha_phi = alpha_phi;
    c.tau = tau;
    c.forest_params = params;
    if (auto s = env_seed()) c.forest_params.seed = *s;
    return c;
  }
};

}  // namespace detail

// Parses argv (without the program name) and runs one subcommand.
inline int run_command(const std::vector<std::string>& args,
                       std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  CLI::App app{"individualized treatment rules for competing-risks survival "
               "data"};
  app.require_subcommand(1);

  // simulate
  auto* c_sim = app.add_subcommand(
      "simulate", "Generate a dataset from a scenario file");
  std::string sim_scenario, sim_out;
  std::uint64_t sim_seed = 0;
  c_sim->add_option("--scenario", sim_scenario, "Scenario file")->required();
  c_sim->add_option("--out", sim_out, "Output dataset CSV")->required();
  auto* sim_seed_opt =
      c_sim->add_option("--seed", sim_seed, "Override the scenario seed");

  // fit
  auto* c_fit = app.add_subcommand("fit", "Fit the two-phase ITR model");
  std::string fit_data, fit_out;
  unsigned fit_threads = 0;
  detail::FitFlags fit_flags;
  c_fit->add_option("--data", fit_data, "Training dataset CSV")->required();
  c_fit->add_option("--out", fit_out, "Output model JSON")->required();
  c_fit->add_option("--threads", fit_threads, "Worker cap (0 = all cores)");
  fit_flags.attach(c_fit);

  // predict
  auto* c_pred = app.add_subcommand(
      "predict", "Write per-subject survival and CIF curves");
  std::string pred_model, pred_data, pred_out;
  c_pred->add_option("--model", pred_model, "Model JSON")->required();
  c_pred->add_option("--data", pred_data, "Dataset CSV")->required();
  c_pred->add_option("--out", pred_out, "Output long-format curve CSV")
      ->required();

  // policy
  auto* c_pol = app.add_subcommand(
      "policy", "Write per-subject treatment recommendations");
  std::string pol_model, pol_data, pol_out;
  c_pol->add_option("--model", pol_model, "Model JSON")->required();
  c_pol->add_option("--data", pol_data, "Dataset CSV")->required();
  c_pol->add_option("--out", pol_out, "Output recommendation CSV")
      ->required();

  // evaluate
  auto* c_eval = app.add_subcommand(
      "evaluate", "Score a fitted model against a scenario's truth oracle");
  std::string eval_scenario, eval_model, eval_out;
  std::size_t eval_n = 1000;
  std::uint64_t eval_seed = 0;
  c_eval->add_option("--scenario", eval_scenario, "Scenario file")
      ->required();
  c_eval->add_option("--model", eval_model, "Model JSON")->required();
  c_eval->add_option("--out", eval_out, "Output PolicyValue JSON")
      ->required();
  c_eval->add_option("--n-eval", eval_n, "Evaluation subjects [1000]");
  c_eval->add_option("--seed", eval_seed, "Evaluation seed [0]");

  // benchmark
  auto* c_bench = app.add_subcommand(
      "benchmark", "Replication benchmark against baseline policies");
  std::string bench_scenario, bench_outdir;
  std::string bench_policies = "proposed,zero_order,observed,true_optimal";
  int bench_reps = 100;
  std::size_t bench_neval = 1000;
  unsigned bench_threads = 0;
  detail::FitFlags bench_flags;
  c_bench->add_option("--scenario", bench_scenario, "Scenario file")
      ->required();
  c_bench->add_option("--out-dir", bench_outdir, "Output directory")
      ->required();
  c_bench->add_option("--n-reps", bench_reps, "Replications [100]");
  c_bench->add_option("--n-eval", bench_neval,
                      "Evaluation subjects per replication [1000]");
  c_bench->add_option("--policies", bench_policies,
                      "Comma-separated subset of "
                      "proposed,zero_order,observed,true_optimal");
  c_bench->add_option("--threads", bench_threads,
                      "Worker cap (0 = all cores)");
  bench_flags.attach(c_bench);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      out << app.help();
      return 0;
    }
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (c_sim->parsed()) {
      Scenario scenario = load_scenario(sim_scenario);
      std::uint64_t seed = sim_seed_opt->count() > 0 ? sim_seed
                                                     : scenario.seed;
      if (auto s = detail::env_seed()) seed = *s;
      scenario.seed = seed;
      SimulatedData data = generate(scenario, seed);
      save_dataset(sim_out, data.dataset);
      std::filesystem::path echo = sim_out;
      echo += ".scenario.cfg";
      save_scenario(echo, scenario);
      auto report = validate(data.dataset);
      for (const auto& w : report.warnings) err << "warning: " << w << "\n";
      out << "wrote " << data.dataset.n() << " subjects to " << sim_out
          << "\n";
      return 0;
    }

    if (c_fit->parsed()) {
      std::vector<std::string> warnings;
      std::optional<double> tau;
      if (fit_flags.tau > 0.0) tau = fit_flags.tau;
      auto ds = load_dataset(fit_data, {}, tau, &warnings);
      for (const auto& w : warnings) err << "warning: " << w << "\n";
      ItrModel model = fit_itr(ds, fit_flags.config(), fit_threads);
      save_model(fit_out, model);
      out << "wrote model to " << fit_out << "\n";
      return 0;
    }

    if (c_pred->parsed()) {
      ItrModel model = load_model(pred_model);
      auto ds = load_dataset(pred_data, {}, model.config.tau);
      std::ostringstream csv;
      csv << "# itrcr-curves v1\n";
      csv << "id,treatment,time,value,kind\n";
      auto emit = [&](const std::string& id, int arm, const StepCurve& c) {
        const std::string kind = curve_kind_name(c.kind());
        csv << id << "," << arm << ",0,"
            << itrcr::detail::format_double(c.initial_value()) << "," << kind
            << "\n";
        for (std::size_t i = 0; i < c.n_jumps(); ++i)
          csv << id << "," << arm << ","
              << itrcr::detail::format_double(c.jump_times()[i]) << ","
              << itrcr::detail::format_double(c.values()[i]) << "," << kind
              << "\n";
      };
      for (const auto& s : ds.subjects()) {
        for (int arm : model.treatment_space) {
          emit(s.id, arm, predict_curve(model.survival_forests.at(arm),
                                        s.covariates));
          emit(s.id, arm,
               predict_curve(model.cif_forests.at(arm), s.covariates));
        }
      }
      itrcr::detail::atomic_write_file(pred_out, csv.str());
      out << "wrote curves to " << pred_out << "\n";
      return 0;
    }

    if (c_pol->parsed()) {
      ItrModel model = load_model(pol_model);
      auto ds = load_dataset(pol_data, {}, model.config.tau);
      std::vector<std::pair<std::string, PhaseTrace>> rows;
      rows.reserve(ds.n());
      for (const auto& s : ds.subjects())
        rows.emplace_back(s.id,
                          recommend(model, s.covariates, ds.feasible_for(s)));
      itrcr::detail::atomic_write_file(
          pol_out, policy_csv(model.treatment_space, rows));
      out << "wrote recommendations to " << pol_out << "\n";
      return 0;
    }

    if (c_eval->parsed()) {
      Scenario scenario = load_scenario(eval_scenario);
      ItrModel model = load_model(eval_model);
      std::uint64_t seed = eval_seed;
      if (auto s = detail::env_seed()) seed = *s;
      TruthOracle oracle(scenario);
      auto eval_set = make_eval_set(scenario, eval_n, seed);
      PolicyValue value = policy_value(
          [&](const EvalSubject& s) { return recommend(model, s.z).chosen; },
          eval_set, oracle);
      nlohmann::json j{{"schema_version", 1},
                       {"v1", value.v1},
                       {"v2", value.v2},
                       {"n_eval", value.n_eval}};
      itrcr::detail::atomic_write_file(eval_out, j.dump(2) + "\n");
      out << "v1=" << value.v1 << " v2=" << value.v2 << "\n";
      return 0;
    }

    if (c_bench->parsed()) {
      Scenario scenario = load_scenario(bench_scenario);
      std::set<PolicyId> ids;
      for (const auto& name : itrcr::detail::split(bench_policies, ','))
        ids.insert(policy_id_from_name(name));
      ItrConfig config = bench_flags.config();
      if (config.tau <= 0.0) config.tau = scenario.tau;
      BenchmarkSummary summary = run_benchmark(
          scenario, config, bench_reps, ids, bench_neval, bench_threads);
      namespace fs = std::filesystem;
      fs::create_directories(bench_outdir);
      itrcr::detail::atomic_write_file(
          fs::path(bench_outdir) / "summary.csv", summary_csv(summary));
      itrcr::detail::atomic_write_file(
          fs::path(bench_outdir) / "per_rep.csv", per_rep_csv(summary));
      out << summary_table(summary);
      return 0;
    }
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 4;
  }
  err << "usage error: no subcommand given\n";
  return 2;
}

}  // namespace itrcr::cli
