#pragma once

// Value-function evaluation of policies against the truth oracle, plus the
// replication benchmark harness comparing the proposed rule with baselines.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "itrcr/detail/parallel.hpp"
#include "itrcr/detail/rng.hpp"
#include "itrcr/itr.hpp"
#include "itrcr/sim.hpp"

namespace itrcr {

struct PolicyValue {
  double v1 = 0.0;
  double v2 = 0.0;
  std::size_t n_eval = 0;
};

struct EvalSubject {
  std::vector<double> z;
  int observed_treatment = 0;
};

// Uncensored covariate draws from the scenario, each with the treatment the
// generator's assignment mechanism would have given (for the observed-policy
// comparator).
inline std::vector<EvalSubject> make_eval_set(const Scenario& scenario,
                                              std::size_t n_eval,
                                              std::uint64_t seed) {
  auto rng = detail::make_engine(detail::mix_seed(seed, 0xE7A1u));
  std::vector<EvalSubject> out;
  out.reserve(n_eval);
  for (std::size_t i = 0; i < n_eval; ++i) {
    EvalSubject s;
    s.z = detail::draw_covariates(scenario.p, rng);
    s.observed_treatment = assign_treatment(s.z, scenario.beta_pi, rng);
    out.push_back(std::move(s));
  }
  return out;
}

// Mean true criteria over the evaluation subjects under the given policy:
// v_k = mean of phi_k(z, policy(z)).
template <typename PolicyFn>
PolicyValue policy_value(PolicyFn&& policy,
                         std::span<const EvalSubject> eval_set,
                         const TruthOracle& oracle) {
  PolicyValue value;
  value.n_eval = eval_set.size();
  if (eval_set.empty()) return value;
  double sum1 = 0.0;
  double sum2 = 0.0;
  for (const auto& s : eval_set) {
    int a = policy(s);
    sum1 += oracle.phi1(s.z, a);
    sum2 += oracle.phi2(s.z, a);
  }
  value.v1 = sum1 / static_cast<double>(eval_set.size());
  value.v2 = sum2 / static_cast<double>(eval_set.size());
  return value;
}

enum class PolicyId { Proposed, ZeroOrder, Observed, TrueOptimal };

inline std::string policy_name(PolicyId id) {
  switch (id) {
    case PolicyId::Proposed: return "proposed";
    case PolicyId::ZeroOrder: return "zero_order";
    case PolicyId::Observed: return "observed";
    case PolicyId::TrueOptimal: return "true_optimal";
  }
  return "unknown";
}

inline PolicyId policy_id_from_name(const std::string& name) {
  if (name == "proposed") return PolicyId::Proposed;
  if (name == "zero_order") return PolicyId::ZeroOrder;
  if (name == "observed") return PolicyId::Observed;
  if (name == "true_optimal") return PolicyId::TrueOptimal;
  throw DataError("unknown policy: " + name);
}

// The tolerance-aware rule computed from oracle criteria; with alpha_phi = 0
// it reduces to the pure argmax-phi1 rule.
inline int true_optimal_choice(const TruthOracle& oracle,
                               std::span<const double> z, double alpha_phi) {
  return select_treatment(oracle.phi1_all(z), oracle.phi2_all(z), alpha_phi)
      .chosen;
}

struct RepResult {
  std::map<PolicyId, PolicyValue> values;
};

struct PolicyStats {
  PolicyValue mean;
  PolicyValue sd;
  double v1_regret_mean = 0.0;  // v1(true_optimal) - v1(policy), averaged
  double v2_regret_mean = 0.0;  // v2(policy) - v2(true_optimal), averaged
};

struct BenchmarkSummary {
  std::map<PolicyId, PolicyStats> policies;
  std::vector<RepResult> per_rep;
  int n_reps = 0;
  std::size_t n_eval = 0;
  double wall_seconds = 0.0;
};

// Runs n_reps replications: generate training data, fit the requested
// policies, evaluate each on a fresh oracle-scored evaluation set, and
// aggregate in replication order. The true-optimal rule is always evaluated
// internally so regrets are available for every policy.
inline BenchmarkSummary run_benchmark(const Scenario& scenario,
                                      const ItrConfig& config, int n_reps,
                                      const std::set<PolicyId>& policies,
                                      std::size_t n_eval = 1000,
                                      unsigned n_threads = 0) {
  if (n_reps < 1) throw std::invalid_argument("n_reps must be >= 1");
  scenario.validate();
  config.validate();
  auto started = std::chrono::steady_clock::now();

  unsigned total = detail::resolve_threads(n_threads);
  unsigned rep_workers =
      std::min<unsigned>(total, static_cast<unsigned>(n_reps));
  unsigned fit_threads = rep_workers == 0 ? 1 : total / rep_workers;
  if (fit_threads == 0) fit_threads = 1;

  std::vector<RepResult> reps(static_cast<std::size_t>(n_reps));
  detail::parallel_for(
      reps.size(), rep_workers, [&](std::size_t rep) {
        std::uint64_t train_seed = detail::mix_seed(scenario.seed, rep, 1);
        std::uint64_t eval_seed = detail::mix_seed(scenario.seed, rep, 2);

        SimulatedData train = generate(scenario, train_seed);
        auto eval_set = make_eval_set(scenario, n_eval, eval_seed);
        const TruthOracle& oracle = train.oracle;
        RepResult& result = reps[rep];

        auto evaluate = [&](auto&& choose) {
          return policy_value(choose, eval_set, oracle);
        };

        result.values[PolicyId::TrueOptimal] =
            evaluate([&](const EvalSubject& s) {
              return true_optimal_choice(oracle, s.z, config.alpha_phi);
            });
        if (policies.count(PolicyId::Proposed)) {
          ItrConfig rep_config = config;
          rep_config.forest_params.seed =
              detail::mix_seed(config.forest_params.seed, rep, 3);
          ItrModel model = fit_itr(train.dataset, rep_config, fit_threads);
          result.values[PolicyId::Proposed] =
              evaluate([&](const EvalSubject& s) {
                return recommend(model, s.z).chosen;
              });
        }
        if (policies.count(PolicyId::ZeroOrder)) {
          int constant = zero_order_policy(train.dataset, config).first;
          result.values[PolicyId::ZeroOrder] =
              evaluate([&](const EvalSubject&) { return constant; });
        }
        if (policies.count(PolicyId::Observed)) {
          result.values[PolicyId::Observed] =
              evaluate([&](const EvalSubject& s) {
                return s.observed_treatment;
              });
        }
      });

  BenchmarkSummary summary;
  summary.per_rep = std::move(reps);
  summary.n_reps = n_reps;
  summary.n_eval = n_eval;

  std::set<PolicyId> reported = policies;
  reported.insert(PolicyId::TrueOptimal);
  for (PolicyId id : reported) {
    PolicyStats stats;
    double s1 = 0.0, s2 = 0.0, q1 = 0.0, q2 = 0.0, r1 = 0.0, r2 = 0.0;
    for (const auto& rep : summary.per_rep) {
      const PolicyValue& v = rep.values.at(id);
      const PolicyValue& t = rep.values.at(PolicyId::TrueOptimal);
      s1 += v.v1;
      s2 += v.v2;
      q1 += v.v1 * v.v1;
      q2 += v.v2 * v.v2;
      r1 += t.v1 - v.v1;
      r2 += v.v2 - t.v2;
    }
    double n = static_cast<double>(n_reps);
    stats.mean.v1 = s1 / n;
    stats.mean.v2 = s2 / n;
    stats.mean.n_eval = n_eval;
    if (n_reps > 1) {
      double var1 = (q1 - n * stats.mean.v1 * stats.mean.v1) / (n - 1.0);
      double var2 = (q2 - n * stats.mean.v2 * stats.mean.v2) / (n - 1.0);
      stats.sd.v1 = std::sqrt(std::max(0.0, var1));
      stats.sd.v2 = std::sqrt(std::max(0.0, var2));
    }
    stats.v1_regret_mean = r1 / n;
    stats.v2_regret_mean = r2 / n;
    summary.policies[id] = stats;
  }

  summary.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  return summary;
}

// summary.csv: one row per (policy, metric) with mean and sd across
// replications.
inline std::string summary_csv(const BenchmarkSummary& summary) {
  std::ostringstream out;
  out << "# itrcr-benchmark-summary v1\n";
  out << "policy,metric,mean,sd,n_reps\n";
  for (const auto& [id, stats] : summary.policies) {
    auto row = [&](const std::string& metric, double mean, double sd) {
      out << policy_name(id) << "," << metric << ","
          << detail::format_double(mean) << "," << detail::format_double(sd)
          << "," << summary.n_reps << "\n";
    };
    row("v1", stats.mean.v1, stats.sd.v1);
    row("v2", stats.mean.v2, stats.sd.v2);
    row("v1_regret", stats.v1_regret_mean, 0.0);
    row("v2_regret", stats.v2_regret_mean, 0.0);
  }
  return out.str();
}

// per_rep.csv: one row per (replication, policy).
inline std::string per_rep_csv(const BenchmarkSummary& summary) {
  std::ostringstream out;
  out << "# itrcr-benchmark-per-rep v1\n";
  out << "rep,policy,v1,v2,n_eval\n";
  for (std::size_t rep = 0; rep < summary.per_rep.size(); ++rep) {
    for (const auto& [id, value] : summary.per_rep[rep].values) {
      out << (rep + 1) << "," << policy_name(id) << ","
          << detail::format_double(value.v1) << ","
          << detail::format_double(value.v2) << "," << value.n_eval << "\n";
    }
  }
  return out.str();
}

// Aligned-text table for terminals.
inline std::string summary_table(const BenchmarkSummary& summary) {
  std::ostringstream out;
  out << "policy         mean_v1     sd_v1       mean_v2     sd_v2       "
         "v1_regret   v2_regret\n";
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  auto num = [&](double v) {
    std::ostringstream cell;
    cell.setf(std::ios::fixed);
    cell.precision(6);
    cell << v;
    return pad(cell.str(), 12);
  };
  for (const auto& [id, stats] : summary.policies) {
    out << pad(policy_name(id), 15) << num(stats.mean.v1) << num(stats.sd.v1)
        << num(stats.mean.v2) << num(stats.sd.v2)
        << num(stats.v1_regret_mean) << num(stats.v2_regret_mean) << "\n";
  }
  out << "replications: " << summary.n_reps
      << ", eval subjects per replication: " << summary.n_eval
      << ", wall seconds: ";
  out.setf(std::ios::fixed);
  out.precision(2);
  out << summary.wall_seconds << "\n";
  return out.str();
}

}  // namespace itrcr
