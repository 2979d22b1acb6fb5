#pragma once

// Two-phase tolerance-constrained individualized treatment rule: Phase 1
// maximizes the truncated area under conditional overall survival; among
// treatments within a relative tolerance alpha_phi of the best, Phase 2
// minimizes the truncated area under the priority-cause CIF.

#include <algorithm>
#include <cstddef>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "itrcr/detail/check.hpp"
#include "itrcr/detail/rng.hpp"
#include "itrcr/forest.hpp"

#include "json.hpp"

namespace itrcr {

struct ItrConfig {
  double alpha_phi = 0.07;
  double tau = 0.0;  // 0 means: take the horizon from the dataset
  ForestParams forest_params;

  void validate() const {
    if (!(alpha_phi > 0.0) || !(alpha_phi < 1.0))
      throw std::invalid_argument("alpha_phi must lie in (0, 1)");
    forest_params.validate();
  }

  bool operator==(const ItrConfig&) const = default;
};

enum class Phase { One, Two };

struct PhaseTrace {
  std::map<int, double> phi1;
  std::map<int, double> phi2;
  double v1_star = 0.0;
  int a1_star = 0;
  std::vector<int> tolerance_set;
  int chosen = 0;
  Phase phase = Phase::One;
};

// The shared two-phase selection core. Ties at the argmax/argmin break to
// the lowest treatment label. alpha_phi = 0 is accepted here so callers can
// collapse the tolerance to a pure Phase-1 rule.
inline PhaseTrace select_treatment(const std::map<int, double>& phi1,
                                   const std::map<int, double>& phi2,
                                   double alpha_phi) {
  ITRCR_CHECK(!phi1.empty() && phi1.size() == phi2.size(),
              "select_treatment: empty or mismatched criterion maps");
  PhaseTrace trace;
  trace.phi1 = phi1;
  trace.phi2 = phi2;

  bool first = true;
  for (const auto& [a, v] : phi1) {
    if (first || v > trace.v1_star) {
      trace.v1_star = v;
      trace.a1_star = a;
      first = false;
    }
  }
  ITRCR_CHECK(trace.v1_star > 0.0, "V1* must be positive for valid curves");

  const double floor = (1.0 - alpha_phi) * trace.v1_star;
  for (const auto& [a, v] : phi1)
    if (v >= floor) trace.tolerance_set.push_back(a);
  ITRCR_CHECK(std::find(trace.tolerance_set.begin(),
                        trace.tolerance_set.end(),
                        trace.a1_star) != trace.tolerance_set.end(),
              "a1* must belong to the tolerance set");

  if (trace.tolerance_set.size() == 1) {
    trace.chosen = trace.a1_star;
    trace.phase = Phase::One;
    return trace;
  }
  trace.phase = Phase::Two;
  bool first2 = true;
  double best = 0.0;
  for (int a : trace.tolerance_set) {
    double v = phi2.at(a);
    if (first2 || v < best) {
      best = v;
      trace.chosen = a;
      first2 = false;
    }
  }
  return trace;
}

// Per-arm RSF + RCIF pair plus the tolerance configuration.
struct ItrModel {
  ItrConfig config;
  std::vector<int> treatment_space;
  std::map<int, Forest> survival_forests;
  std::map<int, Forest> cif_forests;

  std::size_t n_features() const {
    return survival_forests.begin()->second.n_features;
  }
};

// Fits one survival forest and one cause-1 CIF forest per treatment arm.
// Each forest's stream is derived deterministically from (seed, arm, kind).
inline ItrModel fit_itr(const CompetingRisksDataset& ds,
                        const ItrConfig& config, unsigned n_threads = 0) {
  config.validate();
  ItrModel model;
  model.config = config;
  if (model.config.tau <= 0.0) model.config.tau = ds.tau();
  model.treatment_space = ds.treatment_space();

  for (int arm : model.treatment_space) {
    auto arm_data = ds.restrict_to_arm(arm);
    if (arm_data.n() == 0)
      throw FitError("empty treatment arm " + std::to_string(arm));
    bool any_event = false;
    for (const auto& s : arm_data.subjects())
      if (s.status != Status::Censored) any_event = true;
    if (!any_event)
      throw FitError("treatment arm " + std::to_string(arm) +
                     " has no events");

    const auto arm_key = static_cast<std::uint64_t>(
        static_cast<std::int64_t>(arm));
    ForestParams surv_params = config.forest_params;
    surv_params.seed = detail::mix_seed(config.forest_params.seed, arm_key, 1);
    ForestParams cif_params = config.forest_params;
    cif_params.seed = detail::mix_seed(config.forest_params.seed, arm_key, 2);

    model.survival_forests.emplace(
        arm,
        fit_forest(arm_data, OutcomeKind::Survival, surv_params, n_threads));
    model.cif_forests.emplace(
        arm,
        fit_forest(arm_data, OutcomeKind::Cause1Cif, cif_params, n_threads));
  }
  return model;
}

// Evaluates both criteria on the feasible arms and applies the two-phase
// rule.
inline PhaseTrace recommend(const ItrModel& model, std::span<const double> z,
                            std::span<const int> feasible) {
  if (feasible.empty())
    throw std::invalid_argument("recommend: empty feasible set");
  std::map<int, double> phi1;
  std::map<int, double> phi2;
  for (int a : feasible) {
    auto s_it = model.survival_forests.find(a);
    auto c_it = model.cif_forests.find(a);
    if (s_it == model.survival_forests.end() ||
        c_it == model.cif_forests.end())
      throw std::invalid_argument("recommend: treatment " + std::to_string(a) +
                                  " not in the fitted treatment space");
    phi1[a] = truncated_auc(predict_curve(s_it->second, z), model.config.tau);
    phi2[a] = truncated_auc(predict_curve(c_it->second, z), model.config.tau);
  }
  return select_treatment(phi1, phi2, model.config.alpha_phi);
}

inline PhaseTrace recommend(const ItrModel& model, std::span<const double> z) {
  return recommend(model, z, model.treatment_space);
}

// Covariate-free baseline: the same two-phase rule on the per-arm pooled
// Kaplan-Meier / Aalen-Johansen curves, yielding one treatment for everyone.
inline std::pair<int, PhaseTrace> zero_order_policy(
    const CompetingRisksDataset& ds, const ItrConfig& config) {
  config.validate();
  double tau = config.tau > 0.0 ? config.tau : ds.tau();
  std::map<int, double> phi1;
  std::map<int, double> phi2;
  for (int arm : ds.treatment_space()) {
    std::vector<WeightedSample> samples;
    for (const auto& s : ds.subjects())
      if (s.treatment == arm) samples.push_back({s.time, s.status, 1.0});
    if (samples.empty())
      throw FitError("empty treatment arm " + std::to_string(arm));
    bool any_event = false;
    for (const auto& s : samples)
      if (s.status != Status::Censored) any_event = true;
    if (!any_event)
      throw FitError("treatment arm " + std::to_string(arm) +
                     " has no events");
    phi1[arm] = truncated_auc(kaplan_meier(samples), tau);
    phi2[arm] = truncated_auc(aalen_johansen(samples, 1), tau);
  }
  PhaseTrace trace = select_treatment(phi1, phi2, config.alpha_phi);
  return {trace.chosen, trace};
}

// --- model serialization and the policy export format ---

inline nlohmann::json itr_config_to_json(const ItrConfig& c) {
  return nlohmann::json{{"alpha_phi", c.alpha_phi},
                        {"tau", c.tau},
                        {"forest_params", detail::params_to_json(c.forest_params)}};
}

inline ItrConfig itr_config_from_json(const nlohmann::json& j) {
  ItrConfig c;
  c.alpha_phi = j.at("alpha_phi").get<double>();
  c.tau = j.at("tau").get<double>();
  c.forest_params = detail::params_from_json(j.at("forest_params"));
  return c;
}

inline nlohmann::json model_to_json(const ItrModel& model) {
  nlohmann::json surv = nlohmann::json::object();
  nlohmann::json cif = nlohmann::json::object();
  for (const auto& [arm, forest] : model.survival_forests)
    surv[std::to_string(arm)] = forest_to_json(forest);
  for (const auto& [arm, forest] : model.cif_forests)
    cif[std::to_string(arm)] = forest_to_json(forest);
  return nlohmann::json{{"schema_version", 1},
                        {"config", itr_config_to_json(model.config)},
                        {"treatment_space", model.treatment_space},
                        {"survival_forests", std::move(surv)},
                        {"cif_forests", std::move(cif)}};
}

inline ItrModel model_from_json(const nlohmann::json& j) {
  if (j.value("schema_version", -1) != 1)
    throw DataError("unsupported model schema version");
  ItrModel model;
  model.config = itr_config_from_json(j.at("config"));
  model.treatment_space = j.at("treatment_space").get<std::vector<int>>();
  for (const auto& [key, forest] : j.at("survival_forests").items())
    model.survival_forests.emplace(std::stoi(key), forest_from_json(forest));
  for (const auto& [key, forest] : j.at("cif_forests").items())
    model.cif_forests.emplace(std::stoi(key), forest_from_json(forest));
  if (model.survival_forests.empty() ||
      model.survival_forests.size() != model.cif_forests.size())
    throw DataError("model forests incomplete");
  return model;
}

inline void save_model(const std::filesystem::path& path,
                       const ItrModel& model) {
  detail::atomic_write_file(path, model_to_json(model).dump() + "\n");
}

inline ItrModel load_model(const std::filesystem::path& path) {
  return model_from_json(nlohmann::json::parse(detail::read_file(path)));
}

// Per-subject recommendation CSV: id, chosen, phase, v1_star, then one
// phi1_<arm> and phi2_<arm> column per treatment label.
inline std::string policy_csv(
    const std::vector<int>& treatment_space,
    const std::vector<std::pair<std::string, PhaseTrace>>& rows) {
  std::ostringstream out;
  out << "# itrcr-policy v1\n";
  out << "id,chosen,phase,v1_star";
  for (int a : treatment_space) out << ",phi1_" << a;
  for (int a : treatment_space) out << ",phi2_" << a;
  out << "\n";
  for (const auto& [id, trace] : rows) {
    out << id << "," << trace.chosen << ","
        << (trace.phase == Phase::One ? 1 : 2) << ","
        << detail::format_double(trace.v1_star);
    for (int a : treatment_space) {
      auto it = trace.phi1.find(a);
      out << "," << (it == trace.phi1.end() ? std::string("")
                                            : detail::format_double(it->second));
    }
    for (int a : treatment_space) {
      auto it = trace.phi2.find(a);
      out << "," << (it == trace.phi2.end() ? std::string("")
                                            : detail::format_double(it->second));
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace itrcr
