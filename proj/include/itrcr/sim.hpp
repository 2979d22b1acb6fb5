#pragma once

// Data generators for the two simulation settings (independent exponential
// cause-specific hazards and the Fine-Gray subdistribution model), logistic
// treatment assignment, calibrated uniform censoring, and a closed-form /
// quadrature truth oracle for the criteria.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "itrcr/detail/check.hpp"
#include "itrcr/detail/numeric.hpp"
#include "itrcr/detail/rng.hpp"
#include "itrcr/survdata.hpp"

namespace itrcr {

enum class ScenarioKind { Exponential, FineGray };

inline std::string scenario_kind_name(ScenarioKind kind) {
  return kind == ScenarioKind::Exponential ? "exponential" : "finegray";
}

inline ScenarioKind scenario_kind_from_name(const std::string& name) {
  if (name == "exponential") return ScenarioKind::Exponential;
  if (name == "finegray") return ScenarioKind::FineGray;
  throw DataError("unknown scenario kind: " + name);
}

struct CensoringSpec {
  double target_rate = 0.0;  // 0 disables random censoring
};

struct Scenario {
  ScenarioKind kind = ScenarioKind::Exponential;
  int p = 2;
  int n = 500;
  double tau = 1.0;
  double mass_p = 0.5;  // Fine-Gray cause-1 ceiling parameter
  CensoringSpec censoring;
  std::uint64_t seed = 0;
  std::map<int, std::vector<double>> beta1;  // cause-1 coefficients per arm
  std::map<int, std::vector<double>> beta2;  // cause-2 coefficients per arm
  std::vector<double> beta_pi;  // length p+1, intercept first

  std::vector<int> arms() const {
    std::vector<int> out;
    for (const auto& [a, _] : beta1) out.push_back(a);
    return out;
  }

  void validate() const {
    if (p < 1) throw DataError("scenario: p must be >= 1");
    if (n < 1) throw DataError("scenario: n must be >= 1");
    if (!(tau > 0.0)) throw DataError("scenario: tau must be positive");
    if (beta1.empty()) throw DataError("scenario: no treatment arms");
    for (const auto& [a, b] : beta1)
      if (b.size() != static_cast<std::size_t>(p))
        throw DataError("scenario: beta1 length mismatch for arm " +
                        std::to_string(a));
    if (beta2.size() != beta1.size())
      throw DataError("scenario: beta1/beta2 arm sets differ");
    for (const auto& [a, b] : beta2) {
      if (!beta1.count(a))
        throw DataError("scenario: beta1/beta2 arm sets differ");
      if (b.size() != static_cast<std::size_t>(p))
        throw DataError("scenario: beta2 length mismatch for arm " +
                        std::to_string(a));
    }
    if (beta_pi.size() != static_cast<std::size_t>(p) + 1)
      throw DataError("scenario: beta_pi must have length p+1");
    if (kind == ScenarioKind::FineGray &&
        (!(mass_p > 0.0) || !(mass_p < 1.0)))
      throw DataError("scenario: mass_p must lie in (0, 1)");
    if (censoring.target_rate < 0.0 || censoring.target_rate >= 1.0)
      throw DataError("scenario: censor_rate must lie in [0, 1)");
  }
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

// Propensity pi(z) = 1 / (1 + exp(-(b0 + z'b))) with intercept-augmented z;
// draws treatment 1 with probability pi.
inline double propensity(std::span<const double> z,
                         std::span<const double> beta_pi) {
  if (beta_pi.size() != z.size() + 1)
    throw std::invalid_argument("beta_pi must have length p+1");
  double eta = beta_pi[0] + detail::dot(z, beta_pi.subspan(1));
  return 1.0 / (1.0 + std::exp(-eta));
}

inline int assign_treatment(std::span<const double> z,
                            std::span<const double> beta_pi,
                            std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return unit(rng) < propensity(z, beta_pi) ? 1 : 0;
}

// Closed-form (Exponential) or model-formula (Fine-Gray) truth: conditional
// survival, cause CIFs, and the truncated-area criteria for any (z, a).
class TruthOracle {
 public:
  explicit TruthOracle(Scenario scenario) : scenario_(std::move(scenario)) {
    scenario_.validate();
  }

  const Scenario& scenario() const { return scenario_; }

  double survival(std::span<const double> z, int a, double t) const {
    if (scenario_.kind == ScenarioKind::Exponential) {
      auto [l1, l2] = exp_rates(z, a);
      return std::exp(-(l1 + l2) * t);
    }
    return 1.0 - cif1(z, a, t) - cif2(z, a, t);
  }

  double cif1(std::span<const double> z, int a, double t) const {
    if (scenario_.kind == ScenarioKind::Exponential) {
      auto [l1, l2] = exp_rates(z, a);
      double lambda = l1 + l2;
      return (l1 / lambda) * (1.0 - std::exp(-lambda * t));
    }
    double e1 = std::exp(detail::dot(z, scenario_.beta1.at(a)));
    return 1.0 -
           std::pow(1.0 - scenario_.mass_p * (1.0 - std::exp(-t)), e1);
  }

  double cif2(std::span<const double> z, int a, double t) const {
    if (scenario_.kind == ScenarioKind::Exponential) {
      auto [l1, l2] = exp_rates(z, a);
      double lambda = l1 + l2;
      return (l2 / lambda) * (1.0 - std::exp(-lambda * t));
    }
    double e1 = std::exp(detail::dot(z, scenario_.beta1.at(a)));
    double pi1 = 1.0 - std::pow(1.0 - scenario_.mass_p, e1);
    double l2 = std::exp(detail::dot(z, scenario_.beta2.at(a)));
    return (1.0 - pi1) * (1.0 - std::exp(-l2 * t));
  }

  // phi1 = integral of S on [0, tau]; closed form for the exponential
  // setting, adaptive quadrature (abs. tol. 1e-8) for Fine-Gray.
  double phi1(std::span<const double> z, int a) const {
    if (scenario_.kind == ScenarioKind::Exponential) {
      auto [l1, l2] = exp_rates(z, a);
      double lambda = l1 + l2;
      return (1.0 - std::exp(-lambda * scenario_.tau)) / lambda;
    }
    return detail::adaptive_simpson(
        [&](double t) { return survival(z, a, t); }, 0.0, scenario_.tau,
        1e-8);
  }

  // phi2 = integral of F1 on [0, tau].
  double phi2(std::span<const double> z, int a) const {
    if (scenario_.kind == ScenarioKind::Exponential) {
      auto [l1, l2] = exp_rates(z, a);
      double lambda = l1 + l2;
      double p1 = (1.0 - std::exp(-lambda * scenario_.tau)) / lambda;
      return (l1 / lambda) * (scenario_.tau - p1);
    }
    return detail::adaptive_simpson([&](double t) { return cif1(z, a, t); },
                                    0.0, scenario_.tau, 1e-8);
  }

  std::map<int, double> phi1_all(std::span<const double> z) const {
    std::map<int, double> out;
    for (int a : scenario_.arms()) out[a] = phi1(z, a);
    return out;
  }

  std::map<int, double> phi2_all(std::span<const double> z) const {
    std::map<int, double> out;
    for (int a : scenario_.arms()) out[a] = phi2(z, a);
    return out;
  }

 private:
  std::pair<double, double> exp_rates(std::span<const double> z, int a) const {
    return {std::exp(detail::dot(z, scenario_.beta1.at(a))),
            std::exp(detail::dot(z, scenario_.beta2.at(a)))};
  }

  Scenario scenario_;
};

struct ObservedOutcome {
  double time = 0.0;
  Status status = Status::Censored;
};

// Finds the Uniform(0, c_max) upper bound whose expected censoring
// proportion over the given event times (with administrative censoring at
// tau) matches the target, by bisection on the monotone expected rate.
inline double calibrate_uniform_cmax(std::span<const double> times, double tau,
                                     double target) {
  if (!(target > 0.0) || target >= 1.0)
    throw std::invalid_argument("target censoring rate must lie in (0, 1)");
  auto expected_rate = [&](double c_max) {
    double sum = 0.0;
    for (double t : times) {
      if (t > tau)
        sum += 1.0;
      else
        sum += std::min(t / c_max, 1.0);
    }
    return sum / static_cast<double>(times.size());
  };
  double admin_floor = 0.0;
  for (double t : times) admin_floor += t > tau ? 1.0 : 0.0;
  admin_floor /= static_cast<double>(times.size());
  if (target < admin_floor)
    throw FitError(
        "unattainable censoring rate: administrative censoring alone gives " +
        detail::format_double(admin_floor));

  double lo = 1e-12;
  double hi = tau;
  while (expected_rate(hi) > target && hi < 1e12) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (expected_rate(mid) > target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Applies independent Uniform(0, c_max) censoring (c_max calibrated against
// the sample itself) plus administrative censoring at tau:
// X = min(T, C, tau), status 0 iff min(C, tau) < T.
inline std::vector<ObservedOutcome> apply_censoring(
    std::span<const double> times, std::span<const Status> causes,
    const CensoringSpec& spec, double tau, std::mt19937_64& rng) {
  ITRCR_CHECK(times.size() == causes.size(),
              "apply_censoring: size mismatch");
  double c_max = 0.0;
  const bool random_censoring = spec.target_rate > 0.0;
  if (random_censoring)
    c_max = calibrate_uniform_cmax(times, tau, spec.target_rate);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ObservedOutcome> out(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    double censor = tau;
    if (random_censoring) censor = std::min(censor, c_max * unit(rng));
    if (censor < times[i]) {
      out[i] = {censor, Status::Censored};
    } else {
      out[i] = {times[i], causes[i]};
    }
  }
  return out;
}

struct SimulatedData {
  CompetingRisksDataset dataset;
  TruthOracle oracle;
};

namespace detail {

inline std::vector<double> draw_covariates(int p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> z(static_cast<std::size_t>(p));
  for (auto& v : z) v = unit(rng);
  return z;
}

// Inverse of the Fine-Gray cause-1 subdistribution by bisection: solves
// F1(t) = target for t, where F1(t) = 1 - (1 - q(1 - e^{-t}))^e1.
inline double finegray_invert_cause1(double target, double q, double e1) {
  auto f1 = [&](double t) {
    return 1.0 - std::pow(1.0 - q * (1.0 - std::exp(-t)), e1);
  };
  double lo = 0.0;
  double hi = 1.0;
  while (f1(hi) < target && hi < 1e12) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
    double mid = 0.5 * (lo + hi);
    if (f1(mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

struct RawDraw {
  std::vector<double> z;
  int treatment = 0;
  double time = 0.0;
  Status cause = Status::Cause1;
};

template <typename DrawFailure>
SimulatedData generate_with(const Scenario& scenario, std::uint64_t seed,
                            DrawFailure&& draw_failure) {
  auto rng = make_engine(mix_seed(seed, 0x5ECE5CE5u));
  std::vector<RawDraw> draws;
  draws.reserve(static_cast<std::size_t>(scenario.n));
  for (int i = 0; i < scenario.n; ++i) {
    RawDraw d;
    d.z = draw_covariates(scenario.p, rng);
    d.treatment = assign_treatment(d.z, scenario.beta_pi, rng);
    auto [t, cause] = draw_failure(d.z, d.treatment, rng);
    d.time = t;
    d.cause = cause;
    draws.push_back(std::move(d));
  }

  std::vector<double> times;
  std::vector<Status> causes;
  for (const auto& d : draws) {
    times.push_back(d.time);
    causes.push_back(d.cause);
  }
  auto observed = apply_censoring(times, causes, scenario.censoring,
                                  scenario.tau, rng);

  std::vector<Subject> subjects;
  subjects.reserve(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) {
    Subject s;
    s.id = std::to_string(i + 1);
    s.time = observed[i].time;
    s.status = observed[i].status;
    s.treatment = draws[i].treatment;
    s.covariates = std::move(draws[i].z);
    subjects.push_back(std::move(s));
  }

  std::vector<int> arms;
  for (const auto& [a, _] : scenario.beta1) arms.push_back(a);
  CompetingRisksDataset ds(std::move(subjects), std::move(arms), scenario.tau);
  return SimulatedData{std::move(ds), TruthOracle(scenario)};
}

}  // namespace detail

// Independent exponential cause-specific failure times: lambda_j(z, a) =
// exp(z' beta_j(a)), T = min(T1, T2), cause by the argmin.
inline SimulatedData gen_exponential(const Scenario& scenario,
                                     std::optional<std::uint64_t> seed = {}) {
  scenario.validate();
  if (scenario.kind != ScenarioKind::Exponential)
    throw std::invalid_argument("gen_exponential: scenario kind mismatch");
  return detail::generate_with(
      scenario, seed.value_or(scenario.seed),
      [&](std::span<const double> z, int a, std::mt19937_64& rng) {
        double l1 = std::exp(detail::dot(z, scenario.beta1.at(a)));
        double l2 = std::exp(detail::dot(z, scenario.beta2.at(a)));
        std::exponential_distribution<double> d1(l1);
        std::exponential_distribution<double> d2(l2);
        double t1 = d1(rng);
        double t2 = d2(rng);
        return std::pair<double, Status>(std::min(t1, t2),
                                         t1 <= t2 ? Status::Cause1
                                                  : Status::Cause2);
      });
}

// Fine-Gray subdistribution model: cause 1 occurs with probability
// pi1(z, a) = 1 - (1 - mass_p)^{exp(z' beta1(a))}; given cause 1, the time
// solves the subdistribution CDF by inverse transform; given cause 2, the
// time is exponential with rate exp(z' beta2(a)).
inline SimulatedData gen_finegray(const Scenario& scenario,
                                  std::optional<std::uint64_t> seed = {}) {
  scenario.validate();
  if (scenario.kind != ScenarioKind::FineGray)
    throw std::invalid_argument("gen_finegray: scenario kind mismatch");
  return detail::generate_with(
      scenario, seed.value_or(scenario.seed),
      [&](std::span<const double> z, int a, std::mt19937_64& rng) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        double e1 = std::exp(detail::dot(z, scenario.beta1.at(a)));
        double pi1 = 1.0 - std::pow(1.0 - scenario.mass_p, e1);
        if (unit(rng) < pi1) {
          double target = unit(rng) * pi1;
          double t = detail::finegray_invert_cause1(target, scenario.mass_p,
                                                    e1);
          return std::pair<double, Status>(t, Status::Cause1);
        }
        double l2 = std::exp(detail::dot(z, scenario.beta2.at(a)));
        std::exponential_distribution<double> d2(l2);
        return std::pair<double, Status>(d2(rng), Status::Cause2);
      });
}

inline SimulatedData generate(const Scenario& scenario,
                              std::optional<std::uint64_t> seed = {}) {
  return scenario.kind == ScenarioKind::Exponential
             ? gen_exponential(scenario, seed)
             : gen_finegray(scenario, seed);
}

// --- flat key=value scenario files ---

inline Scenario load_scenario(const std::filesystem::path& path) {
  Scenario s;
  s.beta_pi.clear();
  std::map<std::string, std::string> kv;
  for (const auto& raw : detail::read_lines(path)) {
    std::string line = raw;
    if (auto pos = line.find('#'); pos != std::string::npos)
      line.resize(pos);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t'))
      line.pop_back();
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError(path.string() + ": expected key=value, got '" + line +
                      "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }

  auto parse_vec = [&](const std::string& text) {
    std::vector<double> out;
    for (const auto& tok : detail::split(text, ','))
      out.push_back(detail::parse_double(tok, path.string()));
    return out;
  };

  for (const auto& [key, value] : kv) {
    if (key == "kind") {
      s.kind = scenario_kind_from_name(value);
    } else if (key == "p") {
      s.p = static_cast<int>(detail::parse_int(value, "p"));
    } else if (key == "n") {
      s.n = static_cast<int>(detail::parse_int(value, "n"));
    } else if (key == "tau") {
      s.tau = detail::parse_double(value, "tau");
    } else if (key == "mass_p") {
      s.mass_p = detail::parse_double(value, "mass_p");
    } else if (key == "censor_rate") {
      s.censoring.target_rate = detail::parse_double(value, "censor_rate");
    } else if (key == "seed") {
      s.seed = static_cast<std::uint64_t>(detail::parse_int(value, "seed"));
    } else if (key == "beta_pi") {
      s.beta_pi = parse_vec(value);
    } else if (key.rfind("beta1_a", 0) == 0) {
      int arm = static_cast<int>(detail::parse_int(key.substr(7), key));
      s.beta1[arm] = parse_vec(value);
    } else if (key.rfind("beta2_a", 0) == 0) {
      int arm = static_cast<int>(detail::parse_int(key.substr(7), key));
      s.beta2[arm] = parse_vec(value);
    } else {
      throw DataError(path.string() + ": unknown scenario key '" + key + "'");
    }
  }
  s.validate();
  return s;
}

inline std::string scenario_text(const Scenario& s) {
  std::ostringstream out;
  out << "kind=" << scenario_kind_name(s.kind) << "\n";
  out << "p=" << s.p << "\n";
  out << "n=" << s.n << "\n";
  out << "tau=" << detail::format_double(s.tau) << "\n";
  if (s.kind == ScenarioKind::FineGray)
    out << "mass_p=" << detail::format_double(s.mass_p) << "\n";
  out << "censor_rate=" << detail::format_double(s.censoring.target_rate)
      << "\n";
  out << "seed=" << s.seed << "\n";
  auto write_vec = [&](const std::string& key,
                       const std::vector<double>& v) {
    out << key << "=";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out << ",";
      out << detail::format_double(v[i]);
    }
    out << "\n";
  };
  write_vec("beta_pi", s.beta_pi);
  for (const auto& [a, b] : s.beta1)
    write_vec("beta1_a" + std::to_string(a), b);
  for (const auto& [a, b] : s.beta2)
    write_vec("beta2_a" + std::to_string(a), b);
  return out.str();
}

inline void save_scenario(const std::filesystem::path& path,
                          const Scenario& s) {
  detail::atomic_write_file(path, scenario_text(s));
}

}  // namespace itrcr
