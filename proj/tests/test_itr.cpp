#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <random>
#include <vector>

#include "itrcr/itr.hpp"
#include "testutil.hpp"

using itrcr::CompetingRisksDataset;
using itrcr::ItrConfig;
using itrcr::ItrModel;
using itrcr::Phase;
using itrcr::PhaseTrace;
using itrcr::Status;
using itrcr::Subject;

namespace {

CompetingRisksDataset two_arm_dataset(std::mt19937_64& rng, std::size_t n,
                                      double tau) {
  auto arm0 = testutil::random_subjects(rng, n / 2, 2, 0);
  auto arm1 = testutil::random_subjects(rng, n - n / 2, 2, 1);
  std::vector<Subject> all;
  all.insert(all.end(), arm0.begin(), arm0.end());
  all.insert(all.end(), arm1.begin(), arm1.end());
  return CompetingRisksDataset(std::move(all), {0, 1}, tau);
}

ItrConfig small_config(std::uint64_t seed) {
  ItrConfig config;
  config.alpha_phi = 0.07;
  config.forest_params.n_tree = 8;
  config.forest_params.n_min = 5;
  config.forest_params.n_minevent = 1;
  config.forest_params.seed = seed;
  return config;
}

}  // namespace

TEST_CASE("select_treatment applies the tolerance condition", "[itr]") {
  // phi1 = {A: 10, B: 9.4}: 1 - 9.4/10 = 0.06 <= 0.07, so both survive
  // Phase 1 and Phase 2 picks the smaller phi2.
  std::map<int, double> phi1{{0, 10.0}, {1, 9.4}};
  std::map<int, double> phi2{{0, 3.0}, {1, 1.0}};
  auto trace = itrcr::select_treatment(phi1, phi2, 0.07);
  CHECK(trace.v1_star == 10.0);
  CHECK(trace.a1_star == 0);
  CHECK(trace.tolerance_set == std::vector<int>{0, 1});
  CHECK(trace.chosen == 1);
  CHECK(trace.phase == Phase::Two);

  // A tighter tolerance excludes B.
  auto tight = itrcr::select_treatment(phi1, phi2, 0.05);
  CHECK(tight.tolerance_set == std::vector<int>{0});
  CHECK(tight.chosen == 0);
  CHECK(tight.phase == Phase::One);
}

TEST_CASE("select_treatment breaks ties by the lowest label", "[itr]") {
  std::map<int, double> phi1{{1, 5.0}, {3, 5.0}, {7, 5.0}};
  std::map<int, double> phi2{{1, 2.0}, {3, 2.0}, {7, 2.0}};
  auto trace = itrcr::select_treatment(phi1, phi2, 0.07);
  CHECK(trace.a1_star == 1);
  CHECK(trace.chosen == 1);
}

TEST_CASE("select_treatment properties on random criteria",
          "[itr][property]") {
  std::mt19937_64 rng(1123);
  std::uniform_real_distribution<double> phi_dist(0.5, 10.0);
  std::uniform_real_distribution<double> alpha_dist(0.01, 0.6);
  for (int trial = 0; trial < 500; ++trial) {
    std::map<int, double> phi1, phi2;
    int arms = 2 + static_cast<int>(trial % 3);
    for (int a = 0; a < arms; ++a) {
      phi1[a] = phi_dist(rng);
      phi2[a] = phi_dist(rng);
    }
    double lo = alpha_dist(rng);
    double hi = std::min(0.99, lo + alpha_dist(rng));

    auto t_lo = itrcr::select_treatment(phi1, phi2, lo);
    auto t_hi = itrcr::select_treatment(phi1, phi2, hi);

    // a1* always belongs to the tolerance set (checked internally too).
    REQUIRE(std::find(t_lo.tolerance_set.begin(), t_lo.tolerance_set.end(),
                      t_lo.a1_star) != t_lo.tolerance_set.end());

    // Monotonicity: A^s(lo) is a subset of A^s(hi).
    for (int a : t_lo.tolerance_set)
      REQUIRE(std::find(t_hi.tolerance_set.begin(), t_hi.tolerance_set.end(),
                        a) != t_hi.tolerance_set.end());

    // The chosen phi2 is nonincreasing in alpha.
    REQUIRE(phi2.at(t_hi.chosen) <= phi2.at(t_lo.chosen));

    // Scale invariance of the tolerance condition.
    std::map<int, double> scaled;
    for (const auto& [a, v] : phi1) scaled[a] = v * 37.5;
    auto t_scaled = itrcr::select_treatment(scaled, phi2, lo);
    REQUIRE(t_scaled.tolerance_set == t_lo.tolerance_set);
    REQUIRE(t_scaled.chosen == t_lo.chosen);
  }
}

TEST_CASE("fit_itr builds one forest pair per arm", "[itr]") {
  std::mt19937_64 rng(808);
  auto ds = two_arm_dataset(rng, 60, 3.0);
  auto model = itrcr::fit_itr(ds, small_config(4), 2);
  CHECK(model.survival_forests.size() == 2);
  CHECK(model.cif_forests.size() == 2);
  CHECK(model.treatment_space == std::vector<int>{0, 1});
  CHECK(model.config.tau == 3.0);  // inherited from the dataset
}

TEST_CASE("fit_itr names the offending arm", "[itr]") {
  std::mt19937_64 rng(9);
  auto subjects = testutil::random_subjects(rng, 20, 2, 0);
  CompetingRisksDataset ds(subjects, {0, 1}, 2.0);  // arm 1 never observed
  CHECK_THROWS_WITH(itrcr::fit_itr(ds, small_config(1)),
                    Catch::Matchers::ContainsSubstring("arm 1"));
}

TEST_CASE("fit_itr is seed-deterministic", "[itr][determinism]") {
  std::mt19937_64 rng(321);
  auto ds = two_arm_dataset(rng, 50, 3.0);
  auto a = itrcr::fit_itr(ds, small_config(77), 1);
  auto b = itrcr::fit_itr(ds, small_config(77), 4);
  CHECK(itrcr::model_to_json(a).dump() == itrcr::model_to_json(b).dump());
  auto c = itrcr::fit_itr(ds, small_config(78), 1);
  CHECK(itrcr::model_to_json(a).dump() != itrcr::model_to_json(c).dump());
}

TEST_CASE("recommend honors the feasible set", "[itr]") {
  std::mt19937_64 rng(2024);
  auto ds = two_arm_dataset(rng, 60, 3.0);
  auto model = itrcr::fit_itr(ds, small_config(12));
  std::vector<double> z{0.4, 0.6};

  std::vector<int> only_one{1};
  auto forced = itrcr::recommend(model, z, only_one);
  CHECK(forced.chosen == 1);
  CHECK(forced.phase == Phase::One);
  CHECK(forced.phi1.size() == 1);

  auto full = itrcr::recommend(model, z);
  // Idempotence: restricting to the chosen arm returns it.
  std::vector<int> chosen_only{full.chosen};
  CHECK(itrcr::recommend(model, z, chosen_only).chosen == full.chosen);

  std::vector<int> empty;
  CHECK_THROWS(itrcr::recommend(model, z, empty));
}

TEST_CASE("alpha -> 0 collapses recommend to argmax phi1", "[itr]") {
  std::mt19937_64 rng(515);
  auto ds = two_arm_dataset(rng, 60, 3.0);
  auto model = itrcr::fit_itr(ds, small_config(3));
  model.config.alpha_phi = 0.0;  // evaluate the fitted rule at zero tolerance
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> z{unit(rng), unit(rng)};
    auto trace = itrcr::recommend(model, z);
    if (trace.phi1.at(0) != trace.phi1.at(1)) {
      int argmax = trace.phi1.at(0) > trace.phi1.at(1) ? 0 : 1;
      REQUIRE(trace.chosen == argmax);
      REQUIRE(trace.a1_star == argmax);
    }
  }
}

TEST_CASE("zero-order policy on a hand-computed fixture", "[itr][oracle]") {
  // Arm 0: events at 1..5 -> phi1 = 1 + 0.8 + 0.6 + 0.4 + 0.2 = 3 on [0,5],
  //        all cause 1 -> phi2 = 0.2 + 0.4 + 0.6 + 0.8 = 2.
  // Arm 1: events at 6..10 -> S = 1 on [0,5] -> phi1 = 5, phi2 = 0.
  // 1 - 3/5 = 0.4 > 0.07, so Phase 1 picks arm 1.
  std::vector<Subject> subjects;
  for (int i = 1; i <= 5; ++i) {
    Subject s;
    s.id = std::to_string(i);
    s.time = i;
    s.status = Status::Cause1;
    s.treatment = 0;
    s.covariates = {0.5};
    subjects.push_back(s);
  }
  for (int i = 6; i <= 10; ++i) {
    Subject s;
    s.id = std::to_string(i);
    s.time = i;
    s.status = Status::Cause1;
    s.treatment = 1;
    s.covariates = {0.5};
    subjects.push_back(s);
  }
  CompetingRisksDataset ds(std::move(subjects), {0, 1}, 5.0);
  auto [label, trace] = itrcr::zero_order_policy(ds, small_config(1));
  CHECK(label == 1);
  CHECK(trace.phase == Phase::One);
  CHECK(trace.v1_star == 5.0);
  CHECK(trace.phi1.at(0) == Catch::Approx(3.0).margin(1e-12));
  CHECK(trace.phi2.at(0) == Catch::Approx(2.0).margin(1e-12));
  CHECK(trace.phi2.at(1) == 0.0);
  CHECK(trace.tolerance_set == std::vector<int>{1});
}

TEST_CASE("zero-order equals recommend with degenerate forests",
          "[itr][oracle]") {
  std::mt19937_64 rng(31415);
  auto ds = two_arm_dataset(rng, 40, 3.0);
  auto config = small_config(6);
  config.forest_params.n_min = 1000;
  config.forest_params.subsample_fraction = 1.0;
  auto model = itrcr::fit_itr(ds, config);
  auto [label, trace] = itrcr::zero_order_policy(ds, config);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 5; ++i) {
    std::vector<double> z{unit(rng), unit(rng)};
    auto rec = itrcr::recommend(model, z);
    REQUIRE(rec.chosen == label);
    REQUIRE(rec.phi1 == trace.phi1);  // bitwise: pooled curves either way
    REQUIRE(rec.phi2 == trace.phi2);
  }
}

TEST_CASE("model JSON round trip preserves recommendations", "[itr][io]") {
  std::mt19937_64 rng(112);
  auto ds = two_arm_dataset(rng, 50, 3.0);
  auto model = itrcr::fit_itr(ds, small_config(10));
  auto j = itrcr::model_to_json(model);
  auto back = itrcr::model_from_json(j);
  CHECK(itrcr::model_to_json(back).dump() == j.dump());

  std::vector<double> z{0.25, 0.75};
  auto a = itrcr::recommend(model, z);
  auto b = itrcr::recommend(back, z);
  CHECK(a.chosen == b.chosen);
  CHECK(a.phi1 == b.phi1);

  auto bad = j;
  bad["schema_version"] = 99;
  CHECK_THROWS_AS(itrcr::model_from_json(bad), itrcr::DataError);
}

TEST_CASE("policy CSV lists every arm's criteria", "[itr][io]") {
  PhaseTrace trace;
  trace.phi1 = {{0, 1.5}, {1, 2.5}};
  trace.phi2 = {{0, 0.5}, {1, 0.25}};
  trace.v1_star = 2.5;
  trace.a1_star = 1;
  trace.tolerance_set = {1};
  trace.chosen = 1;
  trace.phase = Phase::One;
  auto csv = itrcr::policy_csv({0, 1}, {{"s1", trace}});
  CHECK(csv.find("# itrcr-policy v1") == 0);
  CHECK(csv.find("id,chosen,phase,v1_star,phi1_0,phi1_1,phi2_0,phi2_1") !=
        std::string::npos);
  CHECK(csv.find("s1,1,1,2.5,1.5,2.5,0.5,0.25") != std::string::npos);
}
