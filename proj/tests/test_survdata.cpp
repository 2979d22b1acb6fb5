#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <string>
#include <vector>

#include "itrcr/detail/io.hpp"
#include "itrcr/survdata.hpp"
#include "testutil.hpp"

using itrcr::CompetingRisksDataset;
using itrcr::DataError;
using itrcr::Status;
using itrcr::Subject;

namespace {

void write(const std::filesystem::path& path, const std::string& content) {
  itrcr::detail::atomic_write_file(path, content);
}

}  // namespace

TEST_CASE("load_dataset maps a small CSV", "[survdata]") {
  testutil::TempDir dir("load");
  auto path = dir.file("data.csv");
  write(path,
        "time,status,treatment,z1,z2\n"
        "1.5,1,0,0.1,0.9\n"
        "2.0,0,1,0.2,0.8\n"
        "0.5,1,0,0.3,0.7\n"
        "3.5,0,1,0.4,0.6\n");
  auto ds = itrcr::load_dataset(path, {}, 3.0);
  REQUIRE(ds.n() == 4);
  CHECK(ds.p() == 2);
  CHECK(ds.tau() == 3.0);
  CHECK(ds.treatment_space() == std::vector<int>{0, 1});
  int events = 0;
  int censored = 0;
  for (const auto& s : ds.subjects())
    (s.status == Status::Censored ? censored : events)++;
  CHECK(events == 2);
  CHECK(censored == 2);
  CHECK(ds.subjects()[0].id == "1");  // row order preserved
  CHECK(ds.subjects()[2].time == 0.5);
}

TEST_CASE("load_dataset reports bad rows by index", "[survdata]") {
  testutil::TempDir dir("badrows");

  auto bad_status = dir.file("s.csv");
  std::string body = "time,status,treatment,z1\n";
  for (int i = 1; i <= 6; ++i) body += "1,1,0,0.5\n";
  body += "1,3,0,0.5\n";
  write(bad_status, body);
  CHECK_THROWS_WITH(itrcr::load_dataset(bad_status, {}, 1.0),
                    Catch::Matchers::ContainsSubstring("row 7"));

  auto bad_cell = dir.file("c.csv");
  write(bad_cell, "time,status,treatment,z1\n1,1,0,abc\n");
  CHECK_THROWS_WITH(itrcr::load_dataset(bad_cell, {}, 1.0),
                    Catch::Matchers::ContainsSubstring("non-numeric"));

  auto bad_time = dir.file("t.csv");
  write(bad_time, "time,status,treatment,z1\n-1,1,0,0.5\n");
  CHECK_THROWS_WITH(itrcr::load_dataset(bad_time, {}, 1.0),
                    Catch::Matchers::ContainsSubstring("negative time"));
}

TEST_CASE("load_dataset rejects missing columns and empty files",
          "[survdata]") {
  testutil::TempDir dir("missing");
  auto no_status = dir.file("n.csv");
  write(no_status, "time,treatment,z1\n1,0,0.5\n");
  CHECK_THROWS_WITH(itrcr::load_dataset(no_status, {}, 1.0),
                    Catch::Matchers::ContainsSubstring("missing column"));

  auto header_only = dir.file("h.csv");
  write(header_only, "time,status,treatment,z1\n");
  CHECK_THROWS_WITH(itrcr::load_dataset(header_only, {}, 1.0),
                    Catch::Matchers::ContainsSubstring("no subjects"));
}

TEST_CASE("tau defaults to the 0.95 quantile with a warning", "[survdata]") {
  testutil::TempDir dir("tau");
  auto path = dir.file("d.csv");
  std::string body = "time,status,treatment,z1\n";
  for (int i = 1; i <= 20; ++i)
    body += std::to_string(i) + ",1,0,0.5\n";
  write(path, body);
  std::vector<std::string> warnings;
  auto ds = itrcr::load_dataset(path, {}, std::nullopt, &warnings);
  REQUIRE(warnings.size() == 1);
  CHECK(ds.tau() == 19.0);  // ceil(0.95 * 20) = 19th order statistic
}

TEST_CASE("feasible column parses '|'-separated labels", "[survdata]") {
  testutil::TempDir dir("feas");
  auto path = dir.file("f.csv");
  write(path,
        "time,status,treatment,z1,feasible\n"
        "1,1,0,0.5,0|1\n"
        "2,0,1,0.5,1\n"
        "3,1,0,0.5,\n");
  auto ds = itrcr::load_dataset(path, {}, 5.0);
  REQUIRE(ds.has_feasible_column());
  CHECK(ds.feasible_for(ds.subjects()[0]) == std::vector<int>{0, 1});
  CHECK(ds.feasible_for(ds.subjects()[1]) == std::vector<int>{1});
  // empty cell: the whole treatment space
  CHECK(ds.feasible_for(ds.subjects()[2]) == ds.treatment_space());
}

TEST_CASE("save/load round trip reproduces all fields exactly",
          "[survdata][property]") {
  testutil::TempDir dir("roundtrip");
  std::mt19937_64 rng(8080);
  std::uniform_real_distribution<double> t_dist(0.0, 37.0);
  std::uniform_real_distribution<double> z_dist(-4.0, 4.0);
  std::uniform_int_distribution<int> status_dist(0, 2);
  std::uniform_int_distribution<int> arm_dist(0, 2);

  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Subject> subjects;
    for (int i = 0; i < 40; ++i) {
      Subject s;
      s.id = "subj-" + std::to_string(i);
      s.time = t_dist(rng);
      s.status = itrcr::status_from_int(status_dist(rng));
      s.treatment = arm_dist(rng);
      for (int k = 0; k < 3; ++k) s.covariates.push_back(z_dist(rng));
      if (i % 3 == 0) s.feasible = {0, s.treatment};
      if (!s.feasible.empty()) {
        std::sort(s.feasible.begin(), s.feasible.end());
        s.feasible.erase(std::unique(s.feasible.begin(), s.feasible.end()),
                         s.feasible.end());
      }
      subjects.push_back(std::move(s));
    }
    CompetingRisksDataset ds(subjects, {0, 1, 2}, t_dist(rng) + 0.5, true);
    auto path = dir.file("rt" + std::to_string(trial) + ".csv");
    itrcr::save_dataset(path, ds);
    auto back = itrcr::load_dataset(path);
    REQUIRE(back.n() == ds.n());
    CHECK(back.tau() == ds.tau());
    CHECK(back.treatment_space() == ds.treatment_space());
    CHECK(back.has_feasible_column() == ds.has_feasible_column());
    for (std::size_t i = 0; i < ds.n(); ++i)
      REQUIRE(back.subjects()[i] == ds.subjects()[i]);
  }
}

TEST_CASE("validate flags degenerate arms", "[survdata]") {
  auto subject = [](double time, int status, int arm) {
    Subject s;
    s.id = "x";
    s.time = time;
    s.status = itrcr::status_from_int(status);
    s.treatment = arm;
    s.covariates = {0.5};
    return s;
  };

  SECTION("arm without cause-1 events") {
    CompetingRisksDataset ds(
        {subject(1, 1, 0), subject(5, 2, 1), subject(5, 0, 0)}, {0, 1}, 2.0);
    auto report = itrcr::validate(ds);
    bool found = false;
    for (const auto& w : report.warnings)
      if (w.find("RCIF degenerate in arm 1") != std::string::npos)
        found = true;
    CHECK(found);
  }

  SECTION("no risk at the horizon") {
    CompetingRisksDataset ds({subject(1, 0, 0), subject(2, 0, 0)}, {0}, 5.0);
    auto report = itrcr::validate(ds);
    bool found = false;
    for (const auto& w : report.warnings)
      if (w.find("no risk at horizon") != std::string::npos) found = true;
    CHECK(found);
  }

  SECTION("balanced dataset is clean") {
    CompetingRisksDataset ds(
        {subject(1, 1, 0), subject(5, 2, 0), subject(1.5, 1, 1),
         subject(5, 1, 1)},
        {0, 1}, 2.0);
    auto report = itrcr::validate(ds);
    CHECK(report.ok());
    REQUIRE(report.arms.size() == 2);
    CHECK(report.arms[0].n_cause1 == 1);
    CHECK(report.arms[1].n_cause1 == 2);
    CHECK(report.arms[0].at_risk_at_tau == 1);
  }
}

TEST_CASE("dataset construction enforces invariants", "[survdata]") {
  Subject ok;
  ok.id = "1";
  ok.time = 1.0;
  ok.status = Status::Cause1;
  ok.treatment = 0;
  ok.covariates = {0.5};

  CHECK_THROWS_AS(CompetingRisksDataset({ok}, {0}, 0.0), DataError);
  Subject stranger = ok;
  stranger.treatment = 9;
  CHECK_THROWS_AS(CompetingRisksDataset({stranger}, {0}, 1.0), DataError);
  Subject wrong_p = ok;
  wrong_p.covariates = {0.5, 0.5};
  CHECK_THROWS_AS(CompetingRisksDataset({ok, wrong_p}, {0}, 1.0), DataError);
}
