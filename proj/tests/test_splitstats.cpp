#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "itrcr/splitstats.hpp"
#include "testutil.hpp"

using itrcr::Status;
using itrcr::WeightedSample;

namespace {

std::vector<WeightedSample> make(std::vector<double> times,
                                 std::vector<int> statuses) {
  std::vector<WeightedSample> out;
  for (std::size_t i = 0; i < times.size(); ++i)
    out.push_back({times[i], itrcr::status_from_int(statuses[i]), 1.0});
  return out;
}

}  // namespace

TEST_CASE("log-rank score is zero for identical groups", "[splitstats]") {
  auto g = make({1, 2, 3, 4}, {1, 0, 1, 2});
  auto score = itrcr::logrank_score(g, g);
  REQUIRE(score.valid);
  CHECK(score.value == 0.0);
}

TEST_CASE("log-rank hand tabulation", "[splitstats]") {
  // Left events at 1, 2; right events at 3, 4; no censoring.
  // U = 1/2 + 2/3 = 7/6; V = 1/4 + 2/9 = 17/36; value = 7/sqrt(17).
  auto left = make({1, 2}, {1, 1});
  auto right = make({3, 4}, {1, 1});
  auto score = itrcr::logrank_score(left, right);
  REQUIRE(score.valid);
  CHECK(score.value == Catch::Approx(7.0 / 6.0 / std::sqrt(17.0 / 36.0))
                           .margin(1e-12));
  CHECK(score.value == Catch::Approx(1.698).margin(1e-3));
}

TEST_CASE("log-rank with no events is invalid", "[splitstats]") {
  auto left = make({1, 2}, {0, 0});
  auto right = make({3, 4}, {0, 0});
  auto score = itrcr::logrank_score(left, right);
  CHECK_FALSE(score.valid);
  CHECK(score.value == 0.0);
}

TEST_CASE("Gray score is zero for identical groups", "[splitstats]") {
  auto g = make({1, 2, 3, 4}, {1, 2, 1, 0});
  auto score = itrcr::gray_score(g, g, 10.0);
  REQUIRE(score.valid);
  CHECK(score.value == 0.0);
}

TEST_CASE("Gray score hand evaluation", "[splitstats]") {
  // Left times 1,2 both cause 1; right times 1,2 both cause 2; tau = 3:
  // left sum = 0.5/1 + 0.5/0.5 = 1.5, right sum = 0, value = 1.5.
  auto left = make({1, 2}, {1, 1});
  auto right = make({1, 2}, {2, 2});
  auto score = itrcr::gray_score(left, right, 3.0);
  REQUIRE(score.valid);
  CHECK(std::abs(score.value - 1.5) <= 1e-12);
}

TEST_CASE("Gray score truncates at tau", "[splitstats]") {
  auto left = make({1, 2}, {1, 1});
  auto right = make({1, 2}, {2, 2});
  // tau = 1.5 keeps only the first left jump: 0.5/1 = 0.5.
  auto score = itrcr::gray_score(left, right, 1.5);
  REQUIRE(score.valid);
  CHECK(std::abs(score.value - 0.5) <= 1e-12);
}

TEST_CASE("Gray score with no cause-1 events anywhere is zero but valid",
          "[splitstats]") {
  auto left = make({1, 2}, {2, 0});
  auto right = make({1, 3}, {2, 2});
  auto score = itrcr::gray_score(left, right, 10.0);
  CHECK(score.valid);
  CHECK(score.value == 0.0);
}

TEST_CASE("Gray score with an empty side is invalid", "[splitstats]") {
  auto left = make({1, 2}, {1, 1});
  std::vector<WeightedSample> right{{1.0, Status::Cause1, 0.0}};
  auto score = itrcr::gray_score(left, right, 10.0);
  CHECK_FALSE(score.valid);
}

TEST_CASE("both statistics are antisymmetric and vanish on identical groups",
          "[splitstats][property]") {
  std::mt19937_64 rng(40312);
  for (int trial = 0; trial < 200; ++trial) {
    auto left = testutil::random_samples_with_event(rng, 40);
    auto right = testutil::random_samples_with_event(rng, 40);

    auto lr = itrcr::logrank_score(left, right);
    auto rl = itrcr::logrank_score(right, left);
    REQUIRE(lr.valid == rl.valid);
    REQUIRE(std::abs(lr.value + rl.value) <= 1e-12);

    auto glr = itrcr::gray_score(left, right, 6.0);
    auto grl = itrcr::gray_score(right, left, 6.0);
    REQUIRE(glr.valid == grl.valid);
    REQUIRE(std::abs(glr.value + grl.value) <= 1e-12);

    auto self = itrcr::logrank_score(left, left);
    if (self.valid) REQUIRE(std::abs(self.value) <= 1e-12);
    auto gself = itrcr::gray_score(left, left, 6.0);
    REQUIRE(std::abs(gself.value) <= 1e-12);
  }
}

TEST_CASE("scores are invariant to permutation within each side",
          "[splitstats][property]") {
  std::mt19937_64 rng(2213);
  for (int trial = 0; trial < 50; ++trial) {
    auto left = testutil::random_samples_with_event(rng, 30);
    auto right = testutil::random_samples_with_event(rng, 30);
    auto shuffled_left = left;
    auto shuffled_right = right;
    std::shuffle(shuffled_left.begin(), shuffled_left.end(), rng);
    std::shuffle(shuffled_right.begin(), shuffled_right.end(), rng);

    auto a = itrcr::logrank_score(left, right);
    auto b = itrcr::logrank_score(shuffled_left, shuffled_right);
    REQUIRE(a.valid == b.valid);
    REQUIRE(std::abs(a.value - b.value) <= 1e-12);

    auto ga = itrcr::gray_score(left, right, 6.0);
    auto gb = itrcr::gray_score(shuffled_left, shuffled_right, 6.0);
    REQUIRE(ga.valid == gb.valid);
    REQUIRE(std::abs(ga.value - gb.value) <= 1e-12);
  }
}

TEST_CASE("abs_value always mirrors value", "[splitstats][property]") {
  std::mt19937_64 rng(555);
  for (int trial = 0; trial < 50; ++trial) {
    auto left = testutil::random_samples_with_event(rng, 30);
    auto right = testutil::random_samples_with_event(rng, 30);
    auto s = itrcr::logrank_score(left, right);
    REQUIRE(s.abs_value == std::abs(s.value));
    auto g = itrcr::gray_score(left, right, 6.0);
    REQUIRE(g.abs_value == std::abs(g.value));
  }
}
