#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>

#include "roundrank/ground_truth.hpp"
#include "test_support.hpp"

using namespace roundrank;

TEST_CASE("ground truth basics") {
  SUBCASE("n = 1 has the only permutation") {
    for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
      const auto gt = make_ground_truth(1, seed);
      CHECK(gt.rank_of == std::vector<Rank>{1});
    }
  }
  SUBCASE("identical (n, seed) give identical permutations") {
    const auto a = make_ground_truth(5, 1234);
    const auto b = make_ground_truth(5, 1234);
    CHECK(a.rank_of == b.rank_of);
    const auto c = make_ground_truth(5, 1235);
    CHECK(a.rank_of != c.rank_of);
  }
  SUBCASE("empty universe is rejected") {
    CHECK_THROWS_AS(make_ground_truth(0, 1), InvalidUniverseError);
  }
  SUBCASE("ranks must be a bijection") {
    CHECK_THROWS_AS(ground_truth_from_ranks({1, 1, 3}), InvalidParameterError);
    CHECK_THROWS_AS(ground_truth_from_ranks({0, 1, 2}), InvalidParameterError);
  }
}

TEST_CASE("permutation frequencies over seeds are uniform") {
  // 3 items, 10^4 seeds: each of the 6 permutations within 1/6 +- 0.02.
  std::map<std::vector<Rank>, int> counts;
  const int seeds = 10000;
  for (int s = 0; s < seeds; ++s) counts[make_ground_truth(3, s).rank_of]++;
  CHECK(counts.size() == 6);
  for (auto& [perm, count] : counts) {
    const double freq = static_cast<double>(count) / seeds;
    CHECK(freq == doctest::Approx(1.0 / 6.0).epsilon(0.12));
    CHECK(std::abs(freq - 1.0 / 6.0) <= 0.02);
  }
}

TEST_CASE("true_sorted_topk") {
  const auto gt = testing::gt_from({3, 1, 4, 2});
  CHECK(true_sorted_topk(gt, 2) == std::vector<ItemId>{1, 3});
  CHECK(true_sorted_topk(gt, 4) == std::vector<ItemId>{1, 3, 0, 2});
  CHECK_THROWS_AS(true_sorted_topk(gt, 0), InvalidParameterError);
  CHECK_THROWS_AS(true_sorted_topk(gt, 5), InvalidParameterError);

  // Brute-force rank scan oracle on a random instance.
  const auto random_gt = make_ground_truth(8, 42);
  const auto top5 = true_sorted_topk(random_gt, 5);
  for (std::size_t i = 0; i < top5.size(); ++i)
    CHECK(random_gt.rank_of[top5[i]] == i + 1);
}

TEST_CASE("compare semantics") {
  const auto gt = testing::gt_from({1, 3, 5, 2, 4});
  const NoiseCoordinates coords{11, 1, 0};
  SUBCASE("noiseless always picks the better item") {
    const auto outcome = compare(gt, NoiseModel::noiseless(), {0, 2}, coords);
    CHECK(outcome.winner == 0);
  }
  SUBCASE("self comparison is rejected") {
    CHECK_THROWS_AS(compare(gt, NoiseModel::noiseless(), {2, 2}, coords),
                    SelfComparisonError);
  }
  SUBCASE("items must be inside the universe") {
    CHECK_THROWS_AS(compare(gt, NoiseModel::noiseless(), {0, 7}, coords),
                    InvalidParameterError);
  }
  SUBCASE("winner follows the u < p rule") {
    const auto noise = NoiseModel::bernoulli(2.0 / 3.0);
    bool saw_noise = false;
    for (std::uint64_t ordinal = 0; ordinal < 200; ++ordinal) {
      const NoiseCoordinates c{99, 2, ordinal};
      const double u = uniform01(c);
      const auto outcome = compare(gt, noise, {0, 2}, c);
      const ItemId expected = u < noise.p ? 0 : 2;  // item 0 is truly better
      CHECK(outcome.winner == expected);
      saw_noise |= outcome.winner == 2;
    }
    CHECK(saw_noise);  // u >= p branch (e.g. u = 0.9) must occur
  }
  SUBCASE("oracle is deterministic in its coordinates") {
    const auto noise = NoiseModel::bernoulli(2.0 / 3.0);
    for (std::uint64_t ordinal : {0ull, 5ull, 123456789ull}) {
      const NoiseCoordinates c{77, 3, ordinal};
      const auto first = compare(gt, noise, {1, 4}, c);
      const auto second = compare(gt, noise, {1, 4}, c);
      CHECK(first.winner == second.winner);
    }
  }
}

TEST_CASE("bernoulli marginal concentrates at p") {
  // 10^6 independent coordinates; tolerance 3 standard deviations.
  const auto gt = testing::gt_from({1, 2});
  const auto noise = NoiseModel::bernoulli(2.0 / 3.0);
  const std::uint64_t draws = 1000000;
  std::uint64_t correct = 0;
  for (std::uint64_t i = 0; i < draws; ++i)
    correct += compare(gt, noise, {0, 1}, {2024, 1, i}).winner == 0;
  const double freq = static_cast<double>(correct) / draws;
  const double sigma = std::sqrt(noise.p * (1 - noise.p) / draws);
  CHECK(std::abs(freq - noise.p) <= 3.0 * sigma);
}

TEST_CASE("noiseless tournament is transitive and equals the rank order") {
  const auto gt = make_ground_truth(30, 5);
  for (ItemId a = 0; a < 30; ++a)
    for (ItemId b = 0; b < 30; ++b) {
      if (a == b) continue;
      const auto outcome = compare(gt, NoiseModel::noiseless(), {a, b}, {1, 1, 0});
      CHECK((outcome.winner == a) == (gt.rank_of[a] < gt.rank_of[b]));
    }
}

TEST_CASE("noise model validation") {
  CHECK_THROWS_AS(NoiseModel::bernoulli(0.5), InvalidParameterError);
  CHECK_THROWS_AS(NoiseModel::bernoulli(1.5), InvalidParameterError);
  CHECK(NoiseModel::bernoulli(1.0).noiseless_effective());
  CHECK_FALSE(NoiseModel::bernoulli(2.0 / 3.0).noiseless_effective());
}

TEST_CASE("rank view padding layout") {
  const auto gt = testing::gt_from({2, 1, 3});
  const RankView view(gt, PaddingSpec{2, 1});
  CHECK(view.size() == 6);
  CHECK(view.n_real() == 3);
  // Top dummies (ids 3, 4) rank best, bottom dummy (id 5) ranks worst.
  CHECK(view.rank(3) == 1);
  CHECK(view.rank(4) == 2);
  CHECK(view.rank(1) == 3);
  CHECK(view.rank(0) == 4);
  CHECK(view.rank(2) == 5);
  CHECK(view.rank(5) == 6);
  CHECK(view.is_dummy(3));
  CHECK(view.is_dummy(5));
  CHECK_FALSE(view.is_dummy(2));
}
