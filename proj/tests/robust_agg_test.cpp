// Copyright 2026 The Flatsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstddef>
#include <vector>

#include <gtest/gtest.h>

#include "flatsim/robust_agg.hpp"
#include "flatsim/rng.hpp"
#include "oracles.hpp"

namespace flatsim {
namespace {

std::vector<ParameterVector> random_updates(Rng& rng, std::size_t n, std::size_t dim) {
  std::vector<ParameterVector> updates(n, ParameterVector(dim));
  for (auto& u : updates)
    for (double& x : u) x = rng.normal(0.0, 2.0);
  return updates;
}

TEST(KrumScores, WorkedScalarInstance) {
  const std::vector<ParameterVector> updates = {{0.0}, {1.0}, {2.0}, {3.0}, {4.0}, {100.0}};
  const std::vector<double> scores = krum_scores(updates, 1);
  const std::vector<double> want = {14.0, 6.0, 6.0, 6.0, 14.0, 28229.0};
  ASSERT_EQ(scores.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_DOUBLE_EQ(scores[i], want[i]) << i;

  const KrumResult res = multi_krum(updates, 1);
  EXPECT_EQ(res.selected, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(res.discarded, (std::vector<std::size_t>{5}));
  ASSERT_EQ(res.aggregate.size(), 1u);
  EXPECT_DOUBLE_EQ(res.aggregate[0], 2.0);
}

TEST(KrumScores, IdenticalUpdatesScoreZero) {
  const std::vector<ParameterVector> updates(6, ParameterVector{1.5, -2.5});
  for (double s : krum_scores(updates, 1)) EXPECT_EQ(s, 0.0);
}

TEST(KrumScores, ResiliencyBoundEnforced) {
  Rng rng(40);
  EXPECT_THROW(krum_scores(random_updates(rng, 5, 2), 2), AggregationError);
  EXPECT_THROW(krum_scores(random_updates(rng, 4, 2), 1), AggregationError);
  EXPECT_THROW(multi_krum(random_updates(rng, 6, 2), 2), AggregationError);
  EXPECT_NO_THROW(krum_scores(random_updates(rng, 5, 2), 1));
  EXPECT_NO_THROW(krum_scores(random_updates(rng, 3, 2), 0));
}

TEST(KrumScores, RejectsDegenerateUpdateSets) {
  EXPECT_THROW(krum_scores({}, 0), InvalidInputError);
  EXPECT_THROW(krum_scores({{1.0}, {1.0, 2.0}, {1.0}}, 0), ShapeError);
}

TEST(KrumScores, MatchesBruteForceOracle) {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 5 + rng.index(6);
    const std::size_t max_k = (n - 3) / 2;
    const std::size_t k = rng.index(max_k + 1);
    const std::size_t dim = 1 + rng.index(6);
    const auto updates = random_updates(rng, n, dim);

    const std::vector<double> scores = krum_scores(updates, k);
    const std::vector<double> want = oracle::krum_scores_bruteforce(updates, k);
    ASSERT_EQ(scores.size(), want.size());
    for (std::size_t i = 0; i < n; ++i)
      EXPECT_NEAR(scores[i], want[i], 1e-12 * (1.0 + std::abs(want[i]))) << "i=" << i;

    const KrumResult res = multi_krum(updates, k);
    const auto [sel, disc] = oracle::krum_select_bruteforce(res.scores, k);
    EXPECT_EQ(res.selected, sel);
    EXPECT_EQ(res.discarded, disc);
    ASSERT_EQ(res.selected.size(), n - k);
    ASSERT_EQ(res.discarded.size(), k);

    std::vector<ParameterVector> kept;
    for (std::size_t idx : res.selected) kept.push_back(updates[idx]);
    const ParameterVector mean = weighted_mean(kept, std::vector<double>(kept.size(), 1.0));
    for (std::size_t j = 0; j < dim; ++j) EXPECT_DOUBLE_EQ(res.aggregate[j], mean[j]);
  }
}

TEST(MultiKrum, TiesBreakTowardLowerIndex) {
  const std::vector<ParameterVector> updates(7, ParameterVector{3.0});
  const KrumResult res = multi_krum(updates, 2);
  EXPECT_EQ(res.selected, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(res.discarded, (std::vector<std::size_t>{5, 6}));
  EXPECT_DOUBLE_EQ(res.aggregate[0], 3.0);
}

TEST(MultiKrum, PermutationEquivariant) {
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 7;
    const std::size_t k = 2;
    const auto updates = random_updates(rng, n, 3);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);

    std::vector<ParameterVector> permuted(n);
    for (std::size_t i = 0; i < n; ++i) permuted[perm[i]] = updates[i];

    const KrumResult base = multi_krum(updates, k);
    const KrumResult shuffled = multi_krum(permuted, k);

    std::vector<std::size_t> mapped;
    for (std::size_t idx : base.selected) mapped.push_back(perm[idx]);
    std::sort(mapped.begin(), mapped.end());
    EXPECT_EQ(shuffled.selected, mapped);
    for (std::size_t j = 0; j < base.aggregate.size(); ++j)
      EXPECT_NEAR(shuffled.aggregate[j], base.aggregate[j], 1e-12);
  }
}

TEST(MultiKrum, TranslationShiftsTheAggregate) {
  Rng rng(43);
  const auto updates = random_updates(rng, 6, 4);
  const double shift = 3.5;
  std::vector<ParameterVector> moved = updates;
  for (auto& u : moved)
    for (double& x : u) x += shift;

  const KrumResult base = multi_krum(updates, 1);
  const KrumResult after = multi_krum(moved, 1);
  EXPECT_EQ(after.selected, base.selected);
  EXPECT_EQ(after.discarded, base.discarded);
  for (std::size_t j = 0; j < base.aggregate.size(); ++j)
    EXPECT_NEAR(after.aggregate[j], base.aggregate[j] + shift, 1e-9);
}

TEST(MultiKrum, FarOutlierIsAlwaysDiscarded) {
  Rng rng(44);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 6;
    const std::size_t dim = 3;
    ParameterVector center(dim);
    for (double& c : center) c = rng.uniform(-5.0, 5.0);
    std::vector<ParameterVector> updates(n, center);
    for (auto& u : updates)
      for (double& x : u) x += rng.uniform(-0.5, 0.5);
    const std::size_t evil = rng.index(n);
    for (double& x : updates[evil]) x += 50.0;

    const KrumResult res = multi_krum(updates, 1);
    ASSERT_EQ(res.discarded.size(), 1u);
    EXPECT_EQ(res.discarded[0], evil);
  }
}

TEST(ParseAggregation, NamesAndAliases) {
  EXPECT_EQ(parse_aggregation("fedavg"), Aggregation::kFedAvg);
  EXPECT_EQ(parse_aggregation("mean"), Aggregation::kFedAvg);
  EXPECT_EQ(parse_aggregation("geometric_median"), Aggregation::kGeometricMedian);
  EXPECT_EQ(parse_aggregation("median"), Aggregation::kGeometricMedian);
  EXPECT_EQ(parse_aggregation("multi_krum"), Aggregation::kMultiKrum);
  EXPECT_EQ(parse_aggregation("krum"), Aggregation::kMultiKrum);
  EXPECT_THROW(parse_aggregation("trimmed_mean"), ConfigError);
  EXPECT_THROW(parse_aggregation(""), ConfigError);

  EXPECT_EQ(aggregation_name(Aggregation::kFedAvg), "fedavg");
  EXPECT_EQ(aggregation_name(Aggregation::kGeometricMedian), "geometric_median");
  EXPECT_EQ(aggregation_name(Aggregation::kMultiKrum), "multi_krum");
  EXPECT_EQ(parse_aggregation(aggregation_name(Aggregation::kMultiKrum)),
            Aggregation::kMultiKrum);
}

TEST(AggregateDispatch, RoutesToEachMethod) {
  Rng rng(45);
  const auto updates = random_updates(rng, 6, 3);
  const std::vector<double> weights = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};

  EXPECT_EQ(aggregate(Aggregation::kFedAvg, updates, weights, 0),
            weighted_mean(updates, weights));
  EXPECT_EQ(aggregate(Aggregation::kGeometricMedian, updates, weights, 0),
            geometric_median(updates, weights));
  EXPECT_EQ(aggregate(Aggregation::kMultiKrum, updates, weights, 1),
            multi_krum(updates, 1).aggregate);
}

TEST(AggregateDispatch, KrumIgnoresWeights) {
  const std::vector<ParameterVector> updates = {{0.0}, {1.0}, {2.0}, {3.0}, {4.0}, {100.0}};
  const std::vector<double> skewed = {1.0, 1.0, 1.0, 1.0, 1.0, 1000.0};
  const ParameterVector out = aggregate(Aggregation::kMultiKrum, updates, skewed, 1);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_DOUBLE_EQ(out[0], 2.0);
}

}  // namespace
}  // namespace flatsim
