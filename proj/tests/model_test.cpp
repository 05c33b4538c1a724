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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "flatsim/model.hpp"
#include "flatsim/rng.hpp"
#include "oracles.hpp"

namespace flatsim {
namespace {

TEST(GenSynthetic, DeterministicPerSeed) {
  const Dataset a = gen_synthetic(7, 100, 3, 1.5);
  const Dataset b = gen_synthetic(7, 100, 3, 1.5);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.labels, b.labels);
  const Dataset c = gen_synthetic(8, 100, 3, 1.5);
  EXPECT_NE(a.features, c.features);
}

TEST(GenSynthetic, BalancedClassesAndShape) {
  const Dataset d = gen_synthetic(3, 201, 4, 2.0);
  EXPECT_EQ(d.size(), 201u);
  EXPECT_EQ(d.dim(), 4u);
  const int ones = std::accumulate(d.labels.begin(), d.labels.end(), 0);
  EXPECT_LE(std::abs(2 * ones - 201), 1);
}

TEST(GenSynthetic, RejectsBadArguments) {
  EXPECT_THROW(gen_synthetic(1, 1, 2, 1.0), InvalidInputError);
  EXPECT_THROW(gen_synthetic(1, 10, 1, 1.0), InvalidInputError);
  EXPECT_THROW(gen_synthetic(1, 10, 2, -1.0), InvalidInputError);
}

TEST(GenSynthetic, SeparableBlobsAreLearnable) {
  const Dataset d = gen_synthetic(1, 200, 2, 2.0);
  const ParameterVector start(3, 0.0);
  const ParameterVector w = local_train(start, d, 50, 0.1, 32, 99);
  EXPECT_GE(evaluate(w, d).accuracy, 0.95);
}

TEST(GenSynthetic, ZeroMarginBlobsAreNotLearnable) {
  const Dataset d = gen_synthetic(1, 200, 2, 0.0);
  const ParameterVector start(3, 0.0);
  const ParameterVector w = local_train(start, d, 50, 0.1, 32, 99);
  EXPECT_NEAR(evaluate(w, d).accuracy, 0.5, 0.1);
}

TEST(InitModel, DeterministicWithBiasSlot) {
  const ModelSpec spec{2, ModelKind::kLogisticRegression};
  const ParameterVector a = init_model(spec, 5);
  const ParameterVector b = init_model(spec, 5);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 3u);
  for (double x : a) {
    EXPECT_GE(x, -0.01);
    EXPECT_LE(x, 0.01);
  }
  EXPECT_NE(init_model(spec, 6), a);
}

TEST(ModelSpec, HashCoversEveryField) {
  const ModelSpec a{4, ModelKind::kLogisticRegression};
  const ModelSpec b{5, ModelKind::kLogisticRegression};
  EXPECT_EQ(a.hash(), a.hash());
  EXPECT_NE(a.hash(), b.hash());
}

TEST(LocalTrain, ZeroLearningRateIsIdentity) {
  const Dataset d = gen_synthetic(2, 50, 2, 2.0);
  const ParameterVector start = {0.3, -0.2, 0.1};
  EXPECT_EQ(local_train(start, d, 3, 0.0, 8, 4), start);
}

TEST(LocalTrain, DeterministicPerSeed) {
  const Dataset d = gen_synthetic(2, 80, 3, 2.0);
  const ParameterVector start(4, 0.0);
  EXPECT_EQ(local_train(start, d, 2, 0.1, 16, 42), local_train(start, d, 2, 0.1, 16, 42));
  EXPECT_NE(local_train(start, d, 2, 0.1, 16, 42), local_train(start, d, 2, 0.1, 16, 43));
}

TEST(LocalTrain, LossImproves) {
  const Dataset d = gen_synthetic(5, 200, 2, 2.0);
  const ParameterVector start(3, 0.0);
  const ParameterVector w = local_train(start, d, 10, 0.1, 32, 7);
  EXPECT_LE(evaluate(w, d).loss, evaluate(start, d).loss);
}

// Full-batch SGD (batch >= n) against an independently coded full-batch
// gradient descent loop. The two sum per-sample gradients in different
// orders, so agreement is held to 1e-9 per coordinate, not bit equality.
TEST(LocalTrain, MatchesFullBatchGradientDescentOracle) {
  const Dataset d = gen_synthetic(9, 60, 2, 2.0);
  const ParameterVector start = {0.01, -0.02, 0.005};
  const ParameterVector lib = local_train(start, d, 5, 0.1, d.size(), 123);
  const ParameterVector ref = oracle::full_batch_gd(start, d, 5, 0.1);
  ASSERT_EQ(lib.size(), ref.size());
  for (std::size_t j = 0; j < lib.size(); ++j) EXPECT_NEAR(lib[j], ref[j], 1e-9);
}

TEST(LocalTrain, QualityTracksOracleOnSeparableData) {
  const Dataset d = gen_synthetic(1, 200, 2, 2.0);
  const ParameterVector start(3, 0.0);
  const ParameterVector lib = local_train(start, d, 50, 0.1, 32, 77);
  const ParameterVector ref = oracle::full_batch_gd(start, d, 50, 0.1);
  EXPECT_GE(evaluate(lib, d).accuracy, 0.95);
  EXPECT_GE(oracle::accuracy_scalar(ref, d), 0.95);
}

TEST(LocalTrain, RejectsBadArguments) {
  const Dataset d = gen_synthetic(2, 20, 2, 1.0);
  EXPECT_THROW(local_train({0, 0}, d, 1, 0.1, 4, 1), ShapeError);
  EXPECT_THROW(local_train({0, 0, 0}, d, 0, 0.1, 4, 1), InvalidInputError);
  EXPECT_THROW(local_train({0, 0, 0}, d, 1, -0.1, 4, 1), InvalidInputError);
  EXPECT_THROW(local_train({0, 0, 0}, d, 1, 0.1, 0, 1), InvalidInputError);
}

// Analytic gradient against central finite differences of the per-sample
// loss at 20 random points.
TEST(Gradient, MatchesFiniteDifferences) {
  Rng rng(31);
  const double h = 1e-5;
  auto sample_loss = [](const ParameterVector& w, const std::vector<double>& x, int y) {
    const double p = std::clamp(predict_probability(w, x), 1e-12, 1.0 - 1e-12);
    return y == 1 ? -std::log(p) : -std::log(1.0 - p);
  };
  for (int t = 0; t < 20; ++t) {
    const std::size_t dim = 1 + rng.index(5);
    ParameterVector w(dim + 1);
    std::vector<double> x(dim);
    for (double& v : w) v = rng.uniform(-1.0, 1.0);
    for (double& v : x) v = rng.uniform(-2.0, 2.0);
    const int y = rng.index(2) == 0 ? 0 : 1;

    const ParameterVector g = bce_gradient(w, x, y);
    for (std::size_t j = 0; j < w.size(); ++j) {
      ParameterVector wp = w;
      ParameterVector wm = w;
      wp[j] += h;
      wm[j] -= h;
      const double fd = (sample_loss(wp, x, y) - sample_loss(wm, x, y)) / (2 * h);
      EXPECT_NEAR(g[j], fd, 1e-5 * std::max(1.0, std::fabs(g[j])));
    }
  }
}

TEST(Evaluate, ZeroParamsGiveLogTwoLossAndTieAccuracy) {
  const Dataset d = gen_synthetic(4, 200, 2, 2.0);
  const ParameterVector zeros(3, 0.0);
  const Evaluation ev = evaluate(zeros, d);
  EXPECT_NEAR(ev.loss, std::log(2.0), 1e-9);
  EXPECT_EQ(ev.accuracy, 0.5);
}

TEST(Evaluate, SaturatedSeparatorScoresPerfectly) {
  Dataset d;
  d.features = {{-3.0, 0.0}, {-2.5, 1.0}, {3.0, 0.0}, {2.5, -1.0}};
  d.labels = {0, 0, 1, 1};
  const ParameterVector w = {1000.0, 0.0, 0.0};
  EXPECT_EQ(evaluate(w, d).accuracy, 1.0);
}

TEST(Evaluate, MatchesScalarOracle) {
  Rng rng(32);
  for (int t = 0; t < 20; ++t) {
    const Dataset d = gen_synthetic(100 + t, 50, 3, 1.0);
    ParameterVector w(4);
    for (double& v : w) v = rng.uniform(-2.0, 2.0);
    EXPECT_NEAR(evaluate(w, d).loss, oracle::bce_loss_scalar(w, d), 1e-9);
    EXPECT_EQ(evaluate(w, d).accuracy, oracle::accuracy_scalar(w, d));
  }
}

TEST(Evaluate, InvariantUnderRowPermutation) {
  const Dataset d = gen_synthetic(6, 101, 3, 1.5);
  Dataset rev;
  for (std::size_t i = d.size(); i > 0; --i) {
    rev.features.push_back(d.features[i - 1]);
    rev.labels.push_back(d.labels[i - 1]);
  }
  ParameterVector w = {0.5, -0.3, 0.2, 0.05};
  EXPECT_NEAR(evaluate(w, d).loss, evaluate(w, rev).loss, 1e-12);
  EXPECT_EQ(evaluate(w, d).accuracy, evaluate(w, rev).accuracy);
}

TEST(DatasetText, RoundTripIsBitExact) {
  const Dataset d = gen_synthetic(21, 64, 5, 1.3);
  const Dataset back = dataset_from_text(dataset_to_text(d));
  EXPECT_EQ(d.labels, back.labels);
  ASSERT_EQ(d.features.size(), back.features.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < d.dim(); ++j) {
      EXPECT_EQ(std::bit_cast<std::uint64_t>(d.features[i][j]),
                std::bit_cast<std::uint64_t>(back.features[i][j]));
    }
  }
}

TEST(DatasetText, FormatIsLabelThenFeatures) {
  Dataset d;
  d.features = {{1.5, -2.0}, {0.25, 3.0}};
  d.labels = {0, 1};
  EXPECT_EQ(dataset_to_text(d), "0,1.5,-2\n1,0.25,3\n");
}

TEST(DatasetText, ParseRejectsMalformedLines) {
  EXPECT_THROW(dataset_from_text("2,1.0,2.0\n"), ParseError);
  EXPECT_THROW(dataset_from_text("1,abc\n"), ParseError);
  EXPECT_THROW(dataset_from_text("1\n"), ParseError);
  EXPECT_THROW(dataset_from_text(""), InvalidInputError);
}

TEST(DatasetText, SaveAndLoadThroughFile) {
  const Dataset d = gen_synthetic(22, 10, 2, 1.0);
  const std::string path = testing::TempDir() + "/flatsim_dataset_test.txt";
  save_dataset(path, d);
  const Dataset back = load_dataset(path);
  EXPECT_EQ(d.features, back.features);
  EXPECT_EQ(d.labels, back.labels);
  std::remove(path.c_str());
  EXPECT_THROW(load_dataset(path), IoError);
}

}  // namespace
}  // namespace flatsim
