#include "rsvl/probe.hpp"

#include <cmath>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rsvl/error.hpp"
#include "rsvl/rng.hpp"
#include "rsvl/zeroshot.hpp"
#include "test_util.hpp"

using namespace rsvl;

namespace {

LabeledFeatures blobs(std::size_t n, double spread, std::uint64_t seed) {
  std::vector<std::vector<float>> x;
  std::vector<std::size_t> y;
  oracle::make_blobs(n, {{-4.0, 0.0}, {4.0, 0.0}, {0.0, 5.0}}, spread, seed, x, y);
  return LabeledFeatures::make(EmbeddingMatrix::from_rows(x), y);
}

std::vector<std::size_t> cycle_labels(std::size_t n, std::size_t classes) {
  std::vector<std::size_t> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = i % classes;
  return y;
}

}  // namespace

TEST(LabeledFeatures, Make) {
  auto lf = LabeledFeatures::make(EmbeddingMatrix::from_rows({{1}, {2}, {3}}), {0, 2, 1});
  EXPECT_EQ(lf.n_classes, 3u);
  EXPECT_THROW(LabeledFeatures::make(EmbeddingMatrix::from_rows({{1}, {2}}), {0}), Error);
  EXPECT_THROW(LabeledFeatures::make(EmbeddingMatrix::from_rows({{1}, {2}}), {0, 2}), Error);
}

TEST(StratifiedSplit, SingleClass) {
  std::vector<std::size_t> y(100, 0);
  auto s = stratified_split(y, 0.8, 1);
  EXPECT_EQ(s.train.size(), 80u);
  EXPECT_EQ(s.test.size(), 20u);
}

TEST(StratifiedSplit, PerClassAndDeterministic) {
  auto y = cycle_labels(20, 2);
  auto s = stratified_split(y, 0.8, 9);
  std::size_t train0 = 0;
  for (auto i : s.train) train0 += y[i] == 0;
  EXPECT_EQ(train0, 8u);
  EXPECT_EQ(s.train.size(), 16u);
  auto again = stratified_split(y, 0.8, 9);
  EXPECT_EQ(s.train, again.train);
  EXPECT_EQ(s.test, again.test);
  EXPECT_NE(stratified_split(y, 0.8, 10).train, s.train);
}

TEST(StratifiedSplit, PartitionAndProportions) {
  Rng rng(4);
  std::vector<std::size_t> y;
  std::vector<std::size_t> count(7, 0);
  for (std::size_t i = 0; i < 700; ++i) {
    y.push_back(rng.below(7));
    ++count[y.back()];
  }
  for (std::size_t c = 0; c < 7; ++c) ASSERT_GE(count[c], 2u);
  for (double ratio : {0.2, 0.5, 0.8, 0.95}) {
    auto s = stratified_split(y, ratio, 31);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    for (auto t : s.test) EXPECT_TRUE(all.insert(t).second);
    EXPECT_EQ(all.size(), y.size());
    std::vector<std::size_t> per(7, 0);
    for (auto t : s.train) ++per[y[t]];
    for (std::size_t c = 0; c < 7; ++c)
      EXPECT_LE(std::abs(static_cast<double>(per[c]) - ratio * count[c]), 1.0);
  }
}

TEST(StratifiedSplit, ClassTooSmall) {
  try {
    stratified_split(std::vector<std::size_t>{0, 0, 1}, 0.8, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ClassTooSmall);
  }
}

TEST(KShot, CardinalitySaturationAndErrors) {
  auto y = cycle_labels(80, 8);
  auto rows = sample_k_shot_rows(y, 8, 4, 2);
  EXPECT_EQ(rows.size(), 32u);
  std::vector<std::size_t> per(8, 0);
  for (auto r : rows) ++per[y[r]];
  for (auto p : per) EXPECT_EQ(p, 4u);
  EXPECT_EQ(sample_k_shot_rows(y, 8, 4, 2), rows);

  auto all = sample_k_shot_rows(y, 8, 10, 5);
  std::vector<std::size_t> expect(80);
  std::iota(expect.begin(), expect.end(), 0);
  EXPECT_EQ(all, expect);

  try {
    sample_k_shot_rows(y, 8, 11, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientShots);
  }
}

TEST(KShot, StaysInsideTrainSplit) {
  Rng rng(8);
  auto data = LabeledFeatures::make(testutil::random_matrix(rng, 200, 4), cycle_labels(200, 5));
  auto split = stratified_split(data.labels, 0.8, 3);
  auto train = data.subset(split.train);
  auto rows = sample_k_shot_rows(train.labels, train.n_classes, 8, 3);
  std::set<std::size_t> test(split.test.begin(), split.test.end());
  for (auto r : rows) EXPECT_EQ(test.count(split.train[r]), 0u);
}

TEST(KShot, MoreShotsNeverShrinkTraining) {
  Rng rng(12);
  auto data = LabeledFeatures::make(testutil::random_matrix(rng, 400, 4), cycle_labels(400, 4));
  std::size_t prev = 0;
  for (std::size_t k : kShotChoices) {
    ProbeOptions opts;
    opts.config.shots = k;
    auto r = run_probe("d", data, opts);
    EXPECT_GE(r.n_train, prev);
    prev = r.n_train;
  }
  ProbeOptions full;
  EXPECT_GE(run_probe("d", data, full).n_train, prev);
}

TEST(LogReg, SeparableBlobsFitPerfectly) {
  auto data = blobs(150, 0.5, 21);
  ProbeConfig cfg;
  cfg.grad_tol = 1e-8;
  cfg.max_iter = 5000;
  auto fit = logreg_fit(data, cfg);
  EXPECT_TRUE(fit.converged);
  EXPECT_EQ(top1_accuracy(logreg_predict(fit.model, data.features), data.labels), 100.0);
}

TEST(LogReg, AgreesWithPlainGradientDescentOracle) {
  auto data = blobs(150, 2.0, 21);
  ProbeConfig cfg;
  cfg.l2_strength = 0.1;
  cfg.grad_tol = 1e-8;
  cfg.max_iter = 5000;
  auto fit = logreg_fit(data, cfg);
  ASSERT_TRUE(fit.converged);

  auto x = testutil::to_rows(data.features);
  auto ref = oracle::logreg_plain_gd(x, data.labels, 3, 0.1, 0.02, 40000);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(fit.model.weight[c * 2 + k], ref.w[c][k], 1e-6);
  }
  // Bias is only identified up to a common shift.
  for (std::size_t c = 1; c < 3; ++c)
    EXPECT_NEAR(fit.model.bias[c] - fit.model.bias[0], ref.b[c] - ref.b[0], 1e-6);
  std::size_t agree = 0;
  auto pred = logreg_predict(fit.model, data.features);
  for (std::size_t i = 0; i < x.size(); ++i) agree += ref.predict(x[i]) == pred[i];
  EXPECT_EQ(agree, x.size());
}

TEST(LogReg, ObjectiveTraceNonIncreasing) {
  auto data = blobs(90, 2.5, 5);
  auto fit = logreg_fit(data, {});
  ASSERT_GE(fit.objective_trace.size(), 2u);
  for (std::size_t i = 1; i < fit.objective_trace.size(); ++i)
    EXPECT_LE(fit.objective_trace[i], fit.objective_trace[i - 1]);
  EXPECT_DOUBLE_EQ(logreg_objective(fit.model, data), fit.objective_trace.back());
}

TEST(LogReg, DuplicatedRowsMatchDoubledStrength) {
  // Duplicating every row doubles n, which halves the penalty weight
  // 1 / (2 C n); fitting the original data at 2C is the same problem.
  auto data = blobs(60, 2.0, 17);
  std::vector<std::size_t> twice;
  for (int rep = 0; rep < 2; ++rep)
    for (std::size_t i = 0; i < 60; ++i) twice.push_back(i);
  auto dup = data.subset(twice);

  ProbeConfig cfg;
  cfg.l2_strength = 0.05;
  cfg.grad_tol = 1e-8;
  cfg.max_iter = 20000;
  auto a = logreg_fit(dup, cfg);
  cfg.l2_strength = 0.1;
  auto b = logreg_fit(data, cfg);
  ASSERT_TRUE(a.converged);
  ASSERT_TRUE(b.converged);
  for (std::size_t k = 0; k < a.model.weight.size(); ++k)
    EXPECT_NEAR(a.model.weight[k], b.model.weight[k], 1e-6);
  for (std::size_t c = 1; c < 3; ++c)
    EXPECT_NEAR(a.model.bias[c] - a.model.bias[0], b.model.bias[c] - b.model.bias[0], 1e-6);
}

TEST(LogReg, WeightSignFollowsFeature) {
  std::vector<std::vector<float>> x;
  std::vector<std::size_t> y;
  for (int i = -10; i <= 10; ++i) {
    if (i == 0) continue;
    x.push_back({static_cast<float>(i) * 0.3f});
    y.push_back(i > 0 ? 1 : 0);
  }
  auto fit = logreg_fit(LabeledFeatures::make(EmbeddingMatrix::from_rows(x), y), {});
  EXPECT_GT(fit.model.weight[1] - fit.model.weight[0], 0.0);
}

TEST(LogReg, NotConvergedStillReturnsModel) {
  auto data = blobs(60, 1.0, 2);
  ProbeConfig cfg;
  cfg.max_iter = 2;
  auto fit = logreg_fit(data, cfg);
  EXPECT_FALSE(fit.converged);
  EXPECT_EQ(fit.iterations, 2u);
  EXPECT_GT(fit.grad_norm, cfg.grad_tol);
}

TEST(LogRegPredict, BiasAndScaling) {
  LogRegModel m{2, 3, std::vector<double>(6, 0.0), {0.0, 1.0}, 1.0};
  auto x = EmbeddingMatrix::from_rows({{1, 2, 3}, {-5, 0, 9}});
  EXPECT_EQ(logreg_predict(m, x), (std::vector<std::size_t>{1, 1}));

  Rng rng(1);
  LogRegModel r{4, 3, {}, {}, 1.0};
  for (int i = 0; i < 12; ++i) r.weight.push_back(rng.normal());
  for (int i = 0; i < 4; ++i) r.bias.push_back(rng.normal());
  auto q = testutil::random_matrix(rng, 50, 3);
  auto base = logreg_predict(r, q);
  for (auto& w : r.weight) w *= 3.5;
  for (auto& b : r.bias) b *= 3.5;
  EXPECT_EQ(logreg_predict(r, q), base);

  LogRegModel tie{2, 1, {0.0, 0.0}, {0.5, 0.5}, 1.0};
  EXPECT_EQ(logreg_predict(tie, EmbeddingMatrix::from_rows({{1}})), std::vector<std::size_t>{0});
  EXPECT_THROW(logreg_predict(m, EmbeddingMatrix::from_rows({{1, 2}})), Error);
}

TEST(Knn, SingleClassAndTies) {
  auto one = LabeledFeatures::make(EmbeddingMatrix::from_rows({{0, 0}, {1, 1}, {5, 5}}), {0, 0, 0});
  EXPECT_EQ(knn_classify(one, EmbeddingMatrix::from_rows({{100, -3}}), 3),
            std::vector<std::size_t>{0});

  auto two = LabeledFeatures::make(EmbeddingMatrix::from_rows({{1, 0}, {-1, 0}}), {1, 0});
  EXPECT_EQ(knn_classify(two, EmbeddingMatrix::from_rows({{0, 0}}), 2),
            std::vector<std::size_t>{0});
  // Distance tie at k=1 resolves to the lower train index (class 1 here).
  EXPECT_EQ(knn_classify(two, EmbeddingMatrix::from_rows({{0, 0}}), 1),
            std::vector<std::size_t>{1});
}

TEST(Knn, Errors) {
  auto two = LabeledFeatures::make(EmbeddingMatrix::from_rows({{1, 0}, {-1, 0}}), {1, 0});
  try {
    knn_classify(two, EmbeddingMatrix::from_rows({{0, 0}}), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::KTooLarge);
  }
  EXPECT_THROW(knn_classify(two, EmbeddingMatrix::from_rows({{0, 0, 0}}), 1), Error);
}

TEST(Knn, MatchesExhaustiveOracle) {
  Rng rng(1000);
  auto train_x = testutil::random_matrix(rng, 1000, 8);
  std::vector<std::size_t> y(1000);
  for (auto& v : y) v = rng.below(10);
  auto train = LabeledFeatures::make(train_x, y);
  auto q = testutil::random_matrix(rng, 200, 8);
  EXPECT_EQ(knn_classify(train, q, 20),
            oracle::knn_exhaustive(testutil::to_rows(train_x), y, 10, testutil::to_rows(q), 20));
}

TEST(Knn, RotationInvariant) {
  Rng rng(6);
  auto train_x = testutil::random_matrix(rng, 300, 2);
  std::vector<std::size_t> y(300);
  for (auto& v : y) v = rng.below(4);
  auto q = testutil::random_matrix(rng, 100, 2);
  auto base = knn_classify(LabeledFeatures::make(train_x, y), q, 7);

  // Rotation by a multiple of 90 degrees is exact in float.
  auto rotate = [](const EmbeddingMatrix& m) {
    std::vector<std::vector<float>> rows;
    for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back({-m.at(i, 1), m.at(i, 0)});
    return EmbeddingMatrix::from_rows(rows);
  };
  EXPECT_EQ(knn_classify(LabeledFeatures::make(rotate(train_x), y), rotate(q), 7), base);
}

TEST(Knn, CosineIgnoresScale) {
  auto train = LabeledFeatures::make(EmbeddingMatrix::from_rows({{10, 0}, {0, 0.1f}}), {0, 1});
  auto q = EmbeddingMatrix::from_rows({{0.2f, 1.0f}});
  EXPECT_EQ(knn_classify(train, q, 1, KnnMetric::Euclidean), std::vector<std::size_t>{1});
  EXPECT_EQ(knn_classify(train, EmbeddingMatrix::from_rows({{3, 1}}), 1, KnnMetric::Euclidean),
            std::vector<std::size_t>{1});
  EXPECT_EQ(knn_classify(train, EmbeddingMatrix::from_rows({{3, 1}}), 1, KnnMetric::Cosine),
            std::vector<std::size_t>{0});
}

TEST(RunProbe, SeparableDataBothMethods) {
  auto data = blobs(300, 0.6, 44);
  ProbeOptions lin;
  auto r = run_probe("blobs", data, lin);
  EXPECT_EQ(r.accuracy, 100.0);
  EXPECT_EQ(r.n_train + r.n_test, 300u);
  EXPECT_TRUE(r.converged);

  ProbeOptions knn;
  knn.method = ProbeMethod::Knn;
  EXPECT_EQ(run_probe("blobs", data, knn).accuracy, 100.0);

  ProbeOptions shots;
  shots.config.shots = 4;
  auto s = run_probe("blobs", data, shots);
  EXPECT_EQ(s.n_train, 12u);
  EXPECT_EQ(s.n_test, r.n_test);
}
