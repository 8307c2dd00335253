#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rsvl/tensor.hpp"

namespace rsvl {

struct LabeledFeatures {
  EmbeddingMatrix features;
  std::vector<std::size_t> labels;
  std::size_t n_classes = 0;

  // n_classes = max(label) + 1; every class in [0, n_classes) must appear.
  static LabeledFeatures make(EmbeddingMatrix features, std::vector<std::size_t> labels);

  LabeledFeatures subset(std::span<const std::size_t> rows) const;
};

struct LogRegModel {
  std::size_t n_classes = 0;
  std::size_t dim = 0;
  std::vector<double> weight;  // n_classes x dim, row-major
  std::vector<double> bias;
  double l2_strength = 1.0;

  double score(std::size_t cls, std::span<const float> x) const;
};

inline constexpr std::size_t kShotChoices[] = {1, 4, 8, 16, 32};

struct ProbeConfig {
  std::optional<std::size_t> shots;  // nullopt = full training split
  double split_ratio = 0.8;
  std::uint64_t seed = 0;
  double l2_strength = 1.0;
  std::size_t max_iter = 1000;
  double grad_tol = 1e-6;
};

void validate(const ProbeConfig& cfg);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per-class seeded shuffle; round(ratio * count) members go to train, with
/// at least one on each side. Both index lists come back sorted.
Split stratified_split(std::span<const std::size_t> labels, double ratio, std::uint64_t seed);

/// Row indices (into `labels`) of exactly k seeded draws per class, sorted.
std::vector<std::size_t> sample_k_shot_rows(std::span<const std::size_t> labels,
                                            std::size_t n_classes, std::size_t k,
                                            std::uint64_t seed);

LabeledFeatures sample_k_shot(const LabeledFeatures& train, std::size_t k, std::uint64_t seed);

struct LogRegFit {
  LogRegModel model;
  bool converged = false;
  double grad_norm = 0.0;  // infinity norm at the last iterate
  std::size_t iterations = 0;
  std::vector<double> objective_trace;  // value after every accepted step
};

/// Mean multinomial cross-entropy + ||W||^2 / (2 * l2_strength * n), bias
/// unregularized.
double logreg_objective(const LogRegModel& model, const LabeledFeatures& data);

/// Full-batch gradient descent with Armijo backtracking. When max_iter is
/// reached first the fit is still returned with converged = false.
LogRegFit logreg_fit(const LabeledFeatures& data, const ProbeConfig& cfg);

std::vector<std::size_t> logreg_predict(const LogRegModel& model, const EmbeddingMatrix& x);

enum class KnnMetric { Euclidean, Cosine };

/// Exact k-NN majority vote. Distance ties go to the lower train index,
/// vote ties to the lower class index.
std::vector<std::size_t> knn_classify(const LabeledFeatures& train, const EmbeddingMatrix& queries,
                                      std::size_t k, KnnMetric metric = KnnMetric::Euclidean);

enum class ProbeMethod { Linear, Knn };

struct ProbeReport {
  std::string dataset;
  std::optional<std::size_t> shots;
  double accuracy = 0.0;
  ProbeMethod method = ProbeMethod::Linear;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  bool converged = true;
};

struct ProbeOptions {
  ProbeConfig config;
  ProbeMethod method = ProbeMethod::Linear;
  std::size_t k = 20;
  KnnMetric metric = KnnMetric::Euclidean;
};

/// split -> optional k-shot sampling -> linear probe or k-NN -> test accuracy.
ProbeReport run_probe(const std::string& dataset, const LabeledFeatures& data,
                      const ProbeOptions& opts);

}  // namespace rsvl
