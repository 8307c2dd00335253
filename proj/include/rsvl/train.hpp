#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "rsvl/geometry.hpp"
#include "rsvl/rng.hpp"
#include "rsvl/tensor.hpp"

namespace rsvl {

/// Linear map out = weight * in + bias, weight stored row-major out_dim x in_dim.
struct ProjectionHead {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<float> weight;
  std::vector<float> bias;

  static ProjectionHead zeros(std::size_t in_dim, std::size_t out_dim);
  static ProjectionHead identity(std::size_t dim);
  // weight ~ N(0, 1/in_dim), bias = 0.
  static ProjectionHead random(std::size_t in_dim, std::size_t out_dim, Rng& rng);

  bool finite() const;

  // Weight as an out_dim x in_dim matrix and bias as a 1 x out_dim matrix,
  // the layout used when heads are written to RSEB files.
  EmbeddingMatrix weight_matrix() const;
  EmbeddingMatrix bias_matrix() const;
  static ProjectionHead from_matrices(const EmbeddingMatrix& weight, const EmbeddingMatrix& bias);
};

struct HeadGrad {
  std::vector<float> weight;
  std::vector<float> bias;
};

struct OptimizerState {
  std::vector<double> m_weight, v_weight;
  std::vector<double> m_bias, v_bias;
  std::uint64_t step = 0;

  static OptimizerState for_head(const ProjectionHead& head);
};

struct TrainConfig {
  double temperature = 0.07;
  std::size_t batch_per_device = 112;
  std::size_t devices = 16;
  double base_lr_numerator = 5.0e-4;
  double base_lr_denominator = 32768.0;
  double weight_decay = 0.01;
  std::size_t epochs = 10;
  std::size_t warmup_epochs = 1;
  double crop_scale_min = 0.8;
  double crop_scale_max = 1.0;
  std::int64_t input_size = 448;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t embed_dim = 512;
  std::uint64_t seed = 0;

  std::size_t global_batch() const { return devices * batch_per_device; }
};

// Throws InvalidConfig (or NonPositiveTemperature) on a violated invariant.
void validate(const TrainConfig& cfg);

struct InfoNceLoss {
  double loss = 0.0;
  double loss_i2t = 0.0;
  double loss_t2i = 0.0;
};

struct InfoNceGrad {
  EmbeddingMatrix d_images;
  EmbeddingMatrix d_texts;
};

/// Symmetric InfoNCE over a batch of normalized pairs (row i of `images`
/// matches row i of `texts`). Logits are dot products divided by
/// `temperature`; both cross-entropy directions are averaged.
InfoNceLoss info_nce_loss(const EmbeddingMatrix& images, const EmbeddingMatrix& texts,
                          double temperature);

/// Analytic gradient of info_nce_loss with respect to the normalized entries.
InfoNceGrad info_nce_grad(const EmbeddingMatrix& images, const EmbeddingMatrix& texts,
                          double temperature);

// Loss and gradient from one pass over the logits.
std::pair<InfoNceLoss, InfoNceGrad> info_nce(const EmbeddingMatrix& images,
                                             const EmbeddingMatrix& texts, double temperature);

EmbeddingMatrix project(const EmbeddingMatrix& features, const ProjectionHead& head);

// Chain rule helpers used by fit().
//
// Pulls a gradient taken w.r.t. l2_normalize(raw) back to `raw`.
EmbeddingMatrix l2_normalize_backward(const EmbeddingMatrix& raw,
                                      const EmbeddingMatrix& grad_normalized);
// Gradient of the head parameters given d(loss)/d(project(features, head)).
HeadGrad project_backward(const EmbeddingMatrix& features, const EmbeddingMatrix& grad_out);

/// devices * batch_per_device * base_lr_numerator / base_lr_denominator
double effective_lr(const TrainConfig& cfg);

/// Linear warmup from 0 over warmup_epochs, then half-cosine decay to 0.
double cosine_warmup_lr(std::size_t step, std::size_t steps_per_epoch, const TrainConfig& cfg);

/// One AdamW update: decoupled decay (p -= lr * wd * p) followed by the
/// bias-corrected Adam step.
void adamw_step(ProjectionHead& head, const HeadGrad& grads, OptimizerState& state, double lr,
                const TrainConfig& cfg);

/// Square crop covering an area fraction drawn uniformly from
/// [crop_scale_min, crop_scale_max] of a src x src image.
CropRect random_resized_crop_plan(std::int64_t src, const TrainConfig& cfg, Rng& rng);

struct HistoryEntry {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double loss_i2t = 0.0;
  double loss_t2i = 0.0;

  friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

// One JSON object per line: {"step", "lr", "loss", "loss_i2t", "loss_t2i"}.
void write_history(std::span<const HistoryEntry> history, const std::filesystem::path& path);

struct FitResult {
  ProjectionHead image_head;
  ProjectionHead text_head;
  std::vector<HistoryEntry> history;
  std::size_t steps_per_epoch = 0;
};

using PairIndex = std::pair<std::size_t, std::size_t>;

// Identity pairing (i, i) for aligned feature sets.
std::vector<PairIndex> aligned_pairs(std::size_t n);

/// Trains both projection heads with InfoNCE. Each epoch reshuffles the
/// pairs and walks floor(pairs / global_batch) full batches; the remainder
/// is dropped.
FitResult fit(const EmbeddingMatrix& image_features, const EmbeddingMatrix& text_features,
              std::span<const PairIndex> pairs, const TrainConfig& cfg);

}  // namespace rsvl
