#include "rsvl/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rsvl/error.hpp"

namespace rsvl {

PairedSet::PairedSet(std::size_t n_images, std::vector<std::size_t> image_of)
    : image_of_(std::move(image_of)), captions_of_(n_images) {
  for (std::size_t c = 0; c < image_of_.size(); ++c) {
    if (image_of_[c] >= n_images) {
      throw Error(ErrorCode::ShapeMismatch, "caption " + std::to_string(c) +
                                                " maps to missing image " +
                                                std::to_string(image_of_[c]));
    }
    captions_of_[image_of_[c]].push_back(c);
  }
  for (std::size_t i = 0; i < n_images; ++i) {
    if (captions_of_[i].empty()) {
      throw Error(ErrorCode::ShapeMismatch, "image " + std::to_string(i) + " has no caption");
    }
  }
}

PairedSet PairedSet::one_to_one(std::size_t n) {
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  return PairedSet(n, std::move(ids));
}

std::vector<std::size_t> rank_row(std::span<const float> scores) {
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw Error(ErrorCode::NaNScore, "index " + std::to_string(i));
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

namespace {

// Rank of `target` (0-based) among candidates under the rank_row ordering,
// found without sorting: count candidates that sort ahead of it.
std::size_t rank_of(std::span<const float> scores, std::size_t target) {
  float t = scores[target];
  std::size_t ahead = 0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] > t || (scores[j] == t && j < target)) ++ahead;
  }
  return ahead;
}

void check_scores(std::span<const float> scores) {
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw Error(ErrorCode::NaNScore, "index " + std::to_string(i));
  }
}

}  // namespace

double recall_at_k(const SimilarityMatrix& sim, const PairedSet& pairs, std::size_t k,
                   Direction direction) {
  if (k < 1) throw Error(ErrorCode::KOutOfRange, "k must be >= 1");
  if (sim.n_images != pairs.n_images() || sim.n_texts != pairs.n_captions()) {
    throw Error(ErrorCode::ShapeMismatch, "similarity matrix does not match ground truth");
  }
  check_scores(sim.scores);

  std::size_t hits = 0;
  if (direction == Direction::ImageToText) {
    if (sim.n_images == 0) return 0.0;
    for (std::size_t i = 0; i < sim.n_images; ++i) {
      auto row = sim.image_row(i);
      for (std::size_t c : pairs.captions_of(i)) {
        if (rank_of(row, c) < k) {
          ++hits;
          break;
        }
      }
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(sim.n_images);
  }

  if (sim.n_texts == 0) return 0.0;
  for (std::size_t c = 0; c < sim.n_texts; ++c) {
    auto col = sim.text_column(c);
    if (rank_of(col, pairs.image_of(c)) < k) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(sim.n_texts);
}

double mean_of_recalls(const RetrievalReport& r) {
  return (r.r1_i2t + r.r5_i2t + r.r10_i2t + r.r1_t2i + r.r5_t2i + r.r10_t2i) / 6.0;
}

RetrievalReport retrieval_report(const SimilarityMatrix& sim, const PairedSet& pairs) {
  RetrievalReport r;
  r.r1_i2t = recall_at_k(sim, pairs, 1, Direction::ImageToText);
  r.r5_i2t = recall_at_k(sim, pairs, 5, Direction::ImageToText);
  r.r10_i2t = recall_at_k(sim, pairs, 10, Direction::ImageToText);
  r.r1_t2i = recall_at_k(sim, pairs, 1, Direction::TextToImage);
  r.r5_t2i = recall_at_k(sim, pairs, 5, Direction::TextToImage);
  r.r10_t2i = recall_at_k(sim, pairs, 10, Direction::TextToImage);
  r.mean_recall = mean_of_recalls(r);
  return r;
}

RetrievalReport retrieval_report(const EmbeddingMatrix& images, const EmbeddingMatrix& texts,
                                 const PairedSet& pairs) {
  return retrieval_report(similarity(l2_normalize(images), l2_normalize(texts)), pairs);
}

}  // namespace rsvl
