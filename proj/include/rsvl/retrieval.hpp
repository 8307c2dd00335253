#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rsvl/tensor.hpp"

namespace rsvl {

/// Ground truth for multi-caption retrieval: each caption belongs to exactly
/// one image and every image owns at least one caption.
class PairedSet {
 public:
  // image_of[c] is the image index for caption c.
  PairedSet(std::size_t n_images, std::vector<std::size_t> image_of);

  static PairedSet one_to_one(std::size_t n);

  std::size_t n_images() const noexcept { return captions_of_.size(); }
  std::size_t n_captions() const noexcept { return image_of_.size(); }
  std::size_t image_of(std::size_t caption) const { return image_of_[caption]; }
  const std::vector<std::size_t>& captions_of(std::size_t image) const {
    return captions_of_[image];
  }

 private:
  std::vector<std::size_t> image_of_;
  std::vector<std::vector<std::size_t>> captions_of_;
};

enum class Direction { ImageToText, TextToImage };

struct RetrievalReport {
  double r1_i2t = 0, r5_i2t = 0, r10_i2t = 0;
  double r1_t2i = 0, r5_t2i = 0, r10_t2i = 0;
  double mean_recall = 0;
};

/// Indices sorted by descending score, ties by ascending index. NaN scores
/// are rejected.
std::vector<std::size_t> rank_row(std::span<const float> scores);

/// Percentage of queries whose ground-truth match lands in the top k.
/// For ImageToText an image hits when any of its captions is retrieved.
double recall_at_k(const SimilarityMatrix& sim, const PairedSet& pairs, std::size_t k,
                   Direction direction);

double mean_of_recalls(const RetrievalReport& r);

/// Normalizes both sides, scores with dot products and fills every recall.
RetrievalReport retrieval_report(const EmbeddingMatrix& images, const EmbeddingMatrix& texts,
                                 const PairedSet& pairs);

RetrievalReport retrieval_report(const SimilarityMatrix& sim, const PairedSet& pairs);

}  // namespace rsvl
