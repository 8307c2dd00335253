#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rsvl/tensor.hpp"

namespace rsvl {

inline constexpr std::string_view kClassPlaceholder = "{class name}";
inline constexpr std::string_view kTemplateSatelliteA = "a satellite image of {class name}";
inline constexpr std::string_view kTemplateSatelliteThe = "the satellite image of {class name}";

class PromptTemplate {
 public:
  // Throws BadTemplate unless the placeholder occurs exactly once.
  explicit PromptTemplate(std::string pattern);

  // Named presets: "a-satellite" and "the-satellite".
  static PromptTemplate preset(std::string_view name);

  const std::string& pattern() const noexcept { return pattern_; }
  std::string fill(std::string_view class_name) const;

 private:
  std::string pattern_;
  std::size_t at_ = 0;
};

// "Storage_Tanks" -> "storage tanks"
std::string normalize_class_name(std::string_view name);

/// One prompt per class, order preserved, class names normalized first.
std::vector<std::string> build_prompts(const std::vector<std::string>& classes,
                                       const PromptTemplate& tmpl);

/// Argmax over classes of the image/class dot product; ties go to the lowest
/// class index.
std::vector<std::size_t> zeroshot_classify(const EmbeddingMatrix& image_emb,
                                           const EmbeddingMatrix& class_emb);

double top1_accuracy(std::span<const std::size_t> pred, std::span<const std::size_t> labels);

struct ZeroShotEntry {
  std::string dataset;
  double accuracy = 0.0;
  std::size_t n_images = 0;
};

struct ZeroShotReport {
  std::vector<ZeroShotEntry> datasets;
  double average = 0.0;
};

ZeroShotReport make_zeroshot_report(std::vector<ZeroShotEntry> entries);

}  // namespace rsvl
