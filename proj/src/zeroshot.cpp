#include "rsvl/zeroshot.hpp"

#include <cctype>

#include "rsvl/error.hpp"

namespace rsvl {

PromptTemplate::PromptTemplate(std::string pattern) : pattern_(std::move(pattern)) {
  std::size_t first = pattern_.find(kClassPlaceholder);
  if (first == std::string::npos) {
    throw Error(ErrorCode::BadTemplate, "missing placeholder in \"" + pattern_ + "\"");
  }
  if (pattern_.find(kClassPlaceholder, first + 1) != std::string::npos) {
    throw Error(ErrorCode::BadTemplate, "placeholder repeated in \"" + pattern_ + "\"");
  }
  at_ = first;
}

PromptTemplate PromptTemplate::preset(std::string_view name) {
  if (name == "a-satellite") return PromptTemplate(std::string(kTemplateSatelliteA));
  if (name == "the-satellite") return PromptTemplate(std::string(kTemplateSatelliteThe));
  throw Error(ErrorCode::BadTemplate, "unknown preset \"" + std::string(name) + "\"");
}

std::string PromptTemplate::fill(std::string_view class_name) const {
  std::string out;
  out.reserve(pattern_.size() + class_name.size());
  out.append(pattern_, 0, at_);
  out.append(class_name);
  out.append(pattern_, at_ + kClassPlaceholder.size());
  return out;
}

std::string normalize_class_name(std::string_view name) {
  std::string out(name);
  for (char& c : out) {
    if (c == '_') c = ' ';
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::vector<std::string> build_prompts(const std::vector<std::string>& classes,
                                       const PromptTemplate& tmpl) {
  if (classes.empty()) throw Error(ErrorCode::Empty, "class list is empty");
  std::vector<std::string> prompts;
  prompts.reserve(classes.size());
  for (const auto& c : classes) prompts.push_back(tmpl.fill(normalize_class_name(c)));
  return prompts;
}

std::vector<std::size_t> zeroshot_classify(const EmbeddingMatrix& image_emb,
                                           const EmbeddingMatrix& class_emb) {
  if (image_emb.dim() != class_emb.dim() || class_emb.rows() == 0) {
    throw Error(ErrorCode::ShapeMismatch, "image dim " + std::to_string(image_emb.dim()) +
                                              ", class dim " + std::to_string(class_emb.dim()) +
                                              ", classes " + std::to_string(class_emb.rows()));
  }
  std::vector<std::size_t> pred(image_emb.rows());
  for (std::size_t i = 0; i < image_emb.rows(); ++i) {
    auto x = image_emb.row(i);
    std::size_t best = 0;
    double best_score = dot(x, class_emb.row(0));
    for (std::size_t c = 1; c < class_emb.rows(); ++c) {
      double s = dot(x, class_emb.row(c));
      if (s > best_score) {
        best_score = s;
        best = c;
      }
    }
    pred[i] = best;
  }
  return pred;
}

double top1_accuracy(std::span<const std::size_t> pred, std::span<const std::size_t> labels) {
  if (pred.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(pred.size()) + " predictions vs " + std::to_string(labels.size()));
  }
  if (pred.empty()) throw Error(ErrorCode::Empty, "no predictions");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i];
  return 100.0 * static_cast<double>(hits) / static_cast<double>(pred.size());
}

ZeroShotReport make_zeroshot_report(std::vector<ZeroShotEntry> entries) {
  ZeroShotReport r;
  r.datasets = std::move(entries);
  if (!r.datasets.empty()) {
    double sum = 0.0;
    for (const auto& e : r.datasets) sum += e.accuracy;
    r.average = sum / static_cast<double>(r.datasets.size());
  }
  return r;
}

}  // namespace rsvl
