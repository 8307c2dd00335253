#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rsvl/geometry.hpp"

namespace rsvl {

enum class PromptId { Short, Detail };

inline constexpr std::string_view kPromptShort = "Write a short description for the image.";
inline constexpr std::string_view kPromptDetail = "Describe the image in detail";
inline constexpr PromptId kPromptIds[] = {PromptId::Short, PromptId::Detail};

std::string_view prompt_text(PromptId id);
std::string_view to_string(PromptId id);  // "SHORT" / "DETAIL"
PromptId parse_prompt_id(std::string_view name);

struct ManifestRecord {
  std::string image_id;
  std::string source_dataset;
  CropRect crop;
  PromptId prompt_id = PromptId::Short;
  std::string prompt_text;
  std::string caption;

  // Throws Parse when the prompt text is not the canonical one for the id
  // or the caption is empty.
  void validate() const;
  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

nlohmann::json to_json(const ManifestRecord& r);
ManifestRecord record_from_json(const nlohmann::json& j);

void write_manifest(std::span<const ManifestRecord> records, const std::filesystem::path& path);
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);

struct ResizePlan {
  std::int64_t resized_w = 0;
  std::int64_t resized_h = 0;
  CropRect crop;
};

/// Scale so the shorter side equals `target` (round half up), then take the
/// centered target x target square (offsets floored).
ResizePlan resize_center_crop_plan(std::int64_t w, std::int64_t h, std::int64_t target = 512);

struct SourceCounts {
  std::map<std::string, std::uint64_t> per_source;
  std::uint64_t total = 0;

  void add(const std::string& source, std::uint64_t n);
  SourceCounts& operator+=(const SourceCounts& other);
};

struct MergeResult {
  std::vector<ManifestRecord> merged;
  SourceCounts counts;
};

/// Concatenates parts in order. A repeated (image_id, prompt_id) key is
/// rejected with DuplicateKey.
MergeResult merge_manifests(std::span<const std::vector<ManifestRecord>> parts);

std::size_t word_count(std::string_view caption);

struct LengthHistogram {
  std::size_t bin_width = 10;
  std::vector<std::uint64_t> counts;  // counts[b] covers [b*width, (b+1)*width)

  std::uint64_t total() const;
};

LengthHistogram caption_length_histogram(std::span<const std::string> captions,
                                         std::size_t bin_width = 10);

using Stoplist = std::unordered_set<std::string>;

// One token per line; '#' starts a comment; tokens are lowercased.
Stoplist parse_stoplist(std::istream& in);
Stoplist load_stoplist(const std::filesystem::path& path);

using TokenCounts = std::vector<std::pair<std::string, std::uint64_t>>;

/// Lowercased, edge-punctuation-stripped token counts with stoplist members
/// dropped. Sorted by count descending, then token ascending.
TokenCounts token_frequency(std::span<const std::string> captions, const Stoplist& stoplist);

struct CaptionStats {
  LengthHistogram histogram;
  TokenCounts tokens;
  std::uint64_t total_pairs = 0;
};

CaptionStats caption_stats(std::span<const std::string> captions, const Stoplist& stoplist,
                           std::size_t bin_width = 10);

}  // namespace rsvl
