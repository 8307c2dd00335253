#include "rsvl/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "rsvl/error.hpp"

namespace rsvl {

std::string_view prompt_text(PromptId id) {
  return id == PromptId::Short ? kPromptShort : kPromptDetail;
}

std::string_view to_string(PromptId id) { return id == PromptId::Short ? "SHORT" : "DETAIL"; }

PromptId parse_prompt_id(std::string_view name) {
  if (name == "SHORT") return PromptId::Short;
  if (name == "DETAIL") return PromptId::Detail;
  throw Error(ErrorCode::Parse, "unknown prompt_id \"" + std::string(name) + "\"");
}

void ManifestRecord::validate() const {
  if (prompt_text != rsvl::prompt_text(prompt_id)) {
    throw Error(ErrorCode::Parse, "record " + image_id + ": prompt_text does not match " +
                                      std::string(to_string(prompt_id)));
  }
  if (caption.empty()) throw Error(ErrorCode::Parse, "record " + image_id + ": empty caption");
}

nlohmann::json to_json(const ManifestRecord& r) {
  return {{"image_id", r.image_id},
          {"source_dataset", r.source_dataset},
          {"crop", {{"x", r.crop.x}, {"y", r.crop.y}, {"w", r.crop.w}, {"h", r.crop.h}}},
          {"prompt_id", to_string(r.prompt_id)},
          {"prompt_text", r.prompt_text},
          {"caption", r.caption}};
}

ManifestRecord record_from_json(const nlohmann::json& j) {
  ManifestRecord r;
  try {
    r.image_id = j.at("image_id").get<std::string>();
    r.source_dataset = j.at("source_dataset").get<std::string>();
    const auto& c = j.at("crop");
    r.crop = {c.at("x").get<std::int64_t>(), c.at("y").get<std::int64_t>(),
              c.at("w").get<std::int64_t>(), c.at("h").get<std::int64_t>()};
    r.prompt_id = parse_prompt_id(j.at("prompt_id").get<std::string>());
    r.prompt_text = j.at("prompt_text").get<std::string>();
    r.caption = j.at("caption").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, e.what());
  }
  r.validate();
  return r;
}

void write_manifest(std::span<const ManifestRecord> records, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  for (const auto& r : records) f << to_json(r).dump() << '\n';
}

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<ManifestRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

ResizePlan resize_center_crop_plan(std::int64_t w, std::int64_t h, std::int64_t target) {
  if (w < 1 || h < 1 || target < 1) {
    throw Error(ErrorCode::InvalidConfig, "image and target sizes must be positive");
  }
  ResizePlan p;
  // round_half_up(a * target / s) == floor((2 * a * target + s) / (2 * s))
  auto scaled = [&](std::int64_t a, std::int64_t s) { return (2 * a * target + s) / (2 * s); };
  if (w <= h) {
    p.resized_w = target;
    p.resized_h = std::max<std::int64_t>(target, scaled(h, w));
  } else {
    p.resized_h = target;
    p.resized_w = std::max<std::int64_t>(target, scaled(w, h));
  }
  p.crop = {(p.resized_w - target) / 2, (p.resized_h - target) / 2, target, target};
  return p;
}

void SourceCounts::add(const std::string& source, std::uint64_t n) {
  per_source[source] += n;
  total += n;
}

SourceCounts& SourceCounts::operator+=(const SourceCounts& other) {
  for (const auto& [src, n] : other.per_source) add(src, n);
  return *this;
}

MergeResult merge_manifests(std::span<const std::vector<ManifestRecord>> parts) {
  MergeResult out;
  std::set<std::pair<std::string, PromptId>> seen;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    for (const auto& r : parts[p]) {
      if (!seen.emplace(r.image_id, r.prompt_id).second) {
        throw Error(ErrorCode::DuplicateKey, "(" + r.image_id + ", " +
                                                 std::string(to_string(r.prompt_id)) +
                                                 ") repeated in part " + std::to_string(p));
      }
      out.merged.push_back(r);
      out.counts.add(r.source_dataset, 1);
    }
  }
  return out;
}

std::size_t word_count(std::string_view caption) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : caption) {
    bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

std::uint64_t LengthHistogram::total() const {
  std::uint64_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

LengthHistogram caption_length_histogram(std::span<const std::string> captions,
                                         std::size_t bin_width) {
  if (bin_width < 1) throw Error(ErrorCode::InvalidConfig, "bin_width must be >= 1");
  LengthHistogram h;
  h.bin_width = bin_width;
  for (const auto& c : captions) {
    std::size_t bin = word_count(c) / bin_width;
    if (bin >= h.counts.size()) h.counts.resize(bin + 1, 0);
    ++h.counts[bin];
  }
  return h;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view strip_edge_punct(std::string_view tok) {
  auto punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
  while (!tok.empty() && punct(tok.front())) tok.remove_prefix(1);
  while (!tok.empty() && punct(tok.back())) tok.remove_suffix(1);
  return tok;
}

}  // namespace

Stoplist parse_stoplist(std::istream& in) {
  Stoplist out;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.insert(lower(tok));
  }
  return out;
}

Stoplist load_stoplist(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return parse_stoplist(f);
}

TokenCounts token_frequency(std::span<const std::string> captions, const Stoplist& stoplist) {
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& c : captions) {
    std::istringstream ss(c);
    std::string raw;
    while (ss >> raw) {
      auto tok = lower(strip_edge_punct(raw));
      if (tok.empty() || stoplist.contains(tok)) continue;
      ++counts[tok];
    }
  }
  TokenCounts out(counts.begin(), counts.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return out;
}

CaptionStats caption_stats(std::span<const std::string> captions, const Stoplist& stoplist,
                           std::size_t bin_width) {
  CaptionStats s;
  s.histogram = caption_length_histogram(captions, bin_width);
  s.tokens = token_frequency(captions, stoplist);
  s.total_pairs = captions.size();
  return s;
}

}  // namespace rsvl
