#include <algorithm>
#include <chrono>
#include <map>

#include "commands.hpp"
#include "rsvl/caption_client.hpp"
#include "rsvl/dataset.hpp"
#include "rsvl/error.hpp"

#ifndef RSVL_DEFAULT_STOPLIST
#define RSVL_DEFAULT_STOPLIST "data/stoplist.txt"
#endif

namespace cli {

namespace {

ordered_json counts_json(const rsvl::SourceCounts& c) {
  ordered_json j = ordered_json::object();
  for (const auto& [src, n] : c.per_source) j[src] = n;
  return j;
}

std::vector<std::string> path_strings(const std::vector<std::filesystem::path>& ps) {
  std::vector<std::string> out;
  for (const auto& p : ps) out.push_back(p.string());
  return out;
}

// ---- stats ----

struct StatsOptions {
  std::vector<std::filesystem::path> manifests;
  std::filesystem::path stoplist = RSVL_DEFAULT_STOPLIST;
  std::size_t bin_width = 10;
  std::size_t top = 50;
};

Outcome run_stats(const StatsOptions& o) {
  Report rep("stats");
  struct Loaded {
    std::vector<rsvl::ManifestRecord> records;
    rsvl::Stoplist stoplist;
  };
  auto in = validated([&] {
    if (o.bin_width < 1) throw UsageError("--bin-width must be >= 1");
    Loaded l;
    for (const auto& m : o.manifests) {
      auto part = rsvl::read_manifest(m);
      l.records.insert(l.records.end(), part.begin(), part.end());
    }
    l.stoplist = rsvl::load_stoplist(o.stoplist);
    return l;
  });
  rep.config() = {{"manifests", path_strings(o.manifests)},
                  {"stoplist", o.stoplist.string()},
                  {"bin_width", o.bin_width},
                  {"top", o.top}};
  for (const auto& m : o.manifests) rep.input("manifest", m);
  rep.input("stoplist", o.stoplist);

  std::vector<std::string> captions;
  rsvl::SourceCounts sources;
  std::map<std::string, std::uint64_t> prompts;
  for (const auto& r : in.records) {
    captions.push_back(r.caption);
    sources.add(r.source_dataset, 1);
    ++prompts[std::string(rsvl::to_string(r.prompt_id))];
  }
  auto s = rsvl::caption_stats(captions, in.stoplist, o.bin_width);

  auto& j = rep.result();
  j["total_pairs"] = s.total_pairs;
  j["per_source"] = counts_json(sources);
  j["per_prompt"] = prompts;
  j["histogram"] = {{"bin_width", s.histogram.bin_width}, {"counts", s.histogram.counts}};
  j["vocabulary_size"] = s.tokens.size();
  j["top_tokens"] = ordered_json::array();
  for (std::size_t i = 0; i < std::min(o.top, s.tokens.size()); ++i) {
    j["top_tokens"].push_back({{"token", s.tokens[i].first}, {"count", s.tokens[i].second}});
  }

  Table t({"words", "captions"});
  for (std::size_t b = 0; b < s.histogram.counts.size(); ++b) {
    if (s.histogram.counts[b] == 0) continue;
    t.row({std::to_string(b * o.bin_width) + "-" + std::to_string((b + 1) * o.bin_width - 1),
           std::to_string(s.histogram.counts[b])});
  }
  Table tok({"token", "count"});
  for (std::size_t i = 0; i < std::min<std::size_t>(10, s.tokens.size()); ++i)
    tok.row({s.tokens[i].first, std::to_string(s.tokens[i].second)});
  return {std::move(rep), "pairs " + std::to_string(s.total_pairs) + "\n\n" + t.str() + "\n" + tok.str(), t.csv()};
}

// ---- caption ----

struct CaptionOptions {
  std::filesystem::path images, out, failures;
  rsvl::CaptionClientConfig client;
  std::int64_t backoff_ms = 200;
  std::int64_t timeout_ms = 60000;
};

Outcome run_caption(const CaptionOptions& o) {
  Report rep("caption");
  auto cfg = o.client;
  cfg.initial_backoff = std::chrono::milliseconds(o.backoff_ms);
  cfg.timeout = std::chrono::milliseconds(o.timeout_ms);
  auto failures_path = o.failures.empty() ? std::filesystem::path(o.out.string() + ".failures.jsonl")
                                          : o.failures;
  auto images = validated([&] {
    if (cfg.concurrency < 1) throw UsageError("--concurrency must be >= 1");
    if (cfg.max_retries < 0) throw UsageError("--max-retries must be >= 0");
    if (o.backoff_ms < 0 || o.timeout_ms < 1) throw UsageError("--backoff-ms / --timeout-ms out of range");
    return rsvl::read_image_list(o.images);
  });
  rep.config() = {{"images", o.images.string()},
                  {"endpoint", cfg.base_url},
                  {"concurrency", cfg.concurrency},
                  {"max_retries", cfg.max_retries},
                  {"backoff_ms", o.backoff_ms},
                  {"timeout_ms", o.timeout_ms},
                  {"target_size", cfg.target_size},
                  {"out", o.out.string()},
                  {"failures", failures_path.string()}};
  rep.input("images", o.images);

  auto built = rsvl::build_manifest(images, cfg);
  if (!images.empty() && built.records.empty()) {
    throw std::runtime_error("every image failed; first error: " + built.failures.front().error);
  }
  rsvl::write_manifest(built.records, o.out);
  rsvl::write_failures(built.failures, failures_path);
  rep.output("manifest", o.out);
  rep.output("failures", failures_path);

  rsvl::SourceCounts sources;
  for (const auto& r : built.records) sources.add(r.source_dataset, 1);
  auto& j = rep.result();
  j["images"] = images.size();
  j["records"] = built.records.size();
  j["failed_images"] = built.failures.size();
  j["per_source"] = counts_json(sources);

  Table t({"images", "records", "failed"});
  t.row({std::to_string(images.size()), std::to_string(built.records.size()),
         std::to_string(built.failures.size())});
  return {std::move(rep), t.str(), t.csv()};
}

// ---- merge ----

struct MergeOptions {
  std::vector<std::filesystem::path> parts;
  std::filesystem::path out;
};

Outcome run_merge(const MergeOptions& o) {
  Report rep("merge");
  std::vector<std::size_t> part_sizes;
  auto merged = validated([&] {
    std::vector<std::vector<rsvl::ManifestRecord>> parts;
    for (const auto& p : o.parts) {
      parts.push_back(rsvl::read_manifest(p));
      part_sizes.push_back(parts.back().size());
    }
    return rsvl::merge_manifests(parts);
  });
  rep.config() = {{"parts", path_strings(o.parts)}, {"out", o.out.string()}};
  for (const auto& p : o.parts) rep.input("part", p);

  rsvl::write_manifest(merged.merged, o.out);
  rep.output("manifest", o.out);

  auto& j = rep.result();
  j["parts"] = ordered_json::array();
  for (std::size_t i = 0; i < o.parts.size(); ++i)
    j["parts"].push_back({{"path", o.parts[i].string()}, {"records", part_sizes[i]}});
  j["per_source"] = counts_json(merged.counts);
  j["total"] = merged.counts.total;

  Table t({"source", "pairs"});
  for (const auto& [src, n] : merged.counts.per_source) t.row({src, std::to_string(n)});
  t.row({"total", std::to_string(merged.counts.total)});
  return {std::move(rep), t.str(), t.csv()};
}

}  // namespace

Subcommand add_stats(CLI::App& root) {
  auto o = std::make_shared<StatsOptions>();
  auto* app = root.add_subcommand("stats", "Caption length histogram and token frequencies of manifests");
  app->add_option("--manifest", o->manifests, "Manifest JSONL (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  app->add_option("--stoplist", o->stoplist, "Tokens excluded from the frequency table")
      ->check(CLI::ExistingFile);
  app->add_option("--bin-width", o->bin_width, "Histogram bin width in words");
  app->add_option("--top", o->top, "Tokens kept in the report");
  auto common = add_common(app);
  return {app, common, [o] { return run_stats(*o); }};
}

Subcommand add_caption(CLI::App& root) {
  auto o = std::make_shared<CaptionOptions>();
  auto* app = root.add_subcommand("caption", "Caption images with both prompts through the HTTP captioning endpoint");
  auto& c = o->client;
  app->add_option("--images", o->images,
                  "JSONL of {\"image_id\", \"source_dataset\", \"width\", \"height\", \"path\"?}")
      ->required()
      ->check(CLI::ExistingFile);
  app->add_option("--out", o->out, "Manifest JSONL to write")->required();
  app->add_option("--failures", o->failures, "Failures JSONL (default: <out>.failures.jsonl)");
  app->add_option("--endpoint", c.base_url, "Captioning service base URL");
  app->add_option("--concurrency", c.concurrency, "Requests in flight");
  app->add_option("--max-retries", c.max_retries, "Retries after a 5xx or transport failure");
  app->add_option("--backoff-ms", o->backoff_ms, "First retry delay; doubles on each retry");
  app->add_option("--timeout-ms", o->timeout_ms, "Connect and read timeout per request");
  app->add_option("--target-size", c.target_size, "Square crop side in pixels");
  auto common = add_common(app);
  return {app, common, [o] { return run_caption(*o); }};
}

Subcommand add_merge(CLI::App& root) {
  auto o = std::make_shared<MergeOptions>();
  auto* app = root.add_subcommand("merge", "Concatenate manifests, rejecting repeated (image_id, prompt_id) keys");
  app->add_option("--part", o->parts, "Manifest JSONL (repeatable, merged in order)")
      ->required()
      ->check(CLI::ExistingFile);
  app->add_option("--out", o->out, "Merged manifest JSONL")->required();
  auto common = add_common(app);
  return {app, common, [o] { return run_merge(*o); }};
}

}  // namespace cli
