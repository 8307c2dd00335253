#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rsvl/dataset.hpp"

namespace rsvl {

// One source image awaiting captions. `path`, when set, is sent to the
// captioning endpoint as base64 in the "image_b64" field.
struct ImageRef {
  std::string image_id;
  std::string source_dataset;
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::optional<std::filesystem::path> path;
};

std::vector<ImageRef> read_image_list(const std::filesystem::path& path);

struct CaptionClientConfig {
  std::string base_url = "http://127.0.0.1:8080";
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{200};
  double backoff_multiplier = 2.0;
  std::chrono::milliseconds timeout{60000};
  std::size_t concurrency = 8;
  std::int64_t target_size = 512;
};

/// POST /v1/caption with the canonical prompt. 5xx and transport failures
/// are retried with exponential backoff up to max_retries times before
/// EndpointDown; 4xx gives RequestRejected; a 200 without a non-empty
/// string "caption" gives MalformedResponse.
std::string caption_image(const ImageRef& image, PromptId prompt, const CaptionClientConfig& cfg);

struct ManifestFailure {
  std::string image_id;
  std::string error;
};

struct ManifestBuild {
  std::vector<ManifestRecord> records;
  std::vector<ManifestFailure> failures;
};

/// Captions every image with both prompts using up to cfg.concurrency
/// requests in flight. Records come back ordered by (input index, prompt)
/// whatever the completion order; an image with any failed prompt
/// contributes no records and one failure entry.
ManifestBuild build_manifest(std::span<const ImageRef> images, const CaptionClientConfig& cfg);

void write_failures(std::span<const ManifestFailure> failures, const std::filesystem::path& path);

}  // namespace rsvl
