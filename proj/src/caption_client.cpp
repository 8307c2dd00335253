#include "rsvl/caption_client.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iterator>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "rsvl/error.hpp"

namespace rsvl {

std::vector<ImageRef> read_image_list(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<ImageRef> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      ImageRef r;
      r.image_id = j.at("image_id").get<std::string>();
      r.source_dataset = j.at("source_dataset").get<std::string>();
      r.width = j.at("width").get<std::int64_t>();
      r.height = j.at("height").get<std::int64_t>();
      if (j.contains("path") && !j["path"].is_null()) r.path = j["path"].get<std::string>();
      if (r.width < 1 || r.height < 1) {
        throw Error(ErrorCode::Parse, "image " + r.image_id + " has non-positive size");
      }
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

namespace {

std::string request_body(const ImageRef& image, PromptId prompt) {
  nlohmann::json body = {{"image_id", image.image_id}, {"prompt", prompt_text(prompt)}};
  if (image.path) {
    std::ifstream f(*image.path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot read image " + image.path->string());
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    body["image_b64"] = httplib::detail::base64_encode(bytes);
  }
  return body.dump();
}

}  // namespace

std::string caption_image(const ImageRef& image, PromptId prompt, const CaptionClientConfig& cfg) {
  const std::string body = request_body(image, prompt);
  httplib::Client client(cfg.base_url);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());

  auto backoff = std::chrono::duration<double, std::milli>(cfg.initial_backoff);
  std::string last_error;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= cfg.backoff_multiplier;
    }
    auto res = client.Post("/v1/caption", body, "application/json");
    if (!res) {
      last_error = "transport: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error(ErrorCode::RequestRejected,
                  image.image_id + ": HTTP " + std::to_string(res->status));
    }
    nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("caption") || !j["caption"].is_string()) {
      throw Error(ErrorCode::MalformedResponse, image.image_id + ": " + res->body.substr(0, 200));
    }
    auto caption = j["caption"].get<std::string>();
    if (caption.empty()) throw Error(ErrorCode::MalformedResponse, image.image_id + ": empty caption");
    return caption;
  }
  throw Error(ErrorCode::EndpointDown, image.image_id + " after " +
                                           std::to_string(cfg.max_retries) + " retries (" +
                                           last_error + ")");
}

ManifestBuild build_manifest(std::span<const ImageRef> images, const CaptionClientConfig& cfg) {
  struct Slot {
    std::vector<ManifestRecord> records;
    std::optional<std::string> error;
  };
  std::vector<Slot> slots(images.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < images.size(); i = next++) {
      const auto& img = images[i];
      try {
        auto plan = resize_center_crop_plan(img.width, img.height, cfg.target_size);
        std::vector<ManifestRecord> recs;
        for (PromptId p : kPromptIds) {
          ManifestRecord r;
          r.image_id = img.image_id;
          r.source_dataset = img.source_dataset;
          r.crop = plan.crop;
          r.prompt_id = p;
          r.prompt_text = std::string(prompt_text(p));
          r.caption = caption_image(img, p, cfg);
          recs.push_back(std::move(r));
        }
        slots[i].records = std::move(recs);
      } catch (const std::exception& e) {
        slots[i].error = e.what();
      }
    }
  };

  std::size_t n_threads = std::clamp<std::size_t>(cfg.concurrency, 1, std::max<std::size_t>(images.size(), 1));
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  ManifestBuild out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].error) {
      out.failures.push_back({images[i].image_id, *slots[i].error});
    } else {
      for (auto& r : slots[i].records) out.records.push_back(std::move(r));
    }
  }
  return out;
}

void write_failures(std::span<const ManifestFailure> failures, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  for (const auto& e : failures) {
    f << nlohmann::json{{"image_id", e.image_id}, {"error", e.error}}.dump() << '\n';
  }
}

}  // namespace rsvl
