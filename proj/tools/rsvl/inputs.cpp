#include <fstream>

#include <json.hpp>

#include "commands.hpp"
#include "rsvl/error.hpp"

namespace cli {

std::shared_ptr<CommonOptions> add_common(CLI::App* app) {
  auto c = std::make_shared<CommonOptions>();
  c->report = "rsvl-" + app->get_name() + ".json";
  app->add_option("--report", c->report, "Where to write the JSON report");
  app->add_option("--csv", c->csv, "Also write the summary table as CSV");
  app->add_flag("--quiet", c->quiet, "Do not print the summary table");
  return c;
}

namespace {

nlohmann::json parse_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

}  // namespace

std::vector<std::size_t> read_labels(const std::filesystem::path& path, std::size_t rows) {
  auto ids = rsvl::read_row_ids(path);
  std::vector<std::size_t> labels(rows, 0);
  std::vector<bool> seen(rows, false);
  for (const auto& id : ids) {
    if (id.row >= rows) {
      throw UsageError(path.string() + ": row " + std::to_string(id.row) + " but matrix has " +
                       std::to_string(rows) + " rows");
    }
    if (seen[id.row]) throw UsageError(path.string() + ": row " + std::to_string(id.row) + " repeated");
    if (!id.label || *id.label < 0) {
      throw UsageError(path.string() + ": row " + std::to_string(id.row) + " has no label");
    }
    seen[id.row] = true;
    labels[id.row] = static_cast<std::size_t>(*id.label);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    if (!seen[r]) throw UsageError(path.string() + ": no entry for row " + std::to_string(r));
  }
  return labels;
}

rsvl::PairedSet read_pairs(const std::filesystem::path& path, std::size_t n_images) {
  auto j = parse_file(path);
  if (!j.is_object() || !j.contains("image_of") || !j["image_of"].is_array()) {
    throw UsageError(path.string() + ": expected {\"image_of\": [...]}");
  }
  std::vector<std::size_t> image_of;
  for (const auto& v : j["image_of"]) {
    if (!v.is_number_unsigned()) throw UsageError(path.string() + ": image_of entries must be indices");
    image_of.push_back(v.get<std::size_t>());
  }
  return rsvl::PairedSet(n_images, std::move(image_of));
}

std::vector<std::string> read_string_array(const std::filesystem::path& path) {
  auto j = parse_file(path);
  if (!j.is_array()) throw UsageError(path.string() + ": expected a JSON array of strings");
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string()) throw UsageError(path.string() + ": expected a JSON array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace cli
