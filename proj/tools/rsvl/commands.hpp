#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "report.hpp"
#include "rsvl/retrieval.hpp"
#include "rsvl/tensor.hpp"

namespace cli {

struct Outcome {
  Report report;
  std::string table;
  std::string csv;  // main table as CSV
};

struct CommonOptions {
  std::filesystem::path report;
  std::filesystem::path csv;
  bool quiet = false;
};

struct Subcommand {
  CLI::App* app = nullptr;
  std::shared_ptr<CommonOptions> common;
  std::function<Outcome()> run;
};

// --report / --csv / --quiet, shared by every subcommand.
std::shared_ptr<CommonOptions> add_common(CLI::App* app);

Subcommand add_train(CLI::App& root);
Subcommand add_eval_retrieval(CLI::App& root);
Subcommand add_eval_zeroshot(CLI::App& root);
Subcommand add_eval_semloc(CLI::App& root);
Subcommand add_eval_probe(CLI::App& root);
Subcommand add_stats(CLI::App& root);
Subcommand add_caption(CLI::App& root);
Subcommand add_merge(CLI::App& root);

// Input helpers shared by the subcommands.

// Labels from a row-id sidecar; every row of a `rows`-row matrix must carry
// exactly one non-negative label.
std::vector<std::size_t> read_labels(const std::filesystem::path& path, std::size_t rows);

// {"image_of": [caption -> image index, ...]}
rsvl::PairedSet read_pairs(const std::filesystem::path& path, std::size_t n_images);

// JSON array of strings.
std::vector<std::string> read_string_array(const std::filesystem::path& path);

}  // namespace cli
