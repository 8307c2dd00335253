#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace cli {

using nlohmann::ordered_json;

// Bad flags, unreadable or malformed inputs: reported before any compute
// starts, exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runs `load` and turns whatever it throws into a UsageError.
template <class F>
auto validated(F&& load) -> decltype(load()) {
  try {
    return load();
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(const std::string& bytes);

/// JSON report shared by every subcommand. Everything outside "metadata"
/// is a pure function of the inputs and configuration.
class Report {
 public:
  explicit Report(std::string command);

  ordered_json& config() { return config_; }
  ordered_json& result() { return result_; }

  void seed(std::uint64_t s) { seed_ = s; }
  void input(const std::string& name, const std::filesystem::path& path);
  void output(const std::string& name, const std::filesystem::path& path);

  ordered_json to_json() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  ordered_json config_ = ordered_json::object();
  ordered_json result_ = ordered_json::object();
  std::optional<std::uint64_t> seed_;
  std::vector<std::pair<std::string, std::filesystem::path>> inputs_;
  std::vector<std::pair<std::string, std::filesystem::path>> outputs_;
  std::chrono::system_clock::time_point started_;
  std::chrono::steady_clock::time_point started_mono_;
};

// Fixed-width text table for the terminal.
class Table {
 public:
  explicit Table(std::vector<std::string> header);
  void row(std::vector<std::string> cells);
  std::string str() const;
  std::string csv() const;

 private:
  std::vector<std::vector<std::string>> rows_;
};

std::string fixed(double v, int decimals = 2);

}  // namespace cli
