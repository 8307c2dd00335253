#include "report.hpp"

#include <algorithm>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include <openssl/evp.h>

namespace cli {

namespace {

std::string to_hex(const unsigned char* d, unsigned n) {
  std::ostringstream ss;
  ss << std::hex << std::setfill('0');
  for (unsigned i = 0; i < n; ++i) ss << std::setw(2) << static_cast<int>(d[i]);
  return ss.str();
}

std::string iso8601(std::chrono::system_clock::time_point t) {
  std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr)) {
    throw std::runtime_error("sha256 failed");
  }
  return to_hex(md, len);
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof buf);
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(f.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  return to_hex(md, len);
}

Report::Report(std::string command)
    : command_(std::move(command)),
      started_(std::chrono::system_clock::now()),
      started_mono_(std::chrono::steady_clock::now()) {}

void Report::input(const std::string& name, const std::filesystem::path& path) {
  inputs_.emplace_back(name, path);
}

void Report::output(const std::string& name, const std::filesystem::path& path) {
  outputs_.emplace_back(name, path);
}

ordered_json Report::to_json() const {
  ordered_json j;
  j["command"] = command_;
  j["config"] = config_;
  j["result"] = result_;

  ordered_json prov;
  prov["config_hash"] = sha256_hex(config_.dump());
  prov["seed"] = seed_ ? ordered_json(*seed_) : ordered_json(nullptr);
  prov["inputs"] = ordered_json::array();
  for (const auto& [name, path] : inputs_) {
    prov["inputs"].push_back({{"name", name}, {"path", path.string()}, {"sha256", sha256_file(path)}});
  }
  prov["outputs"] = ordered_json::array();
  for (const auto& [name, path] : outputs_) {
    prov["outputs"].push_back({{"name", name}, {"path", path.string()}, {"sha256", sha256_file(path)}});
  }
  j["provenance"] = prov;

  auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started_mono_);
  j["metadata"] = {{"tool", "rsvl"},
                   {"started_at", iso8601(started_)},
                   {"elapsed_ms", elapsed.count()}};
  return j;
}

void Report::write(const std::filesystem::path& path) const {
  auto j = to_json();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write report " + path.string());
  f << j.dump(2) << '\n';
}

Table::Table(std::vector<std::string> header) { rows_.push_back(std::move(header)); }

void Table::row(std::vector<std::string> cells) { rows_.push_back(std::move(cells)); }

std::string Table::str() const {
  std::vector<std::size_t> width;
  for (const auto& r : rows_) {
    width.resize(std::max(width.size(), r.size()), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream ss;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    for (std::size_t c = 0; c < rows_[i].size(); ++c) {
      if (c) ss << "  ";
      // First column left-aligned, the rest right-aligned.
      ss << (c == 0 ? std::left : std::right) << std::setw(static_cast<int>(width[c]))
         << rows_[i][c];
    }
    ss << '\n';
    if (i == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      ss << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    }
  }
  return ss.str();
}

std::string Table::csv() const {
  std::ostringstream ss;
  for (const auto& r : rows_) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) ss << ',';
      if (r[c].find_first_of(",\"\n") == std::string::npos) {
        ss << r[c];
        continue;
      }
      ss << '"';
      for (char ch : r[c]) ss << (ch == '"' ? "\"\"" : std::string(1, ch));
      ss << '"';
    }
    ss << '\n';
  }
  return ss.str();
}

std::string fixed(double v, int decimals) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(decimals) << v;
  return ss.str();
}

}  // namespace cli
