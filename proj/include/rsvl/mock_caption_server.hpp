#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace rsvl {

/// In-process implementation of the captioning contract for tests and demos.
///
/// POST /v1/caption answers {"caption": "cap:<prompt>"}. Failures can be
/// scripted: the next N requests get a 5xx, or specific image ids always
/// fail. Per-image latency jitter scrambles completion order so ordering
/// guarantees of callers get exercised.
class MockCaptionServer {
 public:
  MockCaptionServer();
  ~MockCaptionServer();

  MockCaptionServer(const MockCaptionServer&) = delete;
  MockCaptionServer& operator=(const MockCaptionServer&) = delete;

  // Binds to host:port (port 0 picks a free one) and serves on a thread.
  void start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();

  // Blocks serving on the calling thread.
  void listen_blocking(const std::string& host, int port);

  int port() const { return port_; }
  std::string url() const;

  void fail_next(int count, int status = 500);
  void fail_image(const std::string& image_id, int status = 500);
  void set_max_jitter(std::chrono::milliseconds jitter);

  struct Request {
    std::string image_id;
    std::string prompt;
    bool has_image = false;
  };
  std::vector<Request> requests() const;
  std::size_t request_count() const;

 private:
  void install_routes();

  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;

  mutable std::mutex mu_;
  int fail_next_ = 0;
  int fail_next_status_ = 500;
  std::set<std::string> failing_images_;
  int failing_status_ = 500;
  std::chrono::milliseconds max_jitter_{0};
  std::vector<Request> requests_;
};

}  // namespace rsvl
