#include "rsvl/mock_caption_server.hpp"

#include <functional>

#include <httplib.h>
#include <json.hpp>

#include "rsvl/error.hpp"

namespace rsvl {

MockCaptionServer::MockCaptionServer() : server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

MockCaptionServer::~MockCaptionServer() { stop(); }

void MockCaptionServer::install_routes() {
  server_->Post("/v1/caption", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("prompt") || !body["prompt"].is_string() ||
        !body.contains("image_id") || !body["image_id"].is_string()) {
      res.status = 400;
      res.set_content(R"({"error":"bad request"})", "application/json");
      return;
    }
    Request r{body["image_id"].get<std::string>(), body["prompt"].get<std::string>(),
              body.contains("image_b64")};

    int status = 200;
    std::chrono::milliseconds jitter{0};
    {
      std::lock_guard lock(mu_);
      requests_.push_back(r);
      if (fail_next_ > 0) {
        --fail_next_;
        status = fail_next_status_;
      } else if (failing_images_.contains(r.image_id)) {
        status = failing_status_;
      }
      if (max_jitter_.count() > 0) {
        auto h = std::hash<std::string>{}(r.image_id + r.prompt);
        jitter = std::chrono::milliseconds(static_cast<long>(h % (max_jitter_.count() + 1)));
      }
    }
    if (jitter.count() > 0) std::this_thread::sleep_for(jitter);
    res.status = status;
    if (status == 200) {
      res.set_content(nlohmann::json{{"caption", "cap:" + r.prompt}}.dump(), "application/json");
    } else {
      res.set_content(R"({"error":"scripted failure"})", "application/json");
    }
  });
}

void MockCaptionServer::start(const std::string& host, int port) {
  port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (port_ < 0) throw Error(ErrorCode::Io, "mock server cannot bind " + host);
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void MockCaptionServer::listen_blocking(const std::string& host, int port) {
  port_ = port;
  if (!server_->listen(host, port)) throw Error(ErrorCode::Io, "mock server cannot listen");
}

void MockCaptionServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockCaptionServer::url() const {
  return "http://127.0.0.1:" + std::to_string(port_);
}

void MockCaptionServer::fail_next(int count, int status) {
  std::lock_guard lock(mu_);
  fail_next_ = count;
  fail_next_status_ = status;
}

void MockCaptionServer::fail_image(const std::string& image_id, int status) {
  std::lock_guard lock(mu_);
  failing_images_.insert(image_id);
  failing_status_ = status;
}

void MockCaptionServer::set_max_jitter(std::chrono::milliseconds jitter) {
  std::lock_guard lock(mu_);
  max_jitter_ = jitter;
}

std::vector<MockCaptionServer::Request> MockCaptionServer::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

std::size_t MockCaptionServer::request_count() const {
  std::lock_guard lock(mu_);
  return requests_.size();
}

}  // namespace rsvl
