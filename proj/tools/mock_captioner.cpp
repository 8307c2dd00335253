// Standalone captioning endpoint for trying `rsvl caption` without a model.
//
//   rsvl-mock-captioner --port 8080 [--fail-image ID]... [--jitter-ms 20]

#include <iostream>

#include <CLI11.hpp>

#include "rsvl/mock_caption_server.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Mock captioning server answering POST /v1/caption with \"cap:<prompt>\"", "rsvl-mock-captioner"};
  std::string host = "127.0.0.1";
  int port = 8080;
  std::vector<std::string> failing;
  int jitter_ms = 0;
  app.add_option("--host", host, "Bind address")->capture_default_str();
  app.add_option("--port", port, "Port")->capture_default_str();
  app.add_option("--fail-image", failing, "Image id that always gets HTTP 500 (repeatable)");
  app.add_option("--jitter-ms", jitter_ms, "Max per-request delay")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  rsvl::MockCaptionServer server;
  for (const auto& id : failing) server.fail_image(id);
  server.set_max_jitter(std::chrono::milliseconds(jitter_ms));
  std::cerr << "listening on http://" << host << ":" << port << '\n';
  try {
    server.listen_blocking(host, port);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  return 0;
}
