#include "rsvl/caption_client.hpp"

#include <fstream>

#include <httplib.h>

#include <gtest/gtest.h>

#include "rsvl/error.hpp"
#include "rsvl/mock_caption_server.hpp"
#include "test_util.hpp"

using namespace rsvl;
using namespace std::chrono_literals;

namespace {

class CaptionClient : public ::testing::Test {
 protected:
  void SetUp() override {
    server.start();
    cfg.base_url = server.url();
    cfg.initial_backoff = 1ms;
    cfg.timeout = 5000ms;
  }
  void TearDown() override { server.stop(); }

  std::vector<ImageRef> images(std::size_t n) {
    std::vector<ImageRef> out;
    for (std::size_t i = 0; i < n; ++i)
      out.push_back({"img_" + std::to_string(i), "MillionAID", 1024, 768, std::nullopt});
    return out;
  }

  MockCaptionServer server;
  CaptionClientConfig cfg;
};

}  // namespace

TEST_F(CaptionClient, EchoesPrompt) {
  auto img = images(1)[0];
  EXPECT_EQ(caption_image(img, PromptId::Detail, cfg), "cap:Describe the image in detail");
  auto reqs = server.requests();
  ASSERT_EQ(reqs.size(), 1u);
  EXPECT_EQ(reqs[0].image_id, "img_0");
  EXPECT_FALSE(reqs[0].has_image);
}

TEST_F(CaptionClient, ShortPromptSentVerbatim) {
  caption_image(images(1)[0], PromptId::Short, cfg);
  EXPECT_EQ(server.requests().at(0).prompt, "Write a short description for the image.");
}

TEST_F(CaptionClient, SendsImageBytesWhenPathGiven) {
  auto dir = testutil::scratch_dir("caption_img");
  std::ofstream(dir / "x.bin", std::ios::binary) << std::string("\x89PNG\r\n", 6);
  ImageRef img{"with_pixels", "RS5M", 512, 512, dir / "x.bin"};
  caption_image(img, PromptId::Short, cfg);
  EXPECT_TRUE(server.requests().at(0).has_image);
}

TEST_F(CaptionClient, RetriesServerErrors) {
  server.fail_next(2, 500);
  EXPECT_EQ(caption_image(images(1)[0], PromptId::Short, cfg),
            "cap:Write a short description for the image.");
  EXPECT_EQ(server.request_count(), 3u);
}

TEST_F(CaptionClient, GivesUpAfterMaxRetries) {
  server.fail_next(10, 503);
  try {
    caption_image(images(1)[0], PromptId::Short, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EndpointDown);
  }
  EXPECT_EQ(server.request_count(), 4u);
}

TEST_F(CaptionClient, ClientErrorsAreNotRetried) {
  server.fail_image("img_0", 404);
  try {
    caption_image(images(1)[0], PromptId::Short, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RequestRejected);
  }
  EXPECT_EQ(server.request_count(), 1u);
}

TEST(CaptionClientNoServer, EndpointDown) {
  int port;
  {
    MockCaptionServer s;
    s.start();
    port = s.port();
    s.stop();
  }
  CaptionClientConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
  cfg.initial_backoff = 1ms;
  cfg.timeout = 500ms;
  try {
    caption_image({"a", "s", 10, 10, std::nullopt}, PromptId::Short, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EndpointDown);
  }
}

TEST(CaptionClientBadServer, MalformedResponse) {
  httplib::Server srv;
  srv.Post("/v1/caption", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"text": "wrong field"})", "application/json");
  });
  int port = srv.bind_to_any_port("127.0.0.1");
  std::thread t([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  CaptionClientConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
  try {
    caption_image({"a", "s", 10, 10, std::nullopt}, PromptId::Short, cfg);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedResponse);
  }
  srv.stop();
  t.join();
}

TEST_F(CaptionClient, ManifestHasTwoRecordsPerImage) {
  auto imgs = images(3);
  auto m = build_manifest(imgs, cfg);
  ASSERT_EQ(m.records.size(), 6u);
  EXPECT_TRUE(m.failures.empty());
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& r = m.records[i];
    EXPECT_EQ(r.image_id, imgs[i / 2].image_id);
    EXPECT_EQ(r.prompt_id, i % 2 ? PromptId::Detail : PromptId::Short);
    EXPECT_EQ(r.crop, (CropRect{85, 0, 512, 512}));
    EXPECT_EQ(r.caption, "cap:" + r.prompt_text);
    EXPECT_NO_THROW(r.validate());
  }
}

TEST_F(CaptionClient, PermanentFailureDropsOnlyThatImage) {
  server.fail_image("img_1", 500);
  auto m = build_manifest(images(3), cfg);
  EXPECT_EQ(m.records.size(), 4u);
  ASSERT_EQ(m.failures.size(), 1u);
  EXPECT_EQ(m.failures[0].image_id, "img_1");
  EXPECT_NE(m.failures[0].error.find("EndpointDown"), std::string::npos);
  for (const auto& r : m.records) EXPECT_NE(r.image_id, "img_1");

  auto dir = testutil::scratch_dir("failures");
  write_failures(m.failures, dir / "f.jsonl");
  std::ifstream f(dir / "f.jsonl");
  std::string line;
  std::getline(f, line);
  EXPECT_NE(line.find("\"image_id\":\"img_1\""), std::string::npos);
}

TEST_F(CaptionClient, OrderStableUnderJitter) {
  server.set_max_jitter(15ms);
  cfg.concurrency = 8;
  auto imgs = images(24);
  auto first = build_manifest(imgs, cfg);
  ASSERT_EQ(first.records.size(), 48u);
  for (int run = 0; run < 20; ++run) EXPECT_EQ(build_manifest(imgs, cfg).records, first.records);
  for (std::size_t i = 0; i < first.records.size(); ++i)
    EXPECT_EQ(first.records[i].image_id, imgs[i / 2].image_id);
}

TEST(ImageList, ParseJsonl) {
  auto dir = testutil::scratch_dir("image_list");
  std::ofstream(dir / "imgs.jsonl")
      << R"({"image_id": "a", "source_dataset": "MillionAID", "width": 800, "height": 600})" "\n\n"
      << R"({"image_id": "b", "source_dataset": "RS5M", "width": 512, "height": 512, "path": "b.png"})" "\n";
  auto list = read_image_list(dir / "imgs.jsonl");
  ASSERT_EQ(list.size(), 2u);
  EXPECT_FALSE(list[0].path);
  EXPECT_EQ(list[1].path->string(), "b.png");
  std::ofstream(dir / "bad.jsonl") << R"({"image_id": "a", "width": 800})" "\n";
  EXPECT_THROW(read_image_list(dir / "bad.jsonl"), Error);
}
