#include "rsvl/tensor.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "rsvl/error.hpp"
#include "rsvl/rng.hpp"
#include "test_util.hpp"

using namespace rsvl;

TEST(L2Normalize, ThreeFourFive) {
  auto m = l2_normalize(EmbeddingMatrix::from_rows({{3, 4}}));
  EXPECT_TRUE(m.normalized());
  EXPECT_FLOAT_EQ(m.at(0, 0), 0.6f);
  EXPECT_FLOAT_EQ(m.at(0, 1), 0.8f);
}

TEST(L2Normalize, UnitRowUnchanged) {
  auto m = l2_normalize(EmbeddingMatrix::from_rows({{1, 0, 0}}));
  EXPECT_EQ(m.at(0, 0), 1.0f);
  EXPECT_EQ(m.at(0, 1), 0.0f);
  EXPECT_EQ(m.at(0, 2), 0.0f);
}

TEST(L2Normalize, Diagonal) {
  auto m = l2_normalize(EmbeddingMatrix::from_rows({{1, 1}}));
  EXPECT_NEAR(m.at(0, 0), 0.7071068, 1e-6);
  EXPECT_NEAR(m.at(0, 1), 0.7071068, 1e-6);
}

TEST(L2Normalize, ZeroRowRejected) {
  try {
    l2_normalize(EmbeddingMatrix::from_rows({{1, 2}, {0, 0}}));
    FAIL() << "expected ZeroRow";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroRow);
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
  }
}

TEST(L2Normalize, IdempotentOnRandomRows) {
  Rng rng(7);
  auto m = testutil::random_matrix(rng, 40, 17);
  auto once = l2_normalize(m);
  auto twice = l2_normalize(once);
  for (std::size_t k = 0; k < once.data().size(); ++k) {
    EXPECT_NEAR(once.data()[k], twice.data()[k], 1e-7);
  }
}

TEST(EmbeddingMatrix, NormalizedFlagIsChecked) {
  EXPECT_THROW(EmbeddingMatrix(1, 2, {3.0f, 4.0f}, true), Error);
  EXPECT_THROW(EmbeddingMatrix(1, 2, {0.0f, 0.0f}, true), Error);
  EXPECT_NO_THROW(EmbeddingMatrix(1, 2, {0.6f, 0.8f}, true));
  EXPECT_THROW(EmbeddingMatrix(2, 2, {1.0f, 2.0f, 3.0f}), Error);
}

TEST(Similarity, IdentityRows) {
  auto eye = EmbeddingMatrix::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  auto s = similarity(eye, eye);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(s.at(i, j), i == j ? 1.0f : 0.0f);
}

TEST(Similarity, OrthogonalAndHandComputed) {
  EXPECT_EQ(similarity(EmbeddingMatrix::from_rows({{1, 0}}), EmbeddingMatrix::from_rows({{0, 1}}))
                .at(0, 0),
            0.0f);
  auto s = similarity(EmbeddingMatrix::from_rows({{0.6f, 0.8f}}),
                      EmbeddingMatrix::from_rows({{0.8f, 0.6f}}));
  EXPECT_NEAR(s.at(0, 0), 0.96, 1e-6);
}

TEST(Similarity, DimMismatch) {
  try {
    similarity(EmbeddingMatrix(2, 3), EmbeddingMatrix(2, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimMismatch);
  }
}

TEST(Similarity, TransposeSymmetryAndSelfSimilarity) {
  Rng rng(11);
  auto a = l2_normalize(testutil::random_matrix(rng, 13, 9));
  auto b = l2_normalize(testutil::random_matrix(rng, 21, 9));
  auto ab = similarity(a, b);
  auto ba = similarity(b, a);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      EXPECT_EQ(ab.at(i, j), ba.at(j, i));
      EXPECT_LE(std::abs(ab.at(i, j)), 1.0f + 1e-5f);
    }
  }
  auto aa = similarity(a, a);
  for (std::size_t i = 0; i < a.rows(); ++i) EXPECT_NEAR(aa.at(i, i), 1.0, 1e-5);
}

class RsebFile : public ::testing::Test {
 protected:
  std::filesystem::path dir_ = testutil::scratch_dir("rseb");
};

TEST_F(RsebFile, RoundTripIsBitExact) {
  Rng rng(3);
  for (std::size_t rows : {0, 1, 2, 17}) {
    auto m = testutil::random_matrix(rng, rows, 3);
    // Include awkward values: negative zero, denormal, infinity.
    if (rows > 0) {
      auto d = m.mutable_data();
      d[0] = -0.0f;
      d[1] = 1e-42f;
      d[2] = INFINITY;
    }
    auto path = dir_ / ("m" + std::to_string(rows) + ".rseb");
    write_embeddings(m, path);
    auto back = read_embeddings(path);
    ASSERT_EQ(back.rows(), m.rows());
    ASSERT_EQ(back.dim(), m.dim());
    EXPECT_EQ(encode_rseb(back), encode_rseb(m));
  }
}

TEST_F(RsebFile, NormalizedFlagSurvives) {
  Rng rng(4);
  auto m = l2_normalize(testutil::random_matrix(rng, 5, 8));
  write_embeddings(m, dir_ / "n.rseb");
  EXPECT_TRUE(read_embeddings(dir_ / "n.rseb").normalized());
}

TEST_F(RsebFile, EmptyMatrixIsHeaderOnly) {
  write_embeddings(EmbeddingMatrix(0, 64), dir_ / "empty.rseb");
  EXPECT_EQ(std::filesystem::file_size(dir_ / "empty.rseb"), kRsebHeaderBytes);
  auto back = read_embeddings(dir_ / "empty.rseb");
  EXPECT_EQ(back.rows(), 0u);
  EXPECT_EQ(back.dim(), 64u);
}

TEST_F(RsebFile, HeaderLayout) {
  auto bytes = encode_rseb(EmbeddingMatrix(2, 3, {1, 2, 3, 4, 5, 6}));
  ASSERT_EQ(bytes.size(), kRsebHeaderBytes + 24);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "RSEB");
  EXPECT_EQ(bytes[4], 1);   // version
  EXPECT_EQ(bytes[8], 2);   // rows
  EXPECT_EQ(bytes[16], 3);  // dim
  EXPECT_EQ(bytes[24], 0);  // flags
  // 1.0f little-endian
  EXPECT_EQ(bytes[28], 0x00);
  EXPECT_EQ(bytes[31], 0x3f);
}

TEST_F(RsebFile, BadMagic) {
  auto bytes = encode_rseb(EmbeddingMatrix(1, 1));
  std::copy_n("XXXX", 4, bytes.begin());
  try {
    decode_rseb(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadMagic);
  }
}

TEST_F(RsebFile, TruncatedAndVersion) {
  auto bytes = encode_rseb(EmbeddingMatrix(4, 4));
  auto cut = std::vector<std::uint8_t>(bytes.begin(), bytes.end() - 1);
  try {
    decode_rseb(cut);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TruncatedFile);
  }
  auto header = std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 10);
  try {
    decode_rseb(header);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TruncatedFile);
  }
  bytes[4] = 2;
  try {
    decode_rseb(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::VersionUnsupported);
  }
}

TEST_F(RsebFile, RowIdsSidecar) {
  std::vector<RowId> ids = {{0, "a.png", 3}, {1, "b.png", std::nullopt}};
  write_row_ids(ids, dir_ / "ids.jsonl");
  std::ifstream f(dir_ / "ids.jsonl");
  std::string first;
  std::getline(f, first);
  EXPECT_EQ(first, R"({"id":"a.png","label":3,"row":0})");
  auto back = read_row_ids(dir_ / "ids.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].label, 3);
  EXPECT_FALSE(back[1].label.has_value());
  EXPECT_EQ(back[1].id, "b.png");
}
