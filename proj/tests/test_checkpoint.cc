#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "sfeuot/checkpoint.hpp"

using namespace sfeuot;

namespace {
std::vector<NetworkParams> sample_nets() {
  Rng rng(1);
  return {NetworkParams::glorot({4, 5, 2}, rng), NetworkParams::glorot({3, 6, 6, 1}, rng)};
}
}  // namespace

TEST(Checkpoint, EncodeDecodeRoundTrip) {
  const auto nets = sample_nets();
  EXPECT_EQ(decode_checkpoint(encode_checkpoint(nets)), nets);
}

TEST(Checkpoint, HeaderLayout) {
  const auto bytes = encode_checkpoint(sample_nets());
  ASSERT_GE(bytes.size(), 17u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "SFEU");
  EXPECT_EQ(bytes[4], 1);  // version, little-endian
  EXPECT_EQ(bytes[5], 0);
  EXPECT_EQ(bytes[8], 2);  // network count
  EXPECT_EQ(bytes[9], 2);  // first network: two layers
  EXPECT_EQ(bytes[13], 4);  // in_dim of layer 0
  EXPECT_EQ(bytes[17], 5);  // out_dim of layer 0
  const std::size_t expect = 4 + 4 + 1 + (4 + 2 * 8 + (4 * 5 + 5 + 5 * 2 + 2) * 8) +
                             (4 + 3 * 8 + (3 * 6 + 6 + 6 * 6 + 6 + 6 + 1) * 8);
  EXPECT_EQ(bytes.size(), expect);
}

TEST(Checkpoint, RejectsCorruption) {
  auto bytes = encode_checkpoint(sample_nets());
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), std::runtime_error);
  bad = bytes;
  bad[4] = 2;
  EXPECT_THROW(decode_checkpoint(bad), std::runtime_error);
  bad = bytes;
  bad.pop_back();
  EXPECT_THROW(decode_checkpoint(bad), std::runtime_error);
  bad = bytes;
  bad.push_back(0);
  EXPECT_THROW(decode_checkpoint(bad), std::runtime_error);
}

TEST(Checkpoint, FileRoundTripIsAtomic) {
  const auto dir = std::filesystem::temp_directory_path() / "sfeuot_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "c.bin";
  write_checkpoint(path, sample_nets());
  EXPECT_EQ(read_checkpoint(path), sample_nets());
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    EXPECT_EQ(e.path().filename(), "c.bin");  // no temp file left behind
  }
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, MissingFileNamesPath) {
  try {
    read_checkpoint("/nonexistent/x.bin");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/x.bin"), std::string::npos);
  }
  EXPECT_THROW(write_text_atomic("/nonexistent/dir/y.txt", "hi"), std::runtime_error);
}
