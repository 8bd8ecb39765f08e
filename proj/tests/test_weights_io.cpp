// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include "potter/backbone.hpp"
#include "potter/error.hpp"
#include "potter/rng.hpp"
#include "potter/weights_io.hpp"

using namespace potter;

namespace {

std::string temp_path(const std::string& stem) {
  return (std::filesystem::temp_directory_path() / ("potter_" + stem)).string();
}

ErrorCode decode_error(const std::string& bytes) {
  try {
    decode_weights(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode{};
}

}  // namespace

TEST(WeightsIo, ByteLayoutOfOneTensor) {
  ParamStore store;
  store.add("ab", Tensor({2}, {1.0, -2.0}));
  const std::string bytes = encode_weights(store);
  ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 2 + 2 + 1 + 8 + 16);
  EXPECT_EQ(bytes.substr(0, 4), "POTW");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 1);
  EXPECT_EQ(bytes[12], 2);
  EXPECT_EQ(bytes.substr(14, 2), "ab");
  EXPECT_EQ(bytes[16], 1);
  EXPECT_EQ(bytes[17], 2);
  double first = 0;
  std::memcpy(&first, bytes.data() + 25, 8);  // host is little-endian in CI
  EXPECT_EQ(first, 1.0);
  // 1.0 = 0x3ff0000000000000, little-endian: last byte 0x3f.
  EXPECT_EQ(static_cast<unsigned char>(bytes[32]), 0x3f);
}

TEST(WeightsIo, RoundTripIsExact) {
  const PotterModel model(preset("micro_hr"));
  ParamStore store = model.initialize(11);
  store.get("embed.bias")[0] = -0.0;
  store.get("embed.bias")[1] = 1e-310;
  const ParamStore back = decode_weights(encode_weights(store));
  EXPECT_EQ(back, store);
  EXPECT_TRUE(std::signbit(back.get("embed.bias")[0]));
  EXPECT_EQ(encode_weights(back), encode_weights(store));
}

TEST(WeightsIo, FileRoundTripPreservesForwardBitwise) {
  const PotterModel model(preset("micro"));
  const ParamStore store = model.initialize(12);
  const std::string path = temp_path("roundtrip.potw");
  save_weights(path, store);
  CounterRng rng(1);
  const Tensor img = uniform_tensor(rng, {3, 32, 32}, 0, 1);
  EXPECT_EQ(model.infer(load_weights(path), img), model.infer(store, img));
  std::remove(path.c_str());
}

TEST(WeightsIo, SingleTensorFiles) {
  const std::string path = temp_path("single.potw");
  const Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  save_tensor(path, t);
  EXPECT_EQ(load_tensor(path), t);
  ParamStore two;
  two.add("a", t);
  two.add("b", t);
  save_weights(path, two);
  EXPECT_THROW(load_tensor(path), Error);
  std::remove(path.c_str());
}

TEST(WeightsIo, RejectsMalformedInput) {
  ParamStore store;
  store.add("w", Tensor({3}, {1, 2, 3}));
  const std::string good = encode_weights(store);

  std::string bad = good;
  bad[0] = 'X';
  EXPECT_EQ(decode_error(bad), ErrorCode::format);
  EXPECT_EQ(decode_error("PO"), ErrorCode::format);
  bad = good;
  bad[4] = 2;
  EXPECT_EQ(decode_error(bad), ErrorCode::format);
  EXPECT_EQ(decode_error(good.substr(0, good.size() - 1)), ErrorCode::format);
  EXPECT_EQ(decode_error(good + "x"), ErrorCode::format);
  bad = good;
  bad[15] = 0;  // rank 0
  EXPECT_EQ(decode_error(bad), ErrorCode::format);
  bad = good;
  bad[16] = 0;  // extent 0
  EXPECT_EQ(decode_error(bad), ErrorCode::format);
  bad = good;
  bad[23] = 0x7f;  // absurd extent
  EXPECT_EQ(decode_error(bad), ErrorCode::format);
}

TEST(WeightsIo, MissingFileIsIoError) {
  try {
    load_weights(temp_path("does_not_exist.potw"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::io);
  }
}
