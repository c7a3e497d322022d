#include <doctest.h>

#include <cstring>
#include <fstream>

#include "reference.hpp"
#include "steer/errors.hpp"
#include "steer/weights_io.hpp"

using namespace steer;

namespace {

std::uint64_t offset_of(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_model(bytes);
  } catch (const FormatError& e) {
    return e.offset();
  }
  FAIL("expected a FormatError");
  return 0;
}

// Byte position of the record for `name` in an encoded file.
std::size_t record_position(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  std::uint32_t header_len;
  std::memcpy(&header_len, bytes.data() + 4, 4);
  std::size_t pos = 8 + header_len;
  while (pos < bytes.size()) {
    std::uint32_t n;
    std::memcpy(&n, bytes.data() + pos, 4);
    const std::string rec(bytes.begin() + static_cast<std::ptrdiff_t>(pos + 4),
                          bytes.begin() + static_cast<std::ptrdiff_t>(pos + 4 + n));
    if (rec == name) return pos;
    std::uint32_t rank;
    std::memcpy(&rank, bytes.data() + pos + 4 + n, 4);
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      std::uint64_t d;
      std::memcpy(&d, bytes.data() + pos + 8 + n + 8 * i, 8);
      count *= d;
    }
    pos += 8 + n + 8 * rank + 4 * count;
  }
  FAIL("record not found");
  return 0;
}

}  // namespace

TEST_CASE("STW1 round trip is bitwise exact") {
  const Model m = testing::desk_model(3);
  testing::TempDir dir;
  save_weights(m, dir / "m.stw1");
  const Model back = load_weights(dir / "m.stw1");
  CHECK(back.config == m.config);
  REQUIRE(back.weights.size() == m.weights.size());
  for (const auto& [name, t] : m.weights) CHECK(bitwise_equal(t, back.weights.at(name)));
  CHECK(encode_weights(back.config, back.weights) == encode_weights(m.config, m.weights));
}

TEST_CASE("special float values survive the round trip") {
  WeightMap w;
  w["x"] = Tensor({4}, {-0.0f, std::numeric_limits<float>::infinity(), std::numeric_limits<float>::denorm_min(),
                        std::numeric_limits<float>::quiet_NaN()});
  const auto bytes = encode_weights(ModelConfig{}, w);
  const auto back = decode_weights(bytes);
  CHECK(bitwise_equal(back.tensors.at("x"), w.at("x")));
}

TEST_CASE("layout is little-endian with a JSON header") {
  const Model m = testing::desk_model();
  const auto bytes = encode_weights(m.config, m.weights);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "STW1");
  const std::uint32_t header_len = bytes[4] | bytes[5] << 8 | bytes[6] << 16 | static_cast<std::uint32_t>(bytes[7]) << 24;
  const std::string header(bytes.begin() + 8, bytes.begin() + 8 + header_len);
  CHECK(config_from_json(nlohmann::json::parse(header)) == m.config);
  // First record in name order.
  CHECK(record_position(bytes, m.weights.begin()->first) == 8 + header_len);
}

TEST_CASE("corruption reports the byte offset") {
  const Model m = testing::desk_model();
  const auto good = encode_weights(m.config, m.weights);

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(offset_of(bad_magic) == 0);

  auto bad_magic2 = good;
  bad_magic2[2] = 'X';
  CHECK(offset_of(bad_magic2) == 2);

  CHECK(offset_of(std::vector<std::uint8_t>(good.begin(), good.begin() + 6)) == 4);

  auto bad_header = good;
  bad_header[8] = '!';
  CHECK(offset_of(bad_header) == 8);

  // Truncated inside the last tensor's data.
  std::vector<std::uint8_t> truncated(good.begin(), good.end() - 3);
  CHECK(offset_of(truncated) > 8);

  // Wrong shape for a schema tensor: offset is that record's start.
  WeightMap wrong = m.weights;
  wrong["final_norm"] = Tensor({63});
  const auto wrong_bytes = encode_weights(m.config, wrong);
  CHECK(offset_of(wrong_bytes) == record_position(wrong_bytes, "final_norm"));

  // Extra tensor not in the schema.
  WeightMap extra = m.weights;
  extra["zzz"] = Tensor({2});
  const auto extra_bytes = encode_weights(m.config, extra);
  CHECK(offset_of(extra_bytes) == record_position(extra_bytes, "zzz"));

  // Missing tensor: reported at end of file.
  WeightMap missing = m.weights;
  missing.erase("unembed");
  const auto missing_bytes = encode_weights(m.config, missing);
  CHECK(offset_of(missing_bytes) == missing_bytes.size());
}

TEST_CASE("read errors surface the path") {
  testing::TempDir dir;
  CHECK_THROWS_WITH_AS(load_weights(dir / "absent.stw1"), doctest::Contains("absent.stw1"), IoError);
}

TEST_CASE("decode_weights does not require the schema") {
  WeightMap delta;
  delta["layers.0.attn.wq"] = Tensor::filled({64, 64}, 0.5f);
  const auto wf = decode_weights(encode_weights(ModelConfig{}, delta));
  CHECK(wf.tensors.size() == 1);
  CHECK_THROWS_AS(decode_model(encode_weights(ModelConfig{}, delta)), FormatError);
}
