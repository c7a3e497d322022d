#include "steer/weights_io.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "steer/errors.hpp"

namespace steer {

namespace {

constexpr char kMagic[4] = {'S', 'T', 'W', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t offset() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

  std::span<const std::uint8_t> take(std::uint64_t n, const char* what) {
    if (n > bytes_.size() - pos_) throw FormatError(std::string("truncated ") + what, pos_);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint32_t u32(const char* what) {
    auto s = take(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(s[i]) << (8 * i);
    return v;
  }

  std::uint64_t u64(const char* what) {
    auto s = take(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(s[i]) << (8 * i);
    return v;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::uint64_t pos_ = 0;
};

struct RecordOffsets {
  std::map<std::string, std::uint64_t> by_name;
};

WeightFile decode_impl(std::span<const std::uint8_t> bytes, RecordOffsets* offsets) {
  Reader r(bytes);
  for (std::size_t i = 0; i < 4; ++i) {
    if (i >= bytes.size() || bytes[i] != static_cast<std::uint8_t>(kMagic[i])) {
      throw FormatError("bad magic, expected \"STW1\"", i);
    }
  }
  r.take(4, "magic");
  const std::uint32_t header_len = r.u32("header length");
  const std::uint64_t header_off = r.offset();
  auto header = r.take(header_len, "header");
  WeightFile wf;
  try {
    auto j = nlohmann::json::parse(header.begin(), header.end());
    wf.config = config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("header is not valid JSON: ") + e.what(), header_off);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("header config invalid: ") + e.what(), header_off);
  }

  while (!r.at_end()) {
    const std::uint64_t record_off = r.offset();
    const std::uint32_t name_len = r.u32("tensor name length");
    auto name_bytes = r.take(name_len, "tensor name");
    std::string name(name_bytes.begin(), name_bytes.end());
    if (name.empty()) throw FormatError("empty tensor name", record_off);
    if (wf.tensors.contains(name)) throw FormatError("duplicate tensor '" + name + "'", record_off);
    const std::uint32_t rank = r.u32("tensor rank");
    if (rank == 0 || rank > 8) throw FormatError("tensor '" + name + "' has invalid rank", record_off);
    Shape shape;
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::uint64_t d = r.u64("tensor dims");
      if (d == 0 || d > (std::uint64_t{1} << 40) || count > (std::uint64_t{1} << 40) / d) {
        throw FormatError("tensor '" + name + "' has invalid dimension", record_off);
      }
      count *= d;
      shape.push_back(static_cast<std::size_t>(d));
    }
    if (count > (bytes.size() - r.offset()) / 4) throw FormatError("truncated tensor data for '" + name + "'", r.offset());
    auto raw = r.take(count * 4, "tensor data");
    std::vector<float> data(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      std::uint32_t bits = static_cast<std::uint32_t>(raw[4 * i]) | static_cast<std::uint32_t>(raw[4 * i + 1]) << 8 |
                           static_cast<std::uint32_t>(raw[4 * i + 2]) << 16 |
                           static_cast<std::uint32_t>(raw[4 * i + 3]) << 24;
      std::memcpy(&data[i], &bits, 4);
    }
    if (offsets) offsets->by_name[name] = record_off;
    wf.tensors.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return wf;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weight file " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<std::uint8_t> encode_weights(const ModelConfig& config, const WeightMap& tensors) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  const std::string header = to_json(config).dump();
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  for (const auto& [name, t] : tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put_u64(out, d);
    for (float f : t.data()) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(out, bits);
    }
  }
  return out;
}

WeightFile decode_weights(std::span<const std::uint8_t> bytes) { return decode_impl(bytes, nullptr); }

Model decode_model(std::span<const std::uint8_t> bytes) {
  RecordOffsets offsets;
  WeightFile wf = decode_impl(bytes, &offsets);
  const auto schema = weight_schema(wf.config);
  for (const auto& [name, t] : wf.tensors) {
    auto it = schema.find(name);
    if (it == schema.end()) throw FormatError("tensor '" + name + "' is not part of the model schema", offsets.by_name[name]);
    if (it->second != t.shape()) {
      throw FormatError("tensor '" + name + "' shape does not match the header config", offsets.by_name[name]);
    }
  }
  for (const auto& [name, _] : schema) {
    if (!wf.tensors.contains(name)) throw FormatError("missing tensor '" + name + "'", bytes.size());
  }
  return Model{wf.config, std::move(wf.tensors)};
}

void write_weight_file(const std::filesystem::path& path, const ModelConfig& config, const WeightMap& tensors) {
  const auto bytes = encode_weights(config, tensors);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write weight file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

WeightFile read_weight_file(const std::filesystem::path& path) { return decode_weights(read_bytes(path)); }

void save_weights(const Model& model, const std::filesystem::path& path) {
  write_weight_file(path, model.config, model.weights);
}

Model load_weights(const std::filesystem::path& path) { return decode_model(read_bytes(path)); }

}  // namespace steer
