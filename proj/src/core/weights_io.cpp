// SPDX-License-Identifier: Apache-2.0
#include "potter/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "potter/error.hpp"

namespace potter {

namespace {

constexpr char kMagic[4] = {'P', 'O', 'T', 'W'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::string take(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n)
      fail(ErrorCode::format, std::string("weights file truncated while reading ") + what +
                                  " at byte " + std::to_string(pos_));
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_weights(const ParamStore& store) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, value] : store.entries()) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max())
      fail(ErrorCode::invalid_argument, "tensor name too long: " + name.substr(0, 32) + "...");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(value.rank()));
    for (std::size_t e : value.shape()) put<std::uint64_t>(out, e);
    for (double v : value.values()) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

ParamStore decode_weights(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    fail(ErrorCode::format, "not a POTW file (bad magic)");
  Reader in(bytes);
  in.take(4, "magic");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kVersion)
    fail(ErrorCode::format, "unsupported POTW version " + std::to_string(version));
  const auto count = in.get<std::uint32_t>("tensor count");
  ParamStore store;
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto len = in.get<std::uint16_t>("name length");
    std::string name = in.take(len, "name");
    const auto rank = in.get<std::uint8_t>("rank");
    if (rank == 0) fail(ErrorCode::format, "tensor '" + name + "' has rank 0");
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& e : shape) {
      e = in.get<std::uint64_t>("extent");
      if (e == 0 || numel > in.remaining() / e)
        fail(ErrorCode::format, "tensor '" + name + "' has an invalid extent");
      numel *= e;
    }
    std::vector<double> values(numel);
    for (double& v : values) v = std::bit_cast<double>(in.get<std::uint64_t>("values"));
    if (store.contains(name)) fail(ErrorCode::format, "duplicate tensor '" + name + "'");
    store.add(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (!in.done()) fail(ErrorCode::format, "trailing bytes after the last tensor");
  return store;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::io, "write to '" + path + "' failed");
}

void save_weights(const std::string& path, const ParamStore& store) {
  write_file(path, encode_weights(store));
}

ParamStore load_weights(const std::string& path) { return decode_weights(read_file(path)); }

void save_tensor(const std::string& path, const Tensor& value, const std::string& name) {
  ParamStore one;
  one.add(name, value);
  save_weights(path, one);
}

Tensor load_tensor(const std::string& path) {
  const ParamStore store = load_weights(path);
  if (store.size() != 1)
    fail(ErrorCode::format, "'" + path + "' holds " + std::to_string(store.size()) +
                                " tensors, expected exactly one");
  return store.entries().front().second;
}

}  // namespace potter
