#include "gridvlad/binary_io.hpp"

#include <bit>
#include <cstring>
#include <iterator>

namespace gridvlad::io {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

}  // namespace

BlobWriter::BlobWriter(const std::filesystem::path& path, std::string_view magic,
                       std::uint32_t version)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw Error("cannot open '" + path.string() + "' for writing");
  if (magic.size() != 4) throw Error("blob magic must be 4 bytes");
  bytes(magic.data(), 4);
  u32(version);
}

void BlobWriter::bytes(const void* data, std::size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void BlobWriter::u32(std::uint32_t v) {
  v = to_little(v);
  bytes(&v, sizeof v);
}

void BlobWriter::f32(float v) {
  v = to_little(v);
  bytes(&v, sizeof v);
}

void BlobWriter::f64(double v) {
  v = to_little(v);
  bytes(&v, sizeof v);
}

void BlobWriter::f32s(std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    bytes(values.data(), values.size_bytes());
  } else {
    for (float v : values) f32(v);
  }
}

void BlobWriter::f32s(std::span<const double> values) {
  std::vector<float> tmp(values.begin(), values.end());
  f32s(std::span<const float>(tmp));
}

void BlobWriter::finish() {
  out_.flush();
  if (!out_) throw Error("write to '" + path_.string() + "' failed");
  out_.close();
}

BlobReader::BlobReader(const std::filesystem::path& path, std::string_view magic) : path_(path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  data_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  if (data_.size() < 8 || std::memcmp(data_.data(), magic.data(), 4) != 0) {
    throw Error("'" + path.string() + "': malformed header (expected magic " +
                std::string(magic) + ")");
  }
  pos_ = 4;
  version_ = u32();
}

void BlobReader::take(void* dst, std::size_t n) {
  if (remaining() < n) throw Error("'" + path_.string() + "': payload mismatch (truncated)");
  std::memcpy(dst, data_.data() + pos_, n);
  pos_ += n;
}

std::uint32_t BlobReader::u32() {
  std::uint32_t v;
  take(&v, sizeof v);
  return to_little(v);
}

float BlobReader::f32() {
  float v;
  take(&v, sizeof v);
  return to_little(v);
}

double BlobReader::f64() {
  double v;
  take(&v, sizeof v);
  return to_little(v);
}

std::vector<float> BlobReader::f32s(std::size_t count) {
  if (remaining() / sizeof(float) < count) {
    throw Error("'" + path_.string() + "': payload mismatch (truncated)");
  }
  std::vector<float> out(count);
  take(out.data(), count * sizeof(float));
  if constexpr (std::endian::native == std::endian::big) {
    for (float& v : out) v = to_little(v);
  }
  return out;
}

void BlobReader::expect_end() const {
  if (remaining() != 0) {
    throw Error("'" + path_.string() + "': payload mismatch (" + std::to_string(remaining()) +
                " trailing bytes)");
  }
}

}  // namespace gridvlad::io
