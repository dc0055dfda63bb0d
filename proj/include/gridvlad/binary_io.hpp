#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridvlad/common.hpp"

namespace gridvlad::io {

/// Little-endian writer for the fixed-layout blobs (DGT1, PCA1, CBK1, ...).
/// Every blob starts with a four-byte magic followed by a u32 version.
class BlobWriter {
 public:
  BlobWriter(const std::filesystem::path& path, std::string_view magic, std::uint32_t version);

  void u32(std::uint32_t v);
  void f32(float v);
  void f64(double v);
  void f32s(std::span<const float> values);
  void f32s(std::span<const double> values);

  /// Flushes and reports any stream failure.
  void finish();

 private:
  void bytes(const void* data, std::size_t n);

  std::filesystem::path path_;
  std::ofstream out_;
};

/// Reader over a blob loaded fully into memory.
class BlobReader {
 public:
  BlobReader(const std::filesystem::path& path, std::string_view magic);

  std::uint32_t version() const { return version_; }
  std::uint32_t u32();
  float f32();
  double f64();
  std::vector<float> f32s(std::size_t count);
  std::size_t remaining() const { return data_.size() - pos_; }

  /// Throws unless every byte has been consumed.
  void expect_end() const;

 private:
  void take(void* dst, std::size_t n);

  std::filesystem::path path_;
  std::vector<unsigned char> data_;
  std::size_t pos_ = 0;
  std::uint32_t version_ = 0;
};

}  // namespace gridvlad::io
