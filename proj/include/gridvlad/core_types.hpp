#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gridvlad/common.hpp"

namespace gridvlad {

/// Per-video tensor of frame descriptors, laid out [t][i][j][k] row-major.
/// Indices are zero-based in code; cell (i, j) is row i, column j of the
/// a x a grid.
class DescriptorGrid {
 public:
  DescriptorGrid() = default;
  /// Zero-filled grid.
  DescriptorGrid(std::size_t frames, std::size_t grid_size, std::size_t dim);
  /// Takes ownership of data; throws unless data.size() == T*a*a*D and all
  /// entries are finite.
  DescriptorGrid(std::size_t frames, std::size_t grid_size, std::size_t dim,
                 std::vector<float> data);

  std::size_t frames() const { return frames_; }
  std::size_t grid_size() const { return grid_size_; }
  std::size_t cells() const { return grid_size_ * grid_size_; }
  std::size_t dim() const { return dim_; }
  std::size_t descriptor_count() const { return frames_ * cells(); }

  std::span<const float> descriptor(std::size_t t, std::size_t i, std::size_t j) const {
    return {data_.data() + offset(t, i, j), dim_};
  }
  std::span<float> descriptor(std::size_t t, std::size_t i, std::size_t j) {
    return {data_.data() + offset(t, i, j), dim_};
  }
  /// Descriptor by flat index n = (t*a + i)*a + j.
  std::span<const float> descriptor(std::size_t n) const { return {data_.data() + n * dim_, dim_}; }

  std::span<const float> data() const { return data_; }

  bool operator==(const DescriptorGrid&) const = default;

 private:
  std::size_t offset(std::size_t t, std::size_t i, std::size_t j) const {
    return ((t * grid_size_ + i) * grid_size_ + j) * dim_;
  }

  std::size_t frames_ = 0;
  std::size_t grid_size_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
};

/// Reads a DGT1 file: "DGT1", u32 version, u32 T, u32 a, u32 D, then
/// T*a*a*D little-endian f32.
DescriptorGrid read_dgt(const std::filesystem::path& path);
void write_dgt(const DescriptorGrid& grid, const std::filesystem::path& path);

struct SampleMeta {
  std::string sample_id;
  int class_label = 0;  // 1..C
  std::string group_id;
  std::filesystem::path path;

  bool operator==(const SampleMeta&) const = default;
};

struct DatasetManifest {
  int classes = 0;
  std::vector<SampleMeta> samples;
  /// Non-fatal issues found while parsing (e.g. a class with no samples).
  std::vector<std::string> warnings;

  /// Per-class sample counts, index 0 holds class 1.
  std::vector<std::size_t> class_counts() const;
};

/// Parses the tab-separated manifest. Each record line is
///   sample_id <TAB> path <TAB> class_label <TAB> group_id
/// Lines starting with '#' are comments; a comment of the form
/// "# classes: C" declares the class count (otherwise C is the largest label).
/// Relative paths are resolved against the manifest's directory.
DatasetManifest parse_manifest(const std::filesystem::path& path);

/// Writes a manifest that parse_manifest reads back unchanged. Paths are
/// written as given.
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Manifest plus the grids, in manifest order.
struct Dataset {
  DatasetManifest manifest;
  std::vector<DescriptorGrid> grids;

  std::size_t size() const { return grids.size(); }
};

/// Reads every grid listed in the manifest and checks that a and D agree
/// across the dataset.
Dataset load_dataset(const DatasetManifest& manifest);

/// Writes grids/<sample_id>.dgt and manifest.tsv under dir; returns the
/// manifest path. Manifest paths are written relative to dir.
std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Stacks descriptors from the given grids as rows of a matrix. When the
/// total exceeds `cap` (cap > 0), a seeded uniform subset of `cap`
/// descriptors is taken, preserving grid order. All grids must share D.
Matrix collect_descriptors(std::span<const DescriptorGrid* const> grids, std::size_t cap,
                           std::uint64_t seed);

/// Checks the manifest invariants; throws on duplicate ids, labels out of
/// range, or empty group ids. Appends warnings for classes with no samples.
void validate_manifest(DatasetManifest& manifest);

}  // namespace gridvlad
