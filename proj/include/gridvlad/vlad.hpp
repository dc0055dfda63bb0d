#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gridvlad/codebook.hpp"
#include "gridvlad/common.hpp"
#include "gridvlad/core_types.hpp"

namespace gridvlad {

/// Half-open frame range [begin, end), zero-based.
struct FrameRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const FrameRange&) const = default;
};

/// Temporal pyramid with levels 0..L; level l splits the video into 2^l
/// segments, d = 2^(L+1) - 1 segments in total.
struct PyramidConfig {
  std::size_t levels = 0;  // L

  std::size_t segment_count() const { return (std::size_t{1} << (levels + 1)) - 1; }
  /// Flat index of segment s (zero-based) at level l: (2^l - 1) + s.
  static std::size_t segment_index(std::size_t level, std::size_t s) {
    return ((std::size_t{1} << level) - 1) + s;
  }
};

/// 2^level contiguous ranges partitioning [0, frames). The first
/// (frames mod 2^level) segments get one extra frame; trailing segments are
/// empty when frames < 2^level.
std::vector<FrameRange> segment_bounds(std::size_t frames, std::size_t level);

/// Unnormalized VLAD of the descriptors of cell (i, j) over the frame range:
/// block k holds the sum of (f - c_k) over descriptors whose nearest center
/// is k. Length K*D. An empty range gives the zero vector.
Vector encode_cell_segment(const DescriptorGrid& grid, const Codebook& codebook, std::size_t i,
                           std::size_t j, FrameRange range);

/// Intra-normalization (each of the K blocks to unit L2, zero blocks stay
/// zero), then signed square root, then global L2. Zero stays zero.
Vector normalize_vlad(const Vector& raw, std::size_t clusters);

/// Signed square root followed by L2 normalization (zero stays zero).
void power_l2_normalize(Vector& v);
/// L2 normalization only (zero stays zero).
void l2_normalize(Vector& v);

enum class Method { Lcd, Star, Dsar, Dstar };

std::string_view method_name(Method m);
/// Accepts lcd/star/dsar/dstar in any case.
Method parse_method(std::string_view name);

struct RepresentationParams {
  std::size_t clusters = 0;  // K
  std::size_t dim = 0;       // D
  std::size_t n_sp = 0;
  std::size_t n_tmp = 0;
  std::size_t levels = 0;    // L

  bool operator==(const RepresentationParams&) const = default;
};

struct VideoRepresentation {
  Vector vector;
  Method method = Method::Lcd;
  RepresentationParams params;
};

/// VRP1 blob: u32 method (0=LCD,1=STAR,2=DSAR,3=DSTAR), u32 K, u32 D,
/// u32 N_sp, u32 N_tmp, u32 L, u32 length, f32 vector[length].
void save_representation(const VideoRepresentation& rep, const std::filesystem::path& path);
VideoRepresentation load_representation(const std::filesystem::path& path);

/// One VLAD over all T*a^2 descriptors, normalized by normalize_vlad.
VideoRepresentation encode_lcd(const DescriptorGrid& grid, const Codebook& codebook);

/// Normalized per-cell, per-segment VLADs of one video. Column
/// cell * d + segment holds v^l_s(i, j), where cell = i * a + j and segment
/// is PyramidConfig::segment_index(l, s).
struct PyramidVlads {
  std::size_t grid_size = 0;  // a
  std::size_t levels = 0;     // L
  std::size_t clusters = 0;   // K
  Matrix columns;             // (K*D) x (a^2 * d)

  std::size_t cells() const { return grid_size * grid_size; }
  std::size_t segments() const { return PyramidConfig{levels}.segment_count(); }
  std::size_t feature_length() const { return static_cast<std::size_t>(columns.rows()); }
  std::size_t column(std::size_t cell, std::size_t segment) const { return cell * segments() + segment; }

  auto entry(std::size_t cell, std::size_t segment) const {
    return columns.col(static_cast<Eigen::Index>(column(cell, segment)));
  }
  /// V(i,j): the d segment columns of one cell, (K*D) x d.
  auto cell_block(std::size_t cell) const {
    return columns.middleCols(static_cast<Eigen::Index>(cell * segments()),
                              static_cast<Eigen::Index>(segments()));
  }
};

/// Encodes every (cell, level, segment) entry: a^2 * d normalized VLADs.
PyramidVlads encode_pyramid(const DescriptorGrid& grid, const Codebook& codebook,
                            PyramidConfig config);

}  // namespace gridvlad
