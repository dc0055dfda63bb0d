#pragma once

#include <cstddef>
#include <filesystem>

#include "gridvlad/common.hpp"
#include "gridvlad/core_types.hpp"

namespace gridvlad {

/// Linear projection x -> basis^T (x - mean). Columns of basis are
/// orthonormal and ordered by descending explained variance; each column's
/// largest-magnitude entry is positive.
struct PcaModel {
  Vector mean;              // input_dim
  Matrix basis;             // input_dim x output_dim
  Vector explained_variance;  // output_dim; empty when loaded from disk

  std::size_t input_dim() const { return static_cast<std::size_t>(basis.rows()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(basis.cols()); }

  /// Projects one descriptor.
  Vector project(std::span<const float> x) const;
};

/// Fits PCA on the rows of `samples` (n x input_dim) using the 1/(n-1)
/// covariance. No whitening.
PcaModel fit_pca(const Matrix& samples, std::size_t output_dim);

/// Maps every descriptor of the grid through the model.
DescriptorGrid apply_pca(const PcaModel& model, const DescriptorGrid& grid);

/// PCA1 blob: u32 input_dim, u32 output_dim, f32 mean[input_dim],
/// f32 basis[input_dim][output_dim] (row-major).
void save_pca(const PcaModel& model, const std::filesystem::path& path);
PcaModel load_pca(const std::filesystem::path& path);

}  // namespace gridvlad
