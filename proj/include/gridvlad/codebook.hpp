#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "gridvlad/common.hpp"

namespace gridvlad {

/// K coarse centers in descriptor space, one per row.
class Codebook {
 public:
  Codebook() = default;
  /// Throws if any entry is non-finite or two centers coincide.
  explicit Codebook(Matrix centers);

  std::size_t size() const { return static_cast<std::size_t>(centers_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(centers_.cols()); }
  const Matrix& centers() const { return centers_; }

  /// Index (0-based) of the nearest center by squared Euclidean distance;
  /// ties go to the smallest index.
  std::size_t assign(std::span<const float> x) const;
  std::size_t assign(const Vector& x) const;

 private:
  Matrix centers_;
};

struct KmeansOptions {
  std::size_t clusters = 128;
  std::uint64_t seed = 0;
  std::size_t max_iters = 100;
};

struct KmeansResult {
  Codebook codebook;
  /// Quantization error sum ||x - c_assign(x)||^2 after each assignment step.
  std::vector<double> objective;
  std::size_t iterations = 0;
  bool converged = false;
};

/// k-means++ seeding followed by Lloyd iterations until no assignment
/// changes or max_iters is reached. Rows of `samples` are the descriptors.
/// An empty cluster is reseeded to the point farthest from its assigned
/// center.
KmeansResult fit_kmeans(const Matrix& samples, const KmeansOptions& options);

/// CBK1 blob: u32 K, u32 D, f32 centers[K][D].
void save_codebook(const Codebook& codebook, const std::filesystem::path& path);
Codebook load_codebook(const std::filesystem::path& path);

}  // namespace gridvlad
