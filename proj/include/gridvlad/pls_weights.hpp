#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "gridvlad/common.hpp"

namespace gridvlad {

/// One F x m matrix per training sample (F = feature length, m = size of
/// the weight space), with class labels in 1..classes.
struct StackedViews {
  std::vector<Matrix> views;
  std::vector<int> labels;
  int classes = 0;
};

/// Streaming form of between_class_scatter: keeps per-class sums of the
/// views so callers need not hold every sample in memory.
class ScatterAccumulator {
 public:
  ScatterAccumulator(Eigen::Index feature_length, Eigen::Index weight_dim, int classes);

  void add(const Matrix& view, int label);
  /// Sigma_b = (1/N) sum_c n_c (M_c - M)^T (M_c - M), where M_c is the
  /// elementwise mean of the class-c views and M the mean of all views.
  Matrix scatter() const;

  std::size_t samples() const { return total_; }

 private:
  Eigen::Index rows_;
  Eigen::Index cols_;
  std::vector<Matrix> sums_;
  std::vector<std::size_t> counts_;
  std::size_t total_ = 0;
};

Matrix between_class_scatter(const StackedViews& views);

/// Eigenpairs of a symmetric matrix, eigenvalues descending.
struct SymmetricEigen {
  Vector values;
  Matrix vectors;  // columns
};

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm falls
/// below 1e-12 relative to the matrix norm. Ordering is by descending
/// eigenvalue with ties kept in diagonal order; each vector's
/// largest-magnitude entry is made positive.
SymmetricEigen jacobi_eigen(const Matrix& sym);

/// Weight space basis: m x n_components, orthonormal columns.
struct WeightMatrix {
  Matrix columns;
  Vector eigenvalues;  // descending

  std::size_t weight_dim() const { return static_cast<std::size_t>(columns.rows()); }
  std::size_t components() const { return static_cast<std::size_t>(columns.cols()); }

  static WeightMatrix identity(std::size_t m);
};

/// The n_components leading eigenvectors of a symmetric matrix. Throws if
/// sigma is not symmetric within 1e-8 or n_components exceeds m.
WeightMatrix top_eigenvectors(const Matrix& sigma, std::size_t n_components);

/// between_class_scatter followed by top_eigenvectors.
WeightMatrix learn_weights(const StackedViews& views, std::size_t n_components);

/// WGT1 blob: u32 m, u32 n_components, f32 eigenvalues[n_components],
/// f32 columns[m][n_components] (row-major).
void save_weights(const WeightMatrix& w, const std::filesystem::path& path);
WeightMatrix load_weights(const std::filesystem::path& path);

}  // namespace gridvlad
