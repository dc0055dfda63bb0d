#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "gridvlad/common.hpp"

namespace gridvlad {

/// One-vs-all linear classifier: score[c] = w_c . x + b_c.
struct LinearOvaModel {
  Matrix weights;  // classes x dim
  Vector biases;   // classes
  double c_reg = 100.0;

  std::size_t classes() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(weights.cols()); }
};

struct SvmOptions {
  double c_reg = 100.0;
  std::uint64_t seed = 0;
  std::size_t max_epochs = 1000;
  /// Stop when (primal - dual) <= tolerance * primal.
  double tolerance = 1e-4;
};

/// Result of one binary problem, kept for diagnostics.
struct BinarySvmStats {
  std::size_t epochs = 0;
  double primal = 0.0;
  double dual = 0.0;
  bool converged = false;
};

/// L2-regularized hinge-loss (L1-loss) SVM trained by dual coordinate
/// descent. Rows of `features` are samples; targets are +1/-1. The bias is
/// learned as the weight of an appended constant-1 feature. Returns weights
/// with the bias in the last entry.
Vector train_binary_svm(const Matrix& features, std::span<const int> targets, const SvmOptions& options,
                        BinarySvmStats* stats = nullptr);

/// Trains `classes` binary problems (class c against the rest). Labels are
/// in 1..classes. Class c uses seed options.seed + c.
LinearOvaModel train_ova(const Matrix& features, std::span<const int> labels, int classes,
                         const SvmOptions& options, std::vector<BinarySvmStats>* stats = nullptr);

Vector score(const LinearOvaModel& model, const Vector& feature);
/// Argmax of score, 1-based; ties go to the smallest class.
int predict(const LinearOvaModel& model, const Vector& feature);
int argmax_label(const Vector& scores);

/// Elementwise (weighted) mean of per-source score vectors. Without weights
/// every source counts equally.
Vector fuse_scores(std::span<const Vector> sources, std::optional<std::span<const double>> weights = {});

/// SVM1 blob: u32 classes, u32 dim, f64 C_reg, f32 weights[classes][dim],
/// f32 biases[classes].
void save_model(const LinearOvaModel& model, const std::filesystem::path& path);
LinearOvaModel load_model(const std::filesystem::path& path);

}  // namespace gridvlad
