#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gridvlad/aggregator.hpp"
#include "gridvlad/classify.hpp"
#include "gridvlad/core_types.hpp"
#include "gridvlad/vlad.hpp"

namespace gridvlad {

/// Everything that determines one cross-validated run.
struct PipelineConfig {
  Method method = Method::Dstar;
  std::size_t clusters = 128;  // K
  std::size_t dim = 64;        // D after PCA
  std::size_t n_sp = 5;
  std::size_t n_tmp = 5;
  std::size_t levels = 2;      // L
  std::size_t iterations = 5;
  double c_reg = 100.0;
  std::uint64_t seed = 0;      // master seed
  std::size_t pca_sample_cap = 200000;
  std::size_t kmeans_sample_cap = 200000;
  std::size_t kmeans_max_iters = 100;
  /// Fit PCA and the codebook on every sample instead of the training fold.
  bool fit_unsupervised_on_all = false;
};

/// Stage indices for derive_seed.
enum class Stage : std::uint64_t { PcaSubsample = 1, KmeansSubsample = 2, Kmeans = 3, Classifier = 4 };

std::uint64_t stage_seed(const PipelineConfig& config, Stage stage, std::size_t fold);

/// Checks ranges that do not depend on the data (K, D > 0, iterations >= 1,
/// C_reg > 0) and, given the grid size, N_sp <= a^2 and N_tmp <= d.
void validate_config(const PipelineConfig& config, std::optional<std::size_t> grid_size = {});

/// Resolved config as key=value lines, including derived seeds for fold 0.
std::string describe_config(const PipelineConfig& config);

struct Fold {
  std::string group_id;
  std::vector<std::size_t> train;  // sample indices
  std::vector<std::size_t> test;
};

/// One fold per distinct group_id, ordered by group_id.
std::vector<Fold> louo_folds(const DatasetManifest& manifest);

enum class FitStage { Pca, Codebook, Weights, Classifier };
std::string_view fit_stage_name(FitStage stage);

/// Optional instrumentation for run_cv.
struct RunHooks {
  /// Called with the sample indices whose data reach each fit stage.
  std::function<void(FitStage, std::size_t fold, const std::vector<std::size_t>& samples)> on_fit;
  /// Called with every representation produced.
  std::function<void(const VideoRepresentation&)> on_representation;
};

struct FoldResult {
  std::string group_id;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
};

struct CvReport {
  PipelineConfig config;
  int classes = 0;
  std::vector<FoldResult> folds;
  /// Rows are true classes, columns predicted classes.
  std::vector<std::vector<std::size_t>> confusion;
  /// Pooled accuracy: trace(confusion) / total.
  double accuracy = 0.0;
  /// Unweighted mean of per-fold accuracies.
  double mean_fold_accuracy = 0.0;
  /// Per-sample test scores and predictions, indexed like the manifest.
  std::vector<Vector> scores;
  std::vector<int> predictions;
  /// Alternation diagnostics of the last fold (DSTAR only).
  std::vector<AlternationStep> alternation;
};

/// Leave-one-group-out cross-validation. Every fit (PCA, codebook, weights,
/// classifier) sees training-fold samples only unless
/// config.fit_unsupervised_on_all is set.
CvReport run_cv(const Dataset& dataset, const PipelineConfig& config, const RunHooks& hooks = {});

/// Rebuilds confusion and accuracies from per-sample scores averaged over
/// several reports of the same dataset (score-level late fusion).
CvReport fuse_reports(std::span<const CvReport> reports, const DatasetManifest& manifest,
                      std::optional<std::span<const double>> weights = {});

/// Human-readable table followed by a key=value block. Numbers are printed
/// with round-trip precision, so equal reports serialize identically.
std::string format_report(const CvReport& report);
/// Confusion matrix as CSV with a header row.
std::string confusion_csv(const CvReport& report);

struct SweepGrid {
  std::vector<std::size_t> clusters;
  std::vector<std::size_t> dims;
  std::vector<std::size_t> n_sp;
  std::vector<std::size_t> n_tmp;
};

struct SweepCell {
  PipelineConfig config;
  std::optional<CvReport> report;
  std::string error;  // set when the cell failed
};

/// Expands the grid in K-major, then D, N_sp, N_tmp order. Empty axes take
/// the base config's value.
std::vector<PipelineConfig> expand_grid(const PipelineConfig& base, const SweepGrid& grid);

/// Runs every grid cell; a failing cell is recorded and the sweep goes on.
std::vector<SweepCell> sweep(const Dataset& dataset, const PipelineConfig& base, const SweepGrid& grid);

/// Index of the cell with the highest pooled accuracy; ties go to the first
/// in grid order. Returns nullopt when every cell failed.
std::optional<std::size_t> best_cell(const std::vector<SweepCell>& cells);

/// Table with one row per D and one column per (K, N_sp, N_tmp)
/// combination, entries in percent.
std::string format_sweep_table(const std::vector<SweepCell>& cells);

}  // namespace gridvlad
