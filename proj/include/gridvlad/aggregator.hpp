#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "gridvlad/pls_weights.hpp"
#include "gridvlad/vlad.hpp"

namespace gridvlad {

/// Final normalization applied to an aggregated representation.
enum class FinalNorm {
  PowerL2,  // signed square root, then L2 (the pipeline default)
  L2Only,
};

/// DSAR: V = V_sp * W_sp over the level-0 cell VLADs of `pyramid`, with V_sp
/// columns in row-major (i, j) order. The F x N_sp result is flattened
/// feature-fastest, then component.
VideoRepresentation aggregate_dsar(const PyramidVlads& pyramid, const WeightMatrix& w_sp,
                                   FinalNorm norm = FinalNorm::PowerL2);

/// DSTAR: V[f, p, q] = sum over (i, j, l, s) of v^l_s(i,j)[f] * W_sp[(i,j), p]
/// * W_tmp[(l,s), q], flattened with f fastest, then p, then q.
VideoRepresentation aggregate_dstar(const PyramidVlads& pyramid, const WeightMatrix& w_sp,
                                    const WeightMatrix& w_tmp, FinalNorm norm = FinalNorm::PowerL2);

/// STAR: concatenation of all a^2 * d cell-segment VLADs in (i, j, l, s)
/// order.
VideoRepresentation aggregate_star(const PyramidVlads& pyramid, FinalNorm norm = FinalNorm::PowerL2);

/// Per-iteration diagnostics of the alternating optimization.
struct AlternationStep {
  double delta_sp = 0.0;   // ||W_sp(new) - W_sp(old)||_F
  double delta_tmp = 0.0;  // ||W_tmp(new) - W_tmp(old)||_F
  double objective_sp = 0.0;   // sum of retained W_sp eigenvalues
  double objective_tmp = 0.0;  // sum of retained W_tmp eigenvalues
};

struct TrainedAggregator {
  Method method = Method::Star;
  std::size_t grid_size = 0;  // a
  PyramidConfig pyramid;
  std::optional<WeightMatrix> w_sp;
  std::optional<WeightMatrix> w_tmp;
  std::size_t iterations = 0;
  std::vector<AlternationStep> history;

  /// Aggregates one video's pyramid according to the method.
  VideoRepresentation represent(const PyramidVlads& pyramid,
                                FinalNorm norm = FinalNorm::PowerL2) const;
};

/// One training video: its pyramid VLADs and class label (1..classes).
struct TrainingVideo {
  const PyramidVlads* pyramid = nullptr;
  int label = 0;
};

/// Learns W_sp from the level-0 per-cell VLADs.
TrainedAggregator train_dsar(std::span<const TrainingVideo> videos, int classes, std::size_t n_sp);

/// Alternating optimization: W_sp is initialized by the DSAR solve on the
/// level-0 cells, then each iteration learns W_tmp with W_sp fixed and W_sp
/// with W_tmp fixed.
TrainedAggregator train_dstar(std::span<const TrainingVideo> videos, int classes, std::size_t n_sp,
                              std::size_t n_tmp, std::size_t iterations);

/// Unweighted spatiotemporal pyramid; nothing is learned.
TrainedAggregator make_star(std::size_t grid_size, PyramidConfig pyramid);

/// Directory bundle: aggregator.txt (key=value) plus w_sp.wgt / w_tmp.wgt.
void save_aggregator(const TrainedAggregator& agg, const std::filesystem::path& dir);
TrainedAggregator load_aggregator(const std::filesystem::path& dir);

}  // namespace gridvlad
