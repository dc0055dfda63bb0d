#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "gridvlad/common.hpp"
#include "gridvlad/core_types.hpp"

namespace gridvlad {

/// Synthetic dataset with class signal confined to chosen cells and
/// temporal segments. Cells and segments are zero-based here.
struct SynthSpec {
  int classes = 4;
  std::size_t per_class = 40;
  std::size_t groups = 4;
  std::size_t frames = 8;     // T
  std::size_t grid_size = 3;  // a
  std::size_t dim = 16;       // raw descriptor dimension
  std::size_t levels = 1;     // L; signal segments index the 2^L leaves
  /// Empty means every cell.
  std::vector<std::pair<std::size_t, std::size_t>> signal_cells;
  /// Leaf segments (0..2^L-1) carrying the signal. Empty means every frame.
  std::vector<std::size_t> signal_segments;
  double mu = 1.5;     // signal strength
  double sigma = 1.0;  // noise standard deviation
  std::uint64_t seed = 0;
};

/// Throws if the settings are inconsistent (signal cell outside the grid,
/// mu or sigma not positive, ...). mu == 0 is accepted to build
/// signal-free controls.
void validate_synth_spec(const SynthSpec& spec);

/// Gaussian N(0, sigma^2) descriptors; inside the signal cells and signal
/// segments a per-class unit direction scaled by mu is added. Sample n of
/// class c belongs to group n mod groups. Deterministic given the seed.
Dataset generate_synth(const SynthSpec& spec);

/// The per-class unit directions used by generate_synth (classes x dim).
Matrix synth_class_directions(const SynthSpec& spec);

}  // namespace gridvlad
