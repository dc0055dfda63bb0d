#include "gridvlad/synth.hpp"

#include <cstdio>
#include <random>

#include "gridvlad/vlad.hpp"

namespace gridvlad {

void validate_synth_spec(const SynthSpec& spec) {
  if (spec.classes < 1) throw Error("synth: classes must be positive");
  if (spec.per_class == 0) throw Error("synth: samples per class must be positive");
  if (spec.groups == 0) throw Error("synth: groups must be positive");
  if (spec.frames == 0 || spec.grid_size == 0 || spec.dim == 0) throw Error("synth: T, a and D must be positive");
  if (!(spec.sigma > 0.0)) throw Error("synth: sigma must be > 0");
  if (!(spec.mu >= 0.0)) throw Error("synth: mu must be >= 0");
  for (const auto& [i, j] : spec.signal_cells) {
    if (i >= spec.grid_size || j >= spec.grid_size) {
      throw Error("synth: signal cell (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                  ") outside the " + std::to_string(spec.grid_size) + "x" + std::to_string(spec.grid_size) + " grid");
    }
  }
  const std::size_t leaves = std::size_t{1} << spec.levels;
  for (const auto s : spec.signal_segments) {
    if (s >= leaves) {
      throw Error("synth: signal segment " + std::to_string(s + 1) + " outside 1.." + std::to_string(leaves));
    }
  }
}

Matrix synth_class_directions(const SynthSpec& spec) {
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32), 0xD1Au};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix dirs(spec.classes, static_cast<Eigen::Index>(spec.dim));
  for (Eigen::Index c = 0; c < dirs.rows(); ++c) {
    do {
      for (Eigen::Index k = 0; k < dirs.cols(); ++k) dirs(c, k) = normal(rng);
    } while (dirs.row(c).norm() == 0.0);
    dirs.row(c).normalize();
  }
  return dirs;
}

Dataset generate_synth(const SynthSpec& spec) {
  validate_synth_spec(spec);
  const Matrix dirs = synth_class_directions(spec);
  const std::size_t a = spec.grid_size;

  std::vector<char> cell_on(a * a, spec.signal_cells.empty() ? 1 : 0);
  for (const auto& [i, j] : spec.signal_cells) cell_on[i * a + j] = 1;
  std::vector<char> frame_on(spec.frames, spec.signal_segments.empty() ? 1 : 0);
  const auto leaves = segment_bounds(spec.frames, spec.levels);
  for (const auto s : spec.signal_segments) {
    for (std::size_t t = leaves[s].begin; t < leaves[s].end; ++t) frame_on[t] = 1;
  }

  Dataset ds;
  ds.manifest.classes = spec.classes;
  const std::size_t total = static_cast<std::size_t>(spec.classes) * spec.per_class;
  ds.manifest.samples.resize(total);
  ds.grids.resize(total);
  char buf[64];
  for (int c = 1; c <= spec.classes; ++c) {
    for (std::size_t n = 0; n < spec.per_class; ++n) {
      const std::size_t idx = static_cast<std::size_t>(c - 1) * spec.per_class + n;
      auto& meta = ds.manifest.samples[idx];
      std::snprintf(buf, sizeof buf, "c%02d_s%04zu", c, n);
      meta.sample_id = buf;
      meta.class_label = c;
      std::snprintf(buf, sizeof buf, "user%02zu", n % spec.groups + 1);
      meta.group_id = buf;
      meta.path = std::filesystem::path("grids") / (meta.sample_id + ".dgt");
    }
  }

  parallel_for(total, [&](std::size_t idx) {
    const int c = static_cast<int>(idx / spec.per_class);
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(idx), 0x5A3Fu};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> noise(0.0, spec.sigma);
    std::vector<float> data(spec.frames * a * a * spec.dim);
    std::size_t pos = 0;
    for (std::size_t t = 0; t < spec.frames; ++t) {
      for (std::size_t cell = 0; cell < a * a; ++cell) {
        const bool signal = spec.mu > 0.0 && frame_on[t] && cell_on[cell];
        for (std::size_t k = 0; k < spec.dim; ++k) {
          double v = noise(rng);
          if (signal) v += spec.mu * dirs(c, static_cast<Eigen::Index>(k));
          data[pos++] = static_cast<float>(v);
        }
      }
    }
    ds.grids[idx] = DescriptorGrid(spec.frames, a, spec.dim, std::move(data));
  });
  validate_manifest(ds.manifest);
  return ds;
}

}  // namespace gridvlad
