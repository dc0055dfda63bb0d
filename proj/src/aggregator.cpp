#include "gridvlad/aggregator.hpp"

#include <fstream>
#include <map>
#include <string>

namespace gridvlad {

namespace {

void finish(Vector& v, FinalNorm norm) {
  if (norm == FinalNorm::PowerL2) {
    power_l2_normalize(v);
  } else {
    l2_normalize(v);
  }
}

Vector flatten(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

RepresentationParams params_of(const PyramidVlads& p, std::size_t n_sp, std::size_t n_tmp) {
  return {p.clusters, p.feature_length() / std::max<std::size_t>(p.clusters, 1), n_sp, n_tmp, p.levels};
}

void check_spatial(const PyramidVlads& p, const WeightMatrix& w_sp) {
  if (p.columns.cols() != static_cast<Eigen::Index>(p.cells() * p.segments())) {
    throw Error("pyramid is missing cell-segment entries");
  }
  if (w_sp.weight_dim() != p.cells()) {
    throw Error("shape mismatch: W_sp has m=" + std::to_string(w_sp.weight_dim()) + ", grid has a^2=" +
                std::to_string(p.cells()));
  }
}

/// V_sp: F x a^2, the column of `segment` for every cell.
Matrix spatial_view(const PyramidVlads& p, std::size_t segment) {
  Matrix v(static_cast<Eigen::Index>(p.feature_length()), static_cast<Eigen::Index>(p.cells()));
  for (std::size_t cell = 0; cell < p.cells(); ++cell) v.col(static_cast<Eigen::Index>(cell)) = p.entry(cell, segment);
  return v;
}

/// V': column (i,j) is flatten(V(i,j) * W_tmp), length F * N_tmp.
Matrix step1_view(const PyramidVlads& p, const WeightMatrix& w_tmp) {
  const auto f = static_cast<Eigen::Index>(p.feature_length());
  const auto n_tmp = static_cast<Eigen::Index>(w_tmp.components());
  Matrix v(f * n_tmp, static_cast<Eigen::Index>(p.cells()));
  for (std::size_t cell = 0; cell < p.cells(); ++cell) {
    const Matrix g = p.cell_block(cell) * w_tmp.columns;
    v.col(static_cast<Eigen::Index>(cell)) = flatten(g);
  }
  return v;
}

/// V'': column (l,s) is flatten(V^l_s * W_sp), length F * N_sp.
Matrix step2_view(const PyramidVlads& p, const WeightMatrix& w_sp) {
  const auto f = static_cast<Eigen::Index>(p.feature_length());
  const auto n_sp = static_cast<Eigen::Index>(w_sp.components());
  Matrix v(f * n_sp, static_cast<Eigen::Index>(p.segments()));
  for (std::size_t seg = 0; seg < p.segments(); ++seg) {
    const Matrix h = spatial_view(p, seg) * w_sp.columns;
    v.col(static_cast<Eigen::Index>(seg)) = flatten(h);
  }
  return v;
}

template <typename ViewFn>
WeightMatrix solve(std::span<const TrainingVideo> videos, int classes, std::size_t n_components,
                   ViewFn&& view_of) {
  std::optional<ScatterAccumulator> acc;
  for (const auto& video : videos) {
    const Matrix v = view_of(*video.pyramid);
    if (!acc) acc.emplace(v.rows(), v.cols(), classes);
    acc->add(v, video.label);
  }
  if (!acc) throw Error("no training videos");
  return top_eigenvectors(acc->scatter(), n_components);
}

void check_training_set(std::span<const TrainingVideo> videos) {
  if (videos.empty()) throw Error("no training videos");
  const auto& first = *videos.front().pyramid;
  for (const auto& v : videos) {
    if (v.pyramid->grid_size != first.grid_size || v.pyramid->levels != first.levels ||
        v.pyramid->columns.rows() != first.columns.rows()) {
      throw Error("training pyramids differ in shape");
    }
  }
}

/// Frobenius distance; both matrices follow the same sign convention.
double weight_delta(const WeightMatrix& a, const WeightMatrix& b) {
  return (a.columns - b.columns).norm();
}

std::string describe(Method m) { return std::string(method_name(m)); }

}  // namespace

VideoRepresentation aggregate_dsar(const PyramidVlads& pyramid, const WeightMatrix& w_sp,
                                   FinalNorm norm) {
  check_spatial(pyramid, w_sp);
  const Matrix v = spatial_view(pyramid, 0) * w_sp.columns;
  VideoRepresentation rep;
  rep.vector = flatten(v);
  finish(rep.vector, norm);
  rep.method = Method::Dsar;
  rep.params = params_of(pyramid, w_sp.components(), 0);
  rep.params.levels = 0;
  return rep;
}

VideoRepresentation aggregate_dstar(const PyramidVlads& pyramid, const WeightMatrix& w_sp,
                                    const WeightMatrix& w_tmp, FinalNorm norm) {
  check_spatial(pyramid, w_sp);
  if (w_tmp.weight_dim() != pyramid.segments()) {
    throw Error("shape mismatch: W_tmp has m=" + std::to_string(w_tmp.weight_dim()) + ", pyramid has d=" +
                std::to_string(pyramid.segments()));
  }
  const auto f = static_cast<Eigen::Index>(pyramid.feature_length());
  const auto n_sp = static_cast<Eigen::Index>(w_sp.components());
  const auto n_tmp = static_cast<Eigen::Index>(w_tmp.components());
  VideoRepresentation rep;
  rep.vector.resize(f * n_sp * n_tmp);
  Matrix g(f, static_cast<Eigen::Index>(pyramid.cells()));
  for (Eigen::Index q = 0; q < n_tmp; ++q) {
    for (std::size_t cell = 0; cell < pyramid.cells(); ++cell) {
      g.col(static_cast<Eigen::Index>(cell)) = pyramid.cell_block(cell) * w_tmp.columns.col(q);
    }
    const Matrix z = g * w_sp.columns;
    rep.vector.segment(q * f * n_sp, f * n_sp) = flatten(z);
  }
  finish(rep.vector, norm);
  rep.method = Method::Dstar;
  rep.params = params_of(pyramid, w_sp.components(), w_tmp.components());
  return rep;
}

VideoRepresentation aggregate_star(const PyramidVlads& pyramid, FinalNorm norm) {
  if (pyramid.columns.cols() != static_cast<Eigen::Index>(pyramid.cells() * pyramid.segments())) {
    throw Error("pyramid is missing cell-segment entries");
  }
  VideoRepresentation rep;
  rep.vector = flatten(pyramid.columns);
  finish(rep.vector, norm);
  rep.method = Method::Star;
  rep.params = params_of(pyramid, 0, 0);
  return rep;
}

VideoRepresentation TrainedAggregator::represent(const PyramidVlads& pyramid, FinalNorm norm) const {
  if (pyramid.grid_size != grid_size) {
    throw Error("grid size mismatch: aggregator a=" + std::to_string(grid_size) + ", video a=" +
                std::to_string(pyramid.grid_size));
  }
  switch (method) {
    case Method::Dsar:
      return aggregate_dsar(pyramid, *w_sp, norm);
    case Method::Dstar:
      if (pyramid.levels != this->pyramid.levels) throw Error("pyramid level mismatch");
      return aggregate_dstar(pyramid, *w_sp, *w_tmp, norm);
    case Method::Star:
      if (pyramid.levels != this->pyramid.levels) throw Error("pyramid level mismatch");
      return aggregate_star(pyramid, norm);
    case Method::Lcd:
      break;
  }
  throw Error("aggregator cannot represent method " + describe(method));
}

TrainedAggregator train_dsar(std::span<const TrainingVideo> videos, int classes, std::size_t n_sp) {
  check_training_set(videos);
  const std::size_t cells = videos.front().pyramid->cells();
  if (n_sp > cells) {
    throw Error("N_sp exceeds a^2=" + std::to_string(cells));
  }
  TrainedAggregator agg;
  agg.method = Method::Dsar;
  agg.grid_size = videos.front().pyramid->grid_size;
  agg.pyramid = {0};
  agg.w_sp = solve(videos, classes, n_sp, [](const PyramidVlads& p) { return spatial_view(p, 0); });
  return agg;
}

TrainedAggregator train_dstar(std::span<const TrainingVideo> videos, int classes, std::size_t n_sp,
                              std::size_t n_tmp, std::size_t iterations) {
  check_training_set(videos);
  const auto& first = *videos.front().pyramid;
  if (n_sp > first.cells()) throw Error("N_sp exceeds a^2=" + std::to_string(first.cells()));
  if (n_tmp > first.segments()) {
    throw Error("N_tmp exceeds d=2^(L+1)-1=" + std::to_string(first.segments()));
  }
  if (iterations == 0) throw Error("iterations must be >= 1");

  TrainedAggregator agg;
  agg.method = Method::Dstar;
  agg.grid_size = first.grid_size;
  agg.pyramid = {first.levels};
  agg.iterations = iterations;

  WeightMatrix w_sp = solve(videos, classes, n_sp, [](const PyramidVlads& p) { return spatial_view(p, 0); });
  std::optional<WeightMatrix> w_tmp;
  for (std::size_t it = 0; it < iterations; ++it) {
    AlternationStep step;
    // Step 2: W_sp fixed.
    WeightMatrix next_tmp = solve(videos, classes, n_tmp,
                                  [&](const PyramidVlads& p) { return step2_view(p, w_sp); });
    step.delta_tmp = w_tmp ? weight_delta(next_tmp, *w_tmp) : 0.0;
    step.objective_tmp = next_tmp.eigenvalues.sum();
    w_tmp = std::move(next_tmp);
    // Step 1: W_tmp fixed.
    WeightMatrix next_sp = solve(videos, classes, n_sp,
                                 [&](const PyramidVlads& p) { return step1_view(p, *w_tmp); });
    step.delta_sp = weight_delta(next_sp, w_sp);
    step.objective_sp = next_sp.eigenvalues.sum();
    w_sp = std::move(next_sp);
    agg.history.push_back(step);
  }
  agg.w_sp = std::move(w_sp);
  agg.w_tmp = std::move(w_tmp);
  return agg;
}

TrainedAggregator make_star(std::size_t grid_size, PyramidConfig pyramid) {
  TrainedAggregator agg;
  agg.method = Method::Star;
  agg.grid_size = grid_size;
  agg.pyramid = pyramid;
  return agg;
}

void save_aggregator(const TrainedAggregator& agg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "aggregator.txt");
  if (!out) throw Error("cannot write aggregator bundle at '" + dir.string() + "'");
  out << "method=" << method_name(agg.method) << "\n";
  out << "grid_size=" << agg.grid_size << "\n";
  out << "levels=" << agg.pyramid.levels << "\n";
  out << "n_sp=" << (agg.w_sp ? agg.w_sp->components() : 0) << "\n";
  out << "n_tmp=" << (agg.w_tmp ? agg.w_tmp->components() : 0) << "\n";
  out << "iterations=" << agg.iterations << "\n";
  if (!out) throw Error("write to '" + (dir / "aggregator.txt").string() + "' failed");
  if (agg.w_sp) save_weights(*agg.w_sp, dir / "w_sp.wgt");
  if (agg.w_tmp) save_weights(*agg.w_tmp, dir / "w_tmp.wgt");
}

TrainedAggregator load_aggregator(const std::filesystem::path& dir) {
  std::ifstream in(dir / "aggregator.txt");
  if (!in) throw Error("cannot open aggregator bundle '" + dir.string() + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto number = [&](const std::string& key) -> std::size_t {
    const auto it = kv.find(key);
    if (it == kv.end()) throw Error("aggregator bundle missing '" + key + "'");
    return static_cast<std::size_t>(std::stoull(it->second));
  };
  if (!kv.count("method")) throw Error("aggregator bundle missing 'method'");
  TrainedAggregator agg;
  agg.method = parse_method(kv["method"]);
  agg.grid_size = number("grid_size");
  agg.pyramid = {number("levels")};
  agg.iterations = number("iterations");
  if (agg.method == Method::Dsar || agg.method == Method::Dstar) agg.w_sp = load_weights(dir / "w_sp.wgt");
  if (agg.method == Method::Dstar) agg.w_tmp = load_weights(dir / "w_tmp.wgt");
  if (agg.w_sp && agg.w_sp->weight_dim() != agg.grid_size * agg.grid_size) {
    throw Error("aggregator bundle: W_sp size does not match a^2");
  }
  if (agg.w_tmp && agg.w_tmp->weight_dim() != agg.pyramid.segment_count()) {
    throw Error("aggregator bundle: W_tmp size does not match d");
  }
  return agg;
}

}  // namespace gridvlad
