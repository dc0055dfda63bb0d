#include "gridvlad/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "gridvlad/codebook.hpp"
#include "gridvlad/pca.hpp"

namespace gridvlad {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
  return buf;
}

std::vector<const DescriptorGrid*> pick(const std::vector<DescriptorGrid>& grids,
                                        const std::vector<std::size_t>& indices) {
  std::vector<const DescriptorGrid*> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(&grids[i]);
  return out;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

/// Fills confusion, fold results and accuracies from predictions.
void tally(CvReport& report, const DatasetManifest& manifest, const std::vector<Fold>& folds) {
  const auto c = static_cast<std::size_t>(report.classes);
  report.confusion.assign(c, std::vector<std::size_t>(c, 0));
  report.folds.clear();
  std::size_t correct_total = 0;
  std::size_t tested = 0;
  double fold_sum = 0.0;
  for (const auto& fold : folds) {
    FoldResult fr;
    fr.group_id = fold.group_id;
    fr.train_size = fold.train.size();
    fr.test_size = fold.test.size();
    for (auto i : fold.test) {
      const int truth = manifest.samples[i].class_label;
      const int pred = report.predictions[i];
      ++report.confusion[static_cast<std::size_t>(truth - 1)][static_cast<std::size_t>(pred - 1)];
      if (truth == pred) ++fr.correct;
    }
    fr.accuracy = fr.test_size ? static_cast<double>(fr.correct) / static_cast<double>(fr.test_size) : 0.0;
    correct_total += fr.correct;
    tested += fr.test_size;
    fold_sum += fr.accuracy;
    report.folds.push_back(fr);
  }
  report.accuracy = tested ? static_cast<double>(correct_total) / static_cast<double>(tested) : 0.0;
  report.mean_fold_accuracy = folds.empty() ? 0.0 : fold_sum / static_cast<double>(folds.size());
}

}  // namespace

std::uint64_t stage_seed(const PipelineConfig& config, Stage stage, std::size_t fold) {
  return derive_seed(config.seed, static_cast<std::uint64_t>(stage), fold);
}

void validate_config(const PipelineConfig& config, std::optional<std::size_t> grid_size) {
  if (config.clusters == 0) throw Error("K must be positive");
  if (config.dim == 0) throw Error("D must be positive");
  if (config.iterations == 0) throw Error("iters must be >= 1");
  if (!(config.c_reg > 0.0)) throw Error("C_reg must be positive");
  if (config.kmeans_max_iters == 0) throw Error("k-means max iterations must be positive");
  if (config.levels > 16) throw Error("L=" + std::to_string(config.levels) + " is unreasonably deep");
  const bool spatial = config.method == Method::Dsar || config.method == Method::Dstar;
  if (spatial && config.n_sp == 0) throw Error("N_sp must be positive");
  if (config.method == Method::Dstar && config.n_tmp == 0) throw Error("N_tmp must be positive");
  if (config.method == Method::Dstar) {
    const std::size_t d = PyramidConfig{config.levels}.segment_count();
    if (config.n_tmp > d) {
      throw Error("N_tmp exceeds 2^(L+1)-1=" + std::to_string(d));
    }
  }
  if (grid_size && spatial) {
    const std::size_t cells = *grid_size * *grid_size;
    if (config.n_sp > cells) throw Error("N_sp exceeds a^2=" + std::to_string(cells));
  }
}

std::string describe_config(const PipelineConfig& config) {
  std::ostringstream out;
  out << "method=" << method_name(config.method) << "\n"
      << "K=" << config.clusters << "\n"
      << "D=" << config.dim << "\n"
      << "N_sp=" << config.n_sp << "\n"
      << "N_tmp=" << config.n_tmp << "\n"
      << "L=" << config.levels << "\n"
      << "iters=" << config.iterations << "\n"
      << "C_reg=" << fmt_double(config.c_reg) << "\n"
      << "seed=" << config.seed << "\n"
      << "pca_sample_cap=" << config.pca_sample_cap << "\n"
      << "kmeans_sample_cap=" << config.kmeans_sample_cap << "\n"
      << "kmeans_max_iters=" << config.kmeans_max_iters << "\n"
      << "unsupervised_fit_scope=" << (config.fit_unsupervised_on_all ? "all" : "train") << "\n"
      << "seed.pca_subsample=" << stage_seed(config, Stage::PcaSubsample, 0) << "\n"
      << "seed.kmeans_subsample=" << stage_seed(config, Stage::KmeansSubsample, 0) << "\n"
      << "seed.kmeans=" << stage_seed(config, Stage::Kmeans, 0) << "\n"
      << "seed.classifier=" << stage_seed(config, Stage::Classifier, 0) << "\n"
      << "seed.fold_stride=7919\n";
  return out.str();
}

std::vector<Fold> louo_folds(const DatasetManifest& manifest) {
  std::map<std::string, Fold> by_group;
  for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
    by_group[manifest.samples[i].group_id].group_id = manifest.samples[i].group_id;
  }
  if (by_group.size() < 2) {
    throw Error("leave-one-group-out needs >= 2 distinct group_ids (got " + std::to_string(by_group.size()) + ")");
  }
  for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
    const auto& g = manifest.samples[i].group_id;
    for (auto& [id, fold] : by_group) (id == g ? fold.test : fold.train).push_back(i);
  }
  std::vector<Fold> folds;
  folds.reserve(by_group.size());
  for (auto& [id, fold] : by_group) folds.push_back(std::move(fold));
  return folds;
}

std::string_view fit_stage_name(FitStage stage) {
  switch (stage) {
    case FitStage::Pca: return "pca";
    case FitStage::Codebook: return "codebook";
    case FitStage::Weights: return "weights";
    case FitStage::Classifier: return "classifier";
  }
  return "?";
}

CvReport run_cv(const Dataset& dataset, const PipelineConfig& config, const RunHooks& hooks) {
  const auto& manifest = dataset.manifest;
  if (dataset.grids.size() != manifest.samples.size()) throw Error("dataset grids and manifest differ in length");
  if (dataset.grids.empty()) throw Error("empty dataset");
  validate_config(config, dataset.grids.front().grid_size());
  for (const auto& g : dataset.grids) {
    if (g.grid_size() != dataset.grids.front().grid_size() || g.dim() != dataset.grids.front().dim()) {
      throw Error("inconsistent grid shapes across the dataset");
    }
  }

  const auto folds = louo_folds(manifest);
  const std::size_t n = dataset.size();
  CvReport report;
  report.config = config;
  report.classes = manifest.classes;
  report.scores.assign(n, Vector());
  report.predictions.assign(n, 0);

  auto notify = [&](FitStage stage, std::size_t fold, const std::vector<std::size_t>& samples) {
    if (hooks.on_fit) hooks.on_fit(stage, fold, samples);
  };

  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& fold = folds[f];
    try {
      const auto& unsup = config.fit_unsupervised_on_all ? all_indices(n) : fold.train;

      notify(FitStage::Pca, f, unsup);
      const Matrix pca_samples = collect_descriptors(pick(dataset.grids, unsup), config.pca_sample_cap,
                                                     stage_seed(config, Stage::PcaSubsample, f));
      const PcaModel pca = fit_pca(pca_samples, config.dim);

      std::vector<DescriptorGrid> reduced(n);
      parallel_for(n, [&](std::size_t i) { reduced[i] = apply_pca(pca, dataset.grids[i]); });

      notify(FitStage::Codebook, f, unsup);
      const Matrix km_samples = collect_descriptors(pick(reduced, unsup), config.kmeans_sample_cap,
                                                    stage_seed(config, Stage::KmeansSubsample, f));
      const auto km = fit_kmeans(km_samples, {config.clusters, stage_seed(config, Stage::Kmeans, f),
                                              config.kmeans_max_iters});
      const Codebook& codebook = km.codebook;

      std::vector<VideoRepresentation> reps(n);
      if (config.method == Method::Lcd) {
        parallel_for(n, [&](std::size_t i) { reps[i] = encode_lcd(reduced[i], codebook); });
      } else {
        const PyramidConfig pyr{config.method == Method::Dsar ? 0 : config.levels};
        std::vector<PyramidVlads> pyramids(n);
        parallel_for(n, [&](std::size_t i) { pyramids[i] = encode_pyramid(reduced[i], codebook, pyr); });

        TrainedAggregator agg;
        if (config.method == Method::Star) {
          agg = make_star(dataset.grids.front().grid_size(), pyr);
        } else {
          notify(FitStage::Weights, f, fold.train);
          std::vector<TrainingVideo> train;
          train.reserve(fold.train.size());
          for (auto i : fold.train) train.push_back({&pyramids[i], manifest.samples[i].class_label});
          agg = config.method == Method::Dsar
                    ? train_dsar(train, manifest.classes, config.n_sp)
                    : train_dstar(train, manifest.classes, config.n_sp, config.n_tmp, config.iterations);
          report.alternation = agg.history;
        }
        parallel_for(n, [&](std::size_t i) { reps[i] = agg.represent(pyramids[i]); });
      }
      if (hooks.on_representation) {
        for (const auto& r : reps) hooks.on_representation(r);
      }

      notify(FitStage::Classifier, f, fold.train);
      const auto len = reps.front().vector.size();
      Matrix features(static_cast<Eigen::Index>(fold.train.size()), len);
      std::vector<int> labels;
      labels.reserve(fold.train.size());
      for (std::size_t r = 0; r < fold.train.size(); ++r) {
        features.row(static_cast<Eigen::Index>(r)) = reps[fold.train[r]].vector.transpose();
        labels.push_back(manifest.samples[fold.train[r]].class_label);
      }
      SvmOptions svm;
      svm.c_reg = config.c_reg;
      svm.seed = stage_seed(config, Stage::Classifier, f);
      const auto model = train_ova(features, labels, manifest.classes, svm);
      for (auto i : fold.test) {
        report.scores[i] = score(model, reps[i].vector);
        report.predictions[i] = argmax_label(report.scores[i]);
      }
    } catch (const Error& e) {
      throw Error("fold " + std::to_string(f + 1) + " (test group '" + fold.group_id + "'): " + e.what());
    }
  }
  tally(report, manifest, folds);
  return report;
}

CvReport fuse_reports(std::span<const CvReport> reports, const DatasetManifest& manifest,
                      std::optional<std::span<const double>> weights) {
  if (reports.empty()) throw Error("no reports to fuse");
  const std::size_t n = manifest.samples.size();
  for (const auto& r : reports) {
    if (r.scores.size() != n) throw Error("report does not cover the manifest");
  }
  CvReport fused;
  fused.config = reports.front().config;
  fused.classes = manifest.classes;
  fused.scores.resize(n);
  fused.predictions.resize(n);
  std::vector<Vector> per_source(reports.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < reports.size(); ++k) per_source[k] = reports[k].scores[i];
    fused.scores[i] = fuse_scores(per_source, weights);
    fused.predictions[i] = argmax_label(fused.scores[i]);
  }
  tally(fused, manifest, louo_folds(manifest));
  return fused;
}

std::string format_report(const CvReport& report) {
  std::ostringstream out;
  out << "# cross-validation report (leave one group out)\n";
  out << "# method " << method_name(report.config.method) << ", " << report.folds.size() << " folds\n";
  out << "#\n# fold  group                 train  test  correct  accuracy\n";
  for (std::size_t f = 0; f < report.folds.size(); ++f) {
    const auto& fr = report.folds[f];
    char line[160];
    std::snprintf(line, sizeof line, "# %4zu  %-20s %6zu %5zu %8zu  %7s%%\n", f + 1, fr.group_id.c_str(),
                  fr.train_size, fr.test_size, fr.correct, fmt_percent(fr.accuracy).c_str());
    out << line;
  }
  out << "# pooled accuracy " << fmt_percent(report.accuracy) << "%, mean of folds "
      << fmt_percent(report.mean_fold_accuracy) << "%\n";
  out << "#\n# confusion (rows = true class, columns = predicted)\n";
  for (const auto& row : report.confusion) {
    out << "#";
    for (auto v : row) {
      char cell[16];
      std::snprintf(cell, sizeof cell, " %5zu", v);
      out << cell;
    }
    out << "\n";
  }
  out << describe_config(report.config);
  out << "classes=" << report.classes << "\n";
  out << "folds=" << report.folds.size() << "\n";
  for (std::size_t f = 0; f < report.folds.size(); ++f) {
    out << "fold." << f + 1 << ".group=" << report.folds[f].group_id << "\n";
    out << "fold." << f + 1 << ".accuracy=" << fmt_double(report.folds[f].accuracy) << "\n";
  }
  out << "accuracy=" << fmt_double(report.accuracy) << "\n";
  out << "mean_fold_accuracy=" << fmt_double(report.mean_fold_accuracy) << "\n";
  for (std::size_t r = 0; r < report.confusion.size(); ++r) {
    out << "confusion." << r + 1 << "=";
    for (std::size_t c = 0; c < report.confusion[r].size(); ++c) out << (c ? "," : "") << report.confusion[r][c];
    out << "\n";
  }
  for (std::size_t it = 0; it < report.alternation.size(); ++it) {
    const auto& s = report.alternation[it];
    out << "alternation." << it + 1 << "=" << fmt_double(s.delta_sp) << "," << fmt_double(s.delta_tmp) << ","
        << fmt_double(s.objective_sp) << "," << fmt_double(s.objective_tmp) << "\n";
  }
  for (std::size_t i = 0; i < report.predictions.size(); ++i) {
    out << "prediction." << i + 1 << "=" << report.predictions[i];
    for (Eigen::Index c = 0; c < report.scores[i].size(); ++c) out << (c ? "," : ":") << fmt_double(report.scores[i][c]);
    out << "\n";
  }
  return out.str();
}

std::string confusion_csv(const CvReport& report) {
  std::ostringstream out;
  out << "true\\predicted";
  for (int c = 1; c <= report.classes; ++c) out << "," << c;
  out << "\n";
  for (std::size_t r = 0; r < report.confusion.size(); ++r) {
    out << r + 1;
    for (auto v : report.confusion[r]) out << "," << v;
    out << "\n";
  }
  return out.str();
}

std::vector<PipelineConfig> expand_grid(const PipelineConfig& base, const SweepGrid& grid) {
  auto axis = [](const std::vector<std::size_t>& values, std::size_t fallback) {
    return values.empty() ? std::vector<std::size_t>{fallback} : values;
  };
  std::vector<PipelineConfig> out;
  for (auto k : axis(grid.clusters, base.clusters)) {
    for (auto d : axis(grid.dims, base.dim)) {
      for (auto sp : axis(grid.n_sp, base.n_sp)) {
        for (auto tmp : axis(grid.n_tmp, base.n_tmp)) {
          PipelineConfig c = base;
          c.clusters = k;
          c.dim = d;
          c.n_sp = sp;
          c.n_tmp = tmp;
          out.push_back(c);
        }
      }
    }
  }
  return out;
}

std::vector<SweepCell> sweep(const Dataset& dataset, const PipelineConfig& base, const SweepGrid& grid) {
  const auto configs = expand_grid(base, grid);
  if (configs.empty()) throw Error("empty sweep grid");
  std::vector<SweepCell> cells;
  cells.reserve(configs.size());
  for (const auto& config : configs) {
    SweepCell cell;
    cell.config = config;
    try {
      cell.report = run_cv(dataset, config);
    } catch (const Error& e) {
      cell.error = e.what();
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

std::optional<std::size_t> best_cell(const std::vector<SweepCell>& cells) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!cells[i].report) continue;
    if (!best || cells[i].report->accuracy > cells[*best].report->accuracy) best = i;
  }
  return best;
}

std::string format_sweep_table(const std::vector<SweepCell>& cells) {
  if (cells.empty()) return {};
  const Method method = cells.front().config.method;
  const bool show_sp = method == Method::Dsar || method == Method::Dstar;
  const bool show_tmp = method == Method::Dstar;

  using ColumnKey = std::tuple<std::size_t, std::size_t, std::size_t>;  // N_sp, N_tmp, K
  std::vector<ColumnKey> columns;
  std::vector<std::size_t> rows;
  for (const auto& c : cells) {
    const ColumnKey key{show_sp ? c.config.n_sp : 0, show_tmp ? c.config.n_tmp : 0, c.config.clusters};
    if (std::find(columns.begin(), columns.end(), key) == columns.end()) columns.push_back(key);
    if (std::find(rows.begin(), rows.end(), c.config.dim) == rows.end()) rows.push_back(c.config.dim);
  }
  std::sort(columns.begin(), columns.end());
  std::sort(rows.begin(), rows.end());

  std::ostringstream out;
  out << "method " << method_name(method) << ", pooled LOUO accuracy (%)\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-8s", "D \\ col");
  out << buf;
  for (const auto& [sp, tmp, k] : columns) {
    std::string label = "K=" + std::to_string(k);
    if (show_sp) label = "Nsp=" + std::to_string(sp) + "/" + label;
    if (show_tmp) label = "Ntmp=" + std::to_string(tmp) + "/" + label;
    std::snprintf(buf, sizeof buf, " %18s", label.c_str());
    out << buf;
  }
  out << "\n";
  for (auto d : rows) {
    std::snprintf(buf, sizeof buf, "%-8s", (std::to_string(d) + "-D").c_str());
    out << buf;
    for (const auto& [sp, tmp, k] : columns) {
      std::string value = "-";
      for (const auto& c : cells) {
        const ColumnKey key{show_sp ? c.config.n_sp : 0, show_tmp ? c.config.n_tmp : 0, c.config.clusters};
        if (c.config.dim == d && key == ColumnKey{sp, tmp, k}) {
          value = c.report ? fmt_percent(c.report->accuracy) : "failed";
        }
      }
      std::snprintf(buf, sizeof buf, " %18s", value.c_str());
      out << buf;
    }
    out << "\n";
  }
  for (const auto& c : cells) {
    if (!c.report) {
      out << "failed: K=" << c.config.clusters << " D=" << c.config.dim << " N_sp=" << c.config.n_sp
          << " N_tmp=" << c.config.n_tmp << ": " << c.error << "\n";
    }
  }
  if (const auto best = best_cell(cells)) {
    const auto& c = cells[*best].config;
    out << "best: K=" << c.clusters << " D=" << c.dim;
    if (show_sp) out << " N_sp=" << c.n_sp;
    if (show_tmp) out << " N_tmp=" << c.n_tmp;
    out << " accuracy=" << fmt_percent(cells[*best].report->accuracy) << "%\n";
  }
  return out.str();
}

}  // namespace gridvlad
