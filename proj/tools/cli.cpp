#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gridvlad/aggregator.hpp"
#include "gridvlad/classify.hpp"
#include "gridvlad/codebook.hpp"
#include "gridvlad/core_types.hpp"
#include "gridvlad/evaluate.hpp"
#include "gridvlad/pca.hpp"
#include "gridvlad/synth.hpp"
#include "gridvlad/vlad.hpp"

namespace gridvlad::cli {

namespace fs = std::filesystem;

namespace {

struct Flags {
  // shared
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::string manifest;
  std::string out;
  // pipeline
  std::string method = "dstar";
  std::size_t clusters = 128;
  std::size_t dim = 64;
  std::size_t n_sp = 5;
  std::size_t n_tmp = 5;
  std::size_t levels = 2;
  std::size_t iters = 5;
  double c_reg = 100.0;
  std::size_t pca_cap = 200000;
  std::size_t kmeans_cap = 200000;
  std::size_t kmeans_iters = 100;
  std::string fit_scope = "train";
  // artifacts
  std::string pca_path;
  std::string codebook_path;
  std::string weights_dir;
  std::string reps_dir;
  std::string report_path;
  std::string confusion_path;
  std::vector<std::string> fuse_with;
  // sweep
  std::vector<std::size_t> k_list, d_list, n_sp_list, n_tmp_list;
  // synth
  int classes = 4;
  std::size_t per_class = 40;
  std::size_t groups = 4;
  std::size_t frames = 16;
  std::size_t grid_size = 3;
  std::size_t raw_dim = 16;
  std::string signal_cells = "all";
  std::string signal_segments = "all";
  double mu = 1.5;
  double sigma = 1.0;
  // heatmap
  int component = 0;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

void print_config(std::ostream& out, const std::string& subcommand,
                  const std::vector<std::pair<std::string, std::string>>& entries) {
  out << "# resolved config\n";
  out << "subcommand=" << subcommand << "\n";
  for (const auto& [k, v] : entries) out << k << "=" << v << "\n";
  out << "threads=" << thread_count() << "\n";
}

void print_pipeline_config(std::ostream& out, const std::string& subcommand, const PipelineConfig& config,
                           const std::vector<std::pair<std::string, std::string>>& extra) {
  out << "# resolved config\n";
  out << "subcommand=" << subcommand << "\n";
  for (const auto& [k, v] : extra) out << k << "=" << v << "\n";
  out << describe_config(config);
  out << "threads=" << thread_count() << "\n";
}

PipelineConfig pipeline_config(const Flags& f) {
  PipelineConfig c;
  c.method = parse_method(f.method);
  c.clusters = f.clusters;
  c.dim = f.dim;
  c.n_sp = f.n_sp;
  c.n_tmp = f.n_tmp;
  c.levels = f.levels;
  c.iterations = f.iters;
  c.c_reg = f.c_reg;
  c.seed = f.seed;
  c.pca_sample_cap = f.pca_cap;
  c.kmeans_sample_cap = f.kmeans_cap;
  c.kmeans_max_iters = f.kmeans_iters;
  if (f.fit_scope != "train" && f.fit_scope != "all") {
    throw Error("--fit-scope must be 'train' or 'all'");
  }
  c.fit_unsupervised_on_all = f.fit_scope == "all";
  return c;
}

std::vector<std::pair<std::size_t, std::size_t>> parse_cells(const std::string& text, std::size_t a) {
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  if (text == "all") return cells;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    const auto comma = item.find(',');
    if (comma == std::string::npos) throw Error("--signal-cells expects 'i,j;i,j;...' (1-based), got '" + item + "'");
    const long i = std::stol(item.substr(0, comma));
    const long j = std::stol(item.substr(comma + 1));
    if (i < 1 || j < 1 || static_cast<std::size_t>(i) > a || static_cast<std::size_t>(j) > a) {
      throw Error("--signal-cells: cell (" + std::to_string(i) + "," + std::to_string(j) + ") outside 1.." +
                  std::to_string(a));
    }
    cells.emplace_back(static_cast<std::size_t>(i - 1), static_cast<std::size_t>(j - 1));
  }
  return cells;
}

std::vector<std::size_t> parse_segments(const std::string& text) {
  std::vector<std::size_t> segs;
  if (text == "all") return segs;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const long s = std::stol(item);
    if (s < 1) throw Error("--signal-segments are 1-based, got " + item);
    segs.push_back(static_cast<std::size_t>(s - 1));
  }
  return segs;
}

void write_text(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty() || path == "-") {
    fallback << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw Error("cannot write '" + path + "'");
  f << text;
  if (!f) throw Error("write to '" + path + "' failed");
}

/// PCA-reduced grids of every manifest sample.
std::vector<DescriptorGrid> reduced_grids(const Dataset& ds, const PcaModel& pca) {
  std::vector<DescriptorGrid> out(ds.size());
  parallel_for(ds.size(), [&](std::size_t i) { out[i] = apply_pca(pca, ds.grids[i]); });
  return out;
}

Dataset load(const Flags& f) {
  auto manifest = parse_manifest(f.manifest);
  auto ds = load_dataset(manifest);
  if (ds.grids.empty()) throw Error("manifest '" + f.manifest + "' lists no samples");
  return ds;
}

void warn_manifest(const Dataset& ds, std::ostream& err) {
  for (const auto& w : ds.manifest.warnings) err << "warning: " << w << "\n";
}

// ---------------------------------------------------------------------------

int cmd_synth(const Flags& f, std::ostream& out) {
  SynthSpec spec;
  spec.classes = f.classes;
  spec.per_class = f.per_class;
  spec.groups = f.groups;
  spec.frames = f.frames;
  spec.grid_size = f.grid_size;
  spec.dim = f.raw_dim;
  spec.levels = f.levels;
  spec.signal_cells = parse_cells(f.signal_cells, f.grid_size);
  spec.signal_segments = parse_segments(f.signal_segments);
  spec.mu = f.mu;
  spec.sigma = f.sigma;
  spec.seed = f.seed;
  print_config(out, "synth-gen",
               {{"out", f.out}, {"classes", std::to_string(f.classes)}, {"per_class", std::to_string(f.per_class)},
                {"groups", std::to_string(f.groups)}, {"T", std::to_string(f.frames)},
                {"a", std::to_string(f.grid_size)}, {"dim", std::to_string(f.raw_dim)},
                {"L", std::to_string(f.levels)}, {"signal_cells", f.signal_cells},
                {"signal_segments", f.signal_segments}, {"mu", fmt(f.mu)}, {"sigma", fmt(f.sigma)},
                {"seed", std::to_string(f.seed)}});
  const auto ds = generate_synth(spec);
  const auto manifest = write_dataset(ds, f.out);
  out << "wrote " << ds.size() << " grids and " << manifest.string() << "\n";
  return 0;
}

int cmd_fit_pca(const Flags& f, std::ostream& out) {
  print_config(out, "fit-pca",
               {{"manifest", f.manifest}, {"out", f.out}, {"D", std::to_string(f.dim)},
                {"pca_sample_cap", std::to_string(f.pca_cap)}, {"seed", std::to_string(f.seed)},
                {"seed.pca_subsample", std::to_string(derive_seed(f.seed, 1))}});
  const auto ds = load(f);
  std::vector<const DescriptorGrid*> grids;
  for (const auto& g : ds.grids) grids.push_back(&g);
  const auto model = fit_pca(collect_descriptors(grids, f.pca_cap, derive_seed(f.seed, 1)), f.dim);
  save_pca(model, f.out);
  out << "pca " << model.input_dim() << " -> " << model.output_dim() << ", retained variance "
      << fmt(model.explained_variance.sum()) << "\n";
  return 0;
}

int cmd_fit_codebook(const Flags& f, std::ostream& out) {
  print_config(out, "fit-codebook",
               {{"manifest", f.manifest}, {"pca", f.pca_path}, {"out", f.out}, {"K", std::to_string(f.clusters)},
                {"kmeans_sample_cap", std::to_string(f.kmeans_cap)},
                {"kmeans_max_iters", std::to_string(f.kmeans_iters)}, {"seed", std::to_string(f.seed)},
                {"seed.kmeans_subsample", std::to_string(derive_seed(f.seed, 2))},
                {"seed.kmeans", std::to_string(derive_seed(f.seed, 3))}});
  const auto ds = load(f);
  const auto pca = load_pca(f.pca_path);
  const auto reduced = reduced_grids(ds, pca);
  std::vector<const DescriptorGrid*> grids;
  for (const auto& g : reduced) grids.push_back(&g);
  const auto km = fit_kmeans(collect_descriptors(grids, f.kmeans_cap, derive_seed(f.seed, 2)),
                             {f.clusters, derive_seed(f.seed, 3), f.kmeans_iters});
  save_codebook(km.codebook, f.out);
  out << "k-means " << km.iterations << " iterations, " << (km.converged ? "converged" : "not converged")
      << ", objective " << fmt(km.objective.back()) << "\n";
  return 0;
}

int cmd_train_weights(const Flags& f, std::ostream& out) {
  const Method method = parse_method(f.method);
  if (method == Method::Lcd) throw Error("train-weights: method lcd has no weights");
  print_config(out, "train-weights",
               {{"manifest", f.manifest}, {"pca", f.pca_path}, {"codebook", f.codebook_path}, {"out", f.out},
                {"method", std::string(method_name(method))}, {"N_sp", std::to_string(f.n_sp)},
                {"N_tmp", std::to_string(f.n_tmp)}, {"L", std::to_string(f.levels)},
                {"iters", std::to_string(f.iters)}});
  const auto ds = load(f);
  const std::size_t a = ds.grids.front().grid_size();
  PipelineConfig check;
  check.method = method;
  check.n_sp = f.n_sp;
  check.n_tmp = f.n_tmp;
  check.levels = f.levels;
  check.iterations = f.iters;
  validate_config(check, a);

  const auto pca = load_pca(f.pca_path);
  const auto codebook = load_codebook(f.codebook_path);
  const PyramidConfig pyr{method == Method::Dsar ? 0 : f.levels};
  std::vector<PyramidVlads> pyramids(ds.size());
  parallel_for(ds.size(), [&](std::size_t i) {
    pyramids[i] = encode_pyramid(apply_pca(pca, ds.grids[i]), codebook, pyr);
  });
  std::vector<TrainingVideo> train;
  for (std::size_t i = 0; i < ds.size(); ++i) train.push_back({&pyramids[i], ds.manifest.samples[i].class_label});

  TrainedAggregator agg;
  switch (method) {
    case Method::Star: agg = make_star(a, pyr); break;
    case Method::Dsar: agg = train_dsar(train, ds.manifest.classes, f.n_sp); break;
    case Method::Dstar: agg = train_dstar(train, ds.manifest.classes, f.n_sp, f.n_tmp, f.iters); break;
    case Method::Lcd: break;
  }
  for (std::size_t it = 0; it < agg.history.size(); ++it) {
    const auto& s = agg.history[it];
    out << "iteration " << it + 1 << ": |dW_sp|_F=" << fmt(s.delta_sp) << " |dW_tmp|_F=" << fmt(s.delta_tmp)
        << " objective_sp=" << fmt(s.objective_sp) << " objective_tmp=" << fmt(s.objective_tmp) << "\n";
  }
  save_aggregator(agg, f.out);
  out << "wrote aggregator bundle " << f.out << "\n";
  return 0;
}

int cmd_encode(const Flags& f, std::ostream& out) {
  const Method method = parse_method(f.method);
  print_config(out, "encode",
               {{"manifest", f.manifest}, {"pca", f.pca_path}, {"codebook", f.codebook_path},
                {"weights", f.weights_dir}, {"out", f.out}, {"method", std::string(method_name(method))},
                {"L", std::to_string(f.levels)}});
  const auto ds = load(f);
  const auto pca = load_pca(f.pca_path);
  const auto codebook = load_codebook(f.codebook_path);
  std::optional<TrainedAggregator> agg;
  if (method == Method::Dsar || method == Method::Dstar) {
    if (f.weights_dir.empty()) throw Error("encode: --weights is required for method " + f.method);
    agg = load_aggregator(f.weights_dir);
    if (agg->method != method) {
      throw Error("encode: weight bundle holds method " + std::string(method_name(agg->method)) + ", not " + f.method);
    }
  } else if (method == Method::Star) {
    agg = make_star(ds.grids.front().grid_size(), {f.levels});
  }
  fs::create_directories(f.out);
  parallel_for(ds.size(), [&](std::size_t i) {
    const auto reduced = apply_pca(pca, ds.grids[i]);
    VideoRepresentation rep;
    if (!agg) {
      rep = encode_lcd(reduced, codebook);
    } else {
      rep = agg->represent(encode_pyramid(reduced, codebook, agg->pyramid));
    }
    save_representation(rep, fs::path(f.out) / (ds.manifest.samples[i].sample_id + ".vrp"));
  });
  out << "encoded " << ds.size() << " videos into " << f.out << "\n";
  return 0;
}

int cmd_train_classifier(const Flags& f, std::ostream& out) {
  print_config(out, "train-classifier",
               {{"manifest", f.manifest}, {"reps", f.reps_dir}, {"out", f.out}, {"C_reg", fmt(f.c_reg)},
                {"seed", std::to_string(f.seed)}, {"seed.classifier", std::to_string(derive_seed(f.seed, 4))}});
  const auto manifest = parse_manifest(f.manifest);
  if (manifest.samples.empty()) throw Error("manifest '" + f.manifest + "' lists no samples");
  std::vector<VideoRepresentation> reps;
  std::vector<int> labels;
  for (const auto& s : manifest.samples) {
    reps.push_back(load_representation(fs::path(f.reps_dir) / (s.sample_id + ".vrp")));
    labels.push_back(s.class_label);
  }
  const auto len = reps.front().vector.size();
  Matrix features(static_cast<Eigen::Index>(reps.size()), len);
  for (std::size_t i = 0; i < reps.size(); ++i) {
    if (reps[i].vector.size() != len) throw Error("representation lengths differ across samples");
    features.row(static_cast<Eigen::Index>(i)) = reps[i].vector.transpose();
  }
  SvmOptions opts;
  opts.c_reg = f.c_reg;
  opts.seed = derive_seed(f.seed, 4);
  std::vector<BinarySvmStats> stats;
  const auto model = train_ova(features, labels, manifest.classes, opts, &stats);
  save_model(model, f.out);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < reps.size(); ++i) correct += predict(model, reps[i].vector) == labels[i];
  out << "trained " << model.classes() << " one-vs-all problems on " << reps.size()
      << " samples, training accuracy " << fmt(static_cast<double>(correct) / static_cast<double>(reps.size())) << "\n";
  for (std::size_t c = 0; c < stats.size(); ++c) {
    out << "class " << c + 1 << ": epochs=" << stats[c].epochs << (stats[c].converged ? "" : " (not converged)")
        << "\n";
  }
  return 0;
}

void warn_ignored(const Flags& f, const CLI::App& sub, std::ostream& err) {
  const Method method = parse_method(f.method);
  auto given = [&](const char* name) { return sub.get_option(name)->count() > 0; };
  if (method == Method::Lcd) {
    for (const char* name : {"--N-sp", "--N-tmp", "--L", "--iters"}) {
      if (given(name)) err << "warning: " << name << " is ignored for method lcd\n";
    }
  } else if (method == Method::Star) {
    for (const char* name : {"--N-sp", "--N-tmp", "--iters"}) {
      if (given(name)) err << "warning: " << name << " is ignored for method star\n";
    }
  } else if (method == Method::Dsar) {
    for (const char* name : {"--N-tmp", "--L", "--iters"}) {
      if (given(name)) err << "warning: " << name << " is ignored for method dsar\n";
    }
  }
}

int cmd_evaluate(const Flags& f, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  warn_ignored(f, sub, err);
  const PipelineConfig config = pipeline_config(f);
  print_pipeline_config(out, "evaluate", config, {{"manifest", f.manifest}});
  validate_config(config);
  const auto ds = load(f);
  warn_manifest(ds, err);
  validate_config(config, ds.grids.front().grid_size());

  auto report = run_cv(ds, config);
  if (!f.fuse_with.empty()) {
    std::vector<CvReport> reports{report};
    for (const auto& m : f.fuse_with) {
      PipelineConfig other = config;
      other.method = parse_method(m);
      validate_config(other, ds.grids.front().grid_size());
      reports.push_back(run_cv(ds, other));
      out << "fusion source " << m << ": accuracy " << fmt(reports.back().accuracy) << "\n";
    }
    out << "fusion source " << f.method << ": accuracy " << fmt(report.accuracy) << "\n";
    report = fuse_reports(reports, ds.manifest);
  }
  write_text(f.report_path, format_report(report), out);
  if (!f.confusion_path.empty()) write_text(f.confusion_path, confusion_csv(report), out);
  out << "accuracy=" << fmt(report.accuracy) << "\n";
  return 0;
}

int cmd_sweep(const Flags& f, std::ostream& out, std::ostream& err) {
  const PipelineConfig base = pipeline_config(f);
  SweepGrid grid{f.k_list, f.d_list, f.n_sp_list, f.n_tmp_list};
  auto join = [](const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s.empty() ? std::string("(base)") : s;
  };
  print_pipeline_config(out, "sweep", base,
                        {{"manifest", f.manifest}, {"K_list", join(f.k_list)}, {"D_list", join(f.d_list)},
                         {"N_sp_list", join(f.n_sp_list)}, {"N_tmp_list", join(f.n_tmp_list)}});
  const auto ds = load(f);
  warn_manifest(ds, err);
  const auto cells = sweep(ds, base, grid);
  std::string text = format_sweep_table(cells);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!cells[i].report) continue;
    const auto& c = cells[i].config;
    text += "cell." + std::to_string(i + 1) + "=K:" + std::to_string(c.clusters) + ",D:" + std::to_string(c.dim) +
            ",N_sp:" + std::to_string(c.n_sp) + ",N_tmp:" + std::to_string(c.n_tmp) +
            ",accuracy:" + fmt(cells[i].report->accuracy) + ",mean_fold_accuracy:" +
            fmt(cells[i].report->mean_fold_accuracy) + "\n";
  }
  write_text(f.out, text, out);
  const bool any_ok = std::any_of(cells.begin(), cells.end(), [](const SweepCell& c) { return c.report.has_value(); });
  return any_ok ? 0 : 1;
}

int cmd_export_heatmap(const Flags& f, std::ostream& out) {
  print_config(out, "export-heatmap",
               {{"weights", f.weights_dir}, {"out", f.out}, {"component", std::to_string(f.component)}});
  const auto agg = load_aggregator(f.weights_dir);
  if (!agg.w_sp) throw Error("export-heatmap: bundle has no learned weights (method " +
                             std::string(method_name(agg.method)) + ")");
  auto magnitude = [&](const WeightMatrix& w, Eigen::Index row) {
    if (f.component > 0) {
      if (static_cast<std::size_t>(f.component) > w.components()) {
        throw Error("--component " + std::to_string(f.component) + " exceeds " + std::to_string(w.components()));
      }
      return std::abs(w.columns(row, f.component - 1));
    }
    return w.columns.row(row).norm();
  };
  const std::size_t a = agg.grid_size;
  std::ostringstream sp;
  for (std::size_t i = 0; i < a; ++i) {
    for (std::size_t j = 0; j < a; ++j) {
      sp << (j ? "," : "") << fmt(magnitude(*agg.w_sp, static_cast<Eigen::Index>(i * a + j)));
    }
    sp << "\n";
  }
  const std::string sp_path = f.out + "_spatial.csv";
  write_text(sp_path, sp.str(), out);
  out << "wrote " << sp_path << "\n";
  if (agg.w_tmp) {
    std::ostringstream tmp;
    tmp << "level,segment,magnitude\n";
    for (std::size_t l = 0; l <= agg.pyramid.levels; ++l) {
      for (std::size_t s = 0; s < (std::size_t{1} << l); ++s) {
        tmp << l << "," << s + 1 << ","
            << fmt(magnitude(*agg.w_tmp, static_cast<Eigen::Index>(PyramidConfig::segment_index(l, s)))) << "\n";
      }
    }
    const std::string tmp_path = f.out + "_temporal.csv";
    write_text(tmp_path, tmp.str(), out);
    out << "wrote " << tmp_path << "\n";
  }
  return 0;
}

void add_pipeline_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--method", f.method, "lcd, star, dsar or dstar")->capture_default_str();
  sub->add_option("--K", f.clusters, "codebook size")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--D", f.dim, "descriptor dimension after PCA")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--N-sp", f.n_sp, "spatial weight vectors")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--N-tmp", f.n_tmp, "temporal weight vectors")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--L", f.levels, "temporal pyramid levels")->capture_default_str();
  sub->add_option("--iters", f.iters, "alternating optimization rounds")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--C-reg", f.c_reg, "SVM regularization C")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--pca-cap", f.pca_cap, "max descriptors used to fit PCA (0 = all)")->capture_default_str();
  sub->add_option("--kmeans-cap", f.kmeans_cap, "max descriptors used to fit k-means (0 = all)")->capture_default_str();
  sub->add_option("--kmeans-iters", f.kmeans_iters, "max Lloyd iterations")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--fit-scope", f.fit_scope, "fit PCA/codebook on 'train' folds or 'all' samples")->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"gridvlad: discriminative spatiotemporal aggregation of grid descriptors"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--seed", f.seed, "master seed")->capture_default_str();
  app.add_option("--threads", f.threads, "worker threads (GRIDVLAD_THREADS overrides)");

  auto* synth = app.add_subcommand("synth-gen", "generate a synthetic biased dataset");
  synth->add_option("--out", f.out, "output directory")->required();
  synth->add_option("--classes", f.classes)->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--per-class", f.per_class)->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--groups", f.groups)->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--T", f.frames, "frames per video")->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--a", f.grid_size, "grid size")->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--dim", f.raw_dim, "raw descriptor dimension")->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--L", f.levels, "pyramid depth used to place the signal")->capture_default_str();
  synth->add_option("--signal-cells", f.signal_cells, "'i,j;i,j' (1-based) or 'all'")->capture_default_str();
  synth->add_option("--signal-segments", f.signal_segments, "leaf segments '1,2' (1-based) or 'all'")->capture_default_str();
  synth->add_option("--mu", f.mu, "signal strength")->capture_default_str()->check(CLI::NonNegativeNumber);
  synth->add_option("--sigma", f.sigma, "noise sigma")->capture_default_str()->check(CLI::PositiveNumber);

  auto* fit_pca_cmd = app.add_subcommand("fit-pca", "fit PCA on every descriptor of a manifest");
  fit_pca_cmd->add_option("--manifest", f.manifest)->required();
  fit_pca_cmd->add_option("--out", f.out, "PCA1 output file")->required();
  fit_pca_cmd->add_option("--D", f.dim)->capture_default_str()->check(CLI::PositiveNumber);
  fit_pca_cmd->add_option("--cap", f.pca_cap, "max descriptors (0 = all)")->capture_default_str();

  auto* fit_cb = app.add_subcommand("fit-codebook", "fit the k-means codebook on PCA-reduced descriptors");
  fit_cb->add_option("--manifest", f.manifest)->required();
  fit_cb->add_option("--pca", f.pca_path)->required();
  fit_cb->add_option("--out", f.out, "CBK1 output file")->required();
  fit_cb->add_option("--K", f.clusters)->capture_default_str()->check(CLI::PositiveNumber);
  fit_cb->add_option("--cap", f.kmeans_cap, "max descriptors (0 = all)")->capture_default_str();
  fit_cb->add_option("--max-iters", f.kmeans_iters)->capture_default_str()->check(CLI::PositiveNumber);

  auto* tw = app.add_subcommand("train-weights", "learn W_sp (and W_tmp) on a training manifest");
  tw->add_option("--manifest", f.manifest)->required();
  tw->add_option("--pca", f.pca_path)->required();
  tw->add_option("--codebook", f.codebook_path)->required();
  tw->add_option("--out", f.out, "bundle directory")->required();
  tw->add_option("--method", f.method)->capture_default_str();
  tw->add_option("--N-sp", f.n_sp)->capture_default_str()->check(CLI::PositiveNumber);
  tw->add_option("--N-tmp", f.n_tmp)->capture_default_str()->check(CLI::PositiveNumber);
  tw->add_option("--L", f.levels)->capture_default_str();
  tw->add_option("--iters", f.iters)->capture_default_str()->check(CLI::PositiveNumber);

  auto* enc = app.add_subcommand("encode", "write one VRP1 representation per sample");
  enc->add_option("--manifest", f.manifest)->required();
  enc->add_option("--pca", f.pca_path)->required();
  enc->add_option("--codebook", f.codebook_path)->required();
  enc->add_option("--weights", f.weights_dir, "bundle from train-weights (dsar/dstar)");
  enc->add_option("--out", f.out, "output directory")->required();
  enc->add_option("--method", f.method)->capture_default_str();
  enc->add_option("--L", f.levels, "pyramid levels for star")->capture_default_str();

  auto* tc = app.add_subcommand("train-classifier", "train the one-vs-all linear SVM on encoded videos");
  tc->add_option("--manifest", f.manifest)->required();
  tc->add_option("--reps", f.reps_dir, "directory written by encode")->required();
  tc->add_option("--out", f.out, "SVM1 output file")->required();
  tc->add_option("--C-reg", f.c_reg)->capture_default_str()->check(CLI::PositiveNumber);

  auto* ev = app.add_subcommand("evaluate", "leave-one-group-out cross-validation");
  ev->add_option("--manifest", f.manifest)->required();
  add_pipeline_flags(ev, f);
  ev->add_option("--report", f.report_path, "report file (default: stdout)");
  ev->add_option("--confusion", f.confusion_path, "confusion matrix CSV");
  ev->add_option("--fuse-with", f.fuse_with, "extra methods whose scores are averaged in");

  auto* sw = app.add_subcommand("sweep", "cross-validate every cell of a parameter grid");
  sw->add_option("--manifest", f.manifest)->required();
  add_pipeline_flags(sw, f);
  sw->add_option("--K-list", f.k_list)->delimiter(',');
  sw->add_option("--D-list", f.d_list)->delimiter(',');
  sw->add_option("--N-sp-list", f.n_sp_list)->delimiter(',');
  sw->add_option("--N-tmp-list", f.n_tmp_list)->delimiter(',');
  sw->add_option("--out", f.out, "table file (default: stdout)");

  auto* hm = app.add_subcommand("export-heatmap", "write weight magnitudes as CSV");
  hm->add_option("--weights", f.weights_dir, "bundle from train-weights")->required();
  hm->add_option("--out", f.out, "output prefix")->required();
  hm->add_option("--component", f.component, "weight column (1-based); 0 = row norm")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  if (f.threads > 0 && !std::getenv("GRIDVLAD_THREADS")) set_thread_count(f.threads);

  try {
    if (synth->parsed()) return cmd_synth(f, out);
    if (fit_pca_cmd->parsed()) return cmd_fit_pca(f, out);
    if (fit_cb->parsed()) return cmd_fit_codebook(f, out);
    if (tw->parsed()) return cmd_train_weights(f, out);
    if (enc->parsed()) return cmd_encode(f, out);
    if (tc->parsed()) return cmd_train_classifier(f, out);
    if (ev->parsed()) return cmd_evaluate(f, *ev, out, err);
    if (sw->parsed()) return cmd_sweep(f, out, err);
    if (hm->parsed()) return cmd_export_heatmap(f, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace gridvlad::cli
