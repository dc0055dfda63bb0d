#include "gridvlad/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "gridvlad/binary_io.hpp"

namespace gridvlad {

Vector train_binary_svm(const Matrix& features, std::span<const int> targets, const SvmOptions& options,
                        BinarySvmStats* stats) {
  const auto n = features.rows();
  const auto dim = features.cols();
  if (n == 0) throw Error("no training samples");
  if (static_cast<std::size_t>(n) != targets.size()) throw Error("features and targets differ in length");
  if (!(options.c_reg > 0.0)) throw Error("C_reg must be positive");
  const double c = options.c_reg;

  // Augmented rows [x, 1].
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> x(n, dim + 1);
  x.leftCols(dim) = features;
  x.col(dim).setOnes();
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (targets[static_cast<std::size_t>(i)] != 1 && targets[static_cast<std::size_t>(i)] != -1) {
      throw Error("binary targets must be +1 or -1");
    }
    y[i] = targets[static_cast<std::size_t>(i)];
  }
  const Vector q_diag = x.rowwise().squaredNorm();

  Vector w = Vector::Zero(dim + 1);
  Vector alpha = Vector::Zero(n);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(options.seed);

  BinarySvmStats local;
  for (std::size_t epoch = 0; epoch < options.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double pg_max = -std::numeric_limits<double>::infinity();
    double pg_min = std::numeric_limits<double>::infinity();
    for (const auto i : order) {
      const double g = y[i] * x.row(i).dot(w) - 1.0;
      double pg = g;
      if (alpha[i] == 0.0) {
        pg = std::min(g, 0.0);
      } else if (alpha[i] == c) {
        pg = std::max(g, 0.0);
      }
      pg_max = std::max(pg_max, pg);
      pg_min = std::min(pg_min, pg);
      if (pg != 0.0 && q_diag[i] > 0.0) {
        const double old = alpha[i];
        alpha[i] = std::clamp(old - g / q_diag[i], 0.0, c);
        w += ((alpha[i] - old) * y[i]) * x.row(i).transpose();
      }
    }
    local.epochs = epoch + 1;

    const double wnorm2 = w.squaredNorm();
    const Vector margins = (x * w).cwiseProduct(y);
    const double hinge = (1.0 - margins.array()).max(0.0).sum();
    local.primal = 0.5 * wnorm2 + c * hinge;
    local.dual = alpha.sum() - 0.5 * wnorm2;
    if (local.primal - local.dual <= options.tolerance * std::abs(local.primal) || pg_max - pg_min == 0.0) {
      local.converged = true;
      break;
    }
  }
  if (stats) *stats = local;
  return w;
}

LinearOvaModel train_ova(const Matrix& features, std::span<const int> labels, int classes,
                         const SvmOptions& options, std::vector<BinarySvmStats>* stats) {
  if (classes < 1) throw Error("empty class set");
  if (features.rows() == 0) throw Error("no training samples");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw Error("inconsistent lengths: " + std::to_string(features.rows()) + " features, " +
                std::to_string(labels.size()) + " labels");
  }
  for (int label : labels) {
    if (label < 1 || label > classes) {
      throw Error("label " + std::to_string(label) + " out of range 1.." + std::to_string(classes));
    }
  }
  LinearOvaModel model;
  model.c_reg = options.c_reg;
  model.weights.resize(classes, features.cols());
  model.biases.resize(classes);
  std::vector<BinarySvmStats> local(static_cast<std::size_t>(classes));
  parallel_for(static_cast<std::size_t>(classes), [&](std::size_t k) {
    std::vector<int> targets(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) targets[i] = labels[i] == static_cast<int>(k) + 1 ? 1 : -1;
    SvmOptions opts = options;
    opts.seed = options.seed + k;
    const Vector w = train_binary_svm(features, targets, opts, &local[k]);
    model.weights.row(static_cast<Eigen::Index>(k)) = w.head(features.cols()).transpose();
    model.biases[static_cast<Eigen::Index>(k)] = w[features.cols()];
  });
  if (stats) *stats = std::move(local);
  return model;
}

Vector score(const LinearOvaModel& model, const Vector& feature) {
  if (static_cast<std::size_t>(feature.size()) != model.dim()) {
    throw Error("length mismatch: model dim " + std::to_string(model.dim()) + ", feature length " +
                std::to_string(feature.size()));
  }
  return model.weights * feature + model.biases;
}

int argmax_label(const Vector& scores) {
  if (scores.size() == 0) throw Error("empty score vector");
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return static_cast<int>(best) + 1;
}

int predict(const LinearOvaModel& model, const Vector& feature) { return argmax_label(score(model, feature)); }

Vector fuse_scores(std::span<const Vector> sources, std::optional<std::span<const double>> weights) {
  if (sources.empty()) throw Error("no score sources to fuse");
  const auto len = sources.front().size();
  for (const auto& s : sources) {
    if (s.size() != len) throw Error("length mismatch between score sources");
  }
  if (weights && weights->size() != sources.size()) throw Error("one fusion weight per source required");
  Vector out = Vector::Zero(len);
  double total = 0.0;
  for (std::size_t k = 0; k < sources.size(); ++k) {
    const double wk = weights ? (*weights)[k] : 1.0;
    out += wk * sources[k];
    total += wk;
  }
  if (total == 0.0) throw Error("fusion weights sum to zero");
  return out / total;
}

void save_model(const LinearOvaModel& model, const std::filesystem::path& path) {
  io::BlobWriter out(path, "SVM1", 1);
  out.u32(static_cast<std::uint32_t>(model.classes()));
  out.u32(static_cast<std::uint32_t>(model.dim()));
  out.f64(model.c_reg);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = model.weights;
  out.f32s(std::span<const double>(rows.data(), static_cast<std::size_t>(rows.size())));
  out.f32s(std::span<const double>(model.biases.data(), static_cast<std::size_t>(model.biases.size())));
  out.finish();
}

LinearOvaModel load_model(const std::filesystem::path& path) {
  io::BlobReader in(path, "SVM1");
  const std::size_t classes = in.u32();
  const std::size_t dim = in.u32();
  if (classes == 0 || dim == 0) throw Error("'" + path.string() + "': malformed header (bad SVM dims)");
  LinearOvaModel model;
  model.c_reg = in.f64();
  const auto w = in.f32s(classes * dim);
  const auto b = in.f32s(classes);
  in.expect_end();
  model.weights = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                      w.data(), static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(dim))
                      .cast<double>();
  model.biases = Eigen::Map<const Eigen::VectorXf>(b.data(), static_cast<Eigen::Index>(classes)).cast<double>();
  if (!model.weights.allFinite() || !model.biases.allFinite()) {
    throw Error("'" + path.string() + "': non-finite classifier weights");
  }
  return model;
}

}  // namespace gridvlad
