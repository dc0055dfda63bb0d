#include "gridvlad/pls_weights.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gridvlad/binary_io.hpp"

namespace gridvlad {

namespace {

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      if (r != c) s += a(r, c) * a(r, c);
    }
  }
  return std::sqrt(s);
}

}  // namespace

ScatterAccumulator::ScatterAccumulator(Eigen::Index feature_length, Eigen::Index weight_dim,
                                       int classes)
    : rows_(feature_length), cols_(weight_dim) {
  if (classes < 1) throw Error("class count must be positive");
  sums_.assign(static_cast<std::size_t>(classes), Matrix::Zero(rows_, cols_));
  counts_.assign(static_cast<std::size_t>(classes), 0);
}

void ScatterAccumulator::add(const Matrix& view, int label) {
  if (view.rows() != rows_ || view.cols() != cols_) {
    throw Error("shape mismatch: view is " + std::to_string(view.rows()) + "x" +
                std::to_string(view.cols()) + ", expected " + std::to_string(rows_) + "x" +
                std::to_string(cols_));
  }
  if (label < 1 || label > static_cast<int>(sums_.size())) {
    throw Error("label " + std::to_string(label) + " out of range 1.." + std::to_string(sums_.size()));
  }
  sums_[static_cast<std::size_t>(label - 1)] += view;
  ++counts_[static_cast<std::size_t>(label - 1)];
  ++total_;
}

Matrix ScatterAccumulator::scatter() const {
  const auto present = std::count_if(counts_.begin(), counts_.end(), [](std::size_t n) { return n > 0; });
  if (present < 2) throw Error("need >=2 classes for between-class scatter (got " + std::to_string(present) + ")");

  Matrix overall = Matrix::Zero(rows_, cols_);
  for (const auto& s : sums_) overall += s;
  overall /= static_cast<double>(total_);

  Matrix sigma = Matrix::Zero(cols_, cols_);
  for (std::size_t c = 0; c < sums_.size(); ++c) {
    if (counts_[c] == 0) continue;
    const Matrix diff = sums_[c] / static_cast<double>(counts_[c]) - overall;
    sigma.noalias() += static_cast<double>(counts_[c]) * (diff.transpose() * diff);
  }
  sigma /= static_cast<double>(total_);
  // Exact symmetry; the products above agree only up to rounding.
  return 0.5 * (sigma + sigma.transpose());
}

Matrix between_class_scatter(const StackedViews& views) {
  if (views.views.empty()) throw Error("no views given");
  if (views.views.size() != views.labels.size()) throw Error("views and labels differ in length");
  ScatterAccumulator acc(views.views.front().rows(), views.views.front().cols(), views.classes);
  for (std::size_t n = 0; n < views.views.size(); ++n) acc.add(views.views[n], views.labels[n]);
  return acc.scatter();
}

SymmetricEigen jacobi_eigen(const Matrix& sym) {
  if (sym.rows() != sym.cols()) throw Error("eigensolver needs a square matrix");
  const Eigen::Index m = sym.rows();
  Matrix a = sym;
  Matrix v = Matrix::Identity(m, m);
  const double scale = sym.norm();
  const double target = 1e-12 * (scale > 0.0 ? scale : 1.0);

  for (int sweep = 0; sweep < 100 && off_diagonal_norm(a) >= target; ++sweep) {
    for (Eigen::Index p = 0; p < m - 1; ++p) {
      for (Eigen::Index q = p + 1; q < m; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < m; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < m; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < m; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return a(x, x) > a(y, y); });

  SymmetricEigen out;
  out.values.resize(m);
  out.vectors.resize(m, m);
  for (Eigen::Index c = 0; c < m; ++c) {
    const Eigen::Index src = order[static_cast<std::size_t>(c)];
    out.values[c] = a(src, src);
    Vector col = v.col(src);
    Eigen::Index arg = 0;
    for (Eigen::Index r = 1; r < m; ++r) {
      if (std::abs(col[r]) > std::abs(col[arg])) arg = r;
    }
    if (col[arg] < 0.0) col = -col;
    out.vectors.col(c) = col;
  }
  return out;
}

WeightMatrix WeightMatrix::identity(std::size_t m) {
  WeightMatrix w;
  w.columns = Matrix::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  w.eigenvalues = Vector::Ones(static_cast<Eigen::Index>(m));
  return w;
}

WeightMatrix top_eigenvectors(const Matrix& sigma, std::size_t n_components) {
  if (sigma.rows() != sigma.cols()) throw Error("scatter matrix must be square");
  const auto m = static_cast<std::size_t>(sigma.rows());
  if (n_components == 0) throw Error("n_components must be positive");
  if (n_components > m) {
    throw Error("n_components " + std::to_string(n_components) + " exceeds weight dimension " +
                std::to_string(m));
  }
  const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8 * std::max(1.0, sigma.cwiseAbs().maxCoeff())) {
    throw Error("scatter matrix is not symmetric (max |A - A^T| = " + std::to_string(asym) + ")");
  }
  const auto eig = jacobi_eigen(0.5 * (sigma + sigma.transpose()));
  WeightMatrix w;
  w.columns = eig.vectors.leftCols(static_cast<Eigen::Index>(n_components));
  w.eigenvalues = eig.values.head(static_cast<Eigen::Index>(n_components));
  return w;
}

WeightMatrix learn_weights(const StackedViews& views, std::size_t n_components) {
  return top_eigenvectors(between_class_scatter(views), n_components);
}

void save_weights(const WeightMatrix& w, const std::filesystem::path& path) {
  io::BlobWriter out(path, "WGT1", 1);
  out.u32(static_cast<std::uint32_t>(w.weight_dim()));
  out.u32(static_cast<std::uint32_t>(w.components()));
  out.f32s(std::span<const double>(w.eigenvalues.data(), static_cast<std::size_t>(w.eigenvalues.size())));
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = w.columns;
  out.f32s(std::span<const double>(rows.data(), static_cast<std::size_t>(rows.size())));
  out.finish();
}

WeightMatrix load_weights(const std::filesystem::path& path) {
  io::BlobReader in(path, "WGT1");
  const std::size_t m = in.u32();
  const std::size_t n = in.u32();
  if (m == 0 || n == 0 || n > m) throw Error("'" + path.string() + "': malformed header (bad weight dims)");
  const auto values = in.f32s(n);
  const auto cols = in.f32s(m * n);
  in.expect_end();
  WeightMatrix w;
  w.eigenvalues = Eigen::Map<const Eigen::VectorXf>(values.data(), static_cast<Eigen::Index>(n)).cast<double>();
  w.columns = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                  cols.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n))
                  .cast<double>();
  return w;
}

}  // namespace gridvlad
