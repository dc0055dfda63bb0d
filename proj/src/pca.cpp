#include "gridvlad/pca.hpp"

#include <Eigen/Eigenvalues>

#include "gridvlad/binary_io.hpp"

namespace gridvlad {

namespace {

void fix_column_signs(Matrix& basis) {
  for (Eigen::Index c = 0; c < basis.cols(); ++c) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index r = 0; r < basis.rows(); ++r) {
      if (std::abs(basis(r, c)) > best) {
        best = std::abs(basis(r, c));
        arg = r;
      }
    }
    if (basis(arg, c) < 0) basis.col(c) = -basis.col(c);
  }
}

}  // namespace

Vector PcaModel::project(std::span<const float> x) const {
  if (x.size() != input_dim()) {
    throw Error("PCA dimension mismatch: model expects " + std::to_string(input_dim()) +
                ", descriptor has " + std::to_string(x.size()));
  }
  Vector centered(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) centered[k] = static_cast<double>(x[k]) - mean[k];
  return basis.transpose() * centered;
}

PcaModel fit_pca(const Matrix& samples, std::size_t output_dim) {
  const auto n = samples.rows();
  const auto input_dim = static_cast<std::size_t>(samples.cols());
  if (n < 2) throw Error("insufficient samples for PCA (need >= 2, got " + std::to_string(n) + ")");
  if (output_dim == 0) throw Error("PCA output_dim must be positive");
  if (output_dim > input_dim) {
    throw Error("PCA output_dim " + std::to_string(output_dim) + " exceeds input_dim " +
                std::to_string(input_dim));
  }
  if (output_dim > static_cast<std::size_t>(n)) {
    throw Error("PCA output_dim " + std::to_string(output_dim) + " exceeds sample count " +
                std::to_string(n));
  }

  PcaModel model;
  model.mean = samples.colwise().mean().transpose();
  const Matrix centered = samples.rowwise() - model.mean.transpose();
  if (centered.cwiseAbs().maxCoeff() == 0.0) throw Error("zero variance: all PCA inputs identical");
  const Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  if (solver.info() != Eigen::Success) throw Error("PCA eigendecomposition failed");
  const auto dim = static_cast<Eigen::Index>(input_dim);
  const auto out = static_cast<Eigen::Index>(output_dim);
  // Eigen returns ascending eigenvalues.
  model.basis.resize(dim, out);
  model.explained_variance.resize(out);
  for (Eigen::Index c = 0; c < out; ++c) {
    model.basis.col(c) = solver.eigenvectors().col(dim - 1 - c);
    model.explained_variance[c] = std::max(0.0, solver.eigenvalues()[dim - 1 - c]);
  }
  fix_column_signs(model.basis);
  return model;
}

DescriptorGrid apply_pca(const PcaModel& model, const DescriptorGrid& grid) {
  if (grid.dim() != model.input_dim()) {
    throw Error("PCA dimension mismatch: model expects " + std::to_string(model.input_dim()) +
                ", grid has D=" + std::to_string(grid.dim()));
  }
  const std::size_t out_dim = model.output_dim();
  std::vector<float> data(grid.descriptor_count() * out_dim);
  for (std::size_t n = 0; n < grid.descriptor_count(); ++n) {
    const Vector y = model.project(grid.descriptor(n));
    for (std::size_t k = 0; k < out_dim; ++k) data[n * out_dim + k] = static_cast<float>(y[k]);
  }
  return DescriptorGrid(grid.frames(), grid.grid_size(), out_dim, std::move(data));
}

void save_pca(const PcaModel& model, const std::filesystem::path& path) {
  io::BlobWriter out(path, "PCA1", 1);
  out.u32(static_cast<std::uint32_t>(model.input_dim()));
  out.u32(static_cast<std::uint32_t>(model.output_dim()));
  out.f32s(std::span<const double>(model.mean.data(), model.mean.size()));
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = model.basis;
  out.f32s(std::span<const double>(rows.data(), rows.size()));
  out.finish();
}

PcaModel load_pca(const std::filesystem::path& path) {
  io::BlobReader in(path, "PCA1");
  const std::size_t input_dim = in.u32();
  const std::size_t output_dim = in.u32();
  if (input_dim == 0 || output_dim == 0 || output_dim > input_dim) {
    throw Error("'" + path.string() + "': malformed header (bad PCA dims)");
  }
  const auto mean = in.f32s(input_dim);
  const auto basis = in.f32s(input_dim * output_dim);
  in.expect_end();
  PcaModel model;
  model.mean = Eigen::Map<const Eigen::VectorXf>(mean.data(), mean.size()).cast<double>();
  model.basis = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                    basis.data(), static_cast<Eigen::Index>(input_dim),
                    static_cast<Eigen::Index>(output_dim))
                    .cast<double>();
  return model;
}

}  // namespace gridvlad
