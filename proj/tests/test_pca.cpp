#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gridvlad/pca.hpp"
#include "support.hpp"

using namespace gridvlad;

namespace {

/// Leading eigenpairs by power iteration with deflation.
std::vector<std::pair<double, Vector>> power_eigen(Matrix a, int count) {
  std::vector<std::pair<double, Vector>> out;
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int c = 0; c < count; ++c) {
    Vector v(a.rows());
    for (auto& x : v) x = n(rng);
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < 200000; ++it) {
      Vector next = a * v;
      const double norm = next.norm();
      if (norm == 0.0) break;
      next /= norm;
      const double change = std::min((next - v).norm(), (next + v).norm());
      v = next;
      lambda = v.dot(a * v);
      if (change < 1e-15) break;
    }
    out.emplace_back(lambda, v);
    a -= lambda * v * v.transpose();
  }
  return out;
}

Matrix sample_matrix(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
  Matrix m = testing::random_matrix(rng, n, d);
  // Round to float so that projections of grid data use identical inputs.
  return m.cast<float>().cast<double>();
}

}  // namespace

TEST_CASE("points along one axis give basis (1,0) and mean (1.5,0)") {
  Matrix x(4, 2);
  x << 0, 0, 1, 0, 2, 0, 3, 0;
  const auto m = fit_pca(x, 1);
  CHECK(m.mean[0] == doctest::Approx(1.5));
  CHECK(m.mean[1] == doctest::Approx(0.0));
  CHECK(std::abs(m.basis(0, 0)) == doctest::Approx(1.0));
  CHECK(m.basis(1, 0) == doctest::Approx(0.0));
  // Sign convention: largest-magnitude entry positive.
  CHECK(m.basis(0, 0) > 0);
  // 1/(n-1) covariance: var of {0,1,2,3} is 5/3.
  CHECK(m.explained_variance[0] == doctest::Approx(5.0 / 3.0));
}

TEST_CASE("3 random points in 4-D match a power-iteration eigen oracle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = sample_matrix(rng, 3, 4);
    const auto model = fit_pca(x, 2);
    const Vector mean = x.colwise().mean().transpose();
    Matrix cov = Matrix::Zero(4, 4);
    for (Eigen::Index r = 0; r < 3; ++r) cov += (x.row(r).transpose() - mean) * (x.row(r).transpose() - mean).transpose();
    cov /= 2.0;
    const auto oracle = power_eigen(cov, 2);
    for (int c = 0; c < 2; ++c) {
      const Vector got = model.basis.col(c);
      const double diff = std::min((got - oracle[c].second).cwiseAbs().maxCoeff(),
                                   (got + oracle[c].second).cwiseAbs().maxCoeff());
      CHECK(diff < 1e-6);
      CHECK(model.explained_variance[c] == doctest::Approx(oracle[c].first).epsilon(1e-9));
    }
  }
}

TEST_CASE("basis is orthonormal, variance descending, signs deterministic") {
  std::mt19937_64 rng(8);
  const Matrix x = sample_matrix(rng, 200, 12);
  const auto m = fit_pca(x, 7);
  CHECK((m.basis.transpose() * m.basis - Matrix::Identity(7, 7)).cwiseAbs().maxCoeff() < 1e-6);
  for (Eigen::Index c = 0; c + 1 < 7; ++c) CHECK(m.explained_variance[c] >= m.explained_variance[c + 1]);
  for (Eigen::Index c = 0; c < 7; ++c) {
    Eigen::Index arg;
    m.basis.col(c).cwiseAbs().maxCoeff(&arg);
    CHECK(m.basis(arg, c) > 0);
  }
  const auto again = fit_pca(x, 7);
  CHECK(again.basis == m.basis);
}

TEST_CASE("512 -> 256 is accepted") {
  std::mt19937_64 rng(9);
  const Matrix x = sample_matrix(rng, 300, 512);
  const auto m = fit_pca(x, 256);
  CHECK(m.input_dim() == 512);
  CHECK(m.output_dim() == 256);
  CHECK((m.basis.transpose() * m.basis - Matrix::Identity(256, 256)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("fit_pca errors") {
  Matrix one(1, 3);
  one << 1, 2, 3;
  CHECK_THROWS_WITH_AS(fit_pca(one, 1), doctest::Contains("insufficient samples"), Error);
  Matrix same(5, 3);
  same.rowwise() = one.row(0);
  CHECK_THROWS_WITH_AS(fit_pca(same, 1), doctest::Contains("zero variance"), Error);
  std::mt19937_64 rng(1);
  const Matrix x = sample_matrix(rng, 3, 4);
  CHECK_THROWS_AS(fit_pca(x, 5), Error);  // > input_dim
  CHECK_THROWS_AS(fit_pca(x, 4), Error);  // > sample count
  CHECK_THROWS_AS(fit_pca(x, 0), Error);
}

TEST_CASE("full-rank projection preserves norms and inner products of centered data") {
  std::mt19937_64 rng(10);
  const Matrix x = sample_matrix(rng, 50, 6);
  const auto m = fit_pca(x, 6);
  const auto g = testing::random_grid(rng, 3, 2, 6);
  const auto y = apply_pca(m, g);
  CHECK(y.dim() == 6);
  CHECK(y.frames() == 3);
  CHECK(y.grid_size() == 2);
  for (std::size_t p = 0; p < g.descriptor_count(); ++p) {
    Vector cp(6), yp(6);
    for (int k = 0; k < 6; ++k) {
      cp[k] = g.descriptor(p)[k] - m.mean[k];
      yp[k] = y.descriptor(p)[k];
    }
    CHECK(yp.norm() == doctest::Approx(cp.norm()).epsilon(1e-6));
    for (std::size_t q = 0; q < g.descriptor_count(); ++q) {
      Vector cq(6), yq(6);
      for (int k = 0; k < 6; ++k) {
        cq[k] = g.descriptor(q)[k] - m.mean[k];
        yq[k] = y.descriptor(q)[k];
      }
      CHECK(std::abs(yp.dot(yq) - cp.dot(cq)) < 1e-5 * std::max(1.0, std::abs(cp.dot(cq))));
    }
  }
}

TEST_CASE("grid of the fitted mean maps to zero") {
  std::mt19937_64 rng(12);
  const Matrix x = sample_matrix(rng, 20, 4);
  const auto m = fit_pca(x, 2);
  std::vector<float> data;
  for (int n = 0; n < 2 * 4; ++n)
    for (int k = 0; k < 4; ++k) data.push_back(static_cast<float>(m.mean[k]));
  const auto y = apply_pca(m, DescriptorGrid(2, 2, 4, data));
  for (float v : y.data()) CHECK(std::abs(v) < 1e-6);
}

TEST_CASE("apply_pca matches a per-descriptor projection oracle") {
  std::mt19937_64 rng(13);
  const Matrix x = sample_matrix(rng, 40, 5);
  const auto m = fit_pca(x, 3);
  const auto g = testing::random_grid(rng, 4, 3, 5);
  const auto y = apply_pca(m, g);
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        for (int c = 0; c < 3; ++c) {
          double s = 0.0;
          for (int k = 0; k < 5; ++k) s += m.basis(k, c) * (g.descriptor(t, i, j)[k] - m.mean[k]);
          CHECK(std::abs(y.descriptor(t, i, j)[c] - s) < 1e-6);
        }
  CHECK_THROWS_WITH_AS(apply_pca(m, testing::random_grid(rng, 1, 1, 4)), doctest::Contains("dimension mismatch"),
                       Error);
}

TEST_CASE("PCA1 round trip") {
  testing::TempDir dir;
  std::mt19937_64 rng(14);
  const Matrix x = sample_matrix(rng, 30, 6);
  const auto m = fit_pca(x, 4);
  save_pca(m, dir / "m.pca");
  const auto back = load_pca(dir / "m.pca");
  CHECK(back.input_dim() == 6);
  CHECK(back.output_dim() == 4);
  CHECK((back.mean - m.mean).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((back.basis - m.basis).cwiseAbs().maxCoeff() < 1e-6);
  std::filesystem::resize_file(dir / "m.pca", std::filesystem::file_size(dir / "m.pca") - 2);
  CHECK_THROWS_WITH_AS(load_pca(dir / "m.pca"), doctest::Contains("payload mismatch"), Error);
}
