// Helpers and independent reference implementations shared by the tests.
// The oracles here deliberately avoid calling the library routines they
// check: they use plain loops and std::vector instead.
#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "gridvlad/codebook.hpp"
#include "gridvlad/common.hpp"
#include "gridvlad/core_types.hpp"

namespace testing {

namespace fs = std::filesystem;

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("gridvlad_" + tag + "_" + std::to_string(process_tag()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  // Random per-process tag so concurrent test binaries never collide.
  static unsigned process_tag() {
    static const unsigned tag = std::random_device{}();
    return tag;
  }
  fs::path path_;
};

inline gridvlad::DescriptorGrid random_grid(std::mt19937_64& rng, std::size_t T, std::size_t a, std::size_t D,
                                            double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<float> data(T * a * a * D);
  for (auto& v : data) v = static_cast<float>(n(rng));
  return {T, a, D, std::move(data)};
}

/// Codebook with well-separated random centers (pairwise distinct).
inline gridvlad::Codebook random_codebook(std::mt19937_64& rng, std::size_t K, std::size_t D, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  gridvlad::Matrix c(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(D));
  for (Eigen::Index r = 0; r < c.rows(); ++r)
    for (Eigen::Index k = 0; k < c.cols(); ++k) c(r, k) = static_cast<float>(n(rng));
  return gridvlad::Codebook(c);
}

/// Exhaustive nearest center over a plain center list; ties to the lowest index.
inline std::size_t nearest_center(const std::vector<std::vector<double>>& centers, const std::vector<double>& x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centers.size(); ++k) {
    double d = 0.0;
    for (std::size_t q = 0; q < x.size(); ++q) d += (x[q] - centers[k][q]) * (x[q] - centers[k][q]);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

inline std::vector<std::vector<double>> centers_of(const gridvlad::Codebook& cb) {
  std::vector<std::vector<double>> out(cb.size(), std::vector<double>(cb.dim()));
  for (std::size_t k = 0; k < cb.size(); ++k)
    for (std::size_t q = 0; q < cb.dim(); ++q) out[k][q] = cb.centers()(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(q));
  return out;
}

/// Residual sums over the descriptors of the listed cells within frames
/// [t0, t1). Returns K*D values, block k first.
inline std::vector<double> brute_vlad(const gridvlad::DescriptorGrid& g, const std::vector<std::vector<double>>& centers,
                                      const std::vector<std::pair<std::size_t, std::size_t>>& cells, std::size_t t0,
                                      std::size_t t1) {
  const std::size_t D = g.dim();
  std::vector<double> u(centers.size() * D, 0.0);
  for (std::size_t t = t0; t < t1; ++t) {
    for (const auto& [i, j] : cells) {
      const auto f = g.descriptor(t, i, j);
      std::vector<double> x(f.begin(), f.end());
      const std::size_t k = nearest_center(centers, x);
      for (std::size_t q = 0; q < D; ++q) u[k * D + q] += x[q] - centers[k][q];
    }
  }
  return u;
}

inline std::vector<std::pair<std::size_t, std::size_t>> all_cells(std::size_t a) {
  std::vector<std::pair<std::size_t, std::size_t>> c;
  for (std::size_t i = 0; i < a; ++i)
    for (std::size_t j = 0; j < a; ++j) c.emplace_back(i, j);
  return c;
}

/// Intra-normalize, signed sqrt, global L2, written out longhand.
inline std::vector<double> oracle_normalize(std::vector<double> v, std::size_t K) {
  const std::size_t block = v.size() / K;
  for (std::size_t k = 0; k < K; ++k) {
    double s = 0.0;
    for (std::size_t q = 0; q < block; ++q) s += v[k * block + q] * v[k * block + q];
    if (s > 0.0)
      for (std::size_t q = 0; q < block; ++q) v[k * block + q] /= std::sqrt(s);
  }
  double s = 0.0;
  for (auto& x : v) {
    x = x < 0 ? -std::sqrt(-x) : std::sqrt(x);
    s += x * x;
  }
  if (s > 0.0)
    for (auto& x : v) x /= std::sqrt(s);
  return v;
}

inline std::vector<double> oracle_power_l2(std::vector<double> v) {
  double s = 0.0;
  for (auto& x : v) {
    x = x < 0 ? -std::sqrt(-x) : std::sqrt(x);
    s += x * x;
  }
  if (s > 0.0)
    for (auto& x : v) x /= std::sqrt(s);
  return v;
}

inline double max_abs_diff(const gridvlad::Vector& a, const std::vector<double>& b) {
  if (static_cast<std::size_t>(a.size()) != b.size()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t n = 0; n < b.size(); ++n) m = std::max(m, std::abs(a[static_cast<Eigen::Index>(n)] - b[n]));
  return m;
}

/// Random symmetric PSD matrix B^T B with B of size r x m.
inline gridvlad::Matrix random_psd(std::mt19937_64& rng, Eigen::Index m, Eigen::Index r) {
  std::normal_distribution<double> n(0.0, 1.0);
  gridvlad::Matrix b(r, m);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < m; ++j) b(i, j) = n(rng);
  gridvlad::Matrix s = b.transpose() * b;
  return (s + s.transpose()) / 2.0;
}

inline gridvlad::Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> n(0.0, 1.0);
  gridvlad::Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

/// Direct trace of the between-class covariance of x_i = V_i w:
/// (1/N) sum_c n_c ||mean_c(x) - mean(x)||^2.
inline double direct_sb_trace(const std::vector<gridvlad::Matrix>& views, const std::vector<int>& labels, int classes,
                              const gridvlad::Vector& w) {
  const std::size_t N = views.size();
  std::vector<gridvlad::Vector> x;
  for (const auto& v : views) x.push_back(v * w);
  gridvlad::Vector mean = gridvlad::Vector::Zero(x[0].size());
  for (const auto& xi : x) mean += xi;
  mean /= static_cast<double>(N);
  double tr = 0.0;
  for (int c = 1; c <= classes; ++c) {
    gridvlad::Vector mc = gridvlad::Vector::Zero(x[0].size());
    std::size_t nc = 0;
    for (std::size_t i = 0; i < N; ++i)
      if (labels[i] == c) {
        mc += x[i];
        ++nc;
      }
    if (nc == 0) continue;
    mc /= static_cast<double>(nc);
    tr += static_cast<double>(nc) * (mc - mean).squaredNorm();
  }
  return tr / static_cast<double>(N);
}

}  // namespace testing
