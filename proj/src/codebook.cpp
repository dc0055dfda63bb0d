#include "gridvlad/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "gridvlad/binary_io.hpp"

namespace gridvlad {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Row>
std::size_t nearest(const Matrix& centers, const Row& x, double* dist_out = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < centers.rows(); ++k) {
    double d = 0.0;
    for (Eigen::Index c = 0; c < centers.cols(); ++c) {
      const double diff = static_cast<double>(x[c]) - centers(k, c);
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(k);
    }
  }
  if (dist_out) *dist_out = best_d;
  return best;
}

std::size_t count_distinct_rows(const Matrix& samples, std::size_t stop_at) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(samples.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < samples.cols(); ++c) {
      if (samples(a, c) != samples(b, c)) return samples(a, c) < samples(b, c);
    }
    return false;
  };
  std::sort(order.begin(), order.end(), less);
  std::size_t distinct = order.empty() ? 0 : 1;
  for (std::size_t r = 1; r < order.size() && distinct < stop_at; ++r) {
    if (less(order[r - 1], order[r])) ++distinct;
  }
  return distinct;
}

Matrix seed_plus_plus(const Matrix& samples, std::size_t k, std::mt19937_64& rng) {
  const auto n = samples.rows();
  Matrix centers(static_cast<Eigen::Index>(k), samples.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centers.row(0) = samples.row(first(rng));

  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index r = 0; r < n; ++r) d2[r] = (samples.row(r) - centers.row(0)).squaredNorm();

  for (std::size_t c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    Eigen::Index pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      pick = -1;
      for (Eigen::Index r = 0; r < n; ++r) {
        if (d2[r] <= 0.0) continue;
        pick = r;
        target -= d2[r];
        if (target < 0.0) break;
      }
    }
    centers.row(static_cast<Eigen::Index>(c)) = samples.row(pick);
    for (Eigen::Index r = 0; r < n; ++r) {
      d2[r] = std::min(d2[r], (samples.row(r) - centers.row(static_cast<Eigen::Index>(c))).squaredNorm());
    }
  }
  return centers;
}

}  // namespace

Codebook::Codebook(Matrix centers) : centers_(std::move(centers)) {
  if (centers_.rows() == 0 || centers_.cols() == 0) throw Error("codebook must be non-empty");
  if (!centers_.allFinite()) throw Error("codebook contains non-finite entries");
  for (Eigen::Index a = 0; a < centers_.rows(); ++a) {
    for (Eigen::Index b = a + 1; b < centers_.rows(); ++b) {
      if ((centers_.row(a) - centers_.row(b)).squaredNorm() == 0.0) {
        throw Error("codebook centers " + std::to_string(a + 1) + " and " + std::to_string(b + 1) +
                    " coincide");
      }
    }
  }
}

std::size_t Codebook::assign(std::span<const float> x) const {
  if (x.size() != dim()) {
    throw Error("codebook dimension mismatch: codebook D=" + std::to_string(dim()) +
                ", descriptor has " + std::to_string(x.size()));
  }
  return nearest(centers_, x);
}

std::size_t Codebook::assign(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != dim()) {
    throw Error("codebook dimension mismatch: codebook D=" + std::to_string(dim()) +
                ", descriptor has " + std::to_string(x.size()));
  }
  return nearest(centers_, x);
}

KmeansResult fit_kmeans(const Matrix& samples, const KmeansOptions& options) {
  const std::size_t k = options.clusters;
  const auto n = static_cast<std::size_t>(samples.rows());
  if (k == 0) throw Error("K must be positive");
  if (options.max_iters == 0) throw Error("max_iters must be positive");
  if (n < k) {
    throw Error("insufficient descriptors for K-means: " + std::to_string(n) + " < K=" +
                std::to_string(k));
  }
  if (count_distinct_rows(samples, k) < k) {
    throw Error("insufficient distinct points for K=" + std::to_string(k));
  }

  std::mt19937_64 rng(options.seed);
  Matrix centers = seed_plus_plus(samples, k, rng);

  KmeansResult result;
  std::vector<std::size_t> labels(n, k);
  std::vector<double> dist(n, 0.0);
  for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
    std::vector<char> changed(n, 0);
    parallel_for(n, [&](std::size_t r) {
      const auto lab = nearest(centers, samples.row(static_cast<Eigen::Index>(r)), &dist[r]);
      changed[r] = lab != labels[r];
      labels[r] = lab;
    });
    result.objective.push_back(std::accumulate(dist.begin(), dist.end(), 0.0));
    result.iterations = iter + 1;
    if (std::none_of(changed.begin(), changed.end(), [](char c) { return c != 0; })) {
      result.converged = true;
      break;
    }
    if (iter + 1 == options.max_iters) break;

    Matrix sums = Matrix::Zero(centers.rows(), centers.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t r = 0; r < n; ++r) {
      sums.row(static_cast<Eigen::Index>(labels[r])) += samples.row(static_cast<Eigen::Index>(r));
      ++counts[labels[r]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) centers.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      // Farthest point from its own (updated) center.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t r = 0; r < n; ++r) {
        const double d = (samples.row(static_cast<Eigen::Index>(r)) -
                          centers.row(static_cast<Eigen::Index>(labels[r])))
                             .squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = r;
        }
      }
      centers.row(static_cast<Eigen::Index>(c)) = samples.row(static_cast<Eigen::Index>(far));
      labels[far] = c;
      counts[c] = 1;
    }
  }
  result.codebook = Codebook(std::move(centers));
  return result;
}

void save_codebook(const Codebook& codebook, const std::filesystem::path& path) {
  io::BlobWriter out(path, "CBK1", 1);
  out.u32(static_cast<std::uint32_t>(codebook.size()));
  out.u32(static_cast<std::uint32_t>(codebook.dim()));
  const RowMajor rows = codebook.centers();
  out.f32s(std::span<const double>(rows.data(), rows.size()));
  out.finish();
}

Codebook load_codebook(const std::filesystem::path& path) {
  io::BlobReader in(path, "CBK1");
  const std::size_t k = in.u32();
  const std::size_t d = in.u32();
  if (k == 0 || d == 0) throw Error("'" + path.string() + "': malformed header (K or D is zero)");
  const auto values = in.f32s(k * d);
  in.expect_end();
  return Codebook(Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                      values.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d))
                      .cast<double>());
}

}  // namespace gridvlad
