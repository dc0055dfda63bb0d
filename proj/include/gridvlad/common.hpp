#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gridvlad {

/// Every recoverable failure in the library surfaces as this exception type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Number of worker threads used by parallel_for. Initialized from
/// GRIDVLAD_THREADS when set, otherwise hardware concurrency.
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Runs body(i) for i in [0, n). Each index is handled exactly once, so
/// callers that write into per-index slots get results independent of the
/// thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Stage seed derived from a master seed by a fixed offset.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stage,
                                    std::uint64_t fold = 0) {
  return master + 1'000'003ULL * stage + 7919ULL * fold;
}

}  // namespace gridvlad
