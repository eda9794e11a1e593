#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace pnp {

/// out = A in, for a square operator on R^dim.
using LinearMap = std::function<void(std::span<const double> in, std::span<double> out)>;

struct PowerIterationResult {
  /// Rayleigh quotient b^T A b / ||b||^2 at the last iterate.
  double value = 0.0;
  /// Last iterate b_K, unit norm.
  std::vector<double> vector;
  int restarts = 0;
};

/// K steps of b <- A b / ||A b|| from a seeded Gaussian start. A zero iterate
/// triggers a restart from a fresh seeded vector, at most 3 times.
PowerIterationResult powerIteration(const LinearMap& op, std::size_t dim, int iterations,
                                    std::uint64_t seed);

/// Same recursion from a caller-provided start vector.
PowerIterationResult powerIterationFrom(const LinearMap& op, std::vector<double> start,
                                        int iterations, std::uint64_t restartSeed = 0);

}  // namespace pnp
