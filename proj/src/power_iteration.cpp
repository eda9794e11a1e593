#include "pnp/power_iteration.hpp"

#include <cmath>
#include <random>
#include <string>

#include "pnp/errors.hpp"

namespace pnp {
namespace {

constexpr int kMaxRestarts = 3;

std::vector<double> gaussianVector(std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  for (double& x : v) x = normal(rng);
  return v;
}

double l2(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace

PowerIterationResult powerIteration(const LinearMap& op, std::size_t dim, int iterations,
                                    std::uint64_t seed) {
  return powerIterationFrom(op, gaussianVector(dim, seed), iterations, seed);
}

PowerIterationResult powerIterationFrom(const LinearMap& op, std::vector<double> start,
                                        int iterations, std::uint64_t restartSeed) {
  if (iterations < 1) throw InvalidArgument("power iteration needs at least one step");
  if (start.empty()) throw InvalidArgument("power iteration on an empty space");
  const std::size_t dim = start.size();

  PowerIterationResult result;
  std::vector<double> b = std::move(start);
  std::vector<double> ab(dim);

  int k = 0;
  while (k < iterations) {
    op(b, ab);
    const double n = l2(ab);
    if (!std::isfinite(n)) throw NumericalFailure("power iteration produced a non-finite iterate");
    if (n == 0.0) {
      if (result.restarts == kMaxRestarts) {
        throw NumericalFailure("power iteration hit a zero iterate " +
                               std::to_string(kMaxRestarts) + " times");
      }
      ++result.restarts;
      b = gaussianVector(dim, restartSeed + 0x9e3779b97f4a7c15ULL * result.restarts);
      k = 0;
      continue;
    }
    for (std::size_t i = 0; i < dim; ++i) b[i] = ab[i] / n;
    ++k;
  }

  op(b, ab);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    num += b[i] * ab[i];
    den += b[i] * b[i];
  }
  result.value = num / den;
  result.vector = std::move(b);
  return result;
}

}  // namespace pnp
