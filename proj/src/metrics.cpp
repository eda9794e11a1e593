#include "pnp/metrics.hpp"

#include <cmath>
#include <random>

#include "pnp/errors.hpp"

namespace pnp {

double meanSquaredError(const Field& x, const Field& ref) {
  requireSameShape(x, ref, "meanSquaredError");
  if (x.empty()) throw DimensionError("meanSquaredError: empty fields");
  double acc = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double d = x[n] - ref[n];
    acc += d * d;
  }
  return acc / static_cast<double>(x.size());
}

double psnr(const Field& x, const Field& ref, double peak) {
  if (!(peak > 0.0)) throw InvalidArgument("psnr: peak must be > 0");
  const double mse = meanSquaredError(x, ref);
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(peak * peak / mse);
}

Field addGaussianNoise(const Field& x, double nu, std::uint64_t seed) {
  if (!(nu >= 0.0)) throw InvalidArgument("noise level must be >= 0");
  if (nu == 0.0) return x;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Field out = x;
  for (std::size_t n = 0; n < out.size(); ++n) out[n] += nu * normal(rng);
  return out;
}

}  // namespace pnp
