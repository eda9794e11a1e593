#pragma once

#include <cstdint>
#include <limits>

#include "pnp/field.hpp"

namespace pnp {

/// Returned by psnr() when the two fields are identical (MSE = 0).
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

double meanSquaredError(const Field& x, const Field& ref);

/// 10 log10(peak^2 / MSE), with MSE taken jointly over all channels.
double psnr(const Field& x, const Field& ref, double peak = 1.0);

/// x + nu * xi with xi ~ N(0, 1) i.i.d., drawn from a generator seeded by `seed`.
Field addGaussianNoise(const Field& x, double nu, std::uint64_t seed);

}  // namespace pnp
