#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pnp/kernel.hpp"

namespace pnp {

/// Sampled Gaussian with standard deviations sigmaX, sigmaY along axes rotated
/// by theta (radians), size x size taps centered at size / 2, normalized to
/// sum 1. Throws InvalidArgument for an even size or a non-positive width.
Kernel makeGaussianKernel(double sigmaX, double sigmaY, double theta, int size);

/// Camera-shake stand-in: a seeded random walk of `length` unit steps with a
/// drifting heading, centered, shrunk to fit the support when it would leave
/// it, and splatted with bilinear weights. Nonnegative, sums to 1.
Kernel makeMotionKernel(std::uint64_t seed, int length, int size);

struct NamedKernel {
  std::string id;
  Kernel kernel;
};

/// 4 isotropic + 4 anisotropic Gaussian anti-aliasing filters.
std::vector<NamedKernel> superResolutionBank(int size = 7);
/// 8 seeded motion kernels.
std::vector<NamedKernel> motionBank(int size = 9, std::uint64_t seed = 2021);

/// Parses a kernel reference:
///   identity
///   gauss:SX:SY:THETA:SIZE
///   motion:SEED:LENGTH:SIZE
///   sr:N / motion-bank:N     entry N of the default banks
///   anything else            a kernel text file
Kernel resolveKernel(const std::string& ref);

/// Expands "bank:sr" and "bank:motion" into the bank entry ids; other
/// references are returned unchanged.
std::vector<std::string> expandKernelRefs(const std::vector<std::string>& refs);

}  // namespace pnp
