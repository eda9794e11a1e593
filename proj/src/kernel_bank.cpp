#include "pnp/kernel_bank.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "pnp/errors.hpp"

namespace pnp {

Kernel makeGaussianKernel(double sigmaX, double sigmaY, double theta, int size) {
  if (size < 1 || size % 2 == 0) throw InvalidArgument("Gaussian kernel size must be odd and positive");
  if (!(sigmaX > 0.0) || !(sigmaY > 0.0)) throw InvalidArgument("Gaussian widths must be positive");
  const int c = size / 2;
  const double ct = std::cos(theta), st = std::sin(theta);
  std::vector<double> taps(static_cast<std::size_t>(size * size));
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const double x = j - c, y = i - c;
      const double u = ct * x + st * y;
      const double v = -st * x + ct * y;
      taps[static_cast<std::size_t>(i * size + j)] =
          std::exp(-0.5 * (u * u / (sigmaX * sigmaX) + v * v / (sigmaY * sigmaY)));
    }
  }
  return Kernel(size, size, std::move(taps)).normalized();
}

Kernel makeMotionKernel(std::uint64_t seed, int length, int size) {
  if (length < 1) throw InvalidArgument("motion length must be >= 1");
  if (size < 1 || size % 2 == 0) throw InvalidArgument("motion kernel size must be odd and positive");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> heading0(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> turn(0.0, 0.6);

  std::vector<double> xs{0.0}, ys{0.0};
  double heading = heading0(rng);
  for (int t = 1; t < length; ++t) {
    xs.push_back(xs.back() + std::cos(heading));
    ys.push_back(ys.back() + std::sin(heading));
    heading += turn(rng);
  }

  double mx = 0.0, my = 0.0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    mx += xs[t];
    my += ys[t];
  }
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(ys.size());
  double extent = 0.0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    xs[t] -= mx;
    ys[t] -= my;
    extent = std::max({extent, std::abs(xs[t]), std::abs(ys[t])});
  }
  const double radius = 0.5 * (size - 1);
  const double shrink = extent > radius ? radius / extent : 1.0;

  std::vector<double> taps(static_cast<std::size_t>(size * size), 0.0);
  auto splat = [&](int i, int j, double w) {
    if (w <= 0.0 || i < 0 || j < 0 || i >= size || j >= size) return;
    taps[static_cast<std::size_t>(i * size + j)] += w;
  };
  for (std::size_t t = 0; t < xs.size(); ++t) {
    const double x = std::clamp(radius + shrink * xs[t], 0.0, static_cast<double>(size - 1));
    const double y = std::clamp(radius + shrink * ys[t], 0.0, static_cast<double>(size - 1));
    const int j0 = static_cast<int>(std::floor(x));
    const int i0 = static_cast<int>(std::floor(y));
    const double fx = x - j0, fy = y - i0;
    splat(i0, j0, (1 - fy) * (1 - fx));
    splat(i0, j0 + 1, (1 - fy) * fx);
    splat(i0 + 1, j0, fy * (1 - fx));
    splat(i0 + 1, j0 + 1, fy * fx);
  }
  return Kernel(size, size, std::move(taps)).normalized();
}

std::vector<NamedKernel> superResolutionBank(int size) {
  struct G {
    double sx, sy, theta;
  };
  const double pi = std::numbers::pi;
  const G params[] = {{0.7, 0.7, 0.0},        {1.2, 1.2, 0.0},     {1.6, 1.6, 0.0},
                      {2.0, 2.0, 0.0},        {2.0, 0.7, 0.0},     {2.0, 0.7, pi / 4},
                      {2.0, 0.7, pi / 2},     {1.6, 0.8, 3 * pi / 4}};
  std::vector<NamedKernel> bank;
  for (int n = 0; n < 8; ++n) {
    const G& g = params[n];
    bank.push_back({"sr:" + std::to_string(n), makeGaussianKernel(g.sx, g.sy, g.theta, size)});
  }
  return bank;
}

std::vector<NamedKernel> motionBank(int size, std::uint64_t seed) {
  std::vector<NamedKernel> bank;
  for (int n = 0; n < 8; ++n) {
    const int length = 5 + 2 * (n % 4);
    bank.push_back({"motion-bank:" + std::to_string(n),
                    makeMotionKernel(seed + static_cast<std::uint64_t>(n), length, size)});
  }
  return bank;
}

namespace {

std::vector<std::string> splitColon(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, ':')) parts.push_back(part);
  return parts;
}

double number(const std::string& s, const std::string& ref) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad number '" + s + "' in kernel reference '" + ref + "'");
  }
}

int integer(const std::string& s, const std::string& ref) {
  const double v = number(s, ref);
  if (v != std::floor(v)) throw ConfigError("expected an integer in kernel reference '" + ref + "'");
  return static_cast<int>(v);
}

int bankIndex(const std::string& s, const std::string& ref) {
  const int n = integer(s, ref);
  if (n < 0 || n >= 8) throw ConfigError("bank index out of range in '" + ref + "'");
  return n;
}

}  // namespace

Kernel resolveKernel(const std::string& ref) {
  const auto parts = splitColon(ref);
  if (ref == "identity") return Kernel::impulse();
  if (parts.size() == 5 && parts[0] == "gauss") {
    try {
      return makeGaussianKernel(number(parts[1], ref), number(parts[2], ref), number(parts[3], ref),
                                integer(parts[4], ref));
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
  if (parts.size() == 4 && parts[0] == "motion") {
    try {
      return makeMotionKernel(static_cast<std::uint64_t>(integer(parts[1], ref)), integer(parts[2], ref),
                              integer(parts[3], ref));
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
  if (parts.size() == 2 && parts[0] == "sr") return superResolutionBank()[bankIndex(parts[1], ref)].kernel;
  if (parts.size() == 2 && parts[0] == "motion-bank") return motionBank()[bankIndex(parts[1], ref)].kernel;
  try {
    return readKernelText(ref);
  } catch (const IoError& e) {
    throw ConfigError("unknown kernel reference '" + ref + "': " + e.what());
  }
}

std::vector<std::string> expandKernelRefs(const std::vector<std::string>& refs) {
  std::vector<std::string> out;
  for (const auto& ref : refs) {
    if (ref == "bank:sr" || ref == "bank:motion") {
      for (const auto& k : ref == "bank:sr" ? superResolutionBank() : motionBank()) out.push_back(k.id);
    } else {
      out.push_back(ref);
    }
  }
  return out;
}

}  // namespace pnp
