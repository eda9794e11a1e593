#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>

#include "pnp/field.hpp"
#include "pnp/kernel.hpp"
#include "pnp/smooth_net.hpp"

namespace pnp {

/// A smooth potential g(x) = 1/2 ||x - N(x)||^2 together with its first and
/// second derivatives.
class Potential {
 public:
  virtual ~Potential() = default;

  virtual double value(const Field& x, double sigma) const = 0;
  /// g and grad g together.
  virtual PotentialEval evaluate(const Field& x, double sigma) const = 0;
  /// Hess g(x) v.
  virtual Field hessianVector(const Field& x, double sigma, const Field& v) const = 0;
  virtual std::string describe() const = 0;
};

class NetPotential final : public Potential {
 public:
  explicit NetPotential(std::shared_ptr<const SmoothNet> net);

  const SmoothNet& net() const { return *net_; }
  std::shared_ptr<const SmoothNet> netPtr() const { return net_; }

  double value(const Field& x, double sigma) const override;
  PotentialEval evaluate(const Field& x, double sigma) const override;
  Field hessianVector(const Field& x, double sigma, const Field& v) const override;
  std::string describe() const override;

 private:
  std::shared_ptr<const SmoothNet> net_;
};

/// N(x) = A x with A linear, so g(x) = 1/2 ||B x||^2 for B = I - A,
/// grad g = B^T B x and D = I - B^T B. Ignores sigma.
class LinearPotential final : public Potential {
 public:
  using Map = std::function<Field(const Field&)>;
  /// `applyB` and `applyBT` act on fields of `shape`; `lipschitz` is
  /// the largest eigenvalue of B^T B.
  LinearPotential(Map applyB, Map applyBT, Shape shape, double lipschitz, std::string label);

  const Shape& shape() const { return shape_; }
  /// Lipschitz constant of grad g.
  double lipschitz() const { return lipschitz_; }
  Field applyB(const Field& x) const;

  double value(const Field& x, double sigma) const override;
  PotentialEval evaluate(const Field& x, double sigma) const override;
  Field hessianVector(const Field& x, double sigma, const Field& v) const override;
  std::string describe() const override { return label_; }

 private:
  void check(const Field& x) const;

  Map applyB_;
  Map applyBT_;
  Shape shape_;
  double lipschitz_;
  std::string label_;
};

/// Box used by the coercive variant.
inline constexpr double kCoerciveLow = -1.0;
inline constexpr double kCoerciveHigh = 2.0;

/// D = Id - alpha grad g, optionally with the coercive box term.
struct PotentialDenoiser {
  std::shared_ptr<const Potential> potential;
  double sigma = 0.0;
  /// Relaxation in (0, 1]; the effective potential is alpha g.
  double alpha = 1.0;
  /// Adds 1/2 ||x - Pi_C(x)||^2 with C = [-1, 2]^n.
  bool coercive = false;

  void validate() const;
};

/// alpha g(x), plus 1/2 ||x - Pi_C(x)||^2 when coercive.
double gSigma(const PotentialDenoiser& d, const Field& x);
/// Gradient of gSigma.
Field gradGSigma(const PotentialDenoiser& d, const Field& x);
/// x - gradGSigma(x). Without the coercive term this is x - alpha grad g(x).
Field denoise(const PotentialDenoiser& d, const Field& x);

struct ProjectionStats {
  /// Number of coordinates outside the box, summed over calls.
  std::size_t activeCoordinates = 0;
  /// Number of calls with at least one such coordinate.
  std::size_t activeCalls = 0;
  std::size_t calls = 0;
};

/// (x - alpha grad g(x)) - (x - Pi_C(x)). Requires d.coercive.
Field denoiseCoercive(const PotentialDenoiser& d, const Field& x, ProjectionStats* stats = nullptr);

/// phi(D(z)) = gSigma(z) - 1/2 ||z - D(z)||^2, taking the free constant as 0.
double phiAtDenoised(const PotentialDenoiser& d, const Field& z);

/// D(z), gSigma(z) and phi(D(z)) from one evaluation of the potential.
struct DenoiserEval {
  Field denoised;
  double potential = 0.0;
  double phi = 0.0;
};
DenoiserEval evaluateDenoiser(const PotentialDenoiser& d, const Field& z,
                              ProjectionStats* stats = nullptr);

/// |||alpha Hess g(x)||| by power iteration on Hessian-vector products.
double jacobianSpectralNorm(const PotentialDenoiser& d, const Field& x, int iterations,
                            std::uint64_t seed);

/// Denoiser whose network is a dense linear map N(x) = A x on fields of
/// `shape`. A must be symmetric and the spectrum of (I - A)^2 must lie in
/// [0, 1).
PotentialDenoiser analyticLinearDenoiser(const Eigen::MatrixXd& A, Shape shape, double sigma = 0.0);

/// N(x) = identityWeight x + kernelWeight (k * x), periodic. The kernel must be
/// centrosymmetric so that N is symmetric.
PotentialDenoiser analyticFilterDenoiser(double identityWeight, const Kernel& kernel,
                                         double kernelWeight, Shape shape, double sigma = 0.0);

/// Denoiser wrapping a trained network.
PotentialDenoiser netDenoiser(std::shared_ptr<const SmoothNet> net, double sigma, double alpha = 1.0);

/// Lipschitz constant of grad(alpha g) when the potential is linear; throws
/// UnsupportedOperation for network potentials.
double knownLipschitz(const PotentialDenoiser& d);

// ---- model files ----

struct ModelMetadata {
  double sigmaMin = 0.0;
  double sigmaMax = 50.0 / 255.0;
  double penaltyWeight = 0.0;
  int epochs = 0;
  /// "gs" or "prox".
  std::string mode = "gs";
};

struct StoredModel {
  SmoothNet net;
  ModelMetadata metadata;
};

void saveModel(const std::filesystem::path& path, const SmoothNet& net, const ModelMetadata& metadata);
StoredModel loadModel(const std::filesystem::path& path);

}  // namespace pnp
