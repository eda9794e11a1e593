#pragma once

#include <cstdint>
#include <optional>
#include <variant>

#include "pnp/field.hpp"
#include "pnp/kernel.hpp"

namespace pnp {

/// Periodic blur y = H x.
struct Deblur {
  Kernel kernel;
};

/// Blur followed by s-fold decimation keeping pixels at (s*i, s*j).
struct SuperRes {
  Kernel kernel;
  int scale = 2;
};

/// Binary mask, 1 = observed, 0 = hidden. One channel (broadcast) or one per
/// image channel.
struct Inpaint {
  Field mask;
};

struct DegradationModel {
  std::variant<Deblur, SuperRes, Inpaint> kind;
  double noiseStd = 0.0;

  /// Throws InvalidArgument on a non-binary mask, a bad scale or negative noise.
  void validate() const;
  /// Observation shape produced from a signal of shape `signal`.
  Shape observationShape(const Shape& signal) const;
};

/// A x for the model's operator.
Field apply(const DegradationModel& model, const Field& x);
/// A^T r, with `signal` the shape of the unknown.
Field applyAdjoint(const DegradationModel& model, const Field& r, const Shape& signal);

/// Data-fidelity term of an observation y. Quadratic fidelities are
/// f(x) = 1/2 ||A x - y||^2; the default inpainting fidelity is the
/// indicator of {x : A x = y}.
class DataFidelity {
 public:
  /// f(x) = 1/2 ||Ax - y||^2 on signals of shape `signal`.
  static DataFidelity quadratic(DegradationModel model, Field observation, Shape signal);
  /// Noiseless inpainting constraint. The mask must be an Inpaint model.
  static DataFidelity indicator(DegradationModel model, Field observation);

  const DegradationModel& model() const { return model_; }
  const Field& observation() const { return observation_; }
  const Shape& signalShape() const { return signal_; }
  bool smooth() const { return smooth_; }
  /// |||A^T A|||, exact from the spectrum (quadratic fidelities only).
  double lipschitzGrad() const;

  /// f(x); the indicator returns 0 when ||Ax - y||_inf <= kFeasibilityTol and
  /// +infinity otherwise.
  double value(const Field& x) const;

  Field forward(const Field& x) const;
  Field adjoint(const Field& r) const;

  /// Spectral diagonal of the blur at signal size (Deblur / SuperRes only).
  const SpectralDiag& blurSpectrum() const;

  static constexpr double kFeasibilityTol = 1e-12;

 private:
  DataFidelity(DegradationModel model, Field observation, Shape signal, bool smooth);

  DegradationModel model_;
  Field observation_;
  Shape signal_;
  bool smooth_ = true;
  std::optional<SpectralDiag> blur_;
  double lipschitz_ = 0.0;
};

/// grad f(x) = A^T (A x - y). Throws UnsupportedOperation for the indicator.
Field gradF(const DataFidelity& fid, const Field& x);

/// prox of tau f for deblurring: F^* (I + tau |Lambda|^2)^{-1} F (tau H^T y + z).
Field proxDeblur(const DataFidelity& fid, const Field& z, double tau);

/// prox of tau f for f = 1/2 ||D H x - y||^2, solved per low-resolution
/// frequency over the s x s paving of the high-resolution spectrum.
Field proxSuperRes(const DataFidelity& fid, const Field& z, double tau);

/// Projection onto {x : M x = y}: observed pixels take y, hidden ones keep z.
/// For a quadratic (noisy) inpainting fidelity use prox().
Field proxInpaint(const DataFidelity& fid, const Field& z);

/// Dispatches on the fidelity kind. The indicator ignores tau.
Field prox(const DataFidelity& fid, const Field& z, double tau);

/// 2 prox(z) - z.
Field rprox(const DataFidelity& fid, const Field& z, double tau);

/// Spectral norm of A^T A by power iteration on the composed operator.
double estimateLf(const DataFidelity& fid, int iterations = 2000, std::uint64_t seed = 0);

/// Starting point for the restoration algorithms: y for deblurring, a
/// separable cubic (Keys, a = -1/2) periodic upsampling of y for
/// super-resolution, y with hidden pixels set to 0.5 for inpainting.
Field initialEstimate(const DataFidelity& fid);

/// Keys cubic interpolation of x at scale s, sample (i, j) of x landing on
/// (s i, s j) of the output; periodic boundaries.
Field cubicUpsample(const Field& x, int scale);

/// Independent Bernoulli(p) hidden pixels on a single mask plane
/// (1 = observed). p = 0 gives an all-ones mask.
Field randomMask(int height, int width, double p, std::uint64_t seed);

}  // namespace pnp
