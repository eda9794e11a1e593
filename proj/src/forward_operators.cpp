#include "pnp/forward_operators.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "pnp/errors.hpp"
#include "pnp/fft.hpp"
#include "pnp/power_iteration.hpp"

namespace pnp {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void requirePositiveTau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("prox step tau must be > 0");
}

void checkMaskFits(const Field& mask, const Shape& signal) {
  if (mask.height() != signal.height || mask.width() != signal.width ||
      (mask.channels() != 1 && mask.channels() != signal.channels)) {
    throw DimensionError("mask " + toString(mask.shape()) + " does not fit signal " +
                         toString(signal));
  }
}

double maskAt(const Field& mask, std::size_t n, int channels) {
  return mask.channels() == 1 ? mask[n / static_cast<std::size_t>(channels)] : mask[n];
}

Field decimate(const Field& x, int s) {
  if (x.height() % s != 0 || x.width() % s != 0) {
    throw DimensionError("field " + toString(x.shape()) + " is not a multiple of scale " +
                         std::to_string(s));
  }
  Field out(x.height() / s, x.width() / s, x.channels());
  for (int i = 0; i < out.height(); ++i)
    for (int j = 0; j < out.width(); ++j)
      for (int c = 0; c < x.channels(); ++c) out(i, j, c) = x(s * i, s * j, c);
  return out;
}

Field zeroFillUpsample(const Field& r, int s, const Shape& signal) {
  if (signal.height != r.height() * s || signal.width != r.width() * s ||
      signal.channels != r.channels()) {
    throw DimensionError("observation " + toString(r.shape()) + " does not match signal " +
                         toString(signal) + " at scale " + std::to_string(s));
  }
  Field out(signal);
  for (int i = 0; i < r.height(); ++i)
    for (int j = 0; j < r.width(); ++j)
      for (int c = 0; c < r.channels(); ++c) out(s * i, s * j, c) = r(i, j, c);
  return out;
}

}  // namespace

void DegradationModel::validate() const {
  if (!(noiseStd >= 0.0)) throw InvalidArgument("noise level must be >= 0");
  std::visit(Overloaded{
                 [](const Deblur&) {},
                 [](const SuperRes& sr) {
                   if (sr.scale < 1) throw InvalidArgument("super-resolution scale must be >= 1");
                 },
                 [](const Inpaint& in) {
                   for (double v : in.mask.data()) {
                     if (v != 0.0 && v != 1.0) throw InvalidArgument("inpainting mask must be binary");
                   }
                 },
             },
             kind);
}

Shape DegradationModel::observationShape(const Shape& signal) const {
  if (const auto* sr = std::get_if<SuperRes>(&kind)) {
    if (signal.height % sr->scale != 0 || signal.width % sr->scale != 0) {
      throw DimensionError("signal " + toString(signal) + " is not a multiple of scale " +
                           std::to_string(sr->scale));
    }
    return Shape{signal.height / sr->scale, signal.width / sr->scale, signal.channels};
  }
  return signal;
}

Field apply(const DegradationModel& model, const Field& x) {
  return std::visit(Overloaded{
                        [&](const Deblur& d) { return convPeriodic(x, d.kernel); },
                        [&](const SuperRes& sr) {
                          (void)model.observationShape(x.shape());
                          return decimate(convPeriodic(x, sr.kernel), sr.scale);
                        },
                        [&](const Inpaint& in) {
                          checkMaskFits(in.mask, x.shape());
                          return multiply(x, in.mask);
                        },
                    },
                    model.kind);
}

Field applyAdjoint(const DegradationModel& model, const Field& r, const Shape& signal) {
  return std::visit(
      Overloaded{
          [&](const Deblur& d) {
            if (r.shape() != signal) throw DimensionError("applyAdjoint: shape mismatch");
            return SpectralDiag(d.kernel, r.height(), r.width()).apply(r, true);
          },
          [&](const SuperRes& sr) {
            Field up = zeroFillUpsample(r, sr.scale, signal);
            return SpectralDiag(sr.kernel, signal.height, signal.width).apply(up, true);
          },
          [&](const Inpaint& in) {
            if (r.shape() != signal) throw DimensionError("applyAdjoint: shape mismatch");
            checkMaskFits(in.mask, signal);
            return multiply(r, in.mask);
          },
      },
      model.kind);
}

DataFidelity::DataFidelity(DegradationModel model, Field observation, Shape signal, bool smooth)
    : model_(std::move(model)), observation_(std::move(observation)), signal_(signal), smooth_(smooth) {
  model_.validate();
  if (observation_.shape() != model_.observationShape(signal_)) {
    throw DimensionError("observation " + toString(observation_.shape()) +
                         " does not match signal " + toString(signal_));
  }
  if (!observation_.allFinite()) throw InvalidArgument("observation must be finite");

  std::visit(Overloaded{
                 [&](const Deblur& d) {
                   blur_.emplace(d.kernel, signal_.height, signal_.width);
                   lipschitz_ = blur_->maxSquaredMagnitude();
                 },
                 [&](const SuperRes& sr) {
                   blur_.emplace(sr.kernel, signal_.height, signal_.width);
                   // Nonzero spectrum of H^T D^T D H equals that of D H H^T D^T,
                   // diagonal with entries (1/s^2) sum_b |Lambda_b|^2.
                   const int s = sr.scale;
                   const int h = signal_.height / s, w = signal_.width / s;
                   double best = 0.0;
                   for (int p = 0; p < h; ++p) {
                     for (int q = 0; q < w; ++q) {
                       double acc = 0.0;
                       for (int bi = 0; bi < s; ++bi)
                         for (int bj = 0; bj < s; ++bj) acc += std::norm((*blur_)(p + bi * h, q + bj * w));
                       best = std::max(best, acc / (s * s));
                     }
                   }
                   lipschitz_ = best;
                 },
                 [&](const Inpaint& in) {
                   checkMaskFits(in.mask, signal_);
                   double m = 0.0;
                   for (double v : in.mask.data()) m = std::max(m, v);
                   lipschitz_ = m;
                 },
             },
             model_.kind);
}

DataFidelity DataFidelity::quadratic(DegradationModel model, Field observation, Shape signal) {
  return DataFidelity(std::move(model), std::move(observation), signal, true);
}

DataFidelity DataFidelity::indicator(DegradationModel model, Field observation) {
  if (!std::holds_alternative<Inpaint>(model.kind)) {
    throw InvalidArgument("indicator fidelity is only defined for inpainting");
  }
  const Shape signal = observation.shape();
  return DataFidelity(std::move(model), std::move(observation), signal, false);
}

double DataFidelity::lipschitzGrad() const {
  if (!smooth_) throw UnsupportedOperation("indicator fidelity has no Lipschitz gradient");
  return lipschitz_;
}

const SpectralDiag& DataFidelity::blurSpectrum() const {
  if (!blur_) throw UnsupportedOperation("fidelity has no blur operator");
  return *blur_;
}

Field DataFidelity::forward(const Field& x) const {
  if (x.shape() != signal_) throw DimensionError("fidelity: signal shape mismatch");
  return std::visit(Overloaded{
                        [&](const Deblur&) { return blur_->apply(x); },
                        [&](const SuperRes& sr) { return decimate(blur_->apply(x), sr.scale); },
                        [&](const Inpaint& in) { return multiply(x, in.mask); },
                    },
                    model_.kind);
}

Field DataFidelity::adjoint(const Field& r) const {
  if (r.shape() != observation_.shape()) throw DimensionError("fidelity: observation shape mismatch");
  return std::visit(Overloaded{
                        [&](const Deblur&) { return blur_->apply(r, true); },
                        [&](const SuperRes& sr) {
                          return blur_->apply(zeroFillUpsample(r, sr.scale, signal_), true);
                        },
                        [&](const Inpaint& in) { return multiply(r, in.mask); },
                    },
                    model_.kind);
}

double DataFidelity::value(const Field& x) const {
  const Field residual = forward(x) - observation_;
  if (!smooth_) {
    return maxAbs(residual) <= kFeasibilityTol ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return 0.5 * squaredNorm(residual);
}

Field gradF(const DataFidelity& fid, const Field& x) {
  if (!fid.smooth()) throw UnsupportedOperation("gradient of an indicator fidelity");
  return fid.adjoint(fid.forward(x) - fid.observation());
}

Field proxDeblur(const DataFidelity& fid, const Field& z, double tau) {
  requirePositiveTau(tau);
  if (!std::holds_alternative<Deblur>(fid.model().kind)) {
    throw UnsupportedOperation("proxDeblur on a non-deblurring fidelity");
  }
  if (z.shape() != fid.signalShape()) throw DimensionError("proxDeblur: shape mismatch");
  const SpectralDiag& lambda = fid.blurSpectrum();
  if (lambda.isIdentity()) return lincomb(1.0, z, tau / (1.0 + tau), fid.observation() - z);

  Spectrum s = fft2(lincomb(tau, fid.adjoint(fid.observation()), 1.0, z));
  const int channels = z.channels();
  for (std::size_t p = 0; p < lambda.values().size(); ++p) {
    const double denom = 1.0 + tau * std::norm(lambda.values()[p]);
    for (int c = 0; c < channels; ++c) s[p * static_cast<std::size_t>(channels) + c] /= denom;
  }
  return ifft2(s);
}

Field proxSuperRes(const DataFidelity& fid, const Field& z, double tau) {
  requirePositiveTau(tau);
  const auto* sr = std::get_if<SuperRes>(&fid.model().kind);
  if (sr == nullptr) throw UnsupportedOperation("proxSuperRes on a non-super-resolution fidelity");
  if (z.shape() != fid.signalShape()) throw DimensionError("proxSuperRes: shape mismatch");
  const int s = sr->scale;
  if (z.height() % s != 0 || z.width() % s != 0) {
    throw DimensionError("proxSuperRes: dimensions are not multiples of the scale");
  }
  const SpectralDiag& lambda = fid.blurSpectrum();

  // zhat = tau H^T D^T y + z, then per low-resolution frequency k:
  //   X_b = Zhat_b - (tau/s^2) conj(L_b) * sum_b' L_b' Zhat_b' / (1 + (tau/s^2) sum_b' |L_b'|^2)
  Spectrum zhat = fft2(lincomb(tau, fid.adjoint(fid.observation()), 1.0, z));
  const int h = z.height() / s, w = z.width() / s, channels = z.channels();
  const double t = tau / (static_cast<double>(s) * s);
  for (int p = 0; p < h; ++p) {
    for (int q = 0; q < w; ++q) {
      double energy = 0.0;
      for (int bi = 0; bi < s; ++bi)
        for (int bj = 0; bj < s; ++bj) energy += std::norm(lambda(p + bi * h, q + bj * w));
      const double denom = 1.0 + t * energy;
      for (int c = 0; c < channels; ++c) {
        Complex folded(0.0, 0.0);
        for (int bi = 0; bi < s; ++bi)
          for (int bj = 0; bj < s; ++bj)
            folded += lambda(p + bi * h, q + bj * w) * zhat(p + bi * h, q + bj * w, c);
        const Complex weight = folded / denom;
        for (int bi = 0; bi < s; ++bi)
          for (int bj = 0; bj < s; ++bj)
            zhat(p + bi * h, q + bj * w, c) -= t * std::conj(lambda(p + bi * h, q + bj * w)) * weight;
      }
    }
  }
  return ifft2(zhat);
}

Field proxInpaint(const DataFidelity& fid, const Field& z) {
  const auto* in = std::get_if<Inpaint>(&fid.model().kind);
  if (in == nullptr) throw UnsupportedOperation("proxInpaint on a non-inpainting fidelity");
  if (z.shape() != fid.signalShape()) throw DimensionError("proxInpaint: shape mismatch");
  const Field& y = fid.observation();
  Field out = z;
  for (std::size_t n = 0; n < z.size(); ++n) {
    if (maskAt(in->mask, n, z.channels()) == 1.0) out[n] = y[n];
  }
  return out;
}

Field prox(const DataFidelity& fid, const Field& z, double tau) {
  return std::visit(Overloaded{
                        [&](const Deblur&) { return proxDeblur(fid, z, tau); },
                        [&](const SuperRes&) { return proxSuperRes(fid, z, tau); },
                        [&](const Inpaint& in) {
                          if (!fid.smooth()) return proxInpaint(fid, z);
                          // Quadratic masked fidelity: (z + tau M y) / (1 + tau M).
                          requirePositiveTau(tau);
                          if (z.shape() != fid.signalShape()) throw DimensionError("prox: shape mismatch");
                          Field out(z.shape());
                          const Field& y = fid.observation();
                          for (std::size_t n = 0; n < z.size(); ++n) {
                            const double m = maskAt(in.mask, n, z.channels());
                            out[n] = (z[n] + tau * m * y[n]) / (1.0 + tau * m);
                          }
                          return out;
                        },
                    },
                    fid.model().kind);
}

Field rprox(const DataFidelity& fid, const Field& z, double tau) {
  return lincomb(2.0, prox(fid, z, tau), -1.0, z);
}

double estimateLf(const DataFidelity& fid, int iterations, std::uint64_t seed) {
  if (!fid.smooth()) throw UnsupportedOperation("estimateLf on an indicator fidelity");
  const Shape shape = fid.signalShape();
  LinearMap op = [&](std::span<const double> in, std::span<double> out) {
    Field x(shape, std::vector<double>(in.begin(), in.end()));
    const Field ata = fid.adjoint(fid.forward(x));
    std::copy(ata.data().begin(), ata.data().end(), out.begin());
  };
  return powerIteration(op, shape.size(), iterations, seed).value;
}

namespace {

double keys(double t) {
  t = std::abs(t);
  constexpr double a = -0.5;
  if (t < 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

/// Upsamples along one axis (rows when `alongRows`).
Field cubicAxis(const Field& x, int s, bool alongRows) {
  const int H = alongRows ? x.height() * s : x.height();
  const int W = alongRows ? x.width() : x.width() * s;
  const int n = alongRows ? x.height() : x.width();
  Field out(H, W, x.channels());
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      const int pos = alongRows ? i : j;
      const int base = pos / s;
      const double frac = static_cast<double>(pos % s) / s;
      for (int c = 0; c < x.channels(); ++c) {
        double acc = 0.0;
        for (int m = -1; m <= 2; ++m) {
          const int src = ((base + m) % n + n) % n;
          const double w = keys(frac - m);
          acc += w * (alongRows ? x(src, j, c) : x(i, src, c));
        }
        out(i, j, c) = acc;
      }
    }
  return out;
}

}  // namespace

Field cubicUpsample(const Field& x, int scale) {
  if (scale < 1) throw InvalidArgument("upsampling scale must be >= 1");
  if (scale == 1) return x;
  return cubicAxis(cubicAxis(x, scale, true), scale, false);
}

Field initialEstimate(const DataFidelity& fid) {
  const Field& y = fid.observation();
  return std::visit(Overloaded{
                        [&](const Deblur&) { return y; },
                        [&](const SuperRes& sr) { return cubicUpsample(y, sr.scale); },
                        [&](const Inpaint& in) {
                          Field out = y;
                          for (std::size_t n = 0; n < out.size(); ++n)
                            if (maskAt(in.mask, n, out.channels()) == 0.0) out[n] = 0.5;
                          return out;
                        },
                    },
                    fid.model().kind);
}

Field randomMask(int height, int width, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("mask probability must lie in [0, 1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Field mask(height, width, 1, 1.0);
  for (std::size_t n = 0; n < mask.size(); ++n) {
    if (uniform(rng) < p) mask[n] = 0.0;
  }
  return mask;
}

}  // namespace pnp
