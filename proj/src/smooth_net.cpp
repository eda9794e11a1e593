#include "pnp/smooth_net.hpp"

#include <cmath>
#include <random>

#include "net_engine.hpp"
#include "pnp/errors.hpp"

namespace pnp {

using detail::Dual;
using detail::Engine;
using detail::NetCache;

std::string toString(Activation activation) {
  switch (activation) {
    case Activation::Elu: return "elu";
    case Activation::Softplus: return "softplus";
  }
  throw InvalidArgument("unknown activation");
}

Activation activationFromString(const std::string& name) {
  if (name == "elu") return Activation::Elu;
  if (name == "softplus") return Activation::Softplus;
  throw InvalidArgument("unknown activation '" + name + "' (expected elu or softplus)");
}

std::vector<LayerShape> NetSpec::layers() const {
  if (imageChannels <= 0) throw InvalidArgument("imageChannels must be positive");
  if (taps <= 0 || taps % 2 == 0) throw InvalidArgument("taps must be a positive odd number");
  std::vector<LayerShape> out;
  int in = imageChannels + (noiseChannel ? 1 : 0);
  for (int w : hiddenWidths) {
    if (w <= 0) throw InvalidArgument("hidden widths must be positive");
    out.push_back({in, w, taps});
    in = w;
  }
  out.push_back({in, imageChannels, taps});
  return out;
}

SmoothNet::SmoothNet(int imageChannels, std::vector<LayerShape> layers, Activation activation,
                     bool noiseChannel, bool skip, std::vector<double> parameters)
    : imageChannels_(imageChannels),
      layers_(std::move(layers)),
      activation_(activation),
      noiseChannel_(noiseChannel),
      skip_(skip),
      parameters_(std::move(parameters)) {
  if (layers_.empty()) throw InvalidArgument("network needs at least one layer");
  int in = inputChannels();
  std::size_t offset = 0;
  for (const LayerShape& L : layers_) {
    if (L.inChannels != in) throw DimensionError("layer input channels do not chain");
    if (L.taps <= 0 || L.taps % 2 == 0) throw InvalidArgument("taps must be a positive odd number");
    offsets_.push_back(offset);
    offset += L.parameterCount();
    in = L.outChannels;
  }
  if (in != imageChannels_) throw DimensionError("last layer must output the image channels");
  if (parameters_.size() != offset)
    throw DimensionError("expected " + std::to_string(offset) + " parameters, got " +
                         std::to_string(parameters_.size()));
}

SmoothNet SmoothNet::zeros(const NetSpec& spec) {
  auto layers = spec.layers();
  std::size_t n = 0;
  for (const auto& L : layers) n += L.parameterCount();
  return SmoothNet(spec.imageChannels, std::move(layers), spec.activation, spec.noiseChannel, spec.skip,
                   std::vector<double>(n, 0.0));
}

SmoothNet SmoothNet::random(const NetSpec& spec, std::uint64_t seed) {
  SmoothNet net = zeros(spec);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l < net.layers_.size(); ++l) {
    const LayerShape& L = net.layers_[l];
    const double fanIn = static_cast<double>(L.inChannels) * L.taps * L.taps;
    double scale = std::sqrt(2.0 / fanIn);
    if (net.skip_ && l + 1 == net.layers_.size()) scale *= 0.01;
    double* w = net.parameters_.data() + net.offsets_[l];
    for (std::size_t k = 0; k < L.weightCount(); ++k) w[k] = scale * normal(rng);
  }
  return net;
}

void SmoothNet::checkInput(const Field& x) const {
  if (layers_.empty()) throw InvalidArgument("network is empty");
  if (x.channels() != imageChannels_)
    throw DimensionError("network expects " + std::to_string(imageChannels_) + " channels, got " +
                         std::to_string(x.channels()));
  if (x.height() <= 0 || x.width() <= 0) throw DimensionError("empty input field");
}

namespace {

template <class T = double>
std::vector<T> toPlanar(const Field& x, int channels, double fill) {
  const std::size_t P = static_cast<std::size_t>(x.height()) * x.width();
  const int C = x.channels();
  std::vector<T> out(P * channels, T(fill));
  for (std::size_t p = 0; p < P; ++p)
    for (int c = 0; c < C; ++c) out[c * P + p] = T(x[p * C + c]);
  return out;
}

template <class T>
Field fromPlanar(const std::vector<T>& planar, int h, int w, int channels) {
  Field out(h, w, channels);
  const std::size_t P = static_cast<std::size_t>(h) * w;
  for (std::size_t p = 0; p < P; ++p)
    for (int c = 0; c < channels; ++c) out[p * channels + c] = detail::primal(planar[c * P + p]);
  return out;
}

double halfSquared(const std::vector<double>& r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return 0.5 * s;
}

}  // namespace

Field SmoothNet::forward(const Field& x, double sigma) const {
  checkInput(x);
  Engine engine(*this, x.height(), x.width());
  NetCache<double> cache;
  engine.forward(toPlanar(x, inputChannels(), sigma), cache);
  Field z = fromPlanar(cache.z.back(), x.height(), x.width(), imageChannels_);
  return skip_ ? x - z : z;
}

Field SmoothNet::vjp(const Field& x, double sigma, const Field& v) const {
  checkInput(x);
  requireSameShape(x, v, "SmoothNet::vjp");
  Engine engine(*this, x.height(), x.width());
  NetCache<double> cache;
  engine.forward(toPlanar(x, inputChannels(), sigma), cache);
  // With the skip, J_N = I - J_z.
  const std::vector<double> seed = toPlanar(v, imageChannels_, 0.0);
  std::vector<double> inputBar;
  engine.backward(cache, seed, inputBar);
  Field jz = fromPlanar(inputBar, x.height(), x.width(), imageChannels_);
  return skip_ ? v - jz : jz;
}

double SmoothNet::potentialValue(const Field& x, double sigma) const {
  const Field n = forward(x, sigma);
  return 0.5 * squaredNorm(x - n);
}

PotentialEval SmoothNet::potential(const Field& x, double sigma) const {
  checkInput(x);
  Engine engine(*this, x.height(), x.width());
  NetCache<double> cache;
  engine.gradient(toPlanar(x, inputChannels(), sigma), imageChannels_, cache);
  return {halfSquared(cache.residual), fromPlanar(cache.gradient, x.height(), x.width(), imageChannels_)};
}

SmoothNet::Backward SmoothNet::gradientBackward(const Field& x, double sigma, const Field& gbar,
                                                bool withWeights) const {
  checkInput(x);
  requireSameShape(x, gbar, "SmoothNet::gradientBackward");
  Engine engine(*this, x.height(), x.width());
  NetCache<double> cache;
  engine.gradient(toPlanar(x, inputChannels(), sigma), imageChannels_, cache);
  const std::size_t n = static_cast<std::size_t>(imageChannels_) * x.height() * x.width();
  std::vector<double> uBar(n, 0.0);
  std::vector<double> wBar;
  if (withWeights) wBar.assign(parameters_.size(), 0.0);
  engine.gradientBackward(cache, toPlanar(gbar, imageChannels_, 0.0), imageChannels_, uBar,
                          withWeights ? &wBar : nullptr);
  Backward out;
  out.input = fromPlanar(uBar, x.height(), x.width(), imageChannels_);
  out.weights = std::move(wBar);
  out.gradient = fromPlanar(cache.gradient, x.height(), x.width(), imageChannels_);
  return out;
}

std::vector<double> SmoothNet::curvatureWeightGradient(const Field& x, double sigma, const Field& b) const {
  checkInput(x);
  requireSameShape(x, b, "SmoothNet::curvatureWeightGradient");
  Engine engine(*this, x.height(), x.width());
  // Input u + t b with tangent in t; the weight adjoint of <grad g(u), b>
  // then carries d/dt, i.e. the weight gradient of b^T Hess g(u) b.
  std::vector<Dual> input = toPlanar<Dual>(x, inputChannels(), sigma);
  const std::size_t P = static_cast<std::size_t>(x.height()) * x.width();
  const int C = imageChannels_;
  for (std::size_t p = 0; p < P; ++p)
    for (int c = 0; c < C; ++c) input[c * P + p].d = b[p * C + c];
  NetCache<Dual> cache;
  engine.gradient(input, C, cache);
  std::vector<Dual> uBar(static_cast<std::size_t>(C) * P, Dual(0.0));
  std::vector<Dual> wBar(parameters_.size(), Dual(0.0));
  engine.gradientBackward(cache, toPlanar<Dual>(b, C, 0.0), C, uBar, &wBar);
  std::vector<double> out(wBar.size());
  for (std::size_t k = 0; k < wBar.size(); ++k) out[k] = wBar[k].d;
  return out;
}

}  // namespace pnp
