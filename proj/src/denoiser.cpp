#include "pnp/denoiser.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "pnp/errors.hpp"
#include "pnp/power_iteration.hpp"

namespace pnp {

// ---- NetPotential ----

NetPotential::NetPotential(std::shared_ptr<const SmoothNet> net) : net_(std::move(net)) {
  if (!net_) throw InvalidArgument("NetPotential needs a network");
}

double NetPotential::value(const Field& x, double sigma) const { return net_->potentialValue(x, sigma); }

PotentialEval NetPotential::evaluate(const Field& x, double sigma) const { return net_->potential(x, sigma); }

Field NetPotential::hessianVector(const Field& x, double sigma, const Field& v) const {
  return net_->gradientBackward(x, sigma, v, false).input;
}

std::string NetPotential::describe() const {
  std::string s = "net(" + toString(net_->activation()) + (net_->skip() ? ", skip" : "") + ", widths";
  for (const auto& L : net_->layers()) s += " " + std::to_string(L.outChannels);
  return s + ")";
}

// ---- LinearPotential ----

LinearPotential::LinearPotential(Map applyB, Map applyBT, Shape shape, double lipschitz, std::string label)
    : applyB_(std::move(applyB)),
      applyBT_(std::move(applyBT)),
      shape_(shape),
      lipschitz_(lipschitz),
      label_(std::move(label)) {}

void LinearPotential::check(const Field& x) const {
  if (x.shape() != shape_)
    throw DimensionError("linear potential built for " + toString(shape_) + ", got " + toString(x.shape()));
}

Field LinearPotential::applyB(const Field& x) const {
  check(x);
  return applyB_(x);
}

double LinearPotential::value(const Field& x, double) const { return 0.5 * squaredNorm(applyB(x)); }

PotentialEval LinearPotential::evaluate(const Field& x, double) const {
  const Field bx = applyB(x);
  return {0.5 * squaredNorm(bx), applyBT_(bx)};
}

Field LinearPotential::hessianVector(const Field&, double, const Field& v) const { return applyBT_(applyB(v)); }

// ---- denoiser operations ----

void PotentialDenoiser::validate() const {
  if (!potential) throw InvalidArgument("denoiser has no potential");
  if (!std::isfinite(sigma) || sigma < 0.0) throw InvalidArgument("sigma must be finite and >= 0");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in (0, 1]");
}

namespace {

/// x - Pi_C(x) for the coercive box.
Field boxExcess(const Field& x, std::size_t* active) {
  Field out(x.shape());
  std::size_t count = 0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double p = std::clamp(x[n], kCoerciveLow, kCoerciveHigh);
    out[n] = x[n] - p;
    if (out[n] != 0.0) ++count;
  }
  if (active) *active = count;
  return out;
}

struct Effective {
  double value;
  Field gradient;
};

Effective effective(const PotentialDenoiser& d, const Field& x, ProjectionStats* stats) {
  d.validate();
  PotentialEval e = d.potential->evaluate(x, d.sigma);
  Effective out{d.alpha * e.value, std::move(e.gradient)};
  if (d.alpha != 1.0) out.gradient *= d.alpha;
  if (d.coercive) {
    std::size_t active = 0;
    const Field excess = boxExcess(x, &active);
    out.value += 0.5 * squaredNorm(excess);
    out.gradient += excess;
    if (stats) {
      ++stats->calls;
      stats->activeCoordinates += active;
      if (active > 0) ++stats->activeCalls;
    }
  }
  return out;
}

}  // namespace

double gSigma(const PotentialDenoiser& d, const Field& x) {
  d.validate();
  double v = d.alpha * d.potential->value(x, d.sigma);
  if (d.coercive) v += 0.5 * squaredNorm(boxExcess(x, nullptr));
  return v;
}

Field gradGSigma(const PotentialDenoiser& d, const Field& x) { return effective(d, x, nullptr).gradient; }

Field denoise(const PotentialDenoiser& d, const Field& x) { return x - effective(d, x, nullptr).gradient; }

Field denoiseCoercive(const PotentialDenoiser& d, const Field& x, ProjectionStats* stats) {
  if (!d.coercive) throw InvalidArgument("denoiseCoercive requires a coercive denoiser");
  return x - effective(d, x, stats).gradient;
}

DenoiserEval evaluateDenoiser(const PotentialDenoiser& d, const Field& z, ProjectionStats* stats) {
  Effective e = effective(d, z, stats);
  DenoiserEval out;
  out.potential = e.value;
  // z - D(z) is exactly the effective gradient.
  out.phi = e.value - 0.5 * squaredNorm(e.gradient);
  out.denoised = z - e.gradient;
  return out;
}

double phiAtDenoised(const PotentialDenoiser& d, const Field& z) { return evaluateDenoiser(d, z).phi; }

double jacobianSpectralNorm(const PotentialDenoiser& d, const Field& x, int iterations, std::uint64_t seed) {
  d.validate();
  if (iterations < 1) throw InvalidArgument("power iteration needs at least one step");
  const Shape shape = x.shape();
  const LinearMap op = [&](std::span<const double> in, std::span<double> out) {
    const Field v(shape, std::vector<double>(in.begin(), in.end()));
    const Field hv = d.potential->hessianVector(x, d.sigma, v);
    for (std::size_t n = 0; n < out.size(); ++n) out[n] = d.alpha * hv[n];
  };
  return std::abs(powerIteration(op, shape.size(), iterations, seed).value);
}

PotentialDenoiser analyticLinearDenoiser(const Eigen::MatrixXd& A, Shape shape, double sigma) {
  const auto n = static_cast<Eigen::Index>(shape.size());
  if (A.rows() != n || A.cols() != n)
    throw DimensionError("linear denoiser matrix must be " + std::to_string(n) + " x " + std::to_string(n));
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InvalidArgument("linear denoiser matrix must be symmetric");
  const Eigen::MatrixXd B = Eigen::MatrixXd::Identity(n, n) - A;
  const Eigen::VectorXd eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(B, Eigen::EigenvaluesOnly).eigenvalues();
  const double lipschitz = eig.cwiseAbs2().maxCoeff();
  if (!(lipschitz < 1.0)) throw InvalidArgument("spectrum of (I - A)^2 must lie in [0, 1)");
  auto mat = std::make_shared<const Eigen::MatrixXd>(B);
  auto apply = [mat, shape](const Field& x) {
    const Eigen::Map<const Eigen::VectorXd> v(x.data().data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::VectorXd r = (*mat) * v;
    return Field(shape, std::vector<double>(r.data(), r.data() + r.size()));
  };
  PotentialDenoiser d;
  d.potential = std::make_shared<LinearPotential>(apply, apply, shape, lipschitz, "dense linear");
  d.sigma = sigma;
  return d;
}

PotentialDenoiser analyticFilterDenoiser(double identityWeight, const Kernel& kernel, double kernelWeight,
                                         Shape shape, double sigma) {
  if (!kernel.isCentrosymmetric(1e-12)) throw InvalidArgument("filter denoiser needs a centrosymmetric kernel");
  auto spec = std::make_shared<const SpectralDiag>(kernel, shape.height, shape.width);
  double lipschitz = 0.0;
  for (const Complex& l : spec->values()) {
    const Complex b = (1.0 - identityWeight) - kernelWeight * l;
    lipschitz = std::max(lipschitz, std::norm(b));
  }
  if (!(lipschitz < 1.0)) throw InvalidArgument("spectrum of (I - A)^2 must lie in [0, 1)");
  auto make = [=](bool adjoint) {
    return [=](const Field& x) {
      Field kx = spec->apply(x, adjoint);
      return lincomb(1.0 - identityWeight, x, -kernelWeight, kx);
    };
  };
  PotentialDenoiser d;
  d.potential = std::make_shared<LinearPotential>(make(false), make(true), shape, lipschitz, "linear filter");
  d.sigma = sigma;
  return d;
}

PotentialDenoiser netDenoiser(std::shared_ptr<const SmoothNet> net, double sigma, double alpha) {
  PotentialDenoiser d;
  d.potential = std::make_shared<NetPotential>(std::move(net));
  d.sigma = sigma;
  d.alpha = alpha;
  d.validate();
  return d;
}

double knownLipschitz(const PotentialDenoiser& d) {
  const auto* linear = dynamic_cast<const LinearPotential*>(d.potential.get());
  if (!linear) throw UnsupportedOperation("Lipschitz constant is only known for linear potentials");
  return d.alpha * linear->lipschitz();
}

// ---- model files ----

namespace {

constexpr char kMagic[8] = {'P', 'N', 'P', 'G', 'S', 'D', 'N', '1'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw IoError("truncated model file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void saveModel(const std::filesystem::path& path, const SmoothNet& net, const ModelMetadata& metadata) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write model file " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.imageChannels()));
  put<std::uint8_t>(out, net.noiseChannel() ? 1 : 0);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(net.activation()));
  put<std::uint8_t>(out, net.skip() ? 1 : 0);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers().size()));
  for (const LayerShape& L : net.layers()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(L.inChannels));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(L.outChannels));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(L.taps));
  }
  put<std::uint64_t>(out, net.parameterCount());
  for (double w : net.parameters()) put<double>(out, w);
  put<double>(out, metadata.sigmaMin);
  put<double>(out, metadata.sigmaMax);
  put<double>(out, metadata.penaltyWeight);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(metadata.epochs));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(metadata.mode.size()));
  out.write(metadata.mode.data(), static_cast<std::streamsize>(metadata.mode.size()));
  if (!out) throw IoError("failed writing model file " + path.string());
}

StoredModel loadModel(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file " + path.string());
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError(path.string() + " is not a denoiser model file");
  if (get<std::uint32_t>(in) != kVersion) throw IoError("unsupported model file version");
  const int channels = static_cast<int>(get<std::uint32_t>(in));
  const bool noise = get<std::uint8_t>(in) != 0;
  const std::uint8_t act = get<std::uint8_t>(in);
  if (act != static_cast<std::uint8_t>(Activation::Elu) && act != static_cast<std::uint8_t>(Activation::Softplus))
    throw IoError("unknown activation tag in model file");
  const bool skip = get<std::uint8_t>(in) != 0;
  const std::uint32_t count = get<std::uint32_t>(in);
  if (count == 0 || count > 64) throw IoError("implausible layer count in model file");
  std::vector<LayerShape> layers(count);
  for (auto& L : layers) {
    L.inChannels = static_cast<int>(get<std::uint32_t>(in));
    L.outChannels = static_cast<int>(get<std::uint32_t>(in));
    L.taps = static_cast<int>(get<std::uint32_t>(in));
  }
  const std::uint64_t n = get<std::uint64_t>(in);
  if (n > (1ULL << 28)) throw IoError("implausible parameter count in model file");
  std::vector<double> params(n);
  for (double& w : params) w = get<double>(in);
  StoredModel model;
  model.metadata.sigmaMin = get<double>(in);
  model.metadata.sigmaMax = get<double>(in);
  model.metadata.penaltyWeight = get<double>(in);
  model.metadata.epochs = static_cast<int>(get<std::uint32_t>(in));
  const std::uint32_t len = get<std::uint32_t>(in);
  if (len > 64) throw IoError("implausible mode tag in model file");
  model.metadata.mode.resize(len);
  if (!in.read(model.metadata.mode.data(), len)) throw IoError("truncated model file");
  try {
    model.net = SmoothNet(channels, std::move(layers), static_cast<Activation>(act), noise, skip, std::move(params));
  } catch (const Error& e) {
    throw IoError(std::string("inconsistent model file: ") + e.what());
  }
  return model;
}

}  // namespace pnp
