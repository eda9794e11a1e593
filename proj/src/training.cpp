#include "pnp/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "pnp/errors.hpp"
#include "pnp/image_io.hpp"
#include "pnp/power_iteration.hpp"

namespace pnp {

void TrainConfig::validate() const {
  if (!(sigmaMin >= 0.0 && sigmaMax >= sigmaMin)) throw ConfigError("need 0 <= sigmaMin <= sigmaMax");
  if (batchSize < 1) throw ConfigError("batchSize must be >= 1");
  if (patchSize < 1) throw ConfigError("patchSize must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batchesPerEpoch < 1) throw ConfigError("batchesPerEpoch must be >= 1");
  if (!(learningRate > 0.0)) throw ConfigError("learningRate must be positive");
  if (halvingEvery < 0) throw ConfigError("halvingEvery must be >= 0");
  if (!(penaltyWeight >= 0.0)) throw ConfigError("penalty weight must be >= 0");
  if (!(penaltyMargin > 0.0 && penaltyMargin < 1.0)) throw ConfigError("penalty margin must lie in (0, 1)");
  if (powerIters < 1) throw ConfigError("powerIters must be >= 1");
}

// ---- dataset ----

Dataset::Dataset(std::vector<Field> images) : images_(std::move(images)) {
  if (images_.empty()) throw InvalidArgument("dataset is empty");
  const int c = images_.front().channels();
  for (const Field& f : images_) {
    if (f.channels() != c) throw DimensionError("dataset images must share a channel count");
    if (f.empty()) throw DimensionError("dataset contains an empty image");
  }
}

namespace {

Field toChannels(const Field& f, int channels) {
  if (f.channels() == channels) return f;
  Field out(f.height(), f.width(), channels);
  for (int i = 0; i < f.height(); ++i)
    for (int j = 0; j < f.width(); ++j) {
      if (channels == 1) {
        double acc = 0.0;
        for (int c = 0; c < f.channels(); ++c) acc += f(i, j, c);
        out(i, j, 0) = acc / f.channels();
      } else {
        for (int c = 0; c < channels; ++c) out(i, j, c) = f(i, j, f.channels() == 1 ? 0 : c % f.channels());
      }
    }
  return out;
}

}  // namespace

Dataset Dataset::fromDirectory(const std::filesystem::path& dir, int channels) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".png" || ext == ".pfm")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no images in " + dir.string());
  std::vector<Field> images;
  for (const auto& f : files) images.push_back(toChannels(readImage(f), channels));
  return Dataset(std::move(images));
}

Dataset Dataset::synthetic(int count, int size, int channels, std::uint64_t seed) {
  if (count < 1 || size < 1 || channels < 1) throw InvalidArgument("bad synthetic dataset dimensions");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr double kTwoPi = 6.283185307179586;
  std::vector<Field> images;
  for (int n = 0; n < count; ++n) {
    Field img(size, size, channels);
    // Low-frequency waves.
    for (int w = 0; w < 4; ++w) {
      const double fx = 3.0 * unit(rng), fy = 3.0 * unit(rng), phase = kTwoPi * unit(rng);
      std::vector<double> amp(channels);
      for (double& a : amp) a = 0.15 * unit(rng);
      for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
          const double s = std::sin(kTwoPi * (fx * i + fy * j) / size + phase);
          for (int c = 0; c < channels; ++c) img(i, j, c) += amp[c] * s;
        }
    }
    // Piecewise-constant discs and half-planes for edges.
    for (int e = 0; e < 6; ++e) {
      const double ci = size * unit(rng), cj = size * unit(rng), r = size * (0.1 + 0.3 * unit(rng));
      const bool disc = unit(rng) < 0.5;
      const double angle = kTwoPi * unit(rng);
      std::vector<double> val(channels);
      for (double& v : val) v = unit(rng) - 0.5;
      for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
          const bool inside = disc ? (i - ci) * (i - ci) + (j - cj) * (j - cj) < r * r
                                   : std::cos(angle) * (i - ci) + std::sin(angle) * (j - cj) > 0.0;
          if (inside)
            for (int c = 0; c < channels; ++c) img(i, j, c) += 0.3 * val[c];
        }
    }
    for (std::size_t k = 0; k < img.size(); ++k) img[k] = std::clamp(0.5 + img[k], 0.0, 1.0);
    images.push_back(std::move(img));
  }
  return Dataset(std::move(images));
}

Field Dataset::randomPatch(std::mt19937_64& rng, int patchSize) const {
  const Field& img = images_[std::uniform_int_distribution<std::size_t>(0, images_.size() - 1)(rng)];
  if (patchSize > img.height() || patchSize > img.width())
    throw DimensionError("patch size " + std::to_string(patchSize) + " exceeds image " + toString(img.shape()));
  const int i0 = std::uniform_int_distribution<int>(0, img.height() - patchSize)(rng);
  const int j0 = std::uniform_int_distribution<int>(0, img.width() - patchSize)(rng);
  Field patch(patchSize, patchSize, img.channels());
  for (int i = 0; i < patchSize; ++i)
    for (int j = 0; j < patchSize; ++j)
      for (int c = 0; c < img.channels(); ++c) patch(i, j, c) = img(i0 + i, j0 + j, c);
  return patch;
}

Batch Dataset::sampleBatch(std::mt19937_64& rng, const TrainConfig& config) const {
  const double sigma = std::uniform_real_distribution<double>(config.sigmaMin, config.sigmaMax)(rng);
  return sampleBatch(rng, config, sigma);
}

std::vector<double> stratifiedSigmas(std::mt19937_64& rng, const TrainConfig& config, int count) {
  std::vector<double> out(static_cast<std::size_t>(count));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double width = (config.sigmaMax - config.sigmaMin) / count;
  for (int b = 0; b < count; ++b) out[b] = config.sigmaMin + width * (b + unit(rng));
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

Batch Dataset::sampleBatch(std::mt19937_64& rng, const TrainConfig& config, double sigma) const {
  if (!(sigma >= 0.0)) throw InvalidArgument("noise level must be >= 0");
  Batch batch;
  batch.sigma = sigma;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int b = 0; b < config.batchSize; ++b) {
    TrainingSample s;
    s.clean = randomPatch(rng, config.patchSize);
    s.noisy = s.clean;
    for (std::size_t n = 0; n < s.noisy.size(); ++n) s.noisy[n] += batch.sigma * normal(rng);
    batch.samples.push_back(std::move(s));
  }
  return batch;
}

// ---- losses ----

namespace {

const SmoothNet& requireNet(const PotentialDenoiser& d) {
  const auto* p = dynamic_cast<const NetPotential*>(d.potential.get());
  if (!p) throw UnsupportedOperation("weight gradients need a network potential");
  return p->net();
}

void axpy(std::vector<double>& y, double a, const std::vector<double>& x) {
  for (std::size_t k = 0; k < y.size(); ++k) y[k] += a * x[k];
}

}  // namespace

LossResult lossGS(const PotentialDenoiser& d, const Batch& batch, bool withGradient) {
  if (batch.samples.empty()) throw InvalidArgument("empty batch");
  d.validate();
  const SmoothNet* net = withGradient ? &requireNet(d) : nullptr;
  const double B = static_cast<double>(batch.samples.size());
  const PotentialDenoiser at{d.potential, batch.sigma, d.alpha, d.coercive};

  LossResult out;
  if (net) out.gradient.assign(net->parameterCount(), 0.0);
  for (const TrainingSample& s : batch.samples) {
    const Field err = denoise(at, s.noisy) - s.clean;
    out.mse += squaredNorm(err) / B;
    if (net) {
      // D = u - alpha grad g, so d||D - x||^2 = <-2 alpha (D - x), d grad g>.
      const Field gbar = (-2.0 * d.alpha / B) * err;
      axpy(out.gradient, 1.0, net->gradientBackward(s.noisy, batch.sigma, gbar, true).weights);
    }
  }
  out.loss = out.mse;
  return out;
}

LossResult lossProx(const PotentialDenoiser& d, const Batch& batch, double penaltyWeight, double penaltyMargin,
                    int powerIters, std::uint64_t seed, bool withGradient) {
  if (!(penaltyWeight >= 0.0)) throw InvalidArgument("penalty weight must be >= 0");
  if (!(penaltyMargin > 0.0 && penaltyMargin < 1.0)) throw InvalidArgument("penalty margin must lie in (0, 1)");
  LossResult out = lossGS(d, batch, withGradient);
  if (penaltyWeight == 0.0) return out;

  const SmoothNet* net = withGradient ? &requireNet(d) : nullptr;
  const double B = static_cast<double>(batch.samples.size());
  const double floor = 1.0 - penaltyMargin;
  for (std::size_t i = 0; i < batch.samples.size(); ++i) {
    const Field& u = batch.samples[i].noisy;
    const Shape shape = u.shape();
    const LinearMap hess = [&](std::span<const double> in, std::span<double> res) {
      const Field v(shape, std::vector<double>(in.begin(), in.end()));
      const Field hv = d.potential->hessianVector(u, batch.sigma, v);
      for (std::size_t n = 0; n < res.size(); ++n) res[n] = d.alpha * hv[n];
    };
    const PowerIterationResult pi = powerIteration(hess, shape.size(), powerIters, seed + i);
    const double rho = std::abs(pi.value);
    out.specNormMean += rho / B;
    out.penaltyMean += penaltyWeight * std::max(rho, floor) / B;
    if (net && rho >= floor) {
      // b is unit norm, so rho = |alpha b^T Hess g b|.
      const Field b(shape, pi.vector);
      const double scale = (pi.value < 0.0 ? -1.0 : 1.0) * penaltyWeight * d.alpha / B;
      axpy(out.gradient, scale, net->curvatureWeightGradient(u, batch.sigma, b));
    }
  }
  out.loss = out.mse + out.penaltyMean;
  return out;
}

// ---- optimizer ----

Adam::Adam(std::size_t size, double beta1, double beta2, double epsilon)
    : m_(size, 0.0), v_(size, 0.0), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void Adam::step(std::span<double> params, std::span<const double> grad, double learningRate) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw DimensionError("Adam size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * grad[k];
    v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * grad[k] * grad[k];
    params[k] -= learningRate * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + epsilon_);
  }
}

// ---- training loops ----

namespace {

TrainResult runTraining(const TrainConfig& config, const Dataset& dataset, SmoothNet start, bool penalized,
                        const EpochCallback& onEpoch) {
  config.validate();
  if (start.imageChannels() != dataset.channels())
    throw DimensionError("network channels do not match the dataset");
  auto net = std::make_shared<SmoothNet>(std::move(start));
  Adam adam(net->parameterCount());
  std::mt19937_64 rng(config.seed);
  TrainResult result;
  std::uint64_t step = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const int halvings = config.halvingEvery > 0 ? (epoch - 1) / config.halvingEvery : 0;
    const double lr = config.learningRate * std::ldexp(1.0, -halvings);
    EpochStats stats;
    stats.epoch = epoch;
    stats.penalized = penalized;
    const std::vector<double> sigmas = stratifiedSigmas(rng, config, config.batchesPerEpoch);
    for (int b = 0; b < config.batchesPerEpoch; ++b, ++step) {
      const Batch batch = dataset.sampleBatch(rng, config, sigmas[b]);
      const PotentialDenoiser d = netDenoiser(net, batch.sigma);
      const LossResult loss =
          penalized ? lossProx(d, batch, config.penaltyWeight, config.penaltyMargin, config.powerIters,
                               config.seed * 1000003ULL + step * 7919ULL)
                    : lossGS(d, batch);
      const bool finite = std::isfinite(loss.loss) &&
                          std::all_of(loss.gradient.begin(), loss.gradient.end(), [](double g) { return std::isfinite(g); });
      if (!finite) {
        char msg[160];
        std::snprintf(msg, sizeof msg, "training diverged at epoch %d, batch %d (sigma %.4f): non-finite loss or gradient",
                      epoch, b, batch.sigma);
        throw NumericalFailure(msg);
      }
      stats.loss += loss.loss / config.batchesPerEpoch;
      stats.penaltyMean += loss.penaltyMean / config.batchesPerEpoch;
      stats.specNormMean += loss.specNormMean / config.batchesPerEpoch;
      adam.step(net->parameters(), loss.gradient, lr);
    }
    result.trace.push_back(stats);
    if (onEpoch) onEpoch(stats);
  }
  result.net = *net;
  return result;
}

}  // namespace

TrainResult trainGS(const TrainConfig& config, const Dataset& dataset, SmoothNet start, const EpochCallback& onEpoch) {
  return runTraining(config, dataset, std::move(start), false, onEpoch);
}

TrainResult trainGS(const TrainConfig& config, const Dataset& dataset, const NetSpec& spec,
                    const EpochCallback& onEpoch) {
  return trainGS(config, dataset, SmoothNet::random(spec, config.seed), onEpoch);
}

TrainResult fineTuneProx(const TrainConfig& config, const Dataset& dataset, SmoothNet start,
                         const EpochCallback& onEpoch) {
  return runTraining(config, dataset, std::move(start), true, onEpoch);
}

void writeLossTrace(const std::filesystem::path& path, const std::vector<EpochStats>& trace) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,loss,penaltyMean,specNormMean\n";
  char line[128];
  for (const EpochStats& s : trace) {
    if (s.penalized)
      std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g\n", s.epoch, s.loss, s.penaltyMean, s.specNormMean);
    else
      std::snprintf(line, sizeof line, "%d,%.17g,0,\n", s.epoch, s.loss);
    out << line;
  }
  if (!out) throw IoError("failed writing " + path.string());
}

double meanJacobianNorm(const PotentialDenoiser& d, const std::vector<Field>& inputs, int iterations,
                        std::uint64_t seed) {
  if (inputs.empty()) throw InvalidArgument("no inputs");
  double acc = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) acc += jacobianSpectralNorm(d, inputs[i], iterations, seed + i);
  return acc / static_cast<double>(inputs.size());
}

}  // namespace pnp
