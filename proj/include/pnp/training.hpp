#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <vector>

#include "pnp/denoiser.hpp"
#include "pnp/field.hpp"
#include "pnp/smooth_net.hpp"

namespace pnp {

struct TrainConfig {
  double sigmaMin = 0.0;
  double sigmaMax = 50.0 / 255.0;
  int batchSize = 16;
  int patchSize = 32;
  int epochs = 50;
  /// Optimizer steps per epoch.
  int batchesPerEpoch = 16;
  double learningRate = 1e-4;
  /// The learning rate is halved every this many epochs (0 = never).
  int halvingEvery = 10;
  /// Spectral penalty weight mu; 0 disables the penalty.
  double penaltyWeight = 0.0;
  /// Penalty margin epsilon: the penalty is mu max(rho, 1 - epsilon).
  double penaltyMargin = 0.05;
  int powerIters = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainingSample {
  Field clean;
  Field noisy;
};

/// One noise level shared by every sample of the batch.
struct Batch {
  double sigma = 0.0;
  std::vector<TrainingSample> samples;
};

/// Clean images plus a seeded patch sampler.
class Dataset {
 public:
  explicit Dataset(std::vector<Field> images);

  /// Every PNG/PFM in `dir`, in name order, converted to `channels` channels.
  static Dataset fromDirectory(const std::filesystem::path& dir, int channels);
  /// Smooth random textures with edges, for use without image files.
  static Dataset synthetic(int count, int size, int channels, std::uint64_t seed);

  const std::vector<Field>& images() const { return images_; }
  std::size_t size() const { return images_.size(); }
  int channels() const { return images_.front().channels(); }

  /// Uniform random crop of a uniformly chosen image.
  Field randomPatch(std::mt19937_64& rng, int patchSize) const;
  /// batchSize crops sharing one noise level `sigma`, Gaussian noise.
  Batch sampleBatch(std::mt19937_64& rng, const TrainConfig& config, double sigma) const;
  /// Same with sigma ~ U[sigmaMin, sigmaMax].
  Batch sampleBatch(std::mt19937_64& rng, const TrainConfig& config) const;

 private:
  std::vector<Field> images_;
};

struct LossResult {
  /// Total batch loss: mse + penaltyMean.
  double loss = 0.0;
  /// (1/B) sum ||D(x_i + xi_i) - x_i||^2.
  double mse = 0.0;
  /// (1/B) sum mu max(rho_i, 1 - epsilon); zero for the plain loss.
  double penaltyMean = 0.0;
  /// (1/B) sum rho_i; zero for the plain loss.
  double specNormMean = 0.0;
  /// d loss / d parameters; empty unless requested.
  std::vector<double> gradient;
};

/// Mean squared denoising error over the batch. The weight gradient needs a
/// network potential.
LossResult lossGS(const PotentialDenoiser& d, const Batch& batch, bool withGradient = true);

/// lossGS plus mu max(rho_i, 1 - epsilon) averaged over samples, rho_i the
/// power-iteration estimate of |||Hess g||| at the noisy input. The penalty
/// gradient goes through the Rayleigh quotient at the last power iterate,
/// holding that vector fixed.
LossResult lossProx(const PotentialDenoiser& d, const Batch& batch, double penaltyWeight, double penaltyMargin,
                    int powerIters, std::uint64_t seed, bool withGradient = true);

class Adam {
 public:
  explicit Adam(std::size_t size, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);
  void step(std::span<double> params, std::span<const double> grad, double learningRate);

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  double beta1_;
  double beta2_;
  double epsilon_;
  long t_ = 0;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double penaltyMean = 0.0;
  double specNormMean = 0.0;
  bool penalized = false;
};

struct TrainResult {
  SmoothNet net;
  std::vector<EpochStats> trace;
};

/// One noise level per batch of an epoch. Each is uniform on
/// [sigmaMin, sigmaMax]; batch b of the epoch is drawn from the b-th of
/// `count` equal strata, and the strata are visited in shuffled order.
std::vector<double> stratifiedSigmas(std::mt19937_64& rng, const TrainConfig& config, int count);

using EpochCallback = std::function<void(const EpochStats&)>;

/// Trains from `start` with the plain loss.
TrainResult trainGS(const TrainConfig& config, const Dataset& dataset, SmoothNet start,
                    const EpochCallback& onEpoch = {});
/// Convenience: He-initialized network from `spec`, seeded by config.seed.
TrainResult trainGS(const TrainConfig& config, const Dataset& dataset, const NetSpec& spec,
                    const EpochCallback& onEpoch = {});
/// Continues from trained weights with the penalized loss.
TrainResult fineTuneProx(const TrainConfig& config, const Dataset& dataset, SmoothNet start,
                         const EpochCallback& onEpoch = {});

/// epoch,loss,penaltyMean,specNormMean
void writeLossTrace(const std::filesystem::path& path, const std::vector<EpochStats>& trace);

/// Mean of jacobianSpectralNorm over `inputs`, one seed per input.
double meanJacobianNorm(const PotentialDenoiser& d, const std::vector<Field>& inputs, int iterations,
                        std::uint64_t seed);

}  // namespace pnp
