#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pnp/algorithms.hpp"
#include "pnp/denoiser.hpp"
#include "pnp/forward_operators.hpp"

namespace pnp {

enum class ProblemKind { Deblur, SuperRes, Inpaint };
std::string toString(ProblemKind kind);
/// "deblur", "sr" or "inpaint".
ProblemKind problemKindFromString(const std::string& name);

struct ProblemSpec {
  ProblemKind kind = ProblemKind::Deblur;
  /// Kernel references (see resolveKernel); "bank:sr" / "bank:motion" expand
  /// to the whole bank. Ignored for inpainting.
  std::vector<std::string> kernels{"bank:motion"};
  int scale = 2;
  /// Probability that a pixel is hidden.
  double maskP = 0.5;
  /// Observation noise level.
  double nu = 0.03;
};

struct DenoiserSpec {
  /// Path to a model file, or "analytic:identity", or
  /// "analytic:filter:WEIGHT:SIGMA:SIZE" for N = (1 - w) x + w (G_sigma * x).
  std::string model = "analytic:identity";
  /// Denoiser noise level sigma = sigmaCoeff * nu.
  double sigmaCoeff = 1.0;
  /// Relaxation D = alpha D_sigma + (1 - alpha) Id.
  double alpha = 1.0;
};

enum class SweepAxis { SigmaCoeff, Lambda, Tau0, MaskP };
std::string toString(SweepAxis axis);
/// "sigma_coeff", "lambda", "tau0" or "mask_p".
SweepAxis sweepAxisFromString(const std::string& name);

struct Sweep {
  SweepAxis axis = SweepAxis::SigmaCoeff;
  std::vector<double> values;
};

struct ExperimentConfig {
  ProblemSpec problem;
  Algorithm algorithm = Algorithm::GradientStep;
  PnPParams params = PnPParams::defaults(Algorithm::GradientStep);
  /// When set, tau0 is tied to lambda (also along a lambda sweep).
  bool tau0FollowsLambda = true;
  /// Gradient-step scheme: the initial guess is denoised once at
  /// initDenoiseCoeff * nu before the first prox; 0 disables.
  double initDenoiseCoeff = 10.0;
  DenoiserSpec denoiser;
  std::optional<Sweep> sweep;
  std::vector<std::filesystem::path> images;
  /// Center crop to crop x crop before degrading; 0 keeps the full image.
  int crop = 0;
  std::uint64_t seed = 0;
  /// Parallel runs in a sweep; 0 picks the hardware concurrency.
  int workers = 1;
  std::filesystem::path outputDir = "pnp_out";

  /// Checks ranges, that each referenced file exists and that every kernel
  /// reference resolves. Throws ConfigError.
  void validate() const;
};

/// JSON document; relative paths are resolved against `baseDir`. Unknown
/// keys are rejected. Throws ConfigError.
ExperimentConfig configFromJson(const std::string& text, const std::filesystem::path& baseDir = {});
ExperimentConfig loadConfig(const std::filesystem::path& path);
std::string configToJson(const ExperimentConfig& config);

/// One degraded instance.
struct Problem {
  Field clean;
  Field observation;
  DataFidelity fidelity;
  /// Algorithm starting point (initialEstimate of the fidelity).
  Field init;
};

/// Degrades `clean` with the given kernel (ignored for inpainting). Noise
/// and mask draws depend only on `seed`.
Problem makeProblem(const ProblemSpec& spec, const Field& clean, const std::string& kernelRef,
                    std::uint64_t seed);

/// Builds the denoiser for signals of `shape` at noise level `sigma`.
/// `net` is used for model-file specs (pass nullptr to load from disk).
PotentialDenoiser makeDenoiser(const DenoiserSpec& spec, Shape shape, double sigma,
                               std::shared_ptr<const SmoothNet> net = nullptr);

/// Center crop, or the image itself when crop is 0 or not smaller.
Field centerCrop(const Field& image, int crop);

struct RestoreOutcome {
  RunResult run;
  Field observation;
  /// PSNR of the algorithm's starting guess against the clean image.
  double observedPsnr = 0.0;
  double finalPsnr = 0.0;
  /// Best PSNR over the trace and the final output.
  double bestPsnr = 0.0;
  int iterations = 0;
};

/// Runs the configured algorithm on one clean image and kernel. Sweep values
/// must already be folded into the config.
RestoreOutcome restore(const ExperimentConfig& config, const Field& clean, const std::string& imageId,
                       const std::string& kernelRef, std::shared_ptr<const SmoothNet> net = nullptr);

/// First image, first kernel; writes restored.png, observed.png and
/// trace.csv into the output directory.
RestoreOutcome restoreOnce(const ExperimentConfig& config);

/// Copy of `config` with the sweep axis set to `value`.
ExperimentConfig withSweepValue(const ExperimentConfig& config, SweepAxis axis, double value);

struct SweepRun {
  std::string image;
  std::string kernel;
  double value = 0.0;
  bool ok = false;
  std::string error;
  /// Issues found when re-reading the written trace.
  std::vector<std::string> traceIssues;
  double observedPsnr = 0.0;
  double finalPsnr = 0.0;
  double bestPsnr = 0.0;
  int iterations = 0;
  std::string stop;
  std::filesystem::path tracePath;
};

struct SweepRow {
  double value = 0.0;
  int runs = 0;
  int failures = 0;
  int invalidTraces = 0;
  double meanFinalPsnr = 0.0;
  double meanBestPsnr = 0.0;
  double meanIterations = 0.0;
};

struct SweepSummary {
  SweepAxis axis = SweepAxis::SigmaCoeff;
  std::vector<SweepRow> rows;
  std::vector<SweepRun> runs;
};

/// Every (image, kernel, sweep value) combination on a worker pool. Writes
/// traces/<run>.csv, runs.csv and summary.csv into the output directory, each
/// through a temporary file and a rename. A failing run is recorded and the
/// sweep goes on.
SweepSummary runSweep(const ExperimentConfig& config);

std::string summaryCsv(const SweepSummary& summary);
std::string runsCsv(const SweepSummary& summary);

/// Writes `contents` to a sibling temporary file, then renames it over `path`.
void writeFileAtomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace pnp
