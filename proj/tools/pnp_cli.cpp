// Command-line front end: restore, sweep, train, denoise, make-kernels.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "pnp/errors.hpp"
#include "pnp/experiment.hpp"
#include "pnp/image_io.hpp"
#include "pnp/kernel_bank.hpp"
#include "pnp/metrics.hpp"
#include "pnp/training.hpp"

namespace fs = std::filesystem;
using namespace pnp;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

// Flags shared by restore and sweep; each one overrides the config file.
struct RunFlags {
  std::string config;
  std::optional<std::string> problem, algo, kernel, model, out, image;
  std::optional<double> nu, sigmaCoeff, lambda, tau0, beta, alpha, maskP;
  std::optional<int> scale, maxIters, crop, workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> axis;
  std::vector<double> values;

  void attach(CLI::App* app, bool sweep) {
    app->add_option("--config", config, "JSON experiment config")->check(CLI::ExistingFile);
    app->add_option("--problem", problem, "deblur | sr | inpaint");
    app->add_option("--algo", algo, "gs | pgd | drsdiff | drs");
    app->add_option("--nu", nu, "observation noise level");
    app->add_option("--sigma-coeff", sigmaCoeff, "denoiser sigma = c * nu");
    app->add_option("--lambda", lambda);
    app->add_option("--tau0", tau0, "initial step (gs)");
    app->add_option("--beta", beta, "averaging (drsdiff / drs)");
    app->add_option("--alpha", alpha, "denoiser relaxation");
    app->add_option("--scale", scale, "super-resolution factor");
    app->add_option("--mask-p", maskP, "probability that a pixel is hidden");
    app->add_option("--kernel", kernel, "kernel reference or file");
    app->add_option("--model", model, "model file or analytic:identity / analytic:filter:W:S:N");
    app->add_option("--max-iters", maxIters);
    app->add_option("--seed", seed);
    app->add_option("--out", out, "output directory");
    app->add_option("--image", image, "input image (replaces the config's list)");
    app->add_option("--crop", crop, "center crop size");
    if (sweep) {
      app->add_option("--workers", workers, "parallel runs (0 = all cores)");
      app->add_option("--axis", axis, "sigma_coeff | lambda | tau0 | mask_p");
      app->add_option("--values", values, "sweep values")->delimiter(',');
    }
  }

  ExperimentConfig build() const {
    ExperimentConfig c = config.empty() ? ExperimentConfig{} : loadConfig(config);
    if (algo) {
      const Algorithm a = algorithmFromString(*algo);
      if (a != c.algorithm) {
        // Fresh scheme defaults, keeping only what the user set explicitly.
        c.params = PnPParams::defaults(a);
        c.tau0FollowsLambda = true;
      }
      c.algorithm = a;
    }
    if (problem) {
      const ProblemKind kind = problemKindFromString(*problem);
      if (kind == ProblemKind::SuperRes && c.problem.kind != kind && !kernel) c.problem.kernels = {"bank:sr"};
      c.problem.kind = kind;
    }
    if (nu) c.problem.nu = *nu;
    if (sigmaCoeff) c.denoiser.sigmaCoeff = *sigmaCoeff;
    if (lambda) {
      c.params.lambda = *lambda;
      if (c.tau0FollowsLambda) c.params.tau0 = *lambda;
    }
    if (tau0) {
      c.params.tau0 = *tau0;
      c.tau0FollowsLambda = false;
    }
    if (beta) c.params.beta = *beta;
    if (alpha) c.denoiser.alpha = *alpha;
    if (scale) c.problem.scale = *scale;
    if (maskP) c.problem.maskP = *maskP;
    if (kernel) c.problem.kernels = {*kernel};
    if (model) c.denoiser.model = *model;
    if (maxIters) c.params.maxIters = *maxIters;
    if (seed) c.seed = *seed;
    if (out) c.outputDir = *out;
    if (image) c.images = {*image};
    if (crop) c.crop = *crop;
    if (workers) c.workers = *workers;
    if (axis || !values.empty()) {
      Sweep s = c.sweep.value_or(Sweep{});
      if (axis) s.axis = sweepAxisFromString(*axis);
      if (!values.empty()) s.values = values;
      c.sweep = s;
    }
    return c;
  }
};

int cmdRestore(const RunFlags& flags) {
  const ExperimentConfig c = flags.build();
  const RestoreOutcome out = restoreOnce(c);
  for (const auto& w : out.run.trace.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::printf("algorithm   %s\n", toString(c.algorithm).c_str());
  std::printf("iterations  %d (%s)\n", out.iterations, toString(out.run.trace.stop).c_str());
  std::printf("psnr        observed %.3f dB, restored %.3f dB, best %.3f dB\n", out.observedPsnr, out.finalPsnr,
              out.bestPsnr);
  std::printf("written to  %s\n", c.outputDir.string().c_str());
  return 0;
}

int cmdSweep(const RunFlags& flags) {
  const ExperimentConfig c = flags.build();
  const SweepSummary s = runSweep(c);
  std::fputs(summaryCsv(s).c_str(), stdout);
  int failures = 0;
  for (const auto& row : s.rows) failures += row.failures;
  if (failures > 0) std::fprintf(stderr, "%d run(s) failed; see runs.csv\n", failures);
  return 0;
}

struct TrainFlags {
  std::string data, out, mode = "gs", init, activation = "elu", lossTrace;
  int channels = 3, epochs = 50, batch = 16, patch = 32, batchesPerEpoch = 16, halving = 10, powerIters = 50;
  int taps = 5;
  std::vector<int> widths{16, 16};
  double lr = 1e-4, sigmaMin = 0.0, sigmaMax = 50.0 / 255.0, penalty = 1e-3, margin = 0.05;
  std::uint64_t seed = 0;
  bool synthetic = false;
};

// Fills every option the command line left unset from a JSON document whose
// keys are the long option names with '-' replaced by '_'.
void applyTrainConfig(const CLI::App& cmd, const std::string& path, TrainFlags& f) {
  std::ifstream in(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("train config " + path + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("train config must be a JSON object");
  const fs::path base = fs::path(path).parent_path();
  auto relative = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (base / p).string(); };
  for (const auto& [key, value] : doc.items()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    const CLI::Option* opt = nullptr;
    try {
      opt = cmd.get_option(flag);
    } catch (const CLI::OptionNotFound&) {
      throw ConfigError("unknown key '" + key + "' in train config");
    }
    if (opt->count() > 0 || key == "config") continue;
    try {
      if (key == "data") f.data = relative(value.get<std::string>());
      else if (key == "synthetic") f.synthetic = value.get<bool>();
      else if (key == "out") f.out = relative(value.get<std::string>());
      else if (key == "mode") f.mode = value.get<std::string>();
      else if (key == "init") f.init = relative(value.get<std::string>());
      else if (key == "activation") f.activation = value.get<std::string>();
      else if (key == "widths") f.widths = value.get<std::vector<int>>();
      else if (key == "taps") f.taps = value.get<int>();
      else if (key == "channels") f.channels = value.get<int>();
      else if (key == "epochs") f.epochs = value.get<int>();
      else if (key == "batch") f.batch = value.get<int>();
      else if (key == "patch") f.patch = value.get<int>();
      else if (key == "batches_per_epoch") f.batchesPerEpoch = value.get<int>();
      else if (key == "lr") f.lr = value.get<double>();
      else if (key == "halving") f.halving = value.get<int>();
      else if (key == "sigma_min") f.sigmaMin = value.get<double>();
      else if (key == "sigma_max") f.sigmaMax = value.get<double>();
      else if (key == "penalty") f.penalty = value.get<double>();
      else if (key == "margin") f.margin = value.get<double>();
      else if (key == "power_iters") f.powerIters = value.get<int>();
      else if (key == "loss_trace") f.lossTrace = relative(value.get<std::string>());
      else if (key == "seed") f.seed = value.get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("train config key '" + key + "': " + e.what());
    }
  }
}

int cmdTrain(const TrainFlags& f) {
  TrainConfig cfg;
  cfg.sigmaMin = f.sigmaMin;
  cfg.sigmaMax = f.sigmaMax;
  cfg.batchSize = f.batch;
  cfg.patchSize = f.patch;
  cfg.epochs = f.epochs;
  cfg.batchesPerEpoch = f.batchesPerEpoch;
  cfg.learningRate = f.lr;
  cfg.halvingEvery = f.halving;
  cfg.powerIters = f.powerIters;
  cfg.penaltyMargin = f.margin;
  cfg.seed = f.seed;
  if (f.mode == "prox") {
    cfg.penaltyWeight = f.penalty;
  } else if (f.mode != "gs") {
    throw ConfigError("--mode must be gs or prox");
  }
  cfg.validate();

  const Dataset ds = f.synthetic ? Dataset::synthetic(12, 96, f.channels, f.seed)
                                 : Dataset::fromDirectory(f.data, f.channels);
  auto report = [](const EpochStats& e) {
    if (e.penalized) {
      std::printf("epoch %3d  loss %.5f  penalty %.5f  |||J||| %.4f\n", e.epoch, e.loss, e.penaltyMean,
                  e.specNormMean);
    } else {
      std::printf("epoch %3d  loss %.5f\n", e.epoch, e.loss);
    }
    std::fflush(stdout);
  };

  TrainResult result = [&] {
    if (f.mode == "prox") {
      if (f.init.empty()) throw ConfigError("--mode prox needs --init with a trained model");
      return fineTuneProx(cfg, ds, loadModel(f.init).net, report);
    }
    if (!f.init.empty()) return trainGS(cfg, ds, loadModel(f.init).net, report);
    NetSpec spec;
    spec.imageChannels = f.channels;
    spec.hiddenWidths = f.widths;
    spec.taps = f.taps;
    spec.activation = activationFromString(f.activation);
    return trainGS(cfg, ds, spec, report);
  }();

  ModelMetadata meta;
  meta.sigmaMin = f.sigmaMin;
  meta.sigmaMax = f.sigmaMax;
  meta.penaltyWeight = cfg.penaltyWeight;
  meta.epochs = f.epochs;
  meta.mode = f.mode;
  if (fs::path(f.out).has_parent_path()) fs::create_directories(fs::path(f.out).parent_path());
  saveModel(f.out, result.net, meta);
  if (!f.lossTrace.empty()) writeLossTrace(f.lossTrace, result.trace);
  std::printf("saved %s (%zu parameters)\n", f.out.c_str(), result.net.parameterCount());
  return 0;
}

struct DenoiseFlags {
  std::string model, image, out;
  double sigma = 0.03, alpha = 1.0;
  std::optional<double> noise;
  std::uint64_t seed = 0;
};

int cmdDenoise(const DenoiseFlags& f) {
  const Field clean = readImage(f.image);
  const Field input = f.noise ? addGaussianNoise(clean, *f.noise, f.seed) : clean;
  DenoiserSpec spec;
  spec.model = f.model;
  spec.alpha = f.alpha;
  const PotentialDenoiser d = makeDenoiser(spec, input.shape(), f.sigma);
  const Field output = denoise(d, input);
  writeImage(f.out, output);
  if (f.noise) {
    std::printf("psnr  noisy %.3f dB, denoised %.3f dB\n", psnr(input, clean), psnr(output, clean));
  }
  std::printf("written to %s\n", f.out.c_str());
  return 0;
}

int cmdMakeKernels(const std::string& dir, const std::string& which, int size) {
  fs::create_directories(dir);
  std::vector<NamedKernel> all;
  if (which == "sr" || which == "all")
    for (auto& k : superResolutionBank(size)) all.push_back(std::move(k));
  if (which == "motion" || which == "all")
    for (auto& k : motionBank(size)) all.push_back(std::move(k));
  if (all.empty()) throw ConfigError("--which must be sr, motion or all");
  for (const auto& k : all) {
    std::string name = k.id;
    for (char& ch : name)
      if (ch == ':') ch = '_';
    const fs::path path = fs::path(dir) / (name + ".txt");
    writeKernelText(path, k.kernel);
    std::printf("%s\n", path.string().c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Plug-and-play restoration with gradient-step denoisers"};
  app.require_subcommand(1);

  RunFlags restoreFlags, sweepFlags;
  auto* restore = app.add_subcommand("restore", "run one restoration");
  restoreFlags.attach(restore, false);
  auto* sweep = app.add_subcommand("sweep", "parameter sweep over images and kernels");
  sweepFlags.attach(sweep, true);

  TrainFlags tf;
  std::string trainConfig;
  auto* train = app.add_subcommand("train", "train a gradient-step denoiser");
  train->add_option("--config", trainConfig, "JSON file with the options below (snake_case keys)")
      ->check(CLI::ExistingFile);
  train->add_option("--data", tf.data, "directory of training images");
  train->add_flag("--synthetic", tf.synthetic, "train on generated textures instead");
  train->add_option("--out", tf.out, "model file to write");
  train->add_option("--mode", tf.mode, "gs | prox (spectral-penalty fine-tuning)");
  train->add_option("--init", tf.init, "model to start from");
  train->add_option("--activation", tf.activation, "elu | softplus");
  train->add_option("--widths", tf.widths, "hidden layer widths")->delimiter(',');
  train->add_option("--taps", tf.taps, "convolution size");
  train->add_option("--channels", tf.channels);
  train->add_option("--epochs", tf.epochs);
  train->add_option("--batch", tf.batch);
  train->add_option("--patch", tf.patch);
  train->add_option("--batches-per-epoch", tf.batchesPerEpoch);
  train->add_option("--lr", tf.lr);
  train->add_option("--halving", tf.halving, "halve the learning rate every N epochs");
  train->add_option("--sigma-min", tf.sigmaMin);
  train->add_option("--sigma-max", tf.sigmaMax);
  train->add_option("--penalty", tf.penalty, "spectral penalty weight (prox mode)");
  train->add_option("--margin", tf.margin, "spectral penalty margin");
  train->add_option("--power-iters", tf.powerIters);
  train->add_option("--loss-trace", tf.lossTrace, "per-epoch loss CSV");
  train->add_option("--seed", tf.seed);

  DenoiseFlags df;
  auto* den = app.add_subcommand("denoise", "apply a denoiser to an image");
  den->add_option("--model", df.model)->required();
  den->add_option("--image", df.image)->required()->check(CLI::ExistingFile);
  den->add_option("--out", df.out)->required();
  den->add_option("--sigma", df.sigma, "denoiser noise level");
  den->add_option("--alpha", df.alpha);
  den->add_option("--noise", df.noise, "add Gaussian noise of this level first");
  den->add_option("--seed", df.seed);

  std::string kernelDir, which = "all";
  int kernelSize = 9;
  auto* mk = app.add_subcommand("make-kernels", "write the kernel banks as text files");
  mk->add_option("--out", kernelDir)->required();
  mk->add_option("--which", which, "sr | motion | all");
  mk->add_option("--size", kernelSize);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*restore) return cmdRestore(restoreFlags);
    if (*sweep) return cmdSweep(sweepFlags);
    if (*train) {
      if (!trainConfig.empty()) applyTrainConfig(*train, trainConfig, tf);
      if (tf.data.empty() && !tf.synthetic) throw ConfigError("train needs --data or --synthetic");
      if (tf.out.empty()) throw ConfigError("train needs --out");
      return cmdTrain(tf);
    }
    if (*den) return cmdDenoise(df);
    if (*mk) return cmdMakeKernels(kernelDir, which, kernelSize);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return kExitConfig;
  } catch (const UnsupportedOperation& e) {
    std::fprintf(stderr, "unsupported: %s\n", e.what());
    return kExitConfig;
  } catch (const NumericalFailure& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
