#include "pnp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "pnp/errors.hpp"
#include "pnp/image_io.hpp"
#include "pnp/kernel_bank.hpp"
#include "pnp/metrics.hpp"

namespace pnp {

namespace fs = std::filesystem;
using nlohmann::json;

std::string toString(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::Deblur: return "deblur";
    case ProblemKind::SuperRes: return "sr";
    case ProblemKind::Inpaint: return "inpaint";
  }
  return "?";
}

ProblemKind problemKindFromString(const std::string& name) {
  if (name == "deblur") return ProblemKind::Deblur;
  if (name == "sr") return ProblemKind::SuperRes;
  if (name == "inpaint") return ProblemKind::Inpaint;
  throw ConfigError("unknown problem '" + name + "' (expected deblur, sr or inpaint)");
}

std::string toString(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::SigmaCoeff: return "sigma_coeff";
    case SweepAxis::Lambda: return "lambda";
    case SweepAxis::Tau0: return "tau0";
    case SweepAxis::MaskP: return "mask_p";
  }
  return "?";
}

SweepAxis sweepAxisFromString(const std::string& name) {
  if (name == "sigma_coeff") return SweepAxis::SigmaCoeff;
  if (name == "lambda") return SweepAxis::Lambda;
  if (name == "tau0") return SweepAxis::Tau0;
  if (name == "mask_p") return SweepAxis::MaskP;
  throw ConfigError("unknown sweep axis '" + name + "' (expected sigma_coeff, lambda, tau0 or mask_p)");
}

namespace {

bool isAnalytic(const std::string& model) { return model.rfind("analytic:", 0) == 0; }

bool isBuiltinKernel(const std::string& ref) {
  if (ref == "identity" || ref == "bank:sr" || ref == "bank:motion") return true;
  for (const char* prefix : {"gauss:", "motion:", "sr:", "motion-bank:"})
    if (ref.rfind(prefix, 0) == 0) return true;
  return false;
}

// FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t runSeed(std::uint64_t seed, const std::string& image, const std::string& salt) {
  return fnv1a(salt, fnv1a(image, fnv1a(std::to_string(seed))));
}

void checkKeys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end())
      throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

fs::path resolvePath(const fs::path& p, const fs::path& base) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

std::vector<double> parseModelArgs(const std::string& model) {
  std::vector<double> out;
  std::stringstream in(model.substr(std::string("analytic:filter:").size()));
  std::string part;
  while (std::getline(in, part, ':')) {
    try {
      out.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw ConfigError("bad number in denoiser spec '" + model + "'");
    }
  }
  return out;
}

}  // namespace

// ---- config ----

void ExperimentConfig::validate() const {
  if (!(problem.nu >= 0.0)) throw ConfigError("nu must be >= 0");
  if (problem.kind == ProblemKind::SuperRes && problem.scale < 1) throw ConfigError("scale must be >= 1");
  if (!(problem.maskP >= 0.0 && problem.maskP <= 1.0)) throw ConfigError("mask_p must lie in [0, 1]");
  if (problem.kind != ProblemKind::Inpaint) {
    if (problem.kernels.empty()) throw ConfigError("at least one kernel is required");
    for (const auto& ref : expandKernelRefs(problem.kernels)) {
      if (!isBuiltinKernel(ref) && !fs::exists(ref)) throw ConfigError("kernel file not found: " + ref);
      resolveKernel(ref);
    }
  }
  params.validate(algorithm);
  if (!(initDenoiseCoeff >= 0.0)) throw ConfigError("init_denoise_coeff must be >= 0");
  if (!(denoiser.sigmaCoeff >= 0.0)) throw ConfigError("sigma_coeff must be >= 0");
  if (!(denoiser.alpha > 0.0 && denoiser.alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  if (isAnalytic(denoiser.model)) {
    if (denoiser.model != "analytic:identity" && denoiser.model.rfind("analytic:filter:", 0) != 0)
      throw ConfigError("unknown analytic denoiser '" + denoiser.model + "'");
    if (denoiser.model != "analytic:identity" && parseModelArgs(denoiser.model).size() != 3)
      throw ConfigError("analytic:filter needs WEIGHT:SIGMA:SIZE");
  } else if (!fs::exists(denoiser.model)) {
    throw ConfigError("model file not found: " + denoiser.model);
  }
  if (images.empty()) throw ConfigError("at least one input image is required");
  for (const auto& image : images)
    if (!fs::exists(image)) throw ConfigError("image not found: " + image.string());
  if (crop < 0) throw ConfigError("crop must be >= 0");
  if (workers < 0) throw ConfigError("workers must be >= 0");
  if (sweep) {
    if (sweep->values.empty()) throw ConfigError("sweep needs at least one value");
    for (double v : sweep->values)
      if (!std::isfinite(v)) throw ConfigError("sweep values must be finite");
  }
}

ExperimentConfig configFromJson(const std::string& text, const fs::path& baseDir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  checkKeys(doc, {"problem", "algorithm", "params", "denoiser", "sweep", "images", "crop", "seed", "workers",
                  "output_dir"},
            "config");

  ExperimentConfig c;
  try {
    if (doc.contains("algorithm")) c.algorithm = algorithmFromString(doc["algorithm"].get<std::string>());
    c.params = PnPParams::defaults(c.algorithm);

    if (doc.contains("problem")) {
      const json& p = doc["problem"];
      checkKeys(p, {"kind", "kernels", "scale", "mask_p", "nu"}, "problem");
      if (p.contains("kind")) c.problem.kind = problemKindFromString(p["kind"].get<std::string>());
      if (c.problem.kind == ProblemKind::SuperRes) c.problem.kernels = {"bank:sr"};
      if (p.contains("kernels")) {
        c.problem.kernels.clear();
        for (const auto& k : p["kernels"]) {
          std::string ref = k.get<std::string>();
          if (!isBuiltinKernel(ref)) ref = resolvePath(ref, baseDir).string();
          c.problem.kernels.push_back(ref);
        }
      }
      if (p.contains("scale")) c.problem.scale = p["scale"].get<int>();
      if (p.contains("mask_p")) c.problem.maskP = p["mask_p"].get<double>();
      if (p.contains("nu")) c.problem.nu = p["nu"].get<double>();
    }

    if (doc.contains("params")) {
      const json& p = doc["params"];
      checkKeys(p, {"lambda", "tau0", "gamma", "eta", "beta", "max_iters", "rel_tol", "tau_min", "max_shrinks",
                    "init_denoise_coeff"},
                "params");
      if (p.contains("lambda")) c.params.lambda = p["lambda"].get<double>();
      c.params.tau0 = c.params.lambda;
      if (p.contains("tau0")) {
        c.params.tau0 = p["tau0"].get<double>();
        c.tau0FollowsLambda = false;
      }
      if (p.contains("gamma")) c.params.gamma = p["gamma"].get<double>();
      if (p.contains("eta")) c.params.eta = p["eta"].get<double>();
      if (p.contains("beta")) c.params.beta = p["beta"].get<double>();
      if (p.contains("max_iters")) c.params.maxIters = p["max_iters"].get<int>();
      if (p.contains("rel_tol")) c.params.relTol = p["rel_tol"].get<double>();
      if (p.contains("tau_min")) c.params.tauMin = p["tau_min"].get<double>();
      if (p.contains("max_shrinks")) c.params.maxShrinks = p["max_shrinks"].get<int>();
      if (p.contains("init_denoise_coeff")) c.initDenoiseCoeff = p["init_denoise_coeff"].get<double>();
    }

    if (doc.contains("denoiser")) {
      const json& d = doc["denoiser"];
      checkKeys(d, {"model", "sigma_coeff", "alpha"}, "denoiser");
      if (d.contains("model")) {
        c.denoiser.model = d["model"].get<std::string>();
        if (!isAnalytic(c.denoiser.model)) c.denoiser.model = resolvePath(c.denoiser.model, baseDir).string();
      }
      if (d.contains("sigma_coeff")) c.denoiser.sigmaCoeff = d["sigma_coeff"].get<double>();
      if (d.contains("alpha")) c.denoiser.alpha = d["alpha"].get<double>();
    }

    if (doc.contains("sweep") && !doc["sweep"].is_null()) {
      const json& s = doc["sweep"];
      checkKeys(s, {"axis", "values"}, "sweep");
      if (!s.contains("axis") || !s.contains("values")) throw ConfigError("sweep needs exactly one axis and its values");
      if (!s["axis"].is_string()) throw ConfigError("sweep axis must be a single name");
      Sweep sweep;
      sweep.axis = sweepAxisFromString(s["axis"].get<std::string>());
      sweep.values = s["values"].get<std::vector<double>>();
      c.sweep = sweep;
    }

    if (doc.contains("images"))
      for (const auto& im : doc["images"]) c.images.push_back(resolvePath(im.get<std::string>(), baseDir));
    if (doc.contains("crop")) c.crop = doc["crop"].get<int>();
    if (doc.contains("seed")) c.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("workers")) c.workers = doc["workers"].get<int>();
    if (doc.contains("output_dir")) c.outputDir = resolvePath(doc["output_dir"].get<std::string>(), baseDir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config has a value of the wrong type: ") + e.what());
  }
  return c;
}

ExperimentConfig loadConfig(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return configFromJson(buffer.str(), path.parent_path());
}

std::string configToJson(const ExperimentConfig& c) {
  json doc;
  doc["problem"] = {{"kind", toString(c.problem.kind)},
                    {"kernels", c.problem.kernels},
                    {"scale", c.problem.scale},
                    {"mask_p", c.problem.maskP},
                    {"nu", c.problem.nu}};
  doc["algorithm"] = toString(c.algorithm);
  json params = {{"lambda", c.params.lambda},   {"gamma", c.params.gamma},
                 {"eta", c.params.eta},         {"beta", c.params.beta},
                 {"max_iters", c.params.maxIters}, {"rel_tol", c.params.relTol},
                 {"tau_min", c.params.tauMin},  {"max_shrinks", c.params.maxShrinks},
                 {"init_denoise_coeff", c.initDenoiseCoeff}};
  if (!c.tau0FollowsLambda) params["tau0"] = c.params.tau0;
  doc["params"] = params;
  doc["denoiser"] = {{"model", c.denoiser.model}, {"sigma_coeff", c.denoiser.sigmaCoeff}, {"alpha", c.denoiser.alpha}};
  if (c.sweep) doc["sweep"] = {{"axis", toString(c.sweep->axis)}, {"values", c.sweep->values}};
  std::vector<std::string> images;
  for (const auto& im : c.images) images.push_back(im.string());
  doc["images"] = images;
  doc["crop"] = c.crop;
  doc["seed"] = c.seed;
  doc["workers"] = c.workers;
  doc["output_dir"] = c.outputDir.string();
  return doc.dump(2) + "\n";
}

// ---- problems and denoisers ----

Field centerCrop(const Field& image, int crop) {
  if (crop <= 0 || (crop >= image.height() && crop >= image.width())) return image;
  const int h = std::min(crop, image.height()), w = std::min(crop, image.width());
  const int i0 = (image.height() - h) / 2, j0 = (image.width() - w) / 2;
  Field out(h, w, image.channels());
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int c = 0; c < image.channels(); ++c) out(i, j, c) = image(i0 + i, j0 + j, c);
  return out;
}

Problem makeProblem(const ProblemSpec& spec, const Field& clean, const std::string& kernelRef, std::uint64_t seed) {
  DegradationModel model;
  model.noiseStd = spec.nu;
  switch (spec.kind) {
    case ProblemKind::Deblur:
      model.kind = Deblur{resolveKernel(kernelRef)};
      break;
    case ProblemKind::SuperRes:
      if (clean.height() % spec.scale != 0 || clean.width() % spec.scale != 0)
        throw ConfigError("image size " + toString(clean.shape()) + " is not a multiple of the scale");
      model.kind = SuperRes{resolveKernel(kernelRef), spec.scale};
      break;
    case ProblemKind::Inpaint:
      model.kind = Inpaint{randomMask(clean.height(), clean.width(), spec.maskP, seed ^ 0x6d61736bULL)};
      break;
  }
  model.validate();

  Field observation;
  if (spec.kind == ProblemKind::Inpaint) {
    // Noise only on observed pixels; hidden ones stay at zero.
    observation = apply(model, spec.nu > 0.0 ? addGaussianNoise(clean, spec.nu, seed) : clean);
  } else {
    observation = apply(model, clean);
    if (spec.nu > 0.0) observation = addGaussianNoise(observation, spec.nu, seed);
  }

  const bool indicator = spec.kind == ProblemKind::Inpaint && spec.nu == 0.0;
  DataFidelity fid = indicator ? DataFidelity::indicator(model, observation)
                               : DataFidelity::quadratic(model, observation, clean.shape());
  Field init = initialEstimate(fid);
  return Problem{clean, std::move(observation), std::move(fid), std::move(init)};
}

PotentialDenoiser makeDenoiser(const DenoiserSpec& spec, Shape shape, double sigma,
                               std::shared_ptr<const SmoothNet> net) {
  PotentialDenoiser d;
  if (spec.model == "analytic:identity") {
    d = analyticFilterDenoiser(1.0, Kernel::impulse(), 0.0, shape, sigma);
  } else if (spec.model.rfind("analytic:filter:", 0) == 0) {
    const auto args = parseModelArgs(spec.model);
    if (args.size() != 3) throw ConfigError("analytic:filter needs WEIGHT:SIGMA:SIZE");
    try {
      const Kernel g = makeGaussianKernel(args[1], args[1], 0.0, static_cast<int>(args[2]));
      d = analyticFilterDenoiser(1.0 - args[0], g, args[0], shape, sigma);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("analytic filter denoiser: ") + e.what());
    }
  } else {
    if (!net) net = std::make_shared<const SmoothNet>(loadModel(spec.model).net);
    d = netDenoiser(std::move(net), sigma);
  }
  d.alpha = spec.alpha;
  d.validate();
  return d;
}

// ---- runs ----

RestoreOutcome restore(const ExperimentConfig& config, const Field& clean, const std::string& imageId,
                       const std::string& kernelRef, std::shared_ptr<const SmoothNet> net) {
  const std::string salt = config.problem.kind == ProblemKind::Inpaint ? std::string("mask") : kernelRef;
  Problem problem = makeProblem(config.problem, clean, kernelRef, runSeed(config.seed, imageId, salt));
  const double sigma = config.denoiser.sigmaCoeff * config.problem.nu;
  PotentialDenoiser d = makeDenoiser(config.denoiser, clean.shape(), sigma, std::move(net));

  PnPParams params = config.params;
  params.seed = config.seed;
  if (config.algorithm == Algorithm::GradientStep) {
    const double initSigma = config.initDenoiseCoeff * config.problem.nu;
    if (initSigma > 0.0) params.initDenoiseSigma = initSigma;
  }

  RestoreOutcome out;
  out.run = runAlgorithm(config.algorithm, params, problem.fidelity, d, problem.init, &problem.clean);
  out.observation = problem.observation;
  out.observedPsnr = psnr(problem.init, problem.clean);
  out.finalPsnr = psnr(out.run.output, problem.clean);
  out.bestPsnr = out.finalPsnr;
  for (const auto& r : out.run.trace.records)
    if (r.psnr) out.bestPsnr = std::max(out.bestPsnr, *r.psnr);
  out.iterations = static_cast<int>(out.run.trace.records.size());
  return out;
}

void writeFileAtomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << contents;
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

void writePngAtomic(const fs::path& path, const Field& image) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  writePng(tmp, image);
  fs::rename(tmp, path);
}

Field loadInput(const ExperimentConfig& config, const fs::path& path) {
  return centerCrop(readImage(path), config.crop);
}

std::shared_ptr<const SmoothNet> loadNet(const DenoiserSpec& spec) {
  if (isAnalytic(spec.model)) return nullptr;
  return std::make_shared<const SmoothNet>(loadModel(spec.model).net);
}

std::string fileSafe(std::string s) {
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.' && c != '_') c = '_';
  return s;
}

std::string kernelLabel(const std::string& ref) {
  return isBuiltinKernel(ref) ? ref : fs::path(ref).stem().string();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmtShort(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

RestoreOutcome restoreOnce(const ExperimentConfig& config) {
  config.validate();
  const std::vector<std::string> kernels =
      config.problem.kind == ProblemKind::Inpaint ? std::vector<std::string>{"none"}
                                                  : expandKernelRefs(config.problem.kernels);
  const Field clean = loadInput(config, config.images.front());
  RestoreOutcome out =
      restore(config, clean, config.images.front().filename().string(), kernels.front(), loadNet(config.denoiser));
  writePngAtomic(config.outputDir / "restored.png", out.run.output);
  writePngAtomic(config.outputDir / "observed.png", out.observation);
  writeFileAtomic(config.outputDir / "trace.csv", traceCsv(out.run.trace));
  return out;
}

ExperimentConfig withSweepValue(const ExperimentConfig& config, SweepAxis axis, double value) {
  ExperimentConfig c = config;
  switch (axis) {
    case SweepAxis::SigmaCoeff:
      c.denoiser.sigmaCoeff = value;
      break;
    case SweepAxis::Lambda:
      c.params.lambda = value;
      if (c.tau0FollowsLambda) c.params.tau0 = value;
      break;
    case SweepAxis::Tau0:
      c.params.tau0 = value;
      c.tau0FollowsLambda = false;
      break;
    case SweepAxis::MaskP:
      c.problem.maskP = value;
      break;
  }
  c.sweep.reset();
  return c;
}

SweepSummary runSweep(const ExperimentConfig& config) {
  config.validate();
  if (!config.sweep) throw ConfigError("a sweep needs exactly one sweep axis");
  const Sweep& sweep = *config.sweep;

  const std::vector<std::string> kernels =
      config.problem.kind == ProblemKind::Inpaint ? std::vector<std::string>{"none"}
                                                  : expandKernelRefs(config.problem.kernels);
  const auto net = loadNet(config.denoiser);
  std::vector<Field> cleans;
  for (const auto& path : config.images) cleans.push_back(loadInput(config, path));

  struct Job {
    std::size_t image, kernel, value;
  };
  std::vector<Job> jobs;
  for (std::size_t v = 0; v < sweep.values.size(); ++v)
    for (std::size_t i = 0; i < cleans.size(); ++i)
      for (std::size_t k = 0; k < kernels.size(); ++k) jobs.push_back({i, k, v});

  SweepSummary summary;
  summary.axis = sweep.axis;
  summary.runs.resize(jobs.size());

  auto runJob = [&](std::size_t n) {
    const Job& job = jobs[n];
    SweepRun& run = summary.runs[n];
    run.image = config.images[job.image].filename().string();
    run.kernel = kernels[job.kernel];
    run.value = sweep.values[job.value];
    run.tracePath = config.outputDir / "traces" /
                    (fileSafe(config.images[job.image].stem().string()) + "__" +
                     fileSafe(kernelLabel(run.kernel)) + "__" + toString(sweep.axis) + "=" +
                     fileSafe(fmtShort(run.value)) + ".csv");
    try {
      const ExperimentConfig c = withSweepValue(config, sweep.axis, run.value);
      RestoreOutcome out = restore(c, cleans[job.image], run.image, run.kernel, net);
      writeFileAtomic(run.tracePath, traceCsv(out.run.trace));
      run.traceIssues = validateTrace(readTraceCsv(run.tracePath), c.params.maxIters);
      run.ok = true;
      run.observedPsnr = out.observedPsnr;
      run.finalPsnr = out.finalPsnr;
      run.bestPsnr = out.bestPsnr;
      run.iterations = out.iterations;
      run.stop = toString(out.run.trace.stop);
    } catch (const std::exception& e) {
      run.ok = false;
      run.error = e.what();
    }
  };

  int workers = config.workers > 0 ? config.workers : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, static_cast<int>(std::max<std::size_t>(jobs.size(), 1)));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t n = next++; n < jobs.size(); n = next++) runJob(n);
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Sum in (image, kernel) order so the means do not depend on the order of
  // the kernel list.
  for (std::size_t v = 0; v < sweep.values.size(); ++v) {
    std::vector<const SweepRun*> group;
    for (const auto& run : summary.runs)
      if (run.value == sweep.values[v]) group.push_back(&run);
    std::sort(group.begin(), group.end(), [](const SweepRun* a, const SweepRun* b) {
      return std::tie(a->image, a->kernel) < std::tie(b->image, b->kernel);
    });
    SweepRow row;
    row.value = sweep.values[v];
    double sumFinal = 0.0, sumBest = 0.0, sumIters = 0.0;
    int ok = 0;
    for (const SweepRun* run : group) {
      ++row.runs;
      if (!run->ok) {
        ++row.failures;
        continue;
      }
      if (!run->traceIssues.empty()) ++row.invalidTraces;
      sumFinal += run->finalPsnr;
      sumBest += run->bestPsnr;
      sumIters += run->iterations;
      ++ok;
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.meanFinalPsnr = ok ? sumFinal / ok : nan;
    row.meanBestPsnr = ok ? sumBest / ok : nan;
    row.meanIterations = ok ? sumIters / ok : nan;
    summary.rows.push_back(row);
  }

  writeFileAtomic(config.outputDir / "runs.csv", runsCsv(summary));
  writeFileAtomic(config.outputDir / "summary.csv", summaryCsv(summary));
  return summary;
}

std::string summaryCsv(const SweepSummary& summary) {
  std::string out = "axis,value,runs,failures,invalid_traces,mean_final_psnr,mean_best_psnr,mean_iterations\n";
  for (const auto& row : summary.rows) {
    out += toString(summary.axis) + "," + fmt(row.value) + "," + std::to_string(row.runs) + "," +
           std::to_string(row.failures) + "," + std::to_string(row.invalidTraces) + "," + fmt(row.meanFinalPsnr) +
           "," + fmt(row.meanBestPsnr) + "," + fmt(row.meanIterations) + "\n";
  }
  return out;
}

std::string runsCsv(const SweepSummary& summary) {
  std::string out = "image,kernel,value,status,observed_psnr,final_psnr,best_psnr,iterations,stop,trace,message\n";
  for (const auto& run : summary.runs) {
    std::string message = run.ok ? "" : run.error;
    for (const auto& issue : run.traceIssues) message += (message.empty() ? "" : "; ") + issue;
    std::replace(message.begin(), message.end(), ',', ';');
    std::replace(message.begin(), message.end(), '\n', ' ');
    const char* status = !run.ok ? "failed" : run.traceIssues.empty() ? "ok" : "invalid-trace";
    out += run.image + "," + run.kernel + "," + fmt(run.value) + "," + status + "," +
           (run.ok ? fmt(run.observedPsnr) + "," + fmt(run.finalPsnr) + "," + fmt(run.bestPsnr) + "," +
                         std::to_string(run.iterations) + "," + run.stop
                   : std::string(",,,,")) +
           "," + run.tracePath.filename().string() + "," + message + "\n";
  }
  return out;
}

}  // namespace pnp
