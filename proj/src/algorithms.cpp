#include "pnp/algorithms.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pnp/errors.hpp"
#include "pnp/metrics.hpp"

namespace pnp {

std::string toString(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::GradientStep: return "gs";
    case Algorithm::ProxPgd: return "pgd";
    case Algorithm::ProxDrsDiff: return "drsdiff";
    case Algorithm::ProxDrs: return "drs";
  }
  throw InvalidArgument("unknown algorithm");
}

Algorithm algorithmFromString(const std::string& name) {
  if (name == "gs") return Algorithm::GradientStep;
  if (name == "pgd") return Algorithm::ProxPgd;
  if (name == "drsdiff") return Algorithm::ProxDrsDiff;
  if (name == "drs") return Algorithm::ProxDrs;
  throw ConfigError("unknown algorithm '" + name + "' (expected gs, pgd, drsdiff or drs)");
}

std::string toString(StopReason reason) {
  switch (reason) {
    case StopReason::MaxIterations: return "max-iterations";
    case StopReason::RelativeDecrease: return "relative-decrease";
    case StopReason::StepFloor: return "step-floor";
    case StopReason::FixedPoint: return "fixed-point";
  }
  return "unknown";
}

PnPParams PnPParams::defaults(Algorithm algorithm) {
  PnPParams p;
  switch (algorithm) {
    case Algorithm::GradientStep:
      p.lambda = 0.065;
      p.tau0 = p.lambda;
      p.maxIters = 400;
      break;
    case Algorithm::ProxPgd:
    case Algorithm::ProxDrsDiff:
      p.lambda = 1.0 / 0.99;
      p.maxIters = 1000;
      p.beta = 1.0;
      break;
    case Algorithm::ProxDrs:
      p.lambda = 1.0 / 0.99;
      p.maxIters = 1000;
      p.beta = 0.5;
      break;
  }
  return p;
}

void PnPParams::validate(Algorithm algorithm) const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be positive and finite");
  if (maxIters < 0) throw ConfigError("maxIters must be >= 0");
  if (algorithm == Algorithm::GradientStep) {
    if (!(tau0 > 0.0)) throw ConfigError("tau0 must be positive");
    if (!(gamma > 0.0 && gamma < 0.5)) throw ConfigError("gamma must lie in (0, 1/2)");
    if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("eta must lie in (0, 1)");
    if (!(relTol >= 0.0)) throw ConfigError("relTol must be >= 0");
    if (!(tauMin >= 0.0)) throw ConfigError("tauMin must be >= 0");
    if (maxShrinks < 1) throw ConfigError("maxShrinks must be >= 1");
    if (initDenoiseSigma && !(*initDenoiseSigma >= 0.0)) throw ConfigError("initial denoising level must be >= 0");
  }
  if (algorithm == Algorithm::ProxDrs || algorithm == Algorithm::ProxDrsDiff) {
    if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in (0, 1]");
  }
}

namespace {

void requireFinite(double v, const char* what, int k) {
  if (!std::isfinite(v)) {
    char msg[160];
    std::snprintf(msg, sizeof msg, "non-finite %s at iteration %d", what, k);
    throw NumericalFailure(msg);
  }
}

void requireFinite(const Field& x, const char* what, int k) {
  if (!x.allFinite()) {
    char msg[160];
    std::snprintf(msg, sizeof msg, "non-finite %s at iteration %d", what, k);
    throw NumericalFailure(msg);
  }
}

std::optional<double> psnrOf(const Field& x, const Field* reference) {
  if (!reference) return std::nullopt;
  return psnr(x, *reference);
}

void checkInputs(const DataFidelity& fid, const PotentialDenoiser& d, const Field& init) {
  d.validate();
  if (init.shape() != fid.signalShape())
    throw DimensionError("initial estimate " + toString(init.shape()) + " does not match signal " +
                         toString(fid.signalShape()));
  if (!init.allFinite()) throw InvalidArgument("initial estimate has non-finite entries");
}

void warnIfLambdaSmall(const PnPParams& p, const DataFidelity& fid, IterateTrace& trace) {
  const double lf = fid.lipschitzGrad();
  if (!(p.lambda > lf)) {
    char msg[160];
    std::snprintf(msg, sizeof msg, "lambda = %.6g does not exceed L_f = %.6g; descent is not guaranteed", p.lambda, lf);
    trace.warnings.emplace_back(msg);
  }
}

/// State of one gradient-step iterate: x, F(x) and D(x).
struct GsPoint {
  Field x;
  double objective = 0.0;
  Field denoised;
};

}  // namespace

RunResult runGSPnP(const PnPParams& p, const DataFidelity& fid, const PotentialDenoiser& d, const Field& init,
                   const Field* reference) {
  p.validate(Algorithm::GradientStep);
  checkInputs(fid, d, init);
  IterateTrace trace;
  trace.algorithm = Algorithm::GradientStep;
  ProjectionStats stats;

  auto evaluate = [&](Field x) {
    const DenoiserEval e = evaluateDenoiser(d, x, &stats);
    GsPoint pt;
    pt.objective = fid.value(x) / p.lambda + e.potential;
    pt.denoised = e.denoised;
    pt.x = std::move(x);
    return pt;
  };

  double tau = p.tau0;
  Field z0 = init;
  if (p.initDenoiseSigma) {
    PotentialDenoiser strong = d;
    strong.sigma = *p.initDenoiseSigma;
    z0 = denoise(strong, z0);
  }
  GsPoint cur = evaluate(prox(fid, z0, tau / p.lambda));
  requireFinite(cur.objective, "objective", 0);
  const double f0 = cur.objective;
  trace.initialObjective = f0;

  int k = 0;
  bool stopped = false;
  while (k < p.maxIters && !stopped) {
    int shrinks = 0;
    for (;;) {
      const Field z = lincomb(1.0, cur.x, -tau, cur.x - cur.denoised);
      GsPoint next = evaluate(prox(fid, z, tau / p.lambda));
      requireFinite(next.objective, "objective", k);
      const double decrease = cur.objective - next.objective;
      const double step = squaredNorm(next.x - cur.x);
      if (decrease >= (p.gamma / tau) * step) {
        IterateRecord rec;
        rec.k = k;
        rec.objective = next.objective;
        rec.lyapunov = next.objective;
        rec.residual = std::sqrt(step);
        rec.psnr = psnrOf(next.x, reference);
        rec.tau = tau;
        rec.shrinks = shrinks;
        trace.records.push_back(rec);
        const double delta = f0 != 0.0 ? decrease / std::abs(f0) : decrease;
        cur = std::move(next);
        ++k;
        if (step == 0.0) {
          trace.stop = StopReason::FixedPoint;
          stopped = true;
        } else if (delta <= p.relTol) {
          trace.stop = StopReason::RelativeDecrease;
          stopped = true;
        }
        break;
      }
      tau *= p.eta;
      ++shrinks;
      if (tau <= p.tauMin) {
        trace.stop = StopReason::StepFloor;
        stopped = true;
        break;
      }
      if (shrinks > p.maxShrinks) {
        char msg[200];
        std::snprintf(msg, sizeof msg,
                      "backtracking exceeded %d shrinks at iteration %d (tau = %.3g); the objective does not "
                      "decrease along the scheme",
                      p.maxShrinks, k, tau);
        throw NumericalFailure(msg);
      }
    }
  }

  RunResult result;
  result.output = lincomb(1.0, cur.x, -tau, cur.x - cur.denoised);
  result.lastIterate = cur.x;
  trace.projectionActivations = stats.activeCalls;
  result.trace = std::move(trace);
  return result;
}

RunResult runProxPGD(const PnPParams& p, const DataFidelity& fid, const PotentialDenoiser& d, const Field& init,
                     const Field* reference) {
  p.validate(Algorithm::ProxPgd);
  checkInputs(fid, d, init);
  if (!fid.smooth()) throw UnsupportedOperation("Prox-PGD needs a differentiable data fidelity");
  IterateTrace trace;
  trace.algorithm = Algorithm::ProxPgd;
  warnIfLambdaSmall(p, fid, trace);
  ProjectionStats stats;

  Field x = init;
  for (int k = 0; k < p.maxIters; ++k) {
    const Field z = lincomb(1.0, x, -1.0 / p.lambda, gradF(fid, x));
    DenoiserEval e = evaluateDenoiser(d, z, &stats);
    requireFinite(e.denoised, "iterate", k);
    IterateRecord rec;
    rec.k = k;
    rec.objective = fid.value(e.denoised) / p.lambda + e.phi;
    rec.lyapunov = rec.objective;
    rec.residual = norm(e.denoised - x);
    rec.psnr = psnrOf(e.denoised, reference);
    requireFinite(rec.objective, "objective", k);
    trace.records.push_back(rec);
    x = std::move(e.denoised);
    if (rec.residual == 0.0) {
      trace.stop = StopReason::FixedPoint;
      break;
    }
  }
  RunResult result;
  result.output = x;
  result.lastIterate = x;
  trace.projectionActivations = stats.activeCalls;
  result.trace = std::move(trace);
  return result;
}

namespace {

/// phi(a) + f(b) / lambda + <u - x, u - v> + 1/2 ||u - v||^2.
double envelope(double phi, double fid, double lambda, const Field& x, const Field& u, const Field& v) {
  const Field uv = u - v;
  return phi + fid / lambda + dot(u - x, uv) + 0.5 * squaredNorm(uv);
}

}  // namespace

RunResult runProxDRSdiff(const PnPParams& p, const DataFidelity& fid, const PotentialDenoiser& d,
                         const Field& init, const Field* reference) {
  p.validate(Algorithm::ProxDrsDiff);
  checkInputs(fid, d, init);
  if (!fid.smooth()) throw UnsupportedOperation("Prox-DRSdiff needs a differentiable data fidelity");
  IterateTrace trace;
  trace.algorithm = Algorithm::ProxDrsDiff;
  warnIfLambdaSmall(p, fid, trace);
  ProjectionStats stats;

  Field x = init;
  Field v = init;
  for (int k = 0; k < p.maxIters; ++k) {
    const Field u = prox(fid, x, 1.0 / p.lambda);
    DenoiserEval e = evaluateDenoiser(d, lincomb(2.0, u, -1.0, x), &stats);
    v = std::move(e.denoised);
    requireFinite(v, "iterate", k);
    IterateRecord rec;
    rec.k = k;
    const double fu = fid.value(u);
    rec.objective = e.phi + fu / p.lambda;
    rec.lyapunov = envelope(e.phi, fu, p.lambda, x, u, v);
    rec.residual = norm(u - v);
    rec.psnr = psnrOf(v, reference);
    requireFinite(rec.lyapunov, "envelope", k);
    trace.records.push_back(rec);
    x = lincomb(1.0, x, 2.0 * p.beta, v - u);
    if (rec.residual == 0.0) {
      trace.stop = StopReason::FixedPoint;
      break;
    }
  }
  RunResult result;
  result.output = v;
  result.lastIterate = x;
  trace.projectionActivations = stats.activeCalls;
  result.trace = std::move(trace);
  return result;
}

RunResult runProxDRS(const PnPParams& p, const DataFidelity& fid, const PotentialDenoiser& d, const Field& init,
                     const Field* reference) {
  p.validate(Algorithm::ProxDrs);
  checkInputs(fid, d, init);
  IterateTrace trace;
  trace.algorithm = Algorithm::ProxDrs;
  ProjectionStats stats;

  Field x = prox(fid, init, 1.0 / p.lambda);
  Field u = x;
  for (int k = 0; k < p.maxIters; ++k) {
    DenoiserEval e = evaluateDenoiser(d, x, &stats);
    u = std::move(e.denoised);
    requireFinite(u, "iterate", k);
    const Field v = prox(fid, lincomb(2.0, u, -1.0, x), 1.0 / p.lambda);
    IterateRecord rec;
    rec.k = k;
    const double fv = fid.value(v);
    rec.objective = e.phi + fv / p.lambda;
    rec.lyapunov = envelope(e.phi, fv, p.lambda, x, u, v);
    rec.residual = norm(u - v);
    rec.psnr = psnrOf(u, reference);
    requireFinite(rec.lyapunov, "envelope", k);
    trace.records.push_back(rec);
    x = lincomb(1.0, x, 2.0 * p.beta, v - u);
    if (rec.residual == 0.0) {
      trace.stop = StopReason::FixedPoint;
      break;
    }
  }
  RunResult result;
  result.output = u;
  result.lastIterate = x;
  trace.projectionActivations = stats.activeCalls;
  result.trace = std::move(trace);
  return result;
}

RunResult runAlgorithm(Algorithm algorithm, const PnPParams& params, const DataFidelity& fid,
                       const PotentialDenoiser& d, const Field& init, const Field* reference) {
  switch (algorithm) {
    case Algorithm::GradientStep: return runGSPnP(params, fid, d, init, reference);
    case Algorithm::ProxPgd: return runProxPGD(params, fid, d, init, reference);
    case Algorithm::ProxDrsDiff: return runProxDRSdiff(params, fid, d, init, reference);
    case Algorithm::ProxDrs: return runProxDRS(params, fid, d, init, reference);
  }
  throw InvalidArgument("unknown algorithm");
}

double evaluateObjective(const Objective& obj, const Field* x, const Field* preimage) {
  if (!obj.fidelity || !obj.denoiser) throw InvalidArgument("objective needs a fidelity and a denoiser");
  if (!(obj.lambda > 0.0)) throw InvalidArgument("lambda must be positive");
  if (obj.kind == ObjectiveKind::GradientStep) {
    if (!x) throw InvalidArgument("objective needs a point");
    return obj.fidelity->value(*x) / obj.lambda + gSigma(*obj.denoiser, *x);
  }
  if (!preimage) throw InvalidArgument("the proximal objective is evaluated from a pre-image z with x = D(z)");
  const DenoiserEval e = evaluateDenoiser(*obj.denoiser, *preimage);
  return obj.fidelity->value(e.denoised) / obj.lambda + e.phi;
}

// ---- traces ----

std::string traceCsv(const IterateTrace& trace) {
  std::string out = std::string(kTraceHeader) + "\n";
  char line[256];
  for (const IterateRecord& r : trace.records) {
    char psnrText[40] = "";
    if (r.psnr) {
      if (std::isinf(*r.psnr))
        std::snprintf(psnrText, sizeof psnrText, "%s", *r.psnr > 0 ? "inf" : "-inf");
      else
        std::snprintf(psnrText, sizeof psnrText, "%.17g", *r.psnr);
    }
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%s,%.17g,%d\n", r.k, r.objective, r.lyapunov, r.residual,
                  psnrText, r.tau, r.shrinks);
    out += line;
  }
  return out;
}

void writeTraceCsv(const std::filesystem::path& path, const IterateTrace& trace) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write trace " + path.string());
  out << traceCsv(trace);
  if (!out) throw IoError("failed writing trace " + path.string());
}

IterateTrace readTraceCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) throw IoError(path.string() + ": unexpected trace header");
  IterateTrace trace;
  int lineNo = 1;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != 7) throw IoError(path.string() + ":" + std::to_string(lineNo) + ": expected 7 columns");
    try {
      IterateRecord r;
      r.k = std::stoi(cells[0]);
      r.objective = std::stod(cells[1]);
      r.lyapunov = std::stod(cells[2]);
      r.residual = std::stod(cells[3]);
      if (!cells[4].empty()) r.psnr = std::stod(cells[4]);
      r.tau = std::stod(cells[5]);
      r.shrinks = std::stoi(cells[6]);
      trace.records.push_back(r);
    } catch (const std::logic_error&) {
      throw IoError(path.string() + ":" + std::to_string(lineNo) + ": malformed number");
    }
  }
  return trace;
}

std::vector<std::string> validateTrace(const IterateTrace& trace, int maxIters, double slack) {
  std::vector<std::string> issues;
  char msg[200];
  if (trace.records.size() > static_cast<std::size_t>(maxIters) + 1) {
    std::snprintf(msg, sizeof msg, "trace has %zu records for at most %d iterations", trace.records.size(), maxIters);
    issues.emplace_back(msg);
  }
  double previous = trace.initialObjective.value_or(std::numeric_limits<double>::infinity());
  for (const IterateRecord& r : trace.records) {
    if (!std::isfinite(r.objective) || !std::isfinite(r.lyapunov) || !std::isfinite(r.residual) ||
        !std::isfinite(r.tau)) {
      std::snprintf(msg, sizeof msg, "record %d has a non-finite value", r.k);
      issues.emplace_back(msg);
      continue;
    }
    if (r.lyapunov > previous + slack) {
      std::snprintf(msg, sizeof msg, "merit increases at record %d: %.17g -> %.17g", r.k, previous, r.lyapunov);
      issues.emplace_back(msg);
    }
    previous = r.lyapunov;
  }
  return issues;
}

}  // namespace pnp
