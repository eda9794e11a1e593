#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pnp/denoiser.hpp"
#include "pnp/field.hpp"
#include "pnp/forward_operators.hpp"

namespace pnp {

enum class Algorithm {
  GradientStep,  // GS-PnP with backtracking
  ProxPgd,
  ProxDrsDiff,   // smooth fidelity
  ProxDrs,       // any proximable fidelity
};

std::string toString(Algorithm algorithm);
/// "gs", "pgd", "drsdiff" or "drs".
Algorithm algorithmFromString(const std::string& name);

struct PnPParams {
  double lambda = 0.065;
  /// Initial step of the gradient-step scheme.
  double tau0 = 0.065;
  /// Sufficient-decrease constant, in (0, 1/2).
  double gamma = 0.1;
  /// Step shrink factor, in (0, 1).
  double eta = 0.9;
  /// Averaging of the Douglas-Rachford schemes, in (0, 1].
  double beta = 1.0;
  int maxIters = 400;
  /// Stop once (F(x_k) - F(x_{k+1})) / F(x_0) <= relTol (gradient-step only).
  double relTol = 1e-6;
  /// Stop once the backtracked step falls to this value (gradient-step only).
  double tauMin = 1e-6;
  /// Backtracking shrinks allowed within one iteration before giving up.
  int maxShrinks = 100;
  /// Gradient-step only: denoise the initial guess once at this noise level
  /// before the first prox.
  std::optional<double> initDenoiseSigma;
  std::uint64_t seed = 0;

  /// Defaults for each scheme.
  static PnPParams defaults(Algorithm algorithm);
  void validate(Algorithm algorithm) const;
};

struct IterateRecord {
  int k = 0;
  /// Objective after the step: F(x_{k+1}) for the gradient-step and PGD
  /// schemes; phi + f / lambda at the step's (denoised, prox) pair for the
  /// Douglas-Rachford schemes.
  double objective = 0.0;
  /// Monitored merit: F itself, or the Douglas-Rachford envelope at x_k.
  double lyapunov = 0.0;
  /// ||x_{k+1} - x_k||, or ||u_{k+1} - v_{k+1}|| for Douglas-Rachford.
  double residual = 0.0;
  /// PSNR of the step's output estimate, when a reference is given.
  std::optional<double> psnr;
  double tau = 1.0;
  int shrinks = 0;
};

enum class StopReason { MaxIterations, RelativeDecrease, StepFloor, FixedPoint };
std::string toString(StopReason reason);

struct IterateTrace {
  Algorithm algorithm = Algorithm::GradientStep;
  std::vector<IterateRecord> records;
  /// F at the starting point of the gradient-step scheme.
  std::optional<double> initialObjective;
  StopReason stop = StopReason::MaxIterations;
  /// Calls of the coercive denoiser in which the box projection was active.
  std::size_t projectionActivations = 0;
  std::vector<std::string> warnings;
};

struct RunResult {
  Field output;
  IterateTrace trace;
  /// Final iterate x_K (before the last denoising for the gradient-step
  /// scheme; equal to the output for PGD).
  Field lastIterate;
};

/// x_{k+1} = prox_{(tau/lambda) f}(tau D(x_k) + (1 - tau) x_k) with
/// backtracking on tau. `init` is the guess z_0; x_0 = prox(z_0).
RunResult runGSPnP(const PnPParams& params, const DataFidelity& fid, const PotentialDenoiser& d,
                   const Field& init, const Field* reference = nullptr);
/// x_{k+1} = D(x_k - grad f(x_k) / lambda), from x_0 = init.
RunResult runProxPGD(const PnPParams& params, const DataFidelity& fid, const PotentialDenoiser& d,
                     const Field& init, const Field* reference = nullptr);
/// u = prox_{f/lambda}(x), v = D(2u - x), x += 2 beta (v - u); returns v_K.
RunResult runProxDRSdiff(const PnPParams& params, const DataFidelity& fid, const PotentialDenoiser& d,
                         const Field& init, const Field* reference = nullptr);
/// u = D(x), v = prox_{f/lambda}(2u - x), x += 2 beta (v - u); returns u_K.
/// x_0 = prox_{f/lambda}(init).
RunResult runProxDRS(const PnPParams& params, const DataFidelity& fid, const PotentialDenoiser& d,
                     const Field& init, const Field* reference = nullptr);

RunResult runAlgorithm(Algorithm algorithm, const PnPParams& params, const DataFidelity& fid,
                       const PotentialDenoiser& d, const Field& init, const Field* reference = nullptr);

// ---- objectives ----

enum class ObjectiveKind {
  GradientStep,  // f / lambda + gSigma
  Proximal,      // f / lambda + phi, evaluated at denoised points
};

struct Objective {
  ObjectiveKind kind = ObjectiveKind::GradientStep;
  const DataFidelity* fidelity = nullptr;
  const PotentialDenoiser* denoiser = nullptr;
  double lambda = 1.0;
};

/// GradientStep: F(x). Proximal: F(D(z)) for the pre-image z, which is
/// required; x is then ignored.
double evaluateObjective(const Objective& objective, const Field* x, const Field* preimage = nullptr);

// ---- traces ----

inline constexpr const char* kTraceHeader = "k,F,lyapunov,residual,psnr,tau,shrinks";

void writeTraceCsv(const std::filesystem::path& path, const IterateTrace& trace);
std::string traceCsv(const IterateTrace& trace);
/// Parses a file written by writeTraceCsv (the algorithm field is left at
/// its default).
IterateTrace readTraceCsv(const std::filesystem::path& path);

/// Checks that every value is finite, the length is at most maxIters + 1 and
/// the monitored merit never increases by more than `slack`. Returns a
/// description of each violation.
std::vector<std::string> validateTrace(const IterateTrace& trace, int maxIters, double slack = 1e-9);

}  // namespace pnp
