#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "pnp/algorithms.hpp"
#include "pnp/errors.hpp"
#include "pnp/kernel_bank.hpp"
#include "pnp/metrics.hpp"
#include "test_support.hpp"

using namespace pnp;
using pnp::testing::randomField;

namespace {

PotentialDenoiser identityDenoiser(Shape s) { return analyticFilterDenoiser(1.0, Kernel::impulse(), 0.0, s); }

PotentialDenoiser filterDenoiser(Shape s, double wK, double sigma, int size = 5) {
  return analyticFilterDenoiser(1.0 - wK, makeGaussianKernel(sigma, sigma, 0.0, size), wK, s);
}

// D = 0: a net with no skip and zero weights.
PotentialDenoiser zeroDenoiser(int channels) {
  NetSpec spec;
  spec.imageChannels = channels;
  spec.hiddenWidths = {2};
  spec.taps = 3;
  spec.skip = false;
  return netDenoiser(std::make_shared<const SmoothNet>(SmoothNet::zeros(spec)), 0.0);
}

Field smoothImage(Shape s, std::uint64_t seed) {
  return convPeriodic(randomField(s, seed), makeGaussianKernel(1.5, 1.5, 0.0, 7));
}

struct Instance {
  Field clean;
  DataFidelity fid;
};

Instance blurInstance(Shape s, double blur, int size, double nu, std::uint64_t seed) {
  const Field clean = smoothImage(s, seed);
  DegradationModel m{Deblur{makeGaussianKernel(blur, blur, 0.0, size)}, nu};
  const Field y = addGaussianNoise(apply(m, clean), nu, seed + 1);
  return {clean, DataFidelity::quadratic(m, y, s)};
}

DataFidelity identityDeblur(const Field& y) {
  return DataFidelity::quadratic(DegradationModel{Deblur{Kernel::impulse()}, 0.0}, y, y.shape());
}

void expectNonIncreasing(const IterateTrace& t, double slack) {
  for (std::size_t k = 1; k < t.records.size(); ++k)
    EXPECT_LE(t.records[k].lyapunov, t.records[k - 1].lyapunov + slack) << "k = " << k;
}

}  // namespace

// ---- gradient-step scheme ----

TEST(GSPnP, ClosedFormFirstStepWithIdentityDenoiser) {
  const Shape s{6, 6, 1};
  const Field y = randomField(s, 1), x0 = randomField(s, 2);
  const DataFidelity fid = identityDeblur(y);
  PnPParams p;
  p.lambda = 0.3;
  p.tau0 = 1.0;
  p.maxIters = 1;
  p.relTol = 0.0;
  // x_0 = prox(z_0); pick z_0 so that x_0 is the chosen start.
  const Field z0 = (1.0 + 1.0 / p.lambda) * x0 - (1.0 / p.lambda) * y;
  const RunResult r = runGSPnP(p, fid, identityDenoiser(s), z0);
  const Field expected = (1.0 / (1.0 + 1.0 / p.lambda)) * ((1.0 / p.lambda) * y + x0);
  EXPECT_LT(maxAbs(r.lastIterate - expected), 1e-12);
  EXPECT_EQ(r.trace.records.size(), 1u);
  EXPECT_EQ(r.trace.records[0].shrinks, 0);
}

TEST(GSPnP, FixedPointStopsImmediately) {
  const Shape s{6, 6, 1};
  const Field y = randomField(s, 3);
  const RunResult r = runGSPnP(PnPParams{}, identityDeblur(y), identityDenoiser(s), y);
  ASSERT_EQ(r.trace.records.size(), 1u);
  EXPECT_EQ(r.trace.records[0].residual, 0.0);
  EXPECT_EQ(r.trace.stop, StopReason::FixedPoint);
  EXPECT_EQ(r.output.values(), y.values());
}

TEST(GSPnP, DescentAndConvergenceUnderStepBound) {
  const Shape s{32, 32, 1};
  Instance inst = blurInstance(s, 1.6, 9, 0.03, 7);
  const PotentialDenoiser d = filterDenoiser(s, 0.45, 1.0);
  const double L = knownLipschitz(d);
  PnPParams p;
  p.lambda = 0.065;
  p.tau0 = 0.9 * p.lambda / L;
  p.relTol = 1e-14;
  const RunResult r = runGSPnP(p, inst.fid, d, initialEstimate(inst.fid), &inst.clean);
  ASSERT_FALSE(r.trace.records.empty());
  double prev = *r.trace.initialObjective;
  for (const IterateRecord& rec : r.trace.records) {
    EXPECT_LE(rec.objective, prev);
    EXPECT_EQ(rec.shrinks, 0);
    // Sufficient decrease, rebuilt from the recorded residual.
    EXPECT_GE(prev - rec.objective, (p.gamma / rec.tau) * rec.residual * rec.residual * (1 - 1e-12));
    prev = rec.objective;
  }
  EXPECT_LT(r.trace.records.back().residual, 1e-6);
  EXPECT_LE(r.trace.records.size(), 400u);
  EXPECT_TRUE(validateTrace(r.trace, p.maxIters, 0.0).empty());
}

TEST(GSPnP, StationarityAtConvergedPoint) {
  const Shape s{16, 16, 1};
  Instance inst = blurInstance(s, 1.2, 7, 0.02, 9);
  const PotentialDenoiser d = filterDenoiser(s, 0.45, 1.0);
  PnPParams p;
  p.lambda = 0.5;
  p.tau0 = 0.9 * p.lambda / knownLipschitz(d);
  p.relTol = 1e-14;
  p.maxIters = 3000;
  const RunResult r = runGSPnP(p, inst.fid, d, initialEstimate(inst.fid));
  const Field& x = r.lastIterate;
  EXPECT_LT(maxAbs(gradGSigma(d, x) + (1.0 / p.lambda) * gradF(inst.fid, x)), 1e-5);
}

TEST(GSPnP, BacktrackingShrinksLargeSteps) {
  const Shape s{16, 16, 1};
  Instance inst = blurInstance(s, 1.6, 9, 0.03, 4);
  const PotentialDenoiser d = filterDenoiser(s, 0.45, 1.0);
  PnPParams p;
  p.lambda = 1.0;
  p.tau0 = 10.0 / knownLipschitz(d);
  const RunResult r = runGSPnP(p, inst.fid, d, initialEstimate(inst.fid));
  int shrinks = 0;
  double prev = *r.trace.initialObjective;
  for (const IterateRecord& rec : r.trace.records) {
    shrinks += rec.shrinks;
    EXPECT_LE(rec.objective, prev);
    prev = rec.objective;
  }
  EXPECT_GT(shrinks, 0);
  EXPECT_LT(r.trace.records.back().tau, p.tau0);
}

TEST(GSPnP, StepFloorStops) {
  const Shape s{16, 16, 1};
  Instance inst = blurInstance(s, 1.6, 9, 0.03, 4);
  const PotentialDenoiser d = filterDenoiser(s, 0.45, 1.0);
  const double L = knownLipschitz(d);
  PnPParams p;
  p.lambda = 1.0;
  p.tau0 = 1000.0 / L;
  p.tauMin = 999.0 / L;
  const RunResult r = runGSPnP(p, inst.fid, d, initialEstimate(inst.fid));
  EXPECT_EQ(r.trace.stop, StopReason::StepFloor);
}

TEST(GSPnP, RelativeDecreaseStop) {
  const Shape s{16, 16, 1};
  Instance inst = blurInstance(s, 1.6, 9, 0.03, 4);
  const PotentialDenoiser d = filterDenoiser(s, 0.45, 1.0);
  PnPParams p;
  p.tau0 = 0.9 * p.lambda / knownLipschitz(d);
  const RunResult r = runGSPnP(p, inst.fid, d, initialEstimate(inst.fid));
  EXPECT_EQ(r.trace.stop, StopReason::RelativeDecrease);
  EXPECT_LT(r.trace.records.size(), 400u);
}

TEST(GSPnP, InitialDenoiseChangesStart) {
  const Shape s{16, 16, 1};
  Instance inst = blurInstance(s, 1.6, 9, 0.03, 4);
  NetSpec spec;
  spec.imageChannels = 1;
  spec.hiddenWidths = {2};
  spec.taps = 3;
  auto d = netDenoiser(std::make_shared<const SmoothNet>(SmoothNet::random(spec, 1)), 0.03);
  PnPParams p;
  p.maxIters = 1;
  const RunResult plain = runGSPnP(p, inst.fid, d, initialEstimate(inst.fid));
  p.initDenoiseSigma = 0.3;
  const RunResult pre = runGSPnP(p, inst.fid, d, initialEstimate(inst.fid));
  EXPECT_NE(*plain.trace.initialObjective, *pre.trace.initialObjective);
}

TEST(GSPnP, ParameterValidation) {
  const Shape s{4, 4, 1};
  const Field y(s);
  PnPParams p;
  p.gamma = 0.5;
  EXPECT_THROW(runGSPnP(p, identityDeblur(y), identityDenoiser(s), y), ConfigError);
  p = PnPParams{};
  p.eta = 1.0;
  EXPECT_THROW(runGSPnP(p, identityDeblur(y), identityDenoiser(s), y), ConfigError);
  EXPECT_THROW(runGSPnP(PnPParams{}, identityDeblur(y), identityDenoiser(s), Field(5, 4, 1)), DimensionError);
}

// ---- proximal gradient ----

TEST(ProxPGD, StationaryStart) {
  const Shape s{6, 6, 1};
  const Field y = randomField(s, 5);
  const RunResult r = runProxPGD(PnPParams::defaults(Algorithm::ProxPgd), identityDeblur(y), identityDenoiser(s), y);
  EXPECT_EQ(r.trace.records.size(), 1u);
  EXPECT_EQ(r.trace.records[0].residual, 0.0);
  EXPECT_EQ(r.trace.stop, StopReason::FixedPoint);
}

TEST(ProxPGD, ZeroDenoiserCollapsesToZero) {
  const Shape s{6, 6, 1};
  PnPParams p = PnPParams::defaults(Algorithm::ProxPgd);
  p.maxIters = 5;
  const RunResult r = runProxPGD(p, identityDeblur(randomField(s, 6)), zeroDenoiser(1), randomField(s, 7));
  EXPECT_EQ(maxAbs(r.output), 0.0);
  EXPECT_EQ(r.trace.stop, StopReason::FixedPoint);  // x_2 = x_1 = 0
  EXPECT_EQ(r.trace.records.size(), 2u);
}

TEST(ProxPGD, DescentAndResidualDecay) {
  const Shape s{32, 32, 1};
  Instance inst = blurInstance(s, 1.6, 9, 0.03, 11);
  const PotentialDenoiser d = filterDenoiser(s, 0.4, 0.8);
  PnPParams p = PnPParams::defaults(Algorithm::ProxPgd);
  p.maxIters = 300;
  const RunResult r = runProxPGD(p, inst.fid, d, initialEstimate(inst.fid), &inst.clean);
  EXPECT_TRUE(r.trace.warnings.empty());
  expectNonIncreasing(r.trace, 1e-9);
  EXPECT_LT(r.trace.records.back().residual, 1e-3 * r.trace.records.front().residual);
}

TEST(ProxPGD, IndicatorIsUnsupported) {
  const Shape s{6, 6, 1};
  DegradationModel m{Inpaint{randomMask(6, 6, 0.5, 1)}, 0.0};
  const DataFidelity fid = DataFidelity::indicator(m, apply(m, randomField(s, 1)));
  EXPECT_THROW(runProxPGD(PnPParams::defaults(Algorithm::ProxPgd), fid, identityDenoiser(s), randomField(s, 2)),
               UnsupportedOperation);
  EXPECT_THROW(runProxDRSdiff(PnPParams::defaults(Algorithm::ProxDrsDiff), fid, identityDenoiser(s),
                              randomField(s, 2)),
               UnsupportedOperation);
}

TEST(ProxPGD, WarnsWhenLambdaBelowLf) {
  const Shape s{6, 6, 1};
  PnPParams p = PnPParams::defaults(Algorithm::ProxPgd);
  p.lambda = 0.5;
  p.maxIters = 2;
  const Field y = randomField(s, 1);
  const RunResult r = runProxPGD(p, identityDeblur(y), identityDenoiser(s), randomField(s, 2));
  EXPECT_EQ(r.trace.warnings.size(), 1u);
}

// ---- Douglas-Rachford ----

TEST(ProxDRSdiff, FixedPointStart) {
  const Shape s{6, 6, 1};
  const Field y = randomField(s, 8);
  const RunResult r =
      runProxDRSdiff(PnPParams::defaults(Algorithm::ProxDrsDiff), identityDeblur(y), identityDenoiser(s), y);
  EXPECT_EQ(r.trace.records.size(), 1u);
  EXPECT_EQ(r.trace.stop, StopReason::FixedPoint);
  EXPECT_EQ(r.lastIterate.values(), y.values());
}

TEST(ProxDRSdiff, IdentityDenoiserIsClassicalDrs) {
  // f = 1/2 (x - y)^2 per pixel; u = prox(x), v = 2u - x, x <- x + 2(v - u) = 2u - x.
  const Shape s{4, 4, 1};
  const Field y = randomField(s, 1), x0 = randomField(s, 2);
  PnPParams p = PnPParams::defaults(Algorithm::ProxDrsDiff);
  p.lambda = 2.0;
  p.maxIters = 25;
  const RunResult r = runProxDRSdiff(p, identityDeblur(y), identityDenoiser(s), x0);
  for (std::size_t n = 0; n < y.size(); ++n) {
    double x = x0[n], u = 0.0;
    for (int k = 0; k < p.maxIters; ++k) {
      u = (p.lambda * x + y[n]) / (p.lambda + 1.0);
      x = 2.0 * u - x;
    }
    // With D = Id both v_K and x_K equal the last reflection.
    EXPECT_NEAR(r.output[n], x, 1e-12);
    EXPECT_NEAR(r.lastIterate[n], x, 1e-12);
  }
  // The reflection contracts by (lambda - 1) / (lambda + 1), so u_k tends to y.
  EXPECT_LT(maxAbs(r.output - y), 1e-4);
}

TEST(ProxDRSdiff, EnvelopeDescentAndClusterAgreement) {
  const Shape s{32, 32, 1};
  Instance inst = blurInstance(s, 1.6, 9, 0.03, 12);
  const PotentialDenoiser d = filterDenoiser(s, 0.4, 0.8);
  PnPParams p = PnPParams::defaults(Algorithm::ProxDrsDiff);
  p.maxIters = 600;
  const RunResult r = runProxDRSdiff(p, inst.fid, d, initialEstimate(inst.fid), &inst.clean);
  expectNonIncreasing(r.trace, 1e-9);
  EXPECT_LT(r.trace.records.back().residual, 1e-6);
}

TEST(ProxDRS, AllOnesMaskConvergesToObservation) {
  const Shape s{6, 6, 1};
  const Field y = randomField(s, 3);
  DegradationModel m{Inpaint{Field(6, 6, 1, 1.0)}, 0.0};
  const DataFidelity fid = DataFidelity::indicator(m, y);
  const RunResult r = runProxDRS(PnPParams::defaults(Algorithm::ProxDrs), fid, identityDenoiser(s), randomField(s, 4));
  EXPECT_EQ(r.output.values(), y.values());
  EXPECT_EQ(r.trace.stop, StopReason::FixedPoint);
}

TEST(ProxDRS, InpaintingEnvelopeDescent) {
  const Shape s{16, 16, 1};
  const Field clean = smoothImage(s, 21);
  DegradationModel m{Inpaint{randomMask(16, 16, 0.5, 5)}, 0.0};
  const DataFidelity fid = DataFidelity::indicator(m, apply(m, clean));
  PotentialDenoiser d = filterDenoiser(s, 0.45, 1.0);
  d.alpha = 0.5;
  ASSERT_LT(knownLipschitz(d), 0.5);
  PnPParams p = PnPParams::defaults(Algorithm::ProxDrs);
  const RunResult r = runProxDRS(p, fid, d, initialEstimate(fid), &clean);
  expectNonIncreasing(r.trace, 1e-9);
  EXPECT_LT(r.trace.records.back().residual, 1e-6);
  EXPECT_TRUE(validateTrace(r.trace, p.maxIters).empty());
}

TEST(Algorithms, BitIdenticalReruns) {
  const Shape s{16, 16, 1};
  Instance inst = blurInstance(s, 1.6, 9, 0.03, 13);
  const PotentialDenoiser d = filterDenoiser(s, 0.4, 0.8);
  for (Algorithm a : {Algorithm::GradientStep, Algorithm::ProxPgd, Algorithm::ProxDrsDiff, Algorithm::ProxDrs}) {
    PnPParams p = PnPParams::defaults(a);
    p.maxIters = 50;
    const RunResult r1 = runAlgorithm(a, p, inst.fid, d, initialEstimate(inst.fid), &inst.clean);
    const RunResult r2 = runAlgorithm(a, p, inst.fid, d, initialEstimate(inst.fid), &inst.clean);
    EXPECT_EQ(traceCsv(r1.trace), traceCsv(r2.trace)) << toString(a);
    EXPECT_EQ(r1.output.values(), r2.output.values());
  }
}

TEST(Algorithms, NamesRoundTrip) {
  for (Algorithm a : {Algorithm::GradientStep, Algorithm::ProxPgd, Algorithm::ProxDrsDiff, Algorithm::ProxDrs})
    EXPECT_EQ(algorithmFromString(toString(a)), a);
  EXPECT_THROW(algorithmFromString("hqs"), ConfigError);
  EXPECT_EQ(PnPParams::defaults(Algorithm::ProxDrs).beta, 0.5);
  EXPECT_EQ(PnPParams::defaults(Algorithm::ProxDrsDiff).beta, 1.0);
  EXPECT_EQ(PnPParams::defaults(Algorithm::GradientStep).maxIters, 400);
  EXPECT_EQ(PnPParams::defaults(Algorithm::ProxPgd).maxIters, 1000);
}

// ---- objectives ----

TEST(Objective, ZeroPotentialAtObservation) {
  const Shape s{6, 6, 1};
  const Field y = randomField(s, 1);
  const DataFidelity fid = identityDeblur(y);
  const PotentialDenoiser d = identityDenoiser(s);
  Objective o{ObjectiveKind::GradientStep, &fid, &d, 0.3};
  EXPECT_EQ(evaluateObjective(o, &y), 0.0);
}

TEST(Objective, LargeLambdaLimit) {
  const Shape s{8, 8, 1};
  Instance inst = blurInstance(s, 1.0, 5, 0.0, 2);
  const PotentialDenoiser d = filterDenoiser(s, 0.45, 1.0);
  const Field x = randomField(s, 3);
  Objective o{ObjectiveKind::GradientStep, &inst.fid, &d, 1e12};
  EXPECT_NEAR(evaluateObjective(o, &x), gSigma(d, x), 1e-9);
}

TEST(Objective, SumOfParts) {
  const Shape s{8, 8, 1};
  Instance inst = blurInstance(s, 1.0, 5, 0.02, 2);
  const PotentialDenoiser d = filterDenoiser(s, 0.45, 1.0);
  const Field x = randomField(s, 3);
  const double lambda = 0.2;
  const double f = 0.5 * squaredNorm(apply(inst.fid.model(), x) - inst.fid.observation());
  Objective gs{ObjectiveKind::GradientStep, &inst.fid, &d, lambda};
  EXPECT_NEAR(evaluateObjective(gs, &x), f / lambda + gSigma(d, x), 1e-12);

  Objective prox{ObjectiveKind::Proximal, &inst.fid, &d, lambda};
  const Field dx = denoise(d, x);
  const double fd = 0.5 * squaredNorm(apply(inst.fid.model(), dx) - inst.fid.observation());
  EXPECT_NEAR(evaluateObjective(prox, nullptr, &x), fd / lambda + phiAtDenoised(d, x), 1e-12);
  EXPECT_THROW(evaluateObjective(prox, &x), InvalidArgument);
}

TEST(Objective, IndicatorInfeasibleIsInfinite) {
  const Shape s{6, 6, 1};
  DegradationModel m{Inpaint{randomMask(6, 6, 0.5, 1)}, 0.0};
  const Field clean = randomField(s, 1);
  const DataFidelity fid = DataFidelity::indicator(m, apply(m, clean));
  const PotentialDenoiser d = identityDenoiser(s);
  Objective o{ObjectiveKind::GradientStep, &fid, &d, 1.0};
  EXPECT_EQ(evaluateObjective(o, &clean), 0.0);
  const Field off = clean + Field(s, 0.1);
  EXPECT_TRUE(std::isinf(evaluateObjective(o, &off)));
}

// ---- traces ----

TEST(Trace, CsvRoundTrip) {
  const Shape s{16, 16, 1};
  Instance inst = blurInstance(s, 1.6, 9, 0.03, 3);
  PnPParams p;
  p.maxIters = 20;
  const RunResult r = runGSPnP(p, inst.fid, filterDenoiser(s, 0.45, 1.0), initialEstimate(inst.fid), &inst.clean);
  const auto path = std::filesystem::temp_directory_path() / "pnp_trace_roundtrip.csv";
  writeTraceCsv(path, r.trace);
  const IterateTrace back = readTraceCsv(path);
  ASSERT_EQ(back.records.size(), r.trace.records.size());
  for (std::size_t k = 0; k < back.records.size(); ++k) {
    const IterateRecord &a = back.records[k], &b = r.trace.records[k];
    EXPECT_EQ(a.k, b.k);
    EXPECT_EQ(a.objective, b.objective);
    EXPECT_EQ(a.lyapunov, b.lyapunov);
    EXPECT_EQ(a.residual, b.residual);
    EXPECT_EQ(a.psnr, b.psnr);
    EXPECT_EQ(a.tau, b.tau);
    EXPECT_EQ(a.shrinks, b.shrinks);
  }
  EXPECT_EQ(traceCsv(r.trace).substr(0, std::string(kTraceHeader).size()), kTraceHeader);
  std::filesystem::remove(path);
}

TEST(Trace, ValidationFlagsViolations) {
  IterateTrace t;
  for (int k = 0; k < 3; ++k) {
    IterateRecord r;
    r.k = k;
    r.objective = r.lyapunov = 10.0 - k;
    r.residual = 1.0;
    t.records.push_back(r);
  }
  EXPECT_TRUE(validateTrace(t, 5).empty());
  EXPECT_FALSE(validateTrace(t, 1).empty());  // longer than maxIters + 1
  t.records[2].lyapunov = 9.5;
  EXPECT_FALSE(validateTrace(t, 5).empty());
  t.records[2].lyapunov = 8.0;
  t.records[1].residual = std::nan("");
  EXPECT_FALSE(validateTrace(t, 5).empty());
}
