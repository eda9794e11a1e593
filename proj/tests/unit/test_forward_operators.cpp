#include <gtest/gtest.h>

#include <cmath>

#include "pnp/errors.hpp"
#include "pnp/forward_operators.hpp"
#include "pnp/kernel_bank.hpp"
#include "test_support.hpp"

using namespace pnp;
using pnp::testing::denseMatrix;
using pnp::testing::fromVector;
using pnp::testing::gaussianField;
using pnp::testing::randomField;
using pnp::testing::toVector;

namespace {

Kernel randomKernel(int size, std::uint64_t seed) {
  Field t = randomField({size, size, 1}, seed);
  return Kernel(size, size, std::vector<double>(t.values())).normalized();
}

DataFidelity makeQuadratic(const DegradationModel& m, Shape signal, std::uint64_t seed) {
  const Field y = gaussianField(m.observationShape(signal), seed);
  return DataFidelity::quadratic(m, y, signal);
}

Eigen::MatrixXd denseA(const DataFidelity& fid) {
  const Shape in = fid.signalShape();
  return denseMatrix([&](const Field& x) { return fid.forward(x); }, in, fid.observation().shape());
}

// (I + tau A^T A) p = tau A^T y + z by a direct solve.
Field denseProx(const DataFidelity& fid, const Field& z, double tau) {
  const Eigen::MatrixXd A = denseA(fid);
  const Eigen::Index n = A.cols();
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) + tau * A.transpose() * A;
  const Eigen::VectorXd rhs = tau * A.transpose() * toVector(fid.observation()) + toVector(z);
  return fromVector(M.ldlt().solve(rhs), z.shape());
}

double optimalityResidual(const DataFidelity& fid, const Field& p, const Field& z, double tau) {
  return maxAbs(tau * gradF(fid, p) + p - z);
}

std::vector<DegradationModel> quadraticModels(std::uint64_t seed) {
  Field mask = randomMask(8, 8, 0.4, seed);
  return {
      DegradationModel{Deblur{randomKernel(3, seed)}, 0.0},
      DegradationModel{Deblur{makeGaussianKernel(1.2, 0.8, 0.3, 5)}, 0.0},
      DegradationModel{SuperRes{randomKernel(3, seed + 1), 2}, 0.0},
      DegradationModel{SuperRes{makeGaussianKernel(1.0, 1.0, 0.0, 5), 4}, 0.0},
      DegradationModel{Inpaint{mask}, 0.0},
  };
}

}  // namespace

TEST(Apply, AllOnesMaskIsIdentity) {
  Field x = randomField({5, 5, 3}, 1);
  DegradationModel m{Inpaint{Field(5, 5, 1, 1.0)}, 0.0};
  EXPECT_EQ(apply(m, x).values(), x.values());
}

TEST(Apply, PureDecimationKeepsEvenCoordinates) {
  Field x(4, 4, 1);
  for (int n = 0; n < 16; ++n) x[static_cast<std::size_t>(n)] = n;
  DegradationModel m{SuperRes{Kernel::impulse(), 2}, 0.0};
  Field y = apply(m, x);
  ASSERT_EQ(y.shape(), (Shape{2, 2, 1}));
  EXPECT_EQ(y(0, 0, 0), 0.0);
  EXPECT_EQ(y(0, 1, 0), 2.0);
  EXPECT_EQ(y(1, 0, 0), 8.0);
  EXPECT_EQ(y(1, 1, 0), 10.0);
}

TEST(Apply, AdjointDotProductAllKinds) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (const auto& m : quadraticModels(seed)) {
      const Shape s{8, 8, 3};
      Field x = gaussianField(s, seed + 10), r = gaussianField(m.observationShape(s), seed + 20);
      const double lhs = dot(apply(m, x), r), rhs = dot(x, applyAdjoint(m, r, s));
      EXPECT_NEAR(lhs, rhs, 1e-9 * std::max(1.0, std::abs(lhs)));
    }
  }
}

TEST(Apply, ShapeMismatchThrows) {
  DegradationModel m{SuperRes{Kernel::impulse(), 2}, 0.0};
  EXPECT_THROW(apply(m, Field(5, 4, 1)), DimensionError);
  DegradationModel in{Inpaint{Field(4, 4, 1, 1.0)}, 0.0};
  EXPECT_THROW(apply(in, Field(4, 5, 1)), DimensionError);
}

TEST(Model, ValidationRejectsBadInputs) {
  Field mask(2, 2, 1, 1.0);
  mask[0] = 0.5;
  EXPECT_THROW((DegradationModel{Inpaint{mask}, 0.0}.validate()), InvalidArgument);
  EXPECT_THROW((DegradationModel{SuperRes{Kernel::impulse(), 0}, 0.0}.validate()), InvalidArgument);
  EXPECT_THROW((DegradationModel{Deblur{Kernel::impulse()}, -1.0}.validate()), InvalidArgument);
}

TEST(GradF, ZeroAtConsistentPoint) {
  const Shape s{8, 8, 3};
  DegradationModel m{Deblur{randomKernel(3, 2)}, 0.0};
  Field x = randomField(s, 3);
  auto fid = DataFidelity::quadratic(m, apply(m, x), s);
  EXPECT_LT(maxAbs(gradF(fid, x)), 1e-12);
}

TEST(GradF, IdentityKernelGivesResidual) {
  const Shape s{6, 6, 1};
  DegradationModel m{Deblur{Kernel::impulse()}, 0.0};
  Field y = randomField(s, 1), x = randomField(s, 2);
  auto fid = DataFidelity::quadratic(m, y, s);
  EXPECT_LT(maxAbs(gradF(fid, x) - (x - y)), 1e-12);
}

TEST(GradF, MatchesFiniteDifferences) {
  const Shape s{8, 8, 3};
  for (const auto& m : quadraticModels(7)) {
    auto fid = makeQuadratic(m, s, 8);
    Field x = gaussianField(s, 9);
    Field fd = pnp::testing::centralDifference([&](const Field& v) { return fid.value(v); }, x, 1e-5);
    EXPECT_LT(pnp::testing::relativeError(gradF(fid, x), fd), 1e-6);
  }
}

TEST(GradF, IndicatorIsUnsupported) {
  DegradationModel m{Inpaint{Field(4, 4, 1, 1.0)}, 0.0};
  auto fid = DataFidelity::indicator(m, Field(4, 4, 1));
  EXPECT_THROW(gradF(fid, Field(4, 4, 1)), UnsupportedOperation);
  EXPECT_THROW(estimateLf(fid), UnsupportedOperation);
}

TEST(Indicator, ValueIsZeroOnlyWhenFeasible) {
  DegradationModel m{Inpaint{randomMask(4, 4, 0.5, 1)}, 0.0};
  Field x = randomField({4, 4, 1}, 2);
  auto fid = DataFidelity::indicator(m, apply(m, x));
  EXPECT_EQ(fid.value(x), 0.0);
  Field off = x;
  for (std::size_t n = 0; n < off.size(); ++n) off[n] += 1e-3;
  EXPECT_TRUE(std::isinf(fid.value(off)));
}

TEST(ProxDeblur, IdentityKernelIsScalarShrinkage) {
  const Shape s{6, 6, 3};
  DegradationModel m{Deblur{Kernel::impulse()}, 0.0};
  Field y = randomField(s, 1), z = randomField(s, 2);
  auto fid = DataFidelity::quadratic(m, y, s);
  const double tau = 0.7;
  EXPECT_LT(maxAbs(proxDeblur(fid, z, tau) - (1.0 / (1.0 + tau)) * (tau * y + z)), 1e-12);
}

TEST(ProxDeblur, SmallStepApproachesInput) {
  const Shape s{8, 8, 1};
  auto fid = makeQuadratic(DegradationModel{Deblur{randomKernel(3, 4)}, 0.0}, s, 5);
  Field z = randomField(s, 6);
  const double d1 = maxAbs(proxDeblur(fid, z, 1e-3) - z);
  const double d2 = maxAbs(proxDeblur(fid, z, 1e-6) - z);
  EXPECT_LT(d2, 2e-3 * d1);
}

TEST(ProxDeblur, NonPositiveStepThrows) {
  const Shape s{4, 4, 1};
  auto fid = makeQuadratic(DegradationModel{Deblur{Kernel::impulse()}, 0.0}, s, 1);
  EXPECT_THROW(proxDeblur(fid, Field(s), 0.0), InvalidArgument);
  EXPECT_THROW(proxDeblur(fid, Field(s), -1.0), InvalidArgument);
}

TEST(ProxSuperRes, ScaleOneEqualsDeblur) {
  const Shape s{8, 8, 3};
  Kernel k = randomKernel(3, 11);
  Field y = gaussianField(s, 12), z = gaussianField(s, 13);
  auto sr = DataFidelity::quadratic(DegradationModel{SuperRes{k, 1}, 0.0}, y, s);
  auto db = DataFidelity::quadratic(DegradationModel{Deblur{k}, 0.0}, y, s);
  for (double tau : {0.1, 1.0, 10.0}) EXPECT_LT(maxAbs(proxSuperRes(sr, z, tau) - proxDeblur(db, z, tau)), 1e-12);
}

TEST(ProxSuperRes, ImpulseKernelActsPerPixel) {
  const Shape s{6, 6, 1};
  auto fid = makeQuadratic(DegradationModel{SuperRes{Kernel::impulse(), 2}, 0.0}, s, 3);
  Field z = randomField(s, 4);
  const double tau = 2.0;
  Field p = proxSuperRes(fid, z, tau);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      if (i % 2 == 0 && j % 2 == 0) {
        const double y = fid.observation()(i / 2, j / 2, 0);
        EXPECT_NEAR(p(i, j, 0), (z(i, j, 0) + tau * y) / (1.0 + tau), 1e-12);
      } else {
        EXPECT_NEAR(p(i, j, 0), z(i, j, 0), 1e-12);
      }
    }
}

TEST(ProxSuperRes, IndivisibleSizeThrows) {
  DegradationModel m{SuperRes{Kernel::impulse(), 3}, 0.0};
  EXPECT_THROW(DataFidelity::quadratic(m, Field(2, 2, 1), Shape{7, 6, 1}), DimensionError);
}

TEST(Prox, MatchesDenseSolveForEveryQuadraticKind) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    for (const auto& m : quadraticModels(seed)) {
      const Shape s{8, 8, 1};
      auto fid = DataFidelity::quadratic(m, gaussianField(m.observationShape(s), seed + 3), s);
      Field z = gaussianField(s, seed + 5);
      for (double tau : {0.1, 1.0, 10.0}) {
        Field p = prox(fid, z, tau);
        EXPECT_LT(maxAbs(p - denseProx(fid, z, tau)), 1e-8);
        EXPECT_LT(optimalityResidual(fid, p, z, tau), 1e-8);
      }
    }
  }
}

TEST(Prox, FirmlyNonexpansive) {
  const Shape s{8, 8, 3};
  for (const auto& m : quadraticModels(21)) {
    auto fid = makeQuadratic(m, s, 22);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Field a = gaussianField(s, 100 + seed), b = gaussianField(s, 200 + seed);
      const Field pa = prox(fid, a, 1.3), pb = prox(fid, b, 1.3);
      EXPECT_LE(squaredNorm(pa - pb), dot(pa - pb, a - b) + 1e-12);
    }
  }
}

TEST(ProxInpaint, ProjectionProperties) {
  const Shape s{6, 6, 3};
  Field clean = randomField(s, 1), z = randomField(s, 2);
  DegradationModel m{Inpaint{randomMask(6, 6, 0.5, 3)}, 0.0};
  auto fid = DataFidelity::indicator(m, apply(m, clean));
  Field p = proxInpaint(fid, z);
  EXPECT_EQ(proxInpaint(fid, p).values(), p.values());
  EXPECT_EQ(apply(m, p).values(), fid.observation().values());
  EXPECT_EQ(prox(fid, z, 0.1).values(), prox(fid, z, 50.0).values());
  const Field& mask = std::get<Inpaint>(m.kind).mask;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      for (int c = 0; c < 3; ++c)
        EXPECT_EQ(p(i, j, c), mask(i, j, 0) == 1.0 ? clean(i, j, c) : z(i, j, c));
}

TEST(ProxInpaint, ExtremeMasks) {
  const Shape s{4, 4, 1};
  Field y = randomField(s, 1), z = randomField(s, 2);
  DegradationModel all{Inpaint{Field(4, 4, 1, 1.0)}, 0.0};
  EXPECT_EQ(proxInpaint(DataFidelity::indicator(all, y), z).values(), y.values());
  DegradationModel none{Inpaint{Field(4, 4, 1, 0.0)}, 0.0};
  EXPECT_EQ(proxInpaint(DataFidelity::indicator(none, Field(s)), z).values(), z.values());
}

TEST(RProx, ClosedFormsAndDefinition) {
  const Shape s{6, 6, 1};
  DegradationModel m{Deblur{Kernel::impulse()}, 0.0};
  auto fid0 = DataFidelity::quadratic(m, Field(s), s);
  Field z = randomField(s, 1);
  EXPECT_LT(maxAbs(rprox(fid0, z, 1.0)), 1e-12);

  DegradationModel none{Inpaint{Field(6, 6, 1, 0.0)}, 0.0};
  EXPECT_EQ(rprox(DataFidelity::indicator(none, Field(s)), z, 1.0).values(), z.values());

  auto fid = makeQuadratic(DegradationModel{Deblur{randomKernel(3, 2)}, 0.0}, s, 3);
  EXPECT_LT(maxAbs(rprox(fid, z, 0.4) - (2.0 * prox(fid, z, 0.4) - z)), 1e-14);
}

TEST(Lipschitz, NormalizedKernelsGiveOne) {
  const Shape s{16, 16, 3};
  for (const Kernel& k : {Kernel::impulse(), Kernel::box(3), makeGaussianKernel(1.6, 1.6, 0.0, 9)}) {
    auto fid = makeQuadratic(DegradationModel{Deblur{k}, 0.0}, s, 1);
    EXPECT_NEAR(fid.lipschitzGrad(), 1.0, 1e-9);
    EXPECT_NEAR(estimateLf(fid), 1.0, 1e-6);
  }
}

TEST(Lipschitz, MatchesDenseSpectralNorm) {
  const Shape s{8, 8, 1};
  for (const auto& m : quadraticModels(31)) {
    auto fid = makeQuadratic(m, s, 1);
    const Eigen::MatrixXd A = denseA(fid);
    const double top = (A.transpose() * A).selfadjointView<Eigen::Lower>().eigenvalues().maxCoeff();
    EXPECT_NEAR(estimateLf(fid, 5000, 3), top, 1e-6);
    EXPECT_NEAR(fid.lipschitzGrad(), top, 1e-9);
  }
}

TEST(InitialEstimate, PerProblemKind) {
  const Shape s{8, 8, 3};
  Field clean = randomField(s, 1);
  DegradationModel db{Deblur{Kernel::box(3)}, 0.0};
  auto fdb = DataFidelity::quadratic(db, apply(db, clean), s);
  EXPECT_EQ(initialEstimate(fdb).values(), fdb.observation().values());

  DegradationModel in{Inpaint{randomMask(8, 8, 0.5, 2)}, 0.0};
  auto fin = DataFidelity::indicator(in, apply(in, clean));
  Field init = initialEstimate(fin);
  const Field& mask = std::get<Inpaint>(in.kind).mask;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) EXPECT_EQ(init(i, j, 0), mask(i, j, 0) == 1.0 ? clean(i, j, 0) : 0.5);

  DegradationModel sr{SuperRes{Kernel::impulse(), 2}, 0.0};
  auto fsr = DataFidelity::quadratic(sr, apply(sr, clean), s);
  EXPECT_EQ(initialEstimate(fsr).shape(), s);
}

TEST(CubicUpsample, InterpolatesSamplesAndReproducesLinearRamps) {
  Field x(6, 6, 1);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) x(i, j, 0) = std::sin(i) + std::cos(2.0 * j);
  Field up = cubicUpsample(x, 3);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) EXPECT_NEAR(up(3 * i, 3 * j, 0), x(i, j, 0), 1e-12);

  // Constant fields stay constant; Keys' kernel reproduces affine data away
  // from the periodic seam.
  Field c(5, 5, 2, 0.3);
  EXPECT_LT(maxAbs(cubicUpsample(c, 2) - Field(10, 10, 2, 0.3)), 1e-12);
  Field ramp(12, 1, 1);
  for (int i = 0; i < 12; ++i) ramp(i, 0, 0) = 0.1 * i;
  Field r = cubicUpsample(ramp, 2);
  for (int i = 4; i < 18; ++i) EXPECT_NEAR(r(i, 0, 0), 0.05 * i, 1e-12);
}

TEST(RandomMask, DensityAndDeterminism) {
  Field a = randomMask(128, 128, 0.3, 5), b = randomMask(128, 128, 0.3, 5);
  EXPECT_EQ(a.values(), b.values());
  const double hidden = 1.0 - sum(a) / static_cast<double>(a.size());
  EXPECT_NEAR(hidden, 0.3, 0.02);
  EXPECT_EQ(sum(randomMask(8, 8, 0.0, 1)), 64.0);
  EXPECT_THROW(randomMask(4, 4, 1.5, 1), InvalidArgument);
}
