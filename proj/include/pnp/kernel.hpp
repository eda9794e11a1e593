#pragma once

#include <filesystem>
#include <vector>

#include "pnp/fft.hpp"
#include "pnp/field.hpp"

namespace pnp {

/// Small 2-D filter with an explicit center tap. Applied identically to every
/// channel, always with periodic boundaries.
class Kernel {
 public:
  Kernel() = default;
  Kernel(int rows, int cols, std::vector<double> taps, int centerRow, int centerCol);
  /// Centered at (rows / 2, cols / 2).
  Kernel(int rows, int cols, std::vector<double> taps);

  static Kernel impulse();
  /// size x size box of value 1 / size^2.
  static Kernel box(int size);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int centerRow() const { return centerRow_; }
  int centerCol() const { return centerCol_; }
  double operator()(int r, int c) const { return taps_[static_cast<std::size_t>(r * cols_ + c)]; }
  const std::vector<double>& taps() const { return taps_; }

  double sum() const;
  /// Copy scaled so the taps sum to one.
  Kernel normalized() const;
  /// k(cr + a, cc + b) == k(cr - a, cc - b) for every tap, to `tol`.
  bool isCentrosymmetric(double tol = 1e-14) const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  int centerRow_ = 0;
  int centerCol_ = 0;
  std::vector<double> taps_;
};

/// DFT of the kernel zero-padded to height x width with its center shifted
/// to the origin, so that multiplying a spectrum by it is periodic convolution.
class SpectralDiag {
 public:
  SpectralDiag() = default;
  SpectralDiag(const Kernel& kernel, int height, int width);

  int height() const { return height_; }
  int width() const { return width_; }
  const Complex& operator()(int i, int j) const {
    return values_[static_cast<std::size_t>(i * width_ + j)];
  }
  const std::vector<Complex>& values() const { return values_; }

  /// H x (or H^T x when `adjoint`) for every channel of x.
  Field apply(const Field& x, bool adjoint = false) const;
  /// Multiplies each channel of an existing spectrum in place.
  void multiply(Spectrum& spectrum, bool adjoint = false) const;

  /// max |Lambda|^2, the spectral norm of H^T H.
  double maxSquaredMagnitude() const;
  /// True for a unit impulse; apply then returns its input unchanged.
  bool isIdentity() const { return identity_; }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<Complex> values_;
  bool identity_ = false;
};

/// y(i, j) = sum_{a,b} k(a, b) x(i - (a - cr), j - (b - cc)), indices mod H, W.
/// Computed spectrally.
Field convPeriodic(const Field& x, const Kernel& kernel);

/// Plain-text kernel file: one header line "rows cols centerRow centerCol",
/// then `rows` lines of `cols` whitespace-separated taps.
Kernel readKernelText(const std::filesystem::path& path);
void writeKernelText(const std::filesystem::path& path, const Kernel& kernel);

}  // namespace pnp
