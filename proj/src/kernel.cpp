#include "pnp/kernel.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "pnp/errors.hpp"

namespace pnp {

Kernel::Kernel(int rows, int cols, std::vector<double> taps, int centerRow, int centerCol)
    : rows_(rows), cols_(cols), centerRow_(centerRow), centerCol_(centerCol), taps_(std::move(taps)) {
  if (rows < 1 || cols < 1) throw DimensionError("kernel dimensions must be >= 1");
  if (taps_.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw DimensionError("kernel tap count does not match rows x cols");
  }
  if (centerRow < 0 || centerRow >= rows || centerCol < 0 || centerCol >= cols) {
    throw DimensionError("kernel center lies outside the taps");
  }
  if (!std::isfinite(sum())) throw InvalidArgument("kernel taps must be finite");
}

Kernel::Kernel(int rows, int cols, std::vector<double> taps)
    : Kernel(rows, cols, std::move(taps), rows / 2, cols / 2) {}

Kernel Kernel::impulse() { return Kernel(1, 1, {1.0}, 0, 0); }

Kernel Kernel::box(int size) {
  if (size < 1) throw InvalidArgument("box kernel size must be >= 1");
  const double v = 1.0 / (static_cast<double>(size) * size);
  return Kernel(size, size, std::vector<double>(static_cast<std::size_t>(size * size), v));
}

double Kernel::sum() const {
  double acc = 0.0;
  for (double v : taps_) acc += v;
  return acc;
}

Kernel Kernel::normalized() const {
  const double s = sum();
  if (s == 0.0) throw InvalidArgument("cannot normalize a zero-sum kernel");
  std::vector<double> taps = taps_;
  for (double& v : taps) v /= s;
  return Kernel(rows_, cols_, std::move(taps), centerRow_, centerCol_);
}

bool Kernel::isCentrosymmetric(double tol) const {
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) {
      const int rr = 2 * centerRow_ - r;
      const int cc = 2 * centerCol_ - c;
      const double mirrored = (rr >= 0 && rr < rows_ && cc >= 0 && cc < cols_) ? (*this)(rr, cc) : 0.0;
      if (std::abs((*this)(r, c) - mirrored) > tol) return false;
    }
  }
  return true;
}

SpectralDiag::SpectralDiag(const Kernel& kernel, int height, int width)
    : height_(height), width_(width) {
  if (kernel.rows() > height || kernel.cols() > width) {
    throw DimensionError("kernel " + std::to_string(kernel.rows()) + "x" +
                         std::to_string(kernel.cols()) + " larger than field " +
                         std::to_string(height) + "x" + std::to_string(width));
  }
  Field padded(height, width, 1);
  for (int r = 0; r < kernel.rows(); ++r) {
    for (int c = 0; c < kernel.cols(); ++c) {
      const int i = ((r - kernel.centerRow()) % height + height) % height;
      const int j = ((c - kernel.centerCol()) % width + width) % width;
      padded(i, j, 0) += kernel(r, c);
    }
  }
  identity_ = padded[0] == 1.0;
  for (std::size_t n = 1; n < padded.size() && identity_; ++n) identity_ = padded[n] == 0.0;
  if (identity_) {
    values_.assign(padded.size(), Complex(1.0, 0.0));
    return;
  }
  const Spectrum s = fft2(padded);
  values_.assign(s.raw(), s.raw() + s.size());
}

void SpectralDiag::multiply(Spectrum& spectrum, bool adjoint) const {
  if (spectrum.height() != height_ || spectrum.width() != width_) {
    throw DimensionError("spectral diagonal size does not match spectrum");
  }
  if (identity_) return;
  const int channels = spectrum.channels();
  for (std::size_t p = 0; p < values_.size(); ++p) {
    const Complex lambda = adjoint ? std::conj(values_[p]) : values_[p];
    for (int c = 0; c < channels; ++c) spectrum[p * static_cast<std::size_t>(channels) + c] *= lambda;
  }
}

Field SpectralDiag::apply(const Field& x, bool adjoint) const {
  if (identity_) {
    if (x.height() != height_ || x.width() != width_) throw DimensionError("spectral diagonal size does not match field");
    return x;
  }
  Spectrum s = fft2(x);
  multiply(s, adjoint);
  return ifft2(s);
}

double SpectralDiag::maxSquaredMagnitude() const {
  double m = 0.0;
  for (const Complex& v : values_) m = std::max(m, std::norm(v));
  return m;
}

Field convPeriodic(const Field& x, const Kernel& kernel) {
  return SpectralDiag(kernel, x.height(), x.width()).apply(x);
}

Kernel readKernelText(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open kernel file " + path.string());
  int rows = 0, cols = 0, cr = 0, cc = 0;
  if (!(in >> rows >> cols >> cr >> cc)) throw IoError("bad kernel header in " + path.string());
  if (rows < 1 || cols < 1 || rows > 4096 || cols > 4096) {
    throw IoError("implausible kernel size in " + path.string());
  }
  std::vector<double> taps(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
  for (double& v : taps) {
    if (!(in >> v)) throw IoError("truncated kernel data in " + path.string());
  }
  return Kernel(rows, cols, std::move(taps), cr, cc);
}

void writeKernelText(const std::filesystem::path& path, const Kernel& kernel) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write kernel file " + path.string());
  out << kernel.rows() << ' ' << kernel.cols() << ' ' << kernel.centerRow() << ' '
      << kernel.centerCol() << '\n';
  out << std::setprecision(17);
  for (int r = 0; r < kernel.rows(); ++r) {
    for (int c = 0; c < kernel.cols(); ++c) out << (c ? " " : "") << kernel(r, c);
    out << '\n';
  }
}

}  // namespace pnp
