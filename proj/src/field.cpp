#include "pnp/field.hpp"

#include <algorithm>
#include <cmath>

#include "pnp/errors.hpp"

namespace pnp {

std::string toString(const Shape& shape) {
  return std::to_string(shape.height) + "x" + std::to_string(shape.width) + "x" +
         std::to_string(shape.channels);
}

Field::Field(int height, int width, int channels, double fill)
    : Field(Shape{height, width, channels}, fill) {}

Field::Field(Shape shape, double fill) : shape_(shape) {
  if (shape.height < 0 || shape.width < 0 || shape.channels < 0) {
    throw DimensionError("negative field dimension " + toString(shape));
  }
  data_.assign(shape.size(), fill);
}

Field::Field(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape.size()) {
    throw DimensionError("data length " + std::to_string(data_.size()) +
                         " does not match shape " + toString(shape));
  }
}

bool Field::allFinite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Field& Field::operator+=(const Field& other) {
  requireSameShape(*this, other, "operator+=");
  for (std::size_t n = 0; n < data_.size(); ++n) data_[n] += other.data_[n];
  return *this;
}

Field& Field::operator-=(const Field& other) {
  requireSameShape(*this, other, "operator-=");
  for (std::size_t n = 0; n < data_.size(); ++n) data_[n] -= other.data_[n];
  return *this;
}

Field& Field::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

void requireSameShape(const Field& a, const Field& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + toString(a.shape()) +
                         " vs " + toString(b.shape()));
  }
}

double dot(const Field& a, const Field& b) {
  requireSameShape(a, b, "dot");
  double acc = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) acc += a[n] * b[n];
  return acc;
}

double squaredNorm(const Field& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v * v;
  return acc;
}

double norm(const Field& a) { return std::sqrt(squaredNorm(a)); }

double maxAbs(const Field& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

double sum(const Field& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return acc;
}

Field lincomb(double a, const Field& x, double b, const Field& y) {
  requireSameShape(x, y, "lincomb");
  Field out(x.shape());
  for (std::size_t n = 0; n < x.size(); ++n) out[n] = a * x[n] + b * y[n];
  return out;
}

Field multiply(const Field& x, const Field& mask) {
  if (mask.height() != x.height() || mask.width() != x.width() ||
      (mask.channels() != 1 && mask.channels() != x.channels())) {
    throw DimensionError("multiply: mask " + toString(mask.shape()) +
                         " incompatible with " + toString(x.shape()));
  }
  Field out(x.shape());
  const int c = x.channels();
  const bool broadcast = mask.channels() == 1;
  for (std::size_t n = 0; n < x.size(); ++n) {
    out[n] = x[n] * (broadcast ? mask[n / static_cast<std::size_t>(c)] : mask[n]);
  }
  return out;
}

Field clamp(const Field& x, double lo, double hi) {
  Field out(x.shape());
  for (std::size_t n = 0; n < x.size(); ++n) out[n] = std::clamp(x[n], lo, hi);
  return out;
}

Field extractChannel(const Field& x, int c) {
  if (c < 0 || c >= x.channels()) throw DimensionError("extractChannel: channel out of range");
  Field out(x.height(), x.width(), 1);
  for (int i = 0; i < x.height(); ++i)
    for (int j = 0; j < x.width(); ++j) out(i, j, 0) = x(i, j, c);
  return out;
}

}  // namespace pnp
