#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pnp {

struct Shape {
  int height = 0;
  int width = 0;
  int channels = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
           static_cast<std::size_t>(channels);
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string toString(const Shape& shape);

/// H x W x C image of doubles, stored row-major with interleaved channels:
/// element (i, j, c) lives at (i * W + j) * C + c.
class Field {
 public:
  Field() = default;
  Field(int height, int width, int channels, double fill = 0.0);
  explicit Field(Shape shape, double fill = 0.0);
  Field(Shape shape, std::vector<double> data);

  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  int channels() const { return shape_.channels; }
  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int i, int j, int c) { return data_[index(i, j, c)]; }
  double operator()(int i, int j, int c) const { return data_[index(i, j, c)]; }
  double& operator[](std::size_t n) { return data_[n]; }
  double operator[](std::size_t n) const { return data_[n]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  std::size_t index(int i, int j, int c) const {
    return (static_cast<std::size_t>(i) * static_cast<std::size_t>(shape_.width) +
            static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(shape_.channels) +
           static_cast<std::size_t>(c);
  }

  bool allFinite() const;

  Field& operator+=(const Field& other);
  Field& operator-=(const Field& other);
  Field& operator*=(double s);

  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(double s, Field a) { return a *= s; }
  friend Field operator*(Field a, double s) { return a *= s; }

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Throws DimensionError unless the two fields have identical shapes.
void requireSameShape(const Field& a, const Field& b, const char* what);

double dot(const Field& a, const Field& b);
double squaredNorm(const Field& a);
double norm(const Field& a);
double maxAbs(const Field& a);
double sum(const Field& a);

/// a * x + b * y
Field lincomb(double a, const Field& x, double b, const Field& y);

/// Entrywise product; `mask` may have one channel, broadcast over x's channels.
Field multiply(const Field& x, const Field& mask);

/// Entrywise clamp into [lo, hi].
Field clamp(const Field& x, double lo, double hi);

/// Channel c as a single-channel field.
Field extractChannel(const Field& x, int c);

}  // namespace pnp
