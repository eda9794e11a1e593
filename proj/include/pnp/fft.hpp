#pragma once

#include <complex>
#include <vector>

#include "pnp/field.hpp"

namespace pnp {

using Complex = std::complex<double>;

/// Per-channel 2-D DFT of a Field, same interleaved layout as Field.
/// Forward transforms are unnormalized; the inverse carries the 1/(H*W).
class Spectrum {
 public:
  Spectrum() = default;
  explicit Spectrum(Shape shape) : shape_(shape), data_(shape.size()) {}

  const Shape& shape() const { return shape_; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  int channels() const { return shape_.channels; }
  std::size_t size() const { return data_.size(); }

  Complex& operator()(int i, int j, int c) { return data_[index(i, j, c)]; }
  const Complex& operator()(int i, int j, int c) const { return data_[index(i, j, c)]; }
  Complex& operator[](std::size_t n) { return data_[n]; }
  const Complex& operator[](std::size_t n) const { return data_[n]; }

  Complex* raw() { return data_.data(); }
  const Complex* raw() const { return data_.data(); }

  std::size_t index(int i, int j, int c) const {
    return (static_cast<std::size_t>(i) * static_cast<std::size_t>(shape_.width) +
            static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(shape_.channels) +
           static_cast<std::size_t>(c);
  }

 private:
  Shape shape_;
  std::vector<Complex> data_;
};

Spectrum fft2(const Field& x);

/// Real part of the inverse transform.
Field ifft2(const Spectrum& spectrum);

}  // namespace pnp
