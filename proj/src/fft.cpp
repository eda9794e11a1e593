#include "pnp/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

#include "pnp/errors.hpp"

namespace pnp {
namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
// Plans are created once per (shape, direction) and live for the process.
class PlanCache {
 public:
  fftw_plan get(const Shape& shape, int sign) {
    const auto key = std::make_tuple(shape.height, shape.width, shape.channels, sign);
    std::lock_guard<std::mutex> lock(mutex_);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;

    std::vector<Complex> in(shape.size()), out(shape.size());
    int dims[2] = {shape.height, shape.width};
    fftw_plan plan = fftw_plan_many_dft(
        2, dims, shape.channels, reinterpret_cast<fftw_complex*>(in.data()), nullptr,
        shape.channels, 1, reinterpret_cast<fftw_complex*>(out.data()), nullptr,
        shape.channels, 1, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan == nullptr) throw NumericalFailure("FFTW failed to create a plan");
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, int, int>, fftw_plan> plans_;
};

PlanCache& planCache() {
  static PlanCache cache;
  return cache;
}

void requireNonEmpty(const Shape& shape) {
  if (shape.height < 1 || shape.width < 1 || shape.channels < 1) {
    throw DimensionError("FFT needs dimensions >= 1, got " + toString(shape));
  }
}

}  // namespace

Spectrum fft2(const Field& x) {
  requireNonEmpty(x.shape());
  std::vector<Complex> in(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) in[n] = Complex(x[n], 0.0);
  Spectrum out(x.shape());
  fftw_execute_dft(planCache().get(x.shape(), FFTW_FORWARD),
                   reinterpret_cast<fftw_complex*>(in.data()),
                   reinterpret_cast<fftw_complex*>(out.raw()));
  return out;
}

Field ifft2(const Spectrum& spectrum) {
  requireNonEmpty(spectrum.shape());
  std::vector<Complex> in(spectrum.raw(), spectrum.raw() + spectrum.size());
  std::vector<Complex> out(spectrum.size());
  fftw_execute_dft(planCache().get(spectrum.shape(), FFTW_BACKWARD),
                   reinterpret_cast<fftw_complex*>(in.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  const double scale =
      1.0 / (static_cast<double>(spectrum.height()) * static_cast<double>(spectrum.width()));
  Field x(spectrum.shape());
  for (std::size_t n = 0; n < x.size(); ++n) x[n] = out[n].real() * scale;
  return x;
}

}  // namespace pnp
