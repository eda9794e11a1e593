#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pnp/field.hpp"

namespace pnp {

enum class Activation : std::uint8_t {
  Elu = 1,       // alpha = 1, C^1
  Softplus = 2,  // beta = 1, C^infinity
};

std::string toString(Activation activation);
Activation activationFromString(const std::string& name);

/// One periodic convolution layer; weights are laid out [out][in][row][col]
/// inside the network's flat parameter vector, followed by `out` biases.
struct LayerShape {
  int inChannels = 0;
  int outChannels = 0;
  int taps = 1;  // odd spatial support, taps x taps

  std::size_t weightCount() const {
    return static_cast<std::size_t>(outChannels) * inChannels * taps * taps;
  }
  std::size_t parameterCount() const { return weightCount() + static_cast<std::size_t>(outChannels); }
  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

struct NetSpec {
  int imageChannels = 3;
  std::vector<int> hiddenWidths{16, 16};
  int taps = 5;
  Activation activation = Activation::Elu;
  /// Appends a constant sigma plane to the input.
  bool noiseChannel = true;
  /// N(x) = x - R(x) with R the convolution stack, so g = 1/2 ||R(x)||^2
  /// and a small R starts near the identity denoiser.
  bool skip = true;

  std::vector<LayerShape> layers() const;
};

struct PotentialEval {
  double value = 0.0;  // g(x) = 1/2 ||x - N(x)||^2
  Field gradient;      // grad g(x)
};

/// Convolutional network N_sigma with smooth activations between layers and a
/// linear last layer, optionally wrapped in a global skip. Spatial size is
/// preserved (periodic padding). Provides
/// the potential g(x) = 1/2 ||x - N(x)||^2 and its exact derivatives by
/// hand-written reverse mode.
class SmoothNet {
 public:
  SmoothNet() = default;
  SmoothNet(int imageChannels, std::vector<LayerShape> layers, Activation activation,
            bool noiseChannel, bool skip, std::vector<double> parameters);

  /// He-style Gaussian initialization, deterministic per seed. With the skip
  /// the last layer is scaled down so the initial denoiser is near identity.
  static SmoothNet random(const NetSpec& spec, std::uint64_t seed);
  static SmoothNet zeros(const NetSpec& spec);

  int imageChannels() const { return imageChannels_; }
  int inputChannels() const { return imageChannels_ + (noiseChannel_ ? 1 : 0); }
  bool noiseChannel() const { return noiseChannel_; }
  bool skip() const { return skip_; }
  Activation activation() const { return activation_; }
  const std::vector<LayerShape>& layers() const { return layers_; }
  std::size_t layerOffset(std::size_t layer) const { return offsets_[layer]; }

  std::span<const double> parameters() const { return parameters_; }
  std::span<double> parameters() { return parameters_; }
  std::size_t parameterCount() const { return parameters_.size(); }

  /// N_sigma(x).
  Field forward(const Field& x, double sigma) const;
  /// J_N(x)^T v.
  Field vjp(const Field& x, double sigma, const Field& v) const;

  double potentialValue(const Field& x, double sigma) const;
  /// g and grad g from one forward and one backward pass.
  PotentialEval potential(const Field& x, double sigma) const;

  struct Backward {
    Field input;                  // d/dx <grad g(x), gbar> = Hess g(x) gbar
    std::vector<double> weights;  // d/dtheta <grad g(x), gbar>; empty unless requested
    Field gradient;               // grad g(x), a by-product
  };
  /// Reverse mode through the gradient computation itself.
  Backward gradientBackward(const Field& x, double sigma, const Field& gbar, bool withWeights) const;

  /// d/dtheta of b^T Hess g(x) b, exact (forward-mode tangent of the weight
  /// gradient along b).
  std::vector<double> curvatureWeightGradient(const Field& x, double sigma, const Field& b) const;

 private:
  void checkInput(const Field& x) const;

  int imageChannels_ = 0;
  std::vector<LayerShape> layers_;
  std::vector<std::size_t> offsets_;
  Activation activation_ = Activation::Elu;
  bool noiseChannel_ = false;
  bool skip_ = false;
  std::vector<double> parameters_;
};

}  // namespace pnp
