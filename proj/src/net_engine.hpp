#pragma once

// Templated forward / backward / second-backward passes of SmoothNet. The
// scalar type is double, or Dual when a directional derivative of the whole
// computation is needed. Activations are stored planar: channel c occupies
// [c * H * W, (c + 1) * H * W).

#include <cmath>
#include <algorithm>
#include <cstddef>
#include <vector>

#include "dual.hpp"
#include "pnp/smooth_net.hpp"

namespace pnp::detail {

using std::exp;
using std::log1p;

template <class T>
T activate(Activation kind, const T& x) {
  if (kind == Activation::Elu) return primal(x) > 0.0 ? x : exp(x) - T(1.0);
  return primal(x) > 0.0 ? x + log1p(exp(-x)) : log1p(exp(x));
}

template <class T>
T activatePrime(Activation kind, const T& x) {
  if (kind == Activation::Elu) return primal(x) > 0.0 ? T(1.0) : exp(x);
  if (primal(x) >= 0.0) return T(1.0) / (T(1.0) + exp(-x));
  const T e = exp(x);
  return e / (T(1.0) + e);
}

template <class T>
T activateSecond(Activation kind, const T& x) {
  if (kind == Activation::Elu) return primal(x) > 0.0 ? T(0.0) : exp(x);
  const T s = activatePrime(kind, x);
  return s * (T(1.0) - s);
}

struct Geometry {
  int height;
  int width;
  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
};

/// out(i, j) += w * in((i + dy) mod H, (j + dx) mod W).
template <class T>
void shiftedAxpy(T* out, const T* in, double w, int dy, int dx, const Geometry& g) {
  const int H = g.height, W = g.width;
  dx = ((dx % W) + W) % W;
  for (int i = 0; i < H; ++i) {
    const int si = (((i + dy) % H) + H) % H;
    T* o = out + static_cast<std::size_t>(i) * W;
    const T* s = in + static_cast<std::size_t>(si) * W;
    const int split = W - dx;
    for (int j = 0; j < split; ++j) o[j] += w * s[j + dx];
    for (int j = split; j < W; ++j) o[j] += w * s[j + dx - W];
  }
}

/// sum_p a(p) * b(p + (dy, dx)).
template <class T>
T shiftedDot(const T* a, const T* b, int dy, int dx, const Geometry& g) {
  const int H = g.height, W = g.width;
  dx = ((dx % W) + W) % W;
  T acc(0.0);
  for (int i = 0; i < H; ++i) {
    const int si = (((i + dy) % H) + H) % H;
    const T* ar = a + static_cast<std::size_t>(i) * W;
    const T* br = b + static_cast<std::size_t>(si) * W;
    const int split = W - dx;
    for (int j = 0; j < split; ++j) acc += ar[j] * br[j + dx];
    for (int j = split; j < W; ++j) acc += ar[j] * br[j + dx - W];
  }
  return acc;
}

/// out[co] += sum_ci W[co][ci] (*) in[ci]  (cross-correlation, periodic).
template <class T>
void convForward(const LayerShape& L, const double* weights, const T* in, T* out, const Geometry& g) {
  const int K = L.taps, c = K / 2;
  const std::size_t P = g.plane();
  for (int co = 0; co < L.outChannels; ++co) {
    for (int ci = 0; ci < L.inChannels; ++ci) {
      const double* w = weights + (static_cast<std::size_t>(co) * L.inChannels + ci) * K * K;
      for (int a = 0; a < K; ++a)
        for (int b = 0; b < K; ++b)
          if (w[a * K + b] != 0.0) shiftedAxpy(out + co * P, in + ci * P, w[a * K + b], a - c, b - c, g);
    }
  }
}

/// Adjoint of convForward with respect to its input.
template <class T>
void convAdjoint(const LayerShape& L, const double* weights, const T* outBar, T* inBar, const Geometry& g) {
  const int K = L.taps, c = K / 2;
  const std::size_t P = g.plane();
  for (int co = 0; co < L.outChannels; ++co) {
    for (int ci = 0; ci < L.inChannels; ++ci) {
      const double* w = weights + (static_cast<std::size_t>(co) * L.inChannels + ci) * K * K;
      for (int a = 0; a < K; ++a)
        for (int b = 0; b < K; ++b)
          if (w[a * K + b] != 0.0) shiftedAxpy(inBar + ci * P, outBar + co * P, w[a * K + b], c - a, c - b, g);
    }
  }
}

/// wBar[co][ci][a][b] += sum_p outBar[co](p) in[ci](p + (a - c, b - c)).
template <class T>
void convWeightGrad(const LayerShape& L, const T* outBar, const T* in, T* wBar, const Geometry& g) {
  const int K = L.taps, c = K / 2;
  const std::size_t P = g.plane();
  for (int co = 0; co < L.outChannels; ++co) {
    for (int ci = 0; ci < L.inChannels; ++ci) {
      T* w = wBar + (static_cast<std::size_t>(co) * L.inChannels + ci) * K * K;
      for (int a = 0; a < K; ++a)
        for (int b = 0; b < K; ++b) w[a * K + b] += shiftedDot(outBar + co * P, in + ci * P, a - c, b - c, g);
    }
  }
}

template <class T>
struct NetCache {
  std::vector<std::vector<T>> z;  // pre-activations, one per layer
  std::vector<std::vector<T>> a;  // a[0] = input, a[l] = act(z[l-1])
  std::vector<std::vector<T>> e;  // backward signals e_l (per layer output)
  std::vector<std::vector<T>> h;  // h[l] = adjoint conv of layer l applied to e_l
  std::vector<T> residual;        // u - N(u), image channels
  std::vector<T> gradient;        // grad g(u), image channels
};

class Engine {
 public:
  Engine(const SmoothNet& net, int height, int width)
      : net_(net), g_{height, width}, params_(net.parameters().data()) {}

  const Geometry& geometry() const { return g_; }

  template <class T>
  void forward(const std::vector<T>& input, NetCache<T>& cache) const {
    const auto& layers = net_.layers();
    const std::size_t P = g_.plane();
    cache.z.assign(layers.size(), {});
    cache.a.assign(layers.size(), {});
    cache.a[0] = input;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const LayerShape& L = layers[l];
      const double* w = params_ + net_.layerOffset(l);
      const double* bias = w + L.weightCount();
      std::vector<T>& z = cache.z[l];
      z.assign(static_cast<std::size_t>(L.outChannels) * P, T(0.0));
      for (int co = 0; co < L.outChannels; ++co)
        for (std::size_t p = 0; p < P; ++p) z[co * P + p] = T(bias[co]);
      convForward(L, w, cache.a[l].data(), z.data(), g_);
      if (l + 1 < layers.size()) {
        std::vector<T>& next = cache.a[l + 1];
        next.resize(z.size());
        for (std::size_t n = 0; n < z.size(); ++n) next[n] = activate(net_.activation(), z[n]);
      }
    }
  }

  /// J_N^T seed, written into `inputBar` (all input channels).
  template <class T>
  void backward(NetCache<T>& cache, const std::vector<T>& seed, std::vector<T>& inputBar) const {
    const auto& layers = net_.layers();
    const std::size_t P = g_.plane();
    const std::size_t Lc = layers.size();
    cache.e.assign(Lc, {});
    cache.h.assign(Lc, {});
    cache.e[Lc - 1] = seed;
    for (std::size_t l = Lc; l-- > 0;) {
      const LayerShape& L = layers[l];
      std::vector<T>& h = cache.h[l];
      h.assign(static_cast<std::size_t>(L.inChannels) * P, T(0.0));
      convAdjoint(L, params_ + net_.layerOffset(l), cache.e[l].data(), h.data(), g_);
      if (l > 0) {
        std::vector<T>& e = cache.e[l - 1];
        const std::vector<T>& z = cache.z[l - 1];
        e.resize(h.size());
        for (std::size_t n = 0; n < h.size(); ++n) e[n] = activatePrime(net_.activation(), z[n]) * h[n];
      }
    }
    inputBar = cache.h[0];
  }

  /// Forward + backward for grad g(u) = r - J_N^T r with r = u - N(u).
  /// With the skip, N = u - z_last, so r = z_last and grad g = J_z^T r.
  template <class T>
  void gradient(const std::vector<T>& input, int imageChannels, NetCache<T>& cache) const {
    forward(input, cache);
    const std::size_t n = static_cast<std::size_t>(imageChannels) * g_.plane();
    const std::vector<T>& z = cache.z.back();
    cache.residual.resize(n);
    for (std::size_t k = 0; k < n; ++k) cache.residual[k] = net_.skip() ? z[k] : input[k] - z[k];
    std::vector<T> inputBar;
    backward(cache, cache.residual, inputBar);
    cache.gradient.resize(n);
    for (std::size_t k = 0; k < n; ++k)
      cache.gradient[k] = net_.skip() ? inputBar[k] : cache.residual[k] - inputBar[k];
  }

  /// Reverse mode of `gradient` for the scalar <grad g(u), gbar>. Adds the
  /// input adjoint (image channels) into uBar and, if wBar is non-null, the
  /// parameter adjoint into wBar.
  template <class T>
  void gradientBackward(const NetCache<T>& cache, const std::vector<T>& gbar, int imageChannels,
                        std::vector<T>& uBar, std::vector<T>* wBar) const {
    const auto& layers = net_.layers();
    const std::size_t P = g_.plane();
    const std::size_t Lc = layers.size();
    const std::size_t n = static_cast<std::size_t>(imageChannels) * P;
    const Activation act = net_.activation();

    // grad g = r - q (or q with the skip), q = h[0] on the image channels.
    const bool skip = net_.skip();
    std::vector<std::vector<T>> zBar(Lc);
    for (std::size_t l = 0; l < Lc; ++l) zBar[l].assign(cache.z[l].size(), T(0.0));

    std::vector<T> hBar(cache.h[0].size(), T(0.0));
    for (std::size_t k = 0; k < n; ++k) hBar[k] = skip ? gbar[k] : -gbar[k];

    std::vector<T> rBar(n, T(0.0));
    if (!skip) std::copy(gbar.begin(), gbar.begin() + static_cast<std::ptrdiff_t>(n), rBar.begin());
    for (std::size_t l = 0; l < Lc; ++l) {
      const LayerShape& L = layers[l];
      const double* w = params_ + net_.layerOffset(l);
      // h[l] = convAdjoint(W_l, e_l)
      if (wBar) convWeightGrad(L, cache.e[l].data(), hBar.data(), wBar->data() + net_.layerOffset(l), g_);
      std::vector<T> eBar(static_cast<std::size_t>(L.outChannels) * P, T(0.0));
      convForward(L, w, hBar.data(), eBar.data(), g_);
      if (l + 1 < Lc) {
        // e_l = act'(z_l) * h[l + 1]
        const std::vector<T>& z = cache.z[l];
        const std::vector<T>& h = cache.h[l + 1];
        std::vector<T> next(h.size());
        for (std::size_t k = 0; k < h.size(); ++k) {
          next[k] = activatePrime(act, z[k]) * eBar[k];
          zBar[l][k] += activateSecond(act, z[k]) * h[k] * eBar[k];
        }
        hBar = std::move(next);
      } else {
        // e_last = r
        for (std::size_t k = 0; k < n; ++k) rBar[k] += eBar[k];
      }
    }

    // r = u - z_last, or r = z_last with the skip
    for (std::size_t k = 0; k < n; ++k) {
      if (skip) {
        zBar[Lc - 1][k] += rBar[k];
      } else {
        uBar[k] += rBar[k];
        zBar[Lc - 1][k] -= rBar[k];
      }
    }

    // Back through the forward pass.
    for (std::size_t l = Lc; l-- > 0;) {
      const LayerShape& L = layers[l];
      const double* w = params_ + net_.layerOffset(l);
      if (wBar) {
        T* wb = wBar->data() + net_.layerOffset(l);
        convWeightGrad(L, zBar[l].data(), cache.a[l].data(), wb, g_);
        T* bb = wb + L.weightCount();
        for (int co = 0; co < L.outChannels; ++co) {
          T acc(0.0);
          for (std::size_t p = 0; p < P; ++p) acc += zBar[l][co * P + p];
          bb[co] += acc;
        }
      }
      std::vector<T> aBar(static_cast<std::size_t>(L.inChannels) * P, T(0.0));
      convAdjoint(L, w, zBar[l].data(), aBar.data(), g_);
      if (l > 0) {
        const std::vector<T>& z = cache.z[l - 1];
        for (std::size_t k = 0; k < aBar.size(); ++k) zBar[l - 1][k] += activatePrime(act, z[k]) * aBar[k];
      } else {
        for (std::size_t k = 0; k < n; ++k) uBar[k] += aBar[k];
      }
    }
  }

 private:
  const SmoothNet& net_;
  Geometry g_;
  const double* params_;
};

}  // namespace pnp::detail
