#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fetalnet/core/resample.hpp"
#include "fetalnet/core/tensor.hpp"

namespace fetalnet::nn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

/// Forward-pass mode shared by every layer.
struct Context {
  bool train = false;
  /// Source of dropout masks; dropout is the identity when null.
  std::mt19937_64* rng = nullptr;
  /// Keep intermediate values for a later backward pass.
  bool record = true;
};

// ---------------------------------------------------------------------------
// im2col for square kernels, stride 1, "same" zero padding.

inline void im2col(const double* x, int channels, int h, int w, int k, double* cols) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < channels; ++c) {
    const double* plane = x + static_cast<std::size_t>(c) * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * hw;
        const int dy = ky - pad;
        const int dx = kx - pad;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          double* out = row + static_cast<std::size_t>(y) * w;
          if (sy < 0 || sy >= h) {
            std::fill(out, out + w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(sy) * w;
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(w, w - dx);
          std::fill(out, out + x0, 0.0);
          std::copy(src + x0 + dx, src + x1 + dx, out + x0);
          std::fill(out + x1, out + w, 0.0);
        }
      }
    }
  }
}

inline void col2im(const double* cols, int channels, int h, int w, int k, double* dx) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < channels; ++c) {
    double* plane = dx + static_cast<std::size_t>(c) * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * hw;
        const int oy = ky - pad;
        const int ox = kx - pad;
        for (int y = 0; y < h; ++y) {
          const int sy = y + oy;
          if (sy < 0 || sy >= h) continue;
          const double* in = row + static_cast<std::size_t>(y) * w;
          double* dst = plane + static_cast<std::size_t>(sy) * w;
          const int x0 = std::max(0, -ox);
          const int x1 = std::min(w, w - ox);
          for (int x = x0; x < x1; ++x) dst[x + ox] += in[x];
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise.

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline Tensor map(const Tensor& x, double (*f)(double)) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return y;
}

inline Tensor relu(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

/// Gradient through ReLU given its output.
inline Tensor relu_backward(const Tensor& y, const Tensor& dy) {
  Tensor dx(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = y[i] > 0.0 ? dy[i] : 0.0;
  return dx;
}

inline Tensor sigmoid(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
  return y;
}

// ---------------------------------------------------------------------------
// Shape plumbing.

inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
    throw ContractViolation("concat: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  Tensor out(a.n(), a.c() + b.c(), a.h(), a.w());
  for (int n = 0; n < a.n(); ++n) {
    std::copy(a.sample(n), a.sample(n) + a.shape().sample(), out.sample(n));
    std::copy(b.sample(n), b.sample(n) + b.shape().sample(), out.sample(n) + a.shape().sample());
  }
  return out;
}

/// Splits a channel-concatenated gradient into its two halves.
inline std::pair<Tensor, Tensor> split_channels(const Tensor& g, int first) {
  Tensor a(g.n(), first, g.h(), g.w());
  Tensor b(g.n(), g.c() - first, g.h(), g.w());
  for (int n = 0; n < g.n(); ++n) {
    const double* s = g.sample(n);
    std::copy(s, s + a.shape().sample(), a.sample(n));
    std::copy(s + a.shape().sample(), s + g.shape().sample(), b.sample(n));
  }
  return {std::move(a), std::move(b)};
}

/// Rows `indices` of the batch dimension.
inline Tensor gather(const Tensor& x, const std::vector<int>& indices) {
  Tensor out(static_cast<int>(indices.size()), x.c(), x.h(), x.w());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy(x.sample(indices[i]), x.sample(indices[i]) + x.shape().sample(),
              out.sample(static_cast<int>(i)));
  }
  return out;
}

inline void scatter_add(Tensor& dst, const Tensor& src, const std::vector<int>& indices) {
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const double* s = src.sample(static_cast<int>(i));
    double* d = dst.sample(indices[i]);
    for (std::size_t j = 0; j < src.shape().sample(); ++j) d[j] += s[j];
  }
}

// ---------------------------------------------------------------------------
// Resampling.

inline Tensor upsample_bilinear(const Tensor& x, int out_h, int out_w) {
  if (x.h() == out_h && x.w() == out_w) return x;
  Tensor y(x.n(), x.c(), out_h, out_w);
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      resize_plane(x.plane(n, c), x.h(), x.w(), y.plane(n, c), out_h, out_w);
  return y;
}

inline Tensor upsample_bilinear_backward(const Tensor& dy, int in_h, int in_w) {
  if (dy.h() == in_h && dy.w() == in_w) return dy;
  Tensor dx(dy.n(), dy.c(), in_h, in_w);
  for (int n = 0; n < dy.n(); ++n)
    for (int c = 0; c < dy.c(); ++c)
      resize_plane_adjoint(dy.plane(n, c), dy.h(), dy.w(), dx.plane(n, c), in_h, in_w);
  return dx;
}

struct MaxPoolCache {
  Shape in_shape;
  std::vector<std::uint32_t> argmax;  // flat index within the input plane
};

/// 2x2 max pooling, stride 2; the first maximum in raster order wins ties.
inline Tensor max_pool2(const Tensor& x, MaxPoolCache* cache) {
  if (x.h() % 2 || x.w() % 2) {
    throw ContractViolation("max_pool2: odd spatial size " + to_string(x.shape()));
  }
  const int oh = x.h() / 2, ow = x.w() / 2;
  Tensor y(x.n(), x.c(), oh, ow);
  if (cache) {
    cache->in_shape = x.shape();
    cache->argmax.assign(y.size(), 0);
  }
  std::size_t o = 0;
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const double* p = x.plane(n, c);
      for (int yy = 0; yy < oh; ++yy) {
        for (int xx = 0; xx < ow; ++xx, ++o) {
          std::uint32_t best = static_cast<std::uint32_t>(2 * yy * x.w() + 2 * xx);
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const auto idx = static_cast<std::uint32_t>((2 * yy + dy) * x.w() + 2 * xx + dx);
              if (p[idx] > p[best]) best = idx;
            }
          y[o] = p[best];
          if (cache) cache->argmax[o] = best;
        }
      }
    }
  }
  return y;
}

inline Tensor max_pool2_backward(const Tensor& dy, const MaxPoolCache& cache) {
  Tensor dx(cache.in_shape);
  std::size_t o = 0;
  for (int n = 0; n < dy.n(); ++n)
    for (int c = 0; c < dy.c(); ++c) {
      double* p = dx.plane(n, c);
      for (std::size_t i = 0; i < dy.shape().plane(); ++i, ++o) p[cache.argmax[o]] += dy[o];
    }
  return dx;
}

/// Adaptive average pooling with floor/ceil bin edges.
inline Tensor adaptive_avg_pool(const Tensor& x, int out_h, int out_w) {
  Tensor y(x.n(), x.c(), out_h, out_w);
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) {
      const double* p = x.plane(n, c);
      for (int i = 0; i < out_h; ++i) {
        const int y0 = i * x.h() / out_h, y1 = ((i + 1) * x.h() + out_h - 1) / out_h;
        for (int j = 0; j < out_w; ++j) {
          const int x0 = j * x.w() / out_w, x1 = ((j + 1) * x.w() + out_w - 1) / out_w;
          double s = 0.0;
          for (int yy = y0; yy < y1; ++yy)
            for (int xx = x0; xx < x1; ++xx) s += p[yy * x.w() + xx];
          y.at(n, c, i, j) = s / ((y1 - y0) * (x1 - x0));
        }
      }
    }
  return y;
}

inline Tensor adaptive_avg_pool_backward(const Tensor& dy, const Shape& in_shape) {
  Tensor dx(in_shape);
  const int out_h = dy.h(), out_w = dy.w();
  for (int n = 0; n < dy.n(); ++n)
    for (int c = 0; c < dy.c(); ++c) {
      double* p = dx.plane(n, c);
      for (int i = 0; i < out_h; ++i) {
        const int y0 = i * in_shape.h / out_h, y1 = ((i + 1) * in_shape.h + out_h - 1) / out_h;
        for (int j = 0; j < out_w; ++j) {
          const int x0 = j * in_shape.w / out_w, x1 = ((j + 1) * in_shape.w + out_w - 1) / out_w;
          const double g = dy.at(n, c, i, j) / ((y1 - y0) * (x1 - x0));
          for (int yy = y0; yy < y1; ++yy)
            for (int xx = x0; xx < x1; ++xx) p[yy * in_shape.w + xx] += g;
        }
      }
    }
  return dx;
}

// ---------------------------------------------------------------------------
// Channel dropout.

struct DropoutCache {
  std::vector<double> scale;  // per (sample, channel); empty means identity
};

/// Zeroes whole channels with probability p and rescales survivors by 1/(1-p).
inline Tensor dropout2d(const Tensor& x, double p, const Context& ctx, DropoutCache* cache) {
  if (!ctx.train || ctx.rng == nullptr || p <= 0.0) {
    if (cache) cache->scale.clear();
    return x;
  }
  std::bernoulli_distribution keep(1.0 - p);
  std::vector<double> scale(static_cast<std::size_t>(x.n()) * x.c());
  for (auto& s : scale) s = keep(*ctx.rng) ? 1.0 / (1.0 - p) : 0.0;
  Tensor y(x.shape());
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) {
      const double s = scale[static_cast<std::size_t>(n) * x.c() + c];
      const double* src = x.plane(n, c);
      double* dst = y.plane(n, c);
      for (std::size_t i = 0; i < x.shape().plane(); ++i) dst[i] = src[i] * s;
    }
  if (cache) cache->scale = std::move(scale);
  return y;
}

inline Tensor dropout2d_backward(const Tensor& dy, const DropoutCache& cache) {
  if (cache.scale.empty()) return dy;
  Tensor dx(dy.shape());
  for (int n = 0; n < dy.n(); ++n)
    for (int c = 0; c < dy.c(); ++c) {
      const double s = cache.scale[static_cast<std::size_t>(n) * dy.c() + c];
      const double* src = dy.plane(n, c);
      double* dst = dx.plane(n, c);
      for (std::size_t i = 0; i < dy.shape().plane(); ++i) dst[i] = src[i] * s;
    }
  return dx;
}

}  // namespace fetalnet::nn
