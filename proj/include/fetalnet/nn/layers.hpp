#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "fetalnet/nn/ops.hpp"

namespace fetalnet::nn {

/// A named array owned by a layer. Buffers (batch-norm running statistics) are
/// saved in checkpoints but not touched by the optimiser.
struct Param {
  Tensor value;
  Tensor grad;
  bool trainable = true;

  explicit Param(Shape s = {}, bool is_trainable = true)
      : value(s), grad(is_trainable ? s : Shape{}), trainable(is_trainable) {}
};

inline void kaiming_normal(Tensor& w, int fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  for (auto& v : w.values()) v = dist(rng);
}

/// Square-kernel convolution, stride 1, same padding.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in, int out, int kernel, bool with_bias = true)
      : in_(in), out_(out), k_(kernel), has_bias_(with_bias),
        weight_(Shape{out, in, kernel, kernel}), bias_(Shape{1, 1, 1, with_bias ? out : 0}) {}

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int kernel() const { return k_; }
  Param& weight() { return weight_; }
  Param& bias() { return bias_; }

  void init(std::mt19937_64& rng) {
    kaiming_normal(weight_.value, in_ * k_ * k_, rng);
    bias_.value.zero();
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight_);
    if (has_bias_) f(prefix + ".bias", bias_);
  }

  Tensor forward(const Tensor& x) const {
    expect_channels(x, in_, "conv2d input");
    const int hw = x.h() * x.w();
    const int rows = in_ * k_ * k_;
    Tensor y(x.n(), out_, x.h(), x.w());
    ConstMatMap w(weight_.value.data(), out_, rows);
    std::vector<double> cols(k_ == 1 ? 0 : static_cast<std::size_t>(rows) * hw);
    for (int n = 0; n < x.n(); ++n) {
      const double* src = x.sample(n);
      if (k_ != 1) {
        im2col(src, in_, x.h(), x.w(), k_, cols.data());
        src = cols.data();
      }
      MatMap out(y.sample(n), out_, hw);
      out.noalias() = w * ConstMatMap(src, rows, hw);
      if (has_bias_) {
        for (int o = 0; o < out_; ++o) out.row(o).array() += bias_.value[o];
      }
    }
    return y;
  }

  /// Accumulates parameter gradients and returns the input gradient.
  Tensor backward(const Tensor& x, const Tensor& dy) {
    expect_shape(dy, Shape{x.n(), out_, x.h(), x.w()}, "conv2d grad");
    const int hw = x.h() * x.w();
    const int rows = in_ * k_ * k_;
    Tensor dx(x.shape());
    ConstMatMap w(weight_.value.data(), out_, rows);
    MatMap dw(weight_.grad.data(), out_, rows);
    std::vector<double> cols(k_ == 1 ? 0 : static_cast<std::size_t>(rows) * hw);
    RowMatrix dcols(rows, hw);
    for (int n = 0; n < x.n(); ++n) {
      const double* src = x.sample(n);
      if (k_ != 1) {
        im2col(src, in_, x.h(), x.w(), k_, cols.data());
        src = cols.data();
      }
      ConstMatMap g(dy.sample(n), out_, hw);
      dw.noalias() += g * ConstMatMap(src, rows, hw).transpose();
      if (has_bias_) {
        for (int o = 0; o < out_; ++o) bias_.grad[o] += g.row(o).sum();
      }
      if (k_ == 1) {
        MatMap(dx.sample(n), rows, hw).noalias() = w.transpose() * g;
      } else {
        dcols.noalias() = w.transpose() * g;
        col2im(dcols.data(), in_, x.h(), x.w(), k_, dx.sample(n));
      }
    }
    return dx;
  }

 private:
  int in_ = 0;
  int out_ = 0;
  int k_ = 1;
  bool has_bias_ = true;
  Param weight_;
  Param bias_;
};

struct BatchNormCache {
  Tensor xhat;
  std::vector<double> inv_std;
  bool batch_stats = false;
};

/// Per-channel batch normalisation. Training normalises with batch statistics
/// and updates the running averages; evaluation uses the running averages.
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(int channels, double momentum = 0.1, double eps = 1e-5)
      : c_(channels), momentum_(momentum), eps_(eps),
        gamma_(Shape{1, 1, 1, channels}), beta_(Shape{1, 1, 1, channels}),
        running_mean_(Shape{1, 1, 1, channels}, false),
        running_var_(Shape{1, 1, 1, channels}, false) {
    init();
  }

  void init() {
    gamma_.value.fill(1.0);
    beta_.value.zero();
    running_mean_.value.zero();
    running_var_.value.fill(1.0);
  }

  Param& gamma() { return gamma_; }
  Param& beta() { return beta_; }
  Param& running_mean() { return running_mean_; }
  Param& running_var() { return running_var_; }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".gamma", gamma_);
    f(prefix + ".beta", beta_);
    f(prefix + ".running_mean", running_mean_);
    f(prefix + ".running_var", running_var_);
  }

  Tensor forward(const Tensor& x, const Context& ctx, BatchNormCache* cache) {
    expect_channels(x, c_, "batchnorm input");
    const std::size_t plane = x.shape().plane();
    const double count = static_cast<double>(x.n()) * static_cast<double>(plane);
    std::vector<double> mean(c_), inv_std(c_);
    const bool use_batch = ctx.train;
    for (int c = 0; c < c_; ++c) {
      if (use_batch) {
        double s = 0.0;
        for (int n = 0; n < x.n(); ++n) {
          const double* p = x.plane(n, c);
          for (std::size_t i = 0; i < plane; ++i) s += p[i];
        }
        const double m = s / count;
        double v = 0.0;
        for (int n = 0; n < x.n(); ++n) {
          const double* p = x.plane(n, c);
          for (std::size_t i = 0; i < plane; ++i) v += (p[i] - m) * (p[i] - m);
        }
        v /= count;
        mean[c] = m;
        inv_std[c] = 1.0 / std::sqrt(v + eps_);
        const double unbiased = count > 1.0 ? v * count / (count - 1.0) : v;
        running_mean_.value[c] = (1.0 - momentum_) * running_mean_.value[c] + momentum_ * m;
        running_var_.value[c] = (1.0 - momentum_) * running_var_.value[c] + momentum_ * unbiased;
      } else {
        mean[c] = running_mean_.value[c];
        inv_std[c] = 1.0 / std::sqrt(running_var_.value[c] + eps_);
      }
    }
    Tensor y(x.shape());
    Tensor xhat;
    if (cache && ctx.record) xhat = Tensor(x.shape());
    for (int n = 0; n < x.n(); ++n)
      for (int c = 0; c < c_; ++c) {
        const double* p = x.plane(n, c);
        double* q = y.plane(n, c);
        double* h = xhat.empty() ? nullptr : xhat.plane(n, c);
        const double g = gamma_.value[c], b = beta_.value[c];
        for (std::size_t i = 0; i < plane; ++i) {
          const double xh = (p[i] - mean[c]) * inv_std[c];
          if (h) h[i] = xh;
          q[i] = g * xh + b;
        }
      }
    if (cache && ctx.record) {
      cache->xhat = std::move(xhat);
      cache->inv_std = std::move(inv_std);
      cache->batch_stats = use_batch;
    }
    return y;
  }

  Tensor backward(const Tensor& dy, const BatchNormCache& cache) {
    const Tensor& xhat = cache.xhat;
    expect_shape(dy, xhat.shape(), "batchnorm grad");
    const std::size_t plane = dy.shape().plane();
    const double count = static_cast<double>(dy.n()) * static_cast<double>(plane);
    Tensor dx(dy.shape());
    for (int c = 0; c < c_; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int n = 0; n < dy.n(); ++n) {
        const double* g = dy.plane(n, c);
        const double* h = xhat.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) {
          sum_dy += g[i];
          sum_dy_xhat += g[i] * h[i];
        }
      }
      gamma_.grad[c] += sum_dy_xhat;
      beta_.grad[c] += sum_dy;
      const double k = gamma_.value[c] * cache.inv_std[c];
      for (int n = 0; n < dy.n(); ++n) {
        const double* g = dy.plane(n, c);
        const double* h = xhat.plane(n, c);
        double* d = dx.plane(n, c);
        if (cache.batch_stats) {
          for (std::size_t i = 0; i < plane; ++i)
            d[i] = k * (g[i] - sum_dy / count - h[i] * sum_dy_xhat / count);
        } else {
          for (std::size_t i = 0; i < plane; ++i) d[i] = k * g[i];
        }
      }
    }
    return dx;
  }

 private:
  int c_ = 0;
  double momentum_ = 0.1;
  double eps_ = 1e-5;
  Param gamma_;
  Param beta_;
  Param running_mean_;
  Param running_var_;
};

/// Fully connected layer over flattened samples: (N, in) -> (N, out).
class Linear {
 public:
  Linear() = default;
  Linear(int in, int out) : in_(in), out_(out), weight_(Shape{1, 1, out, in}), bias_(Shape{1, 1, 1, out}) {}

  int in_features() const { return in_; }
  int out_features() const { return out_; }
  Param& weight() { return weight_; }
  Param& bias() { return bias_; }

  void init(std::mt19937_64& rng) {
    kaiming_normal(weight_.value, in_, rng);
    bias_.value.zero();
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight_);
    f(prefix + ".bias", bias_);
  }

  /// `x` is any tensor whose per-sample size equals in_features.
  Tensor forward(const Tensor& x) const {
    if (x.shape().sample() != static_cast<std::size_t>(in_)) {
      throw ContractViolation("linear: expected " + std::to_string(in_) + " features, got " +
                              std::to_string(x.shape().sample()));
    }
    Tensor y(x.n(), out_, 1, 1);
    ConstMatMap w(weight_.value.data(), out_, in_);
    ConstMatMap in(x.data(), x.n(), in_);
    MatMap out(y.data(), x.n(), out_);
    // one product per sample keeps each row independent of the batch size
    for (int n = 0; n < x.n(); ++n) {
      out.row(n).noalias() = in.row(n) * w.transpose();
      for (int o = 0; o < out_; ++o) out(n, o) += bias_.value[o];
    }
    return y;
  }

  Tensor backward(const Tensor& x, const Tensor& dy) {
    ConstMatMap w(weight_.value.data(), out_, in_);
    ConstMatMap in(x.data(), x.n(), in_);
    ConstMatMap g(dy.data(), x.n(), out_);
    MatMap(weight_.grad.data(), out_, in_).noalias() += g.transpose() * in;
    for (int n = 0; n < x.n(); ++n)
      for (int o = 0; o < out_; ++o) bias_.grad[o] += g(n, o);
    Tensor dx(x.shape());
    MatMap(dx.data(), x.n(), in_).noalias() = g * w;
    return dx;
  }

 private:
  int in_ = 0;
  int out_ = 0;
  Param weight_;
  Param bias_;
};

}  // namespace fetalnet::nn
