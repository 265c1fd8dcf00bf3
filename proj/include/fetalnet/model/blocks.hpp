#pragma once

#include <string>
#include <vector>

#include "fetalnet/nn/layers.hpp"

namespace fetalnet::model {

using nn::BatchNorm2d;
using nn::Context;
using nn::Conv2d;
using nn::Param;

/// Conv3x3-BN-ReLU-Conv3x3-BN-ReLU-Dropout2D.
class ConvBlock {
 public:
  struct Cache {
    Tensor x, z1, a1, z2, a2;
    nn::BatchNormCache bn1, bn2;
    nn::DropoutCache drop;
  };

  ConvBlock() = default;
  ConvBlock(int in, int out, double dropout)
      : conv1_(in, out, 3), bn1_(out), conv2_(out, out, 3), bn2_(out), dropout_(dropout) {}

  int in_channels() const { return conv1_.in_channels(); }
  int out_channels() const { return conv1_.out_channels(); }
  Conv2d& conv1() { return conv1_; }
  Conv2d& conv2() { return conv2_; }
  BatchNorm2d& bn1() { return bn1_; }
  BatchNorm2d& bn2() { return bn2_; }

  void init(std::mt19937_64& rng) {
    conv1_.init(rng);
    conv2_.init(rng);
    bn1_.init();
    bn2_.init();
  }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    conv1_.visit(p + ".conv1", f);
    bn1_.visit(p + ".bn1", f);
    conv2_.visit(p + ".conv2", f);
    bn2_.visit(p + ".bn2", f);
  }

  Tensor forward(const Tensor& x, const Context& ctx, Cache* cache) {
    expect_channels(x, in_channels(), "conv block input");
    const bool rec = cache && ctx.record;
    Tensor z1 = conv1_.forward(x);
    Tensor a1 = nn::relu(bn1_.forward(z1, ctx, rec ? &cache->bn1 : nullptr));
    Tensor z2 = conv2_.forward(a1);
    Tensor a2 = nn::relu(bn2_.forward(z2, ctx, rec ? &cache->bn2 : nullptr));
    Tensor y = nn::dropout2d(a2, dropout_, ctx, rec ? &cache->drop : nullptr);
    if (rec) {
      cache->x = x;
      cache->z1 = std::move(z1);
      cache->a1 = std::move(a1);
      cache->z2 = std::move(z2);
      cache->a2 = std::move(a2);
    }
    return y;
  }

  Tensor backward(const Tensor& dy, const Cache& c) {
    Tensor g = nn::dropout2d_backward(dy, c.drop);
    g = nn::relu_backward(c.a2, g);
    g = bn2_.backward(g, c.bn2);
    g = conv2_.backward(c.a1, g);
    g = nn::relu_backward(c.a1, g);
    g = bn1_.backward(g, c.bn1);
    return conv1_.backward(c.x, g);
  }

 private:
  Conv2d conv1_;
  BatchNorm2d bn1_;
  Conv2d conv2_;
  BatchNorm2d bn2_;
  double dropout_ = 0.0;
};

/// Additive attention gate: alpha = sigmoid(psi * relu(Wx x + Wg up(g) + b) + b_psi),
/// output alpha * x. The gating signal is bilinearly upsampled to the skip size.
class AttentionGate {
 public:
  struct Cache {
    Tensor x, g_up, q, alpha;
  };

  AttentionGate() = default;
  AttentionGate(int skip_channels, int gate_channels, int inter_channels)
      : wx_(skip_channels, inter_channels, 1, false),
        wg_(gate_channels, inter_channels, 1, true),
        psi_(inter_channels, 1, 1, true) {}

  Conv2d& wx() { return wx_; }
  Conv2d& wg() { return wg_; }
  Conv2d& psi() { return psi_; }

  void init(std::mt19937_64& rng) {
    wx_.init(rng);
    wg_.init(rng);
    psi_.init(rng);
  }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    wx_.visit(p + ".wx", f);
    wg_.visit(p + ".wg", f);
    psi_.visit(p + ".psi", f);
  }

  /// Attention coefficients (N, 1, H, W) from the last recorded forward pass
  /// are available through the cache.
  Tensor forward(const Tensor& x, const Tensor& g, const Context& ctx, Cache* cache) {
    expect_channels(x, wx_.in_channels(), "attention skip");
    expect_channels(g, wg_.in_channels(), "attention gating");
    const bool same = g.h() == x.h() && g.w() == x.w();
    const bool doubled = 2 * g.h() == x.h() && 2 * g.w() == x.w();
    if (g.n() != x.n() || !(same || doubled)) {
      throw ContractViolation("attention gate: gating " + to_string(g.shape()) +
                              " cannot be upsampled onto skip " + to_string(x.shape()));
    }
    Tensor g_up = nn::upsample_bilinear(g, x.h(), x.w());
    Tensor s = wx_.forward(x);
    s += wg_.forward(g_up);
    Tensor q = nn::relu(s);
    Tensor alpha = nn::sigmoid(psi_.forward(q));
    Tensor out(x.shape());
    for (int n = 0; n < x.n(); ++n)
      for (int c = 0; c < x.c(); ++c) {
        const double* a = alpha.plane(n, 0);
        const double* src = x.plane(n, c);
        double* dst = out.plane(n, c);
        for (std::size_t i = 0; i < x.shape().plane(); ++i) dst[i] = a[i] * src[i];
      }
    if (cache) {
      cache->alpha = alpha;
      if (ctx.record) {
        cache->x = x;
        cache->g_up = std::move(g_up);
        cache->q = std::move(q);
      }
    }
    return out;
  }

  /// Returns (d skip, d gating).
  std::pair<Tensor, Tensor> backward(const Tensor& dout, const Tensor& g, const Cache& c) {
    const Tensor& x = c.x;
    Tensor dx(x.shape());
    Tensor dpsi_out(c.alpha.shape());
    for (int n = 0; n < x.n(); ++n) {
      const double* a = c.alpha.plane(n, 0);
      double* da = dpsi_out.plane(n, 0);
      for (int ch = 0; ch < x.c(); ++ch) {
        const double* src = x.plane(n, ch);
        const double* d = dout.plane(n, ch);
        double* out = dx.plane(n, ch);
        for (std::size_t i = 0; i < x.shape().plane(); ++i) {
          out[i] = a[i] * d[i];
          da[i] += src[i] * d[i];
        }
      }
      for (std::size_t i = 0; i < x.shape().plane(); ++i) da[i] *= a[i] * (1.0 - a[i]);
    }
    Tensor dq = psi_.backward(c.q, dpsi_out);
    Tensor ds = nn::relu_backward(c.q, dq);
    dx += wx_.backward(x, ds);
    Tensor dg_up = wg_.backward(c.g_up, ds);
    return {std::move(dx), nn::upsample_bilinear_backward(dg_up, g.h(), g.w())};
  }

 private:
  Conv2d wx_;
  Conv2d wg_;
  Conv2d psi_;
};

/// Convolutional LSTM cell; gates [i, f, o, g] from one convolution over (x, h).
class ConvLstmCell {
 public:
  struct State {
    Tensor h;
    Tensor c;
  };
  struct StepCache {
    Tensor xh;       // concatenated input
    Tensor i, f, o, g;
    Tensor c_prev;
    Tensor tanh_c;
  };

  ConvLstmCell() = default;
  ConvLstmCell(int input_channels, int hidden_channels, int kernel)
      : in_(input_channels), hidden_(hidden_channels),
        gates_(input_channels + hidden_channels, 4 * hidden_channels, kernel, true) {}

  int hidden_channels() const { return hidden_; }
  Conv2d& gates() { return gates_; }

  void init(std::mt19937_64& rng) { gates_.init(rng); }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    gates_.visit(p + ".gates", f);
  }

  State zero_state(int batch, int h, int w) const {
    return {Tensor(batch, hidden_, h, w), Tensor(batch, hidden_, h, w)};
  }

  /// One time step; writes the new state into `state`.
  Tensor step(const Tensor& x, State& state, const Context& ctx, StepCache* cache) {
    expect_channels(x, in_, "convlstm input");
    const Shape hs{x.n(), hidden_, x.h(), x.w()};
    expect_shape(state.h, hs, "convlstm hidden state");
    expect_shape(state.c, hs, "convlstm cell state");
    Tensor xh = nn::concat_channels(x, state.h);
    Tensor z = gates_.forward(xh);
    Tensor i(hs), f(hs), o(hs), g(hs), c(hs), tc(hs), h(hs);
    const std::size_t block = hs.sample();
    for (int n = 0; n < x.n(); ++n) {
      const double* zs = z.sample(n);
      const double* cp = state.c.sample(n);
      double* pi = i.sample(n);
      double* pf = f.sample(n);
      double* po = o.sample(n);
      double* pg = g.sample(n);
      double* pc = c.sample(n);
      double* pt = tc.sample(n);
      double* ph = h.sample(n);
      for (std::size_t k = 0; k < block; ++k) {
        pi[k] = nn::sigmoid(zs[k]);
        pf[k] = nn::sigmoid(zs[block + k]);
        po[k] = nn::sigmoid(zs[2 * block + k]);
        pg[k] = std::tanh(zs[3 * block + k]);
        pc[k] = pf[k] * cp[k] + pi[k] * pg[k];
        pt[k] = std::tanh(pc[k]);
        ph[k] = po[k] * pt[k];
      }
    }
    if (cache && ctx.record) {
      cache->xh = std::move(xh);
      cache->c_prev = state.c;
      cache->i = std::move(i);
      cache->f = std::move(f);
      cache->o = std::move(o);
      cache->g = std::move(g);
      cache->tanh_c = tc;
    } else if (cache) {
      cache->i = std::move(i);
      cache->f = std::move(f);
      cache->o = std::move(o);
      cache->g = std::move(g);
    }
    state.c = std::move(c);
    state.h = h;
    return h;
  }

  /// Backward through one step. `dh` and `dc` are the total gradients reaching
  /// this step's outputs; on return they hold the gradients for the previous
  /// state. Returns the gradient of the step input.
  Tensor step_backward(Tensor& dh, Tensor& dc, const StepCache& s) {
    const Shape hs = s.i.shape();
    Tensor dz(hs.n, 4 * hidden_, hs.h, hs.w);
    Tensor dc_prev(hs);
    const std::size_t block = hs.sample();
    for (int n = 0; n < hs.n; ++n) {
      const double* pi = s.i.sample(n);
      const double* pf = s.f.sample(n);
      const double* po = s.o.sample(n);
      const double* pg = s.g.sample(n);
      const double* pt = s.tanh_c.sample(n);
      const double* cp = s.c_prev.sample(n);
      const double* gh = dh.sample(n);
      const double* gc = dc.sample(n);
      double* out = dz.sample(n);
      double* gcp = dc_prev.sample(n);
      for (std::size_t k = 0; k < block; ++k) {
        const double dct = gc[k] + gh[k] * po[k] * (1.0 - pt[k] * pt[k]);
        out[k] = dct * pg[k] * pi[k] * (1.0 - pi[k]);
        out[block + k] = dct * cp[k] * pf[k] * (1.0 - pf[k]);
        out[2 * block + k] = gh[k] * pt[k] * po[k] * (1.0 - po[k]);
        out[3 * block + k] = dct * pi[k] * (1.0 - pg[k] * pg[k]);
        gcp[k] = dct * pf[k];
      }
    }
    Tensor dxh = gates_.backward(s.xh, dz);
    auto [dx, dh_prev] = nn::split_channels(dxh, in_);
    dh = std::move(dh_prev);
    dc = std::move(dc_prev);
    return dx;
  }

 private:
  int in_ = 0;
  int hidden_ = 0;
  Conv2d gates_;
};

}  // namespace fetalnet::model
