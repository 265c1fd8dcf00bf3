#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fetalnet/core/prediction.hpp"
#include "fetalnet/model/blocks.hpp"
#include "fetalnet/model/config.hpp"

namespace fetalnet::model {

/// Raw network outputs for a batch of N = clips * T frames (frame t of clip b at b*T + t).
struct NetOutput {
  Tensor seg_prob;    // (N, 1, H, W)
  Tensor side_prob;   // (N, sides, H, W)
  Tensor logits;      // (N, 4, 1, 1); empty without the classification branch
};

/// Everything the backward pass needs from one forward pass.
struct Tape {
  int clips = 0;
  int clip_len = 0;
  std::array<ConvBlock::Cache, 5> enc;
  std::array<nn::MaxPoolCache, 4> pool;
  std::array<Tensor, 4> skips;
  std::vector<ConvLstmCell::StepCache> lstm;
  Tensor hidden;  // ConvLSTM outputs for all frames, (N, 16n, S, S)
  Tensor cls_pooled;
  nn::DropoutCache cls_drop;
  Tensor cls_in;
  std::array<ConvBlock::Cache, 4> dec;
  std::array<AttentionGate::Cache, 4> ag;
  std::array<Tensor, 4> dec_out;
  Tensor seg_prob;
};

/// Encoder (five conv blocks, four 2x2 poolings), ConvLSTM bottleneck over the
/// clip, attention-gated decoder, summed multi-scale side outputs and a
/// frame-level classifier on the ConvLSTM output.
class FetalNet {
 public:
  explicit FetalNet(NetConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    const int n = cfg_.base_width;
    const std::array<int, 5> widths{n, 2 * n, 4 * n, 8 * n, 16 * n};
    int in = 1;
    for (int k = 0; k < 5; ++k) {
      enc_[k] = ConvBlock(in, widths[k], cfg_.dropout_block);
      in = widths[k];
    }
    lstm_ = ConvLstmCell(16 * n, 16 * n, cfg_.convlstm_kernel);
    int below = 16 * n;
    for (int k = 0; k < 4; ++k) {
      const int skip = widths[3 - k];
      if (cfg_.attention_gates) ag_[k] = AttentionGate(skip, below, std::max(1, skip / 2));
      dec_[k] = ConvBlock(skip + below, skip, cfg_.dropout_block);
      below = skip;
    }
    if (cfg_.stacked_module) {
      for (int k = 0; k < 4; ++k) side_.emplace_back(widths[3 - k], 1, 3, true);
    } else {
      side_.emplace_back(n, 1, 3, true);
    }
    if (cfg_.classification_branch) {
      const int s = cfg_.bottleneck_size();
      cls_ = nn::Linear(s * s * 16 * n, kNumClasses);
    }
  }

  const NetConfig& config() const { return cfg_; }
  int num_sides() const { return static_cast<int>(side_.size()); }

  ConvBlock& encoder_block(int k) { return enc_.at(static_cast<std::size_t>(k)); }
  ConvBlock& decoder_block(int k) { return dec_.at(static_cast<std::size_t>(k)); }
  AttentionGate& attention_gate(int k) { return ag_.at(static_cast<std::size_t>(k)); }
  ConvLstmCell& convlstm() { return lstm_; }
  Conv2d& side_head(int k) { return side_.at(static_cast<std::size_t>(k)); }
  nn::Linear& classifier() { return cls_; }

  /// Kaiming fan-in weights, zero biases, identity batch norm.
  void init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& b : enc_) b.init(rng);
    lstm_.init(rng);
    for (int k = 0; k < 4; ++k) {
      if (cfg_.attention_gates) ag_[k].init(rng);
      dec_[k].init(rng);
    }
    for (auto& s : side_) s.init(rng);
    if (cfg_.classification_branch) cls_.init(rng);
  }

  /// Calls f(name, Param&) for every parameter and buffer in a fixed order.
  template <typename F>
  void visit(F&& f) {
    for (int k = 0; k < 5; ++k) enc_[k].visit("enc" + std::to_string(k), f);
    lstm_.visit("convlstm", f);
    for (int k = 0; k < 4; ++k) {
      if (cfg_.attention_gates) ag_[k].visit("ag" + std::to_string(k), f);
      dec_[k].visit("dec" + std::to_string(k), f);
    }
    for (std::size_t k = 0; k < side_.size(); ++k) side_[k].visit("side" + std::to_string(k), f);
    if (cfg_.classification_branch) cls_.visit("cls", f);
  }

  std::size_t parameter_count() {
    std::size_t total = 0;
    visit([&](const std::string&, Param& p) {
      if (p.trainable) total += p.value.size();
    });
    return total;
  }

  void zero_grad() {
    visit([](const std::string&, Param& p) {
      if (p.trainable) p.grad.zero();
    });
  }

  // --- graph pieces, usable on their own --------------------------------------

  /// Returns the four skip tensors (n, 2n, 4n, 8n) and the 16n bottleneck input.
  std::pair<std::array<Tensor, 4>, Tensor> encode(const Tensor& frames, const Context& ctx,
                                                  Tape* tape) {
    const int size = cfg_.input_size;
    if (frames.c() != 1 || frames.h() != size || frames.w() != size) {
      throw ContractViolation("encoder: expected N x 1 x " + std::to_string(size) + " x " +
                              std::to_string(size) + " frames, got " + to_string(frames.shape()));
    }
    std::array<Tensor, 4> skips;
    Tensor x = frames;
    for (int k = 0; k < 4; ++k) {
      skips[k] = enc_[k].forward(x, ctx, tape ? &tape->enc[k] : nullptr);
      x = nn::max_pool2(skips[k], tape ? &tape->pool[k] : nullptr);
    }
    Tensor z = enc_[4].forward(x, ctx, tape ? &tape->enc[4] : nullptr);
    return {std::move(skips), std::move(z)};
  }

  /// Pooling, dropout and the linear map; (N, 16n, S, S) -> (N, 4, 1, 1).
  Tensor classify(const Tensor& hidden, const Context& ctx, Tape* tape) {
    const int s = cfg_.bottleneck_size();
    Tensor pooled = nn::adaptive_avg_pool(hidden, s, s);
    Tensor dropped = nn::dropout2d(pooled, cfg_.dropout_cls, ctx, tape ? &tape->cls_drop : nullptr);
    Tensor logits = cls_.forward(dropped);
    if (tape && ctx.record) tape->cls_in = std::move(dropped);
    return logits;
  }

  /// Attention-gated decoder chain starting from the ConvLSTM output.
  std::array<Tensor, 4> decode(const Tensor& hidden, const std::array<Tensor, 4>& skips,
                               const Context& ctx, Tape* tape) {
    std::array<Tensor, 4> outs;
    const Tensor* below = &hidden;
    for (int k = 0; k < 4; ++k) {
      outs[k] = decoder_step(k, *below, skips[3 - k], ctx, tape);
      below = &outs[k];
    }
    return outs;
  }

  /// Upsample `below`, gate the skip, concatenate (skip first) and convolve.
  Tensor decoder_step(int k, const Tensor& below, const Tensor& skip, const Context& ctx,
                      Tape* tape) {
    if (below.n() != skip.n() || 2 * below.h() != skip.h() || 2 * below.w() != skip.w()) {
      throw ContractViolation("decoder: " + to_string(below.shape()) +
                              " does not upsample onto skip " + to_string(skip.shape()));
    }
    Tensor gated = cfg_.attention_gates
                       ? ag_[k].forward(skip, below, ctx, tape ? &tape->ag[k] : nullptr)
                       : skip;
    Tensor up = nn::upsample_bilinear(below, skip.h(), skip.w());
    return dec_[k].forward(nn::concat_channels(gated, up), ctx, tape ? &tape->dec[k] : nullptr);
  }

  /// Side logits upsampled to input size: (N, sides, H, W) before the sigmoid.
  Tensor side_logits(const std::array<Tensor, 4>& dec_out) const {
    const int size = cfg_.input_size;
    const int first = cfg_.stacked_module ? 0 : 3;
    Tensor out(dec_out[3].n(), num_sides(), size, size);
    for (int s = 0; s < num_sides(); ++s) {
      Tensor up = nn::upsample_bilinear(side_[static_cast<std::size_t>(s)].forward(dec_out[first + s]),
                                        size, size);
      for (int n = 0; n < out.n(); ++n)
        std::copy(up.plane(n, 0), up.plane(n, 0) + out.shape().plane(), out.plane(n, s));
    }
    return out;
  }

  // --- full graph ---------------------------------------------------------------

  /// Forward over `clips` clips of T frames each, stacked clip-major in `frames`.
  NetOutput forward(const Tensor& frames, int clips, const Context& ctx, Tape* tape = nullptr) {
    if (clips < 1 || frames.n() % clips != 0) {
      throw InvalidInput("forward: frame count " + std::to_string(frames.n()) +
                         " is not a multiple of clip count " + std::to_string(clips));
    }
    const int T = frames.n() / clips;
    if (tape) {
      tape->clips = clips;
      tape->clip_len = T;
    }
    auto [skips, z] = encode(frames, ctx, tape);

    // ConvLSTM over time, all clips in parallel; state starts at zero per clip.
    const int s = cfg_.bottleneck_size();
    auto state = lstm_.zero_state(clips, s, s);
    Tensor hidden(z.shape());
    if (tape) tape->lstm.assign(static_cast<std::size_t>(T), {});
    for (int t = 0; t < T; ++t) {
      const auto idx = frame_indices(clips, T, t);
      Tensor h = lstm_.step(nn::gather(z, idx), state, ctx,
                            tape ? &tape->lstm[static_cast<std::size_t>(t)] : nullptr);
      nn::scatter_add(hidden, h, idx);
    }

    NetOutput out;
    if (cfg_.classification_branch) out.logits = classify(hidden, ctx, tape);
    auto dec_out = decode(hidden, skips, ctx, tape);
    const Tensor logits = side_logits(dec_out);
    out.side_prob = nn::sigmoid(logits);
    out.seg_prob = Tensor(frames.n(), 1, cfg_.input_size, cfg_.input_size);
    for (int n = 0; n < frames.n(); ++n) {
      double* dst = out.seg_prob.plane(n, 0);
      for (int k = 0; k < num_sides(); ++k) {
        const double* src = logits.plane(n, k);
        for (std::size_t i = 0; i < logits.shape().plane(); ++i) dst[i] += src[i];
      }
      for (std::size_t i = 0; i < logits.shape().plane(); ++i) dst[i] = nn::sigmoid(dst[i]);
    }
    if (tape && ctx.record) {
      tape->skips = std::move(skips);
      tape->hidden = std::move(hidden);
      tape->dec_out = std::move(dec_out);
      tape->seg_prob = out.seg_prob;
    }
    return out;
  }

  /// Accumulates parameter gradients given d loss / d seg_prob and d loss / d logits.
  void backward(const Tape& tape, const Tensor& d_seg_prob, const Tensor& d_logits) {
    const int N = tape.clips * tape.clip_len;
    expect_shape(d_seg_prob, Shape{N, 1, cfg_.input_size, cfg_.input_size}, "backward seg grad");

    // Sigmoid of the summed side logits.
    Tensor d_sum(d_seg_prob.shape());
    for (std::size_t i = 0; i < d_sum.size(); ++i) {
      const double p = tape.seg_prob[i];
      d_sum[i] = d_seg_prob[i] * p * (1.0 - p);
    }

    std::array<Tensor, 4> d_dec;
    for (int k = 0; k < 4; ++k) d_dec[k] = Tensor(tape.dec_out[k].shape());
    const int first = cfg_.stacked_module ? 0 : 3;
    for (int s = 0; s < num_sides(); ++s) {
      const Tensor& feat = tape.dec_out[first + s];
      Tensor d_side = nn::upsample_bilinear_backward(d_sum, feat.h(), feat.w());
      d_dec[first + s] += side_[static_cast<std::size_t>(s)].backward(feat, d_side);
    }

    std::array<Tensor, 4> d_skip;
    for (int k = 0; k < 4; ++k) d_skip[k] = Tensor(tape.skips[k].shape());
    Tensor d_hidden(tape.hidden.shape());
    for (int k = 3; k >= 0; --k) {
      const Tensor& below = k == 0 ? tape.hidden : tape.dec_out[k - 1];
      const Tensor& skip = tape.skips[3 - k];
      Tensor d_cat = dec_[k].backward(d_dec[k], tape.dec[k]);
      auto [d_gated, d_up] = nn::split_channels(d_cat, skip.c());
      Tensor d_below = nn::upsample_bilinear_backward(d_up, below.h(), below.w());
      if (cfg_.attention_gates) {
        auto [dx, dg] = ag_[k].backward(d_gated, below, tape.ag[k]);
        d_skip[3 - k] += dx;
        d_below += dg;
      } else {
        d_skip[3 - k] += d_gated;
      }
      if (k == 0) {
        d_hidden += d_below;
      } else {
        d_dec[k - 1] += d_below;
      }
    }

    if (cfg_.classification_branch && !d_logits.empty()) {
      Tensor d_in = cls_.backward(tape.cls_in, d_logits);
      const int s = cfg_.bottleneck_size();
      Tensor d_pooled(Shape{N, tape.hidden.c(), s, s});
      std::copy(d_in.data(), d_in.data() + d_in.size(), d_pooled.data());
      d_pooled = nn::dropout2d_backward(d_pooled, tape.cls_drop);
      d_hidden += nn::adaptive_avg_pool_backward(d_pooled, tape.hidden.shape());
    }

    // Backpropagation through time.
    Tensor d_z(tape.hidden.shape());
    const int s = cfg_.bottleneck_size();
    Tensor dh(tape.clips, lstm_.hidden_channels(), s, s);
    Tensor dc(dh.shape());
    for (int t = tape.clip_len - 1; t >= 0; --t) {
      const auto idx = frame_indices(tape.clips, tape.clip_len, t);
      dh += nn::gather(d_hidden, idx);
      Tensor dx = lstm_.step_backward(dh, dc, tape.lstm[static_cast<std::size_t>(t)]);
      nn::scatter_add(d_z, dx, idx);
    }

    Tensor g = enc_[4].backward(d_z, tape.enc[4]);
    for (int k = 3; k >= 0; --k) {
      g = nn::max_pool2_backward(g, tape.pool[k]);
      g += d_skip[k];
      g = enc_[k].backward(g, tape.enc[k]);
    }
  }

  // --- convenience ------------------------------------------------------------

  /// Runs one clip (T x 1 x H x W) and returns one prediction per frame.
  std::vector<FramePrediction> forward_clip(const Tensor& clip, const Context& ctx) {
    if (clip.n() == 0) throw InvalidInput("forward_clip: empty clip");
    return to_predictions(forward(clip, 1, ctx, nullptr));
  }

  static std::vector<FramePrediction> to_predictions(const NetOutput& out) {
    const int N = out.seg_prob.n();
    const int H = out.seg_prob.h(), W = out.seg_prob.w();
    std::vector<FramePrediction> preds(static_cast<std::size_t>(N));
    for (int n = 0; n < N; ++n) {
      auto& p = preds[static_cast<std::size_t>(n)];
      p.seg_prob = Image(H, W);
      std::copy(out.seg_prob.plane(n, 0), out.seg_prob.plane(n, 0) + p.seg_prob.size(),
                p.seg_prob.data());
      for (int s = 0; s < out.side_prob.c(); ++s) {
        Image side(H, W);
        std::copy(out.side_prob.plane(n, s), out.side_prob.plane(n, s) + side.size(), side.data());
        p.side_probs.push_back(std::move(side));
      }
      if (!out.logits.empty()) {
        for (int k = 0; k < kNumClasses; ++k) p.class_logits[k] = out.logits.at(n, k, 0, 0);
      }
    }
    return preds;
  }

  static std::vector<int> frame_indices(int clips, int T, int t) {
    std::vector<int> idx(static_cast<std::size_t>(clips));
    for (int b = 0; b < clips; ++b) idx[static_cast<std::size_t>(b)] = b * T + t;
    return idx;
  }

 private:
  NetConfig cfg_;
  std::array<ConvBlock, 5> enc_;
  ConvLstmCell lstm_;
  std::array<AttentionGate, 4> ag_;
  std::array<ConvBlock, 4> dec_;
  std::vector<Conv2d> side_;
  nn::Linear cls_;
};

}  // namespace fetalnet::model
