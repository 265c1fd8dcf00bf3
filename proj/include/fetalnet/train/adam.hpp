#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "fetalnet/nn/layers.hpp"

namespace fetalnet::train {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// L2 penalty added to the gradient before the moment updates.
  double weight_decay = 1e-5;
};

/// Adam over the trainable parameters of any model exposing
/// visit(f(name, nn::Param&)). Moments are keyed by parameter name, so one
/// optimiser belongs to one model.
class Adam {
 public:
  explicit Adam(AdamOptions opt = {}) : opt_(opt) {}

  const AdamOptions& options() const { return opt_; }
  long steps() const { return t_; }

  template <typename Model>
  void step(Model& net) {
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    net.visit([&](const std::string& name, nn::Param& p) {
      if (!p.trainable) return;
      auto& st = state_[name];
      const std::size_t n = p.value.size();
      if (st.m.empty()) {
        st.m.assign(n, 0.0);
        st.v.assign(n, 0.0);
      }
      double* w = p.value.data();
      const double* g = p.grad.data();
      for (std::size_t i = 0; i < n; ++i) {
        const double gi = g[i] + opt_.weight_decay * w[i];
        st.m[i] = opt_.beta1 * st.m[i] + (1.0 - opt_.beta1) * gi;
        st.v[i] = opt_.beta2 * st.v[i] + (1.0 - opt_.beta2) * gi * gi;
        const double mhat = st.m[i] / c1;
        const double vhat = st.v[i] / c2;
        w[i] -= opt_.learning_rate * mhat / (std::sqrt(vhat) + opt_.eps);
      }
    });
  }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  AdamOptions opt_;
  long t_ = 0;
  std::unordered_map<std::string, Moments> state_;
};

}  // namespace fetalnet::train
