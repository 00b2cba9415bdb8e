// SPDX-License-Identifier: Apache-2.0
#include "autoprog/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace autoprog {

void Optimizer::step(ParamStore& params) {
  for (auto& [name, t] : params) {
    if (!t.has_grad()) {
      throw std::runtime_error("Optimizer::step: missing gradient for parameter " + name);
    }
    auto& st = moments_[name];
    if (st.m.empty()) {
      st.m.assign(t.numel(), 0.0f);
      st.v.assign(t.numel(), 0.0f);
    } else if (st.m.size() != t.numel()) {
      throw std::runtime_error("Optimizer::step: stale moment buffers for parameter " + name);
    }
    st.updates += 1;
    const float b1 = cfg_.beta1, b2 = cfg_.beta2;
    const float bc1 = 1.0f - std::pow(b1, static_cast<float>(st.updates));
    const float bc2 = 1.0f - std::pow(b2, static_cast<float>(st.updates));
    const float lr = cfg_.lr;
    const float wd = cfg_.weight_decay;
    float* w = t.data().data();
    const float* g = t.grad().data();
    float* m = st.m.data();
    float* v = st.v.data();
    const std::size_t n = t.numel();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (1.0f - b1) * g[i];
      v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
      const float mhat = m[i] / bc1;
      const float vhat = v[i] / bc2;
      w[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + wd * w[i]);
    }
  }
  step_count_ += 1;
}

void Optimizer::reset_param(const std::string& name) { moments_.erase(name); }

void Optimizer::retain_only(const std::vector<std::string>& keep) {
  std::map<std::string, Moments> kept;
  for (const std::string& name : keep) {
    auto it = moments_.find(name);
    if (it != moments_.end()) kept.emplace(name, std::move(it->second));
  }
  moments_ = std::move(kept);
}

}  // namespace autoprog
