#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mtm/autodiff.hpp"

namespace mtm::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double max_grad_norm = 0.0;  // global-norm clipping; 0 disables
};

/// Adam with bias correction. Moments are laid out parallel to the store's
/// parameter order.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  const AdamConfig& config() const { return config_; }
  std::int64_t steps() const { return steps_; }

  /// Updates every parameter from its accumulated gradient and zeroes the
  /// gradients. Throws NumericError (leaving parameters untouched) on a
  /// non-finite gradient.
  void step(ParamStore<T>& store) {
    if (!store.grads_finite()) {
      store.zero_grad();
      throw NumericError("non-finite gradient");
    }
    auto& params = store.params();
    if (first_.size() != params.size()) {
      first_.clear();
      second_.clear();
      for (const auto& p : params) {
        first_.emplace_back(p.value.size(), 0.0);
        second_.emplace_back(p.value.size(), 0.0);
      }
    }
    double clip = 1.0;
    if (config_.max_grad_norm > 0) {
      double sq = 0;
      for (const auto& p : params)
        for (T gi : p.grad) sq += static_cast<double>(gi) * gi;
      const double norm = std::sqrt(sq);
      if (norm > config_.max_grad_norm) clip = config_.max_grad_norm / norm;
    }
    ++steps_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      auto& m = first_[i];
      auto& v = second_[i];
      for (std::size_t j = 0; j < p.grad.size(); ++j) {
        const double gj = clip * static_cast<double>(p.grad[j]);
        m[j] = config_.beta1 * m[j] + (1 - config_.beta1) * gj;
        v[j] = config_.beta2 * v[j] + (1 - config_.beta2) * gj * gj;
        const double update = config_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.eps);
        p.value.data[j] = static_cast<T>(p.value.data[j] - update);
      }
    }
    store.zero_grad();
  }

  const std::vector<std::vector<double>>& first_moments() const { return first_; }
  const std::vector<std::vector<double>>& second_moments() const { return second_; }

 private:
  AdamConfig config_;
  std::int64_t steps_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

}  // namespace mtm::ad
