#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "gazegan/error.hpp"
#include "gazegan/nn/layers.hpp"

namespace gazegan::nn {

struct AdamOptions {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are indexed by parameter
/// position, so the same parameter list must be passed on every step.
template <typename T>
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamOptions options) : options_(options) {}

  const AdamOptions& options() const noexcept { return options_; }
  void set_learning_rate(double lr) noexcept { options_.learning_rate = lr; }
  std::int64_t steps() const noexcept { return steps_; }

  void step(const std::vector<Parameter<T>*>& params) {
    ensure_state(params);
    ++steps_;
    const double b1 = options_.beta1;
    const double b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      Parameter<T>& p = *params[k];
      if (p.frozen) continue;
      Tensor<T>& m = first_[k];
      Tensor<T>& v = second_[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = p.grad[i];
        const double mi = b1 * m[i] + (1.0 - b1) * g;
        const double vi = b2 * v[i] + (1.0 - b2) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double update = options_.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + options_.eps);
        p.value[i] = static_cast<T>(p.value[i] - update);
      }
    }
  }

  std::vector<Tensor<T>>& first_moments() noexcept { return first_; }
  std::vector<Tensor<T>>& second_moments() noexcept { return second_; }
  const std::vector<Tensor<T>>& first_moments() const noexcept { return first_; }
  const std::vector<Tensor<T>>& second_moments() const noexcept { return second_; }
  void set_steps(std::int64_t steps) noexcept { steps_ = steps; }

  void ensure_state(const std::vector<Parameter<T>*>& params) {
    if (first_.size() == params.size()) return;
    if (!first_.empty()) {
      throw Error(ErrorKind::ShapeMismatch, "optimizer state does not match parameter list");
    }
    for (auto* p : params) {
      first_.emplace_back(p->value.shape());
      second_.emplace_back(p->value.shape());
    }
  }

 private:
  AdamOptions options_;
  std::int64_t steps_ = 0;
  std::vector<Tensor<T>> first_;
  std::vector<Tensor<T>> second_;
};

}  // namespace gazegan::nn
