#pragma once

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "gazegan/nn/tensor.hpp"

namespace gazegan::nn {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool frozen = false;
};

/// Activations saved by a forward pass for the matching backward pass. A
/// network applied several times in one step gets one Trace per application.
template <typename T>
struct Trace {
  std::vector<Tensor<T>> tensors;
  std::vector<T> scalars;
  std::vector<Trace> children;
};

enum class Padding { Zero, Reflect };

template <typename T>
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  const std::string& name() const noexcept { return name_; }
  virtual std::string kind() const = 0;
  virtual Shape output_shape(const Shape& in) const = 0;

  /// `trace` may be null when no backward pass will follow.
  virtual Tensor<T> forward(const Tensor<T>& x, Trace<T>* trace) const = 0;

  /// Returns dL/dx. Parameter gradients are accumulated only when
  /// `param_grads` is set and the parameter is not frozen.
  virtual Tensor<T> backward(const Tensor<T>& grad_out, const Trace<T>& trace,
                             bool param_grads) = 0;

  virtual void collect_parameters(std::vector<Parameter<T>*>& out) { (void)out; }
  virtual void visit(const std::function<void(const Layer<T>&)>& fn) const { fn(*this); }
  virtual std::unique_ptr<Layer> clone() const = 0;

 protected:
  Layer(const Layer&) = default;
  Layer& operator=(const Layer&) = default;

 private:
  std::string name_;
};

/// 2-D convolution, weight shape [out, in, k, k].
template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, int pad,
         Padding padding = Padding::Zero);

  std::string kind() const override { return "Conv2d"; }
  Shape output_shape(const Shape& in) const override;
  Tensor<T> forward(const Tensor<T>& x, Trace<T>* trace) const override;
  Tensor<T> backward(const Tensor<T>& grad_out, const Trace<T>& trace, bool param_grads) override;
  void collect_parameters(std::vector<Parameter<T>*>& out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d>(*this); }

  int in_channels() const noexcept { return in_; }
  int out_channels() const noexcept { return out_; }
  int kernel() const noexcept { return kernel_; }
  int stride() const noexcept { return stride_; }
  int pad() const noexcept { return pad_; }
  Padding padding() const noexcept { return padding_; }
  Parameter<T>& weight() noexcept { return weight_; }
  Parameter<T>& bias() noexcept { return bias_; }

 private:
  int in_, out_, kernel_, stride_, pad_;
  Padding padding_;
  Parameter<T> weight_;
  Parameter<T> bias_;
};

/// Transposed convolution, weight shape [in, out, k, k]. Output size is
/// (H - 1) * stride - 2 * pad + kernel + output_padding.
template <typename T>
class ConvTranspose2d final : public Layer<T> {
 public:
  ConvTranspose2d(std::string name, int in_channels, int out_channels, int kernel, int stride,
                  int pad, int output_padding = 0);

  std::string kind() const override { return "ConvTranspose2d"; }
  Shape output_shape(const Shape& in) const override;
  Tensor<T> forward(const Tensor<T>& x, Trace<T>* trace) const override;
  Tensor<T> backward(const Tensor<T>& grad_out, const Trace<T>& trace, bool param_grads) override;
  void collect_parameters(std::vector<Parameter<T>*>& out) override;
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<ConvTranspose2d>(*this);
  }

  int kernel() const noexcept { return kernel_; }
  int stride() const noexcept { return stride_; }
  Parameter<T>& weight() noexcept { return weight_; }
  Parameter<T>& bias() noexcept { return bias_; }

 private:
  int in_, out_, kernel_, stride_, pad_, output_padding_;
  Parameter<T> weight_;
  Parameter<T> bias_;
};

/// Per-sample, per-channel normalization without affine parameters.
template <typename T>
class InstanceNorm final : public Layer<T> {
 public:
  explicit InstanceNorm(std::string name, double eps = 1e-5) : Layer<T>(std::move(name)), eps_(eps) {}

  std::string kind() const override { return "InstanceNorm"; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor<T> forward(const Tensor<T>& x, Trace<T>* trace) const override;
  Tensor<T> backward(const Tensor<T>& grad_out, const Trace<T>& trace, bool param_grads) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<InstanceNorm>(*this); }

 private:
  double eps_;
};

enum class ActivationKind { ReLU, LeakyReLU, Tanh, Sigmoid };

template <typename T>
class Activation final : public Layer<T> {
 public:
  Activation(std::string name, ActivationKind kind, double slope = 0.2)
      : Layer<T>(std::move(name)), act_(kind), slope_(slope) {}

  std::string kind() const override;
  ActivationKind activation() const noexcept { return act_; }
  double slope() const noexcept { return slope_; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor<T> forward(const Tensor<T>& x, Trace<T>* trace) const override;
  Tensor<T> backward(const Tensor<T>& grad_out, const Trace<T>& trace, bool param_grads) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Activation>(*this); }

 private:
  ActivationKind act_;
  double slope_;
};

/// Ordered container of layers; also the type used for whole networks.
template <typename T>
class Sequential : public Layer<T> {
 public:
  explicit Sequential(std::string name = {}) : Layer<T>(std::move(name)) {}
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  std::size_t size() const noexcept { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_[i]; }
  const Layer<T>& layer(std::size_t i) const { return *layers_[i]; }

  std::string kind() const override { return "Sequential"; }
  Shape output_shape(const Shape& in) const override;
  Tensor<T> forward(const Tensor<T>& x, Trace<T>* trace) const override;
  Tensor<T> backward(const Tensor<T>& grad_out, const Trace<T>& trace, bool param_grads) override;
  void collect_parameters(std::vector<Parameter<T>*>& out) override;
  void visit(const std::function<void(const Layer<T>&)>& fn) const override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Sequential>(*this); }

  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;
  void zero_grad();

  /// Convenience forward without a trace.
  Tensor<T> operator()(const Tensor<T>& x) const { return forward(x, nullptr); }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// x + body(x), where body is conv-norm-relu-conv-norm with reflect padding.
template <typename T>
class ResidualBlock final : public Layer<T> {
 public:
  ResidualBlock(std::string name, int channels);

  std::string kind() const override { return "ResidualBlock"; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor<T> forward(const Tensor<T>& x, Trace<T>* trace) const override;
  Tensor<T> backward(const Tensor<T>& grad_out, const Trace<T>& trace, bool param_grads) override;
  void collect_parameters(std::vector<Parameter<T>*>& out) override;
  void visit(const std::function<void(const Layer<T>&)>& fn) const override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ResidualBlock>(*this); }

 private:
  Sequential<T> body_;
};

/// Weights ~ N(0, stddev), biases zero, in parameter order.
template <typename T>
void init_gaussian(Sequential<T>& net, std::uint64_t seed, double stddev);

/// Rewrites a kernel == 2 * stride transposed convolution so that each
/// [in, out] kernel slice is its [0, 0] tap times a separable linear
/// interpolation kernel. Every output phase then starts with the same weights.
template <typename T>
void init_interpolating(ConvTranspose2d<T>& layer);

/// True when `name` equals `prefix` or starts with `prefix` followed by '.'.
bool has_component_prefix(const std::string& name, const std::string& prefix);

}  // namespace gazegan::nn
