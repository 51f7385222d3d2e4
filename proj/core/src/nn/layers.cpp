#include "gazegan/nn/layers.hpp"

#include <Eigen/Core>
#include <cmath>

#include "gazegan/error.hpp"
#include "im2col.hpp"

namespace gazegan::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
Parameter<T> make_parameter(std::string name, Shape shape) {
  Parameter<T> p;
  p.name = std::move(name);
  p.value = Tensor<T>(shape);
  p.grad = Tensor<T>(shape);
  return p;
}

void require_channels(const Shape& in, int expected, const std::string& layer) {
  if (in.c != expected) {
    throw Error(ErrorKind::ShapeMismatch, layer + ": expected " + std::to_string(expected) +
                                              " input channels, got " + in.str());
  }
}

}  // namespace

std::string Shape::str() const {
  return "[" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + "]";
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) {
    throw Error(ErrorKind::ShapeMismatch, std::string(what) + ": " + a.str() + " vs " + b.str());
  }
}

bool has_component_prefix(const std::string& name, const std::string& prefix) {
  if (prefix.empty()) return false;
  if (name.size() < prefix.size() || name.compare(0, prefix.size(), prefix) != 0) return false;
  return name.size() == prefix.size() || name[prefix.size()] == '.';
}

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride,
                  int pad, Padding padding)
    : Layer<T>(std::move(name)),
      in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      padding_(padding),
      weight_(make_parameter<T>(this->name() + ".weight", {out_channels, in_channels, kernel, kernel})),
      bias_(make_parameter<T>(this->name() + ".bias", {1, out_channels, 1, 1})) {
  if (in_channels < 1 || out_channels < 1 || kernel < 1 || stride < 1 || pad < 0) {
    throw Error(ErrorKind::InvalidConfig, this->name() + ": bad convolution hyperparameters");
  }
}

template <typename T>
Shape Conv2d<T>::output_shape(const Shape& in) const {
  require_channels(in, in_, this->name());
  const int oh = (in.h + 2 * pad_ - kernel_) / stride_ + 1;
  const int ow = (in.w + 2 * pad_ - kernel_) / stride_ + 1;
  if (oh < 1 || ow < 1 || (padding_ == Padding::Reflect && (pad_ >= in.h || pad_ >= in.w))) {
    throw Error(ErrorKind::ShapeMismatch, this->name() + ": input too small " + in.str());
  }
  return {in.n, out_, oh, ow};
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, Trace<T>* trace) const {
  const Shape os = output_shape(x.shape());
  const detail::ConvGeometry g{in_, x.h(), x.w(), kernel_, stride_, pad_, padding_, os.h, os.w};
  Tensor<T> y(os);
  const int positions = g.positions();
  const int tile = detail::tile_columns(g);
  AlignedVector<T> cols(static_cast<std::size_t>(g.rows()) * tile);
  ConstMapMat<T> w(weight_.value.data(), out_, g.rows());
  for (int b = 0; b < x.n(); ++b) {
    MapMat<T> ym(y.item(b), out_, positions);
    for (int p0 = 0; p0 < positions; p0 += tile) {
      const int p1 = std::min(positions, p0 + tile);
      detail::im2col(x.item(b), g, p0, p1, cols.data());
      ConstMapMat<T> cm(cols.data(), g.rows(), p1 - p0);
      ym.middleCols(p0, p1 - p0).noalias() = w * cm;
    }
    for (int o = 0; o < out_; ++o) {
      ym.row(o).array() += bias_.value[o];
    }
  }
  if (trace) trace->tensors = {x};
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_out, const Trace<T>& trace, bool param_grads) {
  const Tensor<T>& x = trace.tensors.at(0);
  const Shape os = output_shape(x.shape());
  require_same_shape(os, grad_out.shape(), "Conv2d backward");
  const detail::ConvGeometry g{in_, x.h(), x.w(), kernel_, stride_, pad_, padding_, os.h, os.w};
  const bool want_params = param_grads && !weight_.frozen;
  Tensor<T> dx(x.shape());
  const int positions = g.positions();
  const int tile = detail::tile_columns(g);
  AlignedVector<T> cols(static_cast<std::size_t>(g.rows()) * tile);
  AlignedVector<T> dcols(cols.size());
  ConstMapMat<T> w(weight_.value.data(), out_, g.rows());
  MapMat<T> dw(weight_.grad.data(), out_, g.rows());
  for (int b = 0; b < x.n(); ++b) {
    ConstMapMat<T> dy(grad_out.item(b), out_, positions);
    if (want_params) {
      for (int o = 0; o < out_; ++o) bias_.grad[o] += dy.row(o).sum();
    }
    for (int p0 = 0; p0 < positions; p0 += tile) {
      const int p1 = std::min(positions, p0 + tile);
      const int len = p1 - p0;
      const auto dyt = dy.middleCols(p0, len);
      if (want_params) {
        detail::im2col(x.item(b), g, p0, p1, cols.data());
        ConstMapMat<T> cm(cols.data(), g.rows(), len);
        dw.noalias() += dyt * cm.transpose();
      }
      MapMat<T> dcm(dcols.data(), g.rows(), len);
      dcm.noalias() = w.transpose() * dyt;
      detail::col2im(dcols.data(), g, p0, p1, dx.item(b));
    }
  }
  return dx;
}

template <typename T>
void Conv2d<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

// ------------------------------------------------------- ConvTranspose2d

template <typename T>
ConvTranspose2d<T>::ConvTranspose2d(std::string name, int in_channels, int out_channels, int kernel,
                                    int stride, int pad, int output_padding)
    : Layer<T>(std::move(name)),
      in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      output_padding_(output_padding),
      weight_(make_parameter<T>(this->name() + ".weight", {in_channels, out_channels, kernel, kernel})),
      bias_(make_parameter<T>(this->name() + ".bias", {1, out_channels, 1, 1})) {
  if (in_channels < 1 || out_channels < 1 || kernel < 1 || stride < 1 || pad < 0 ||
      output_padding < 0 || output_padding >= stride) {
    throw Error(ErrorKind::InvalidConfig, this->name() + ": bad transposed convolution hyperparameters");
  }
}

template <typename T>
Shape ConvTranspose2d<T>::output_shape(const Shape& in) const {
  require_channels(in, in_, this->name());
  const int oh = (in.h - 1) * stride_ - 2 * pad_ + kernel_ + output_padding_;
  const int ow = (in.w - 1) * stride_ - 2 * pad_ + kernel_ + output_padding_;
  if (oh < 1 || ow < 1) {
    throw Error(ErrorKind::ShapeMismatch, this->name() + ": input too small " + in.str());
  }
  return {in.n, out_, oh, ow};
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::forward(const Tensor<T>& x, Trace<T>* trace) const {
  const Shape os = output_shape(x.shape());
  // The adjoint convolution reads the output image and produces x's grid.
  const detail::ConvGeometry g{out_, os.h, os.w, kernel_, stride_, pad_, Padding::Zero, x.h(), x.w()};
  Tensor<T> y(os);
  const int positions = g.positions();
  const int tile = detail::tile_columns(g);
  AlignedVector<T> dcols(static_cast<std::size_t>(g.rows()) * tile);
  ConstMapMat<T> w(weight_.value.data(), in_, g.rows());
  for (int b = 0; b < x.n(); ++b) {
    ConstMapMat<T> xm(x.item(b), in_, positions);
    for (int p0 = 0; p0 < positions; p0 += tile) {
      const int p1 = std::min(positions, p0 + tile);
      MapMat<T> dcm(dcols.data(), g.rows(), p1 - p0);
      dcm.noalias() = w.transpose() * xm.middleCols(p0, p1 - p0);
      detail::col2im(dcols.data(), g, p0, p1, y.item(b));
    }
    MapMat<T> ym(y.item(b), out_, os.h * os.w);
    for (int o = 0; o < out_; ++o) ym.row(o).array() += bias_.value[o];
  }
  if (trace) trace->tensors = {x};
  return y;
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::backward(const Tensor<T>& grad_out, const Trace<T>& trace,
                                       bool param_grads) {
  const Tensor<T>& x = trace.tensors.at(0);
  const Shape os = output_shape(x.shape());
  require_same_shape(os, grad_out.shape(), "ConvTranspose2d backward");
  const detail::ConvGeometry g{out_, os.h, os.w, kernel_, stride_, pad_, Padding::Zero, x.h(), x.w()};
  const bool want_params = param_grads && !weight_.frozen;
  Tensor<T> dx(x.shape());
  const int positions = g.positions();
  const int tile = detail::tile_columns(g);
  AlignedVector<T> cols(static_cast<std::size_t>(g.rows()) * tile);
  ConstMapMat<T> w(weight_.value.data(), in_, g.rows());
  MapMat<T> dw(weight_.grad.data(), in_, g.rows());
  for (int b = 0; b < x.n(); ++b) {
    ConstMapMat<T> xm(x.item(b), in_, positions);
    MapMat<T> dxm(dx.item(b), in_, positions);
    if (want_params) {
      ConstMapMat<T> dy(grad_out.item(b), out_, os.h * os.w);
      for (int o = 0; o < out_; ++o) bias_.grad[o] += dy.row(o).sum();
    }
    for (int p0 = 0; p0 < positions; p0 += tile) {
      const int p1 = std::min(positions, p0 + tile);
      const int len = p1 - p0;
      detail::im2col(grad_out.item(b), g, p0, p1, cols.data());
      ConstMapMat<T> cm(cols.data(), g.rows(), len);
      dxm.middleCols(p0, len).noalias() = w * cm;
      if (want_params) dw.noalias() += xm.middleCols(p0, len) * cm.transpose();
    }
  }
  return dx;
}

template <typename T>
void ConvTranspose2d<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

// ---------------------------------------------------------- InstanceNorm

template <typename T>
Tensor<T> InstanceNorm<T>::forward(const Tensor<T>& x, Trace<T>* trace) const {
  Tensor<T> y(x.shape());
  const std::size_t hw = static_cast<std::size_t>(x.h()) * x.w();
  std::vector<T> inv_std;
  inv_std.reserve(static_cast<std::size_t>(x.n()) * x.c());
  for (int b = 0; b < x.n(); ++b) {
    for (int c = 0; c < x.c(); ++c) {
      const T* src = x.plane(b, c);
      T* dst = y.plane(b, c);
      double sum = 0.0;
      for (std::size_t i = 0; i < hw; ++i) sum += src[i];
      const double mean = sum / static_cast<double>(hw);
      double sq = 0.0;
      for (std::size_t i = 0; i < hw; ++i) {
        const double d = src[i] - mean;
        sq += d * d;
      }
      const double inv = 1.0 / std::sqrt(sq / static_cast<double>(hw) + eps_);
      for (std::size_t i = 0; i < hw; ++i) dst[i] = static_cast<T>((src[i] - mean) * inv);
      inv_std.push_back(static_cast<T>(inv));
    }
  }
  if (trace) {
    trace->tensors = {y};
    trace->scalars = std::move(inv_std);
  }
  return y;
}

template <typename T>
Tensor<T> InstanceNorm<T>::backward(const Tensor<T>& grad_out, const Trace<T>& trace, bool) {
  const Tensor<T>& y = trace.tensors.at(0);
  require_same_shape(y.shape(), grad_out.shape(), "InstanceNorm backward");
  Tensor<T> dx(y.shape());
  const std::size_t hw = static_cast<std::size_t>(y.h()) * y.w();
  std::size_t k = 0;
  for (int b = 0; b < y.n(); ++b) {
    for (int c = 0; c < y.c(); ++c, ++k) {
      const T* yp = y.plane(b, c);
      const T* gp = grad_out.plane(b, c);
      T* dp = dx.plane(b, c);
      double sum_g = 0.0;
      double sum_gy = 0.0;
      for (std::size_t i = 0; i < hw; ++i) {
        sum_g += gp[i];
        sum_gy += static_cast<double>(gp[i]) * yp[i];
      }
      const double mg = sum_g / static_cast<double>(hw);
      const double mgy = sum_gy / static_cast<double>(hw);
      const double inv = trace.scalars.at(k);
      for (std::size_t i = 0; i < hw; ++i) {
        dp[i] = static_cast<T>(inv * (gp[i] - mg - yp[i] * mgy));
      }
    }
  }
  return dx;
}

// ------------------------------------------------------------ Activation

template <typename T>
std::string Activation<T>::kind() const {
  switch (act_) {
    case ActivationKind::ReLU: return "ReLU";
    case ActivationKind::LeakyReLU: return "LeakyReLU";
    case ActivationKind::Tanh: return "Tanh";
    case ActivationKind::Sigmoid: return "Sigmoid";
  }
  return "Activation";
}

template <typename T>
Tensor<T> Activation<T>::forward(const Tensor<T>& x, Trace<T>* trace) const {
  Tensor<T> y(x.shape());
  const T slope = static_cast<T>(slope_);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T v = x[i];
    switch (act_) {
      case ActivationKind::ReLU: y[i] = v > T(0) ? v : T(0); break;
      case ActivationKind::LeakyReLU: y[i] = v > T(0) ? v : slope * v; break;
      case ActivationKind::Tanh: y[i] = std::tanh(v); break;
      case ActivationKind::Sigmoid: y[i] = T(1) / (T(1) + std::exp(-v)); break;
    }
  }
  if (trace) trace->tensors = {act_ == ActivationKind::LeakyReLU ? x : y};
  return y;
}

template <typename T>
Tensor<T> Activation<T>::backward(const Tensor<T>& grad_out, const Trace<T>& trace, bool) {
  const Tensor<T>& s = trace.tensors.at(0);
  require_same_shape(s.shape(), grad_out.shape(), "Activation backward");
  Tensor<T> dx(s.shape());
  const T slope = static_cast<T>(slope_);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const T v = s[i];
    const T g = grad_out[i];
    switch (act_) {
      case ActivationKind::ReLU: dx[i] = v > T(0) ? g : T(0); break;
      case ActivationKind::LeakyReLU: dx[i] = v > T(0) ? g : slope * g; break;
      case ActivationKind::Tanh: dx[i] = g * (T(1) - v * v); break;
      case ActivationKind::Sigmoid: dx[i] = g * v * (T(1) - v); break;
    }
  }
  return dx;
}

// ------------------------------------------------------------ Sequential

template <typename T>
Sequential<T>::Sequential(const Sequential& other) : Layer<T>(other) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

template <typename T>
Sequential<T>& Sequential<T>::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential copy(other);
    *this = std::move(copy);
  }
  return *this;
}

template <typename T>
Shape Sequential<T>::output_shape(const Shape& in) const {
  Shape s = in;
  for (const auto& l : layers_) s = l->output_shape(s);
  return s;
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x, Trace<T>* trace) const {
  if (trace) {
    trace->tensors.clear();
    trace->children.assign(layers_.size(), {});
  }
  if (layers_.empty()) return x;
  Tensor<T> cur = layers_[0]->forward(x, trace ? &trace->children[0] : nullptr);
  for (std::size_t i = 1; i < layers_.size(); ++i) {
    cur = layers_[i]->forward(cur, trace ? &trace->children[i] : nullptr);
  }
  return cur;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& grad_out, const Trace<T>& trace,
                                  bool param_grads) {
  if (trace.children.size() != layers_.size()) {
    throw Error(ErrorKind::ShapeMismatch, "trace does not match network " + this->name());
  }
  Tensor<T> g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = layers_[i]->backward(g, trace.children[i], param_grads);
  }
  return g;
}

template <typename T>
void Sequential<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  for (auto& l : layers_) l->collect_parameters(out);
}

template <typename T>
void Sequential<T>::visit(const std::function<void(const Layer<T>&)>& fn) const {
  fn(*this);
  for (const auto& l : layers_) l->visit(fn);
}

template <typename T>
std::vector<Parameter<T>*> Sequential<T>::parameters() {
  std::vector<Parameter<T>*> out;
  collect_parameters(out);
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> Sequential<T>::parameters() const {
  auto params = const_cast<Sequential*>(this)->parameters();
  return {params.begin(), params.end()};
}

template <typename T>
void Sequential<T>::zero_grad() {
  for (auto* p : parameters()) p->grad.fill(T(0));
}

// --------------------------------------------------------- ResidualBlock

template <typename T>
ResidualBlock<T>::ResidualBlock(std::string name, int channels)
    : Layer<T>(std::move(name)), body_(this->name()) {
  const std::string& n = this->name();
  body_.template emplace<Conv2d<T>>(n + ".conv_a", channels, channels, 3, 1, 1, Padding::Reflect);
  body_.template emplace<InstanceNorm<T>>(n + ".norm_a");
  body_.template emplace<Activation<T>>(n + ".relu", ActivationKind::ReLU);
  body_.template emplace<Conv2d<T>>(n + ".conv_b", channels, channels, 3, 1, 1, Padding::Reflect);
  body_.template emplace<InstanceNorm<T>>(n + ".norm_b");
}

template <typename T>
Tensor<T> ResidualBlock<T>::forward(const Tensor<T>& x, Trace<T>* trace) const {
  if (trace) trace->children.assign(1, {});
  Tensor<T> y = body_.forward(x, trace ? &trace->children[0] : nullptr);
  require_same_shape(y.shape(), x.shape(), "ResidualBlock");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
  return y;
}

template <typename T>
Tensor<T> ResidualBlock<T>::backward(const Tensor<T>& grad_out, const Trace<T>& trace,
                                     bool param_grads) {
  Tensor<T> g = body_.backward(grad_out, trace.children.at(0), param_grads);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += grad_out[i];
  return g;
}

template <typename T>
void ResidualBlock<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  body_.collect_parameters(out);
}

template <typename T>
void ResidualBlock<T>::visit(const std::function<void(const Layer<T>&)>& fn) const {
  fn(*this);
  for (std::size_t i = 0; i < body_.size(); ++i) body_.layer(i).visit(fn);
}

// ---------------------------------------------------------------- init

template <typename T>
void init_gaussian(Sequential<T>& net, std::uint64_t seed, double stddev) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  for (auto* p : net.parameters()) {
    const bool is_bias = p->name.size() >= 5 && p->name.compare(p->name.size() - 5, 5, ".bias") == 0;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      p->value[i] = is_bias ? T(0) : static_cast<T>(normal(rng));
    }
    p->grad.fill(T(0));
  }
}

template <typename T>
void init_interpolating(ConvTranspose2d<T>& layer) {
  const int k = layer.kernel();
  const int s = layer.stride();
  if (k != 2 * s) {
    throw Error(ErrorKind::InvalidConfig, layer.name() + ": interpolating init needs kernel == 2 * stride");
  }
  std::vector<double> tap(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) tap[i] = 1.0 - std::abs(i - (k - 1) / 2.0) / s;
  auto& w = layer.weight().value;
  const std::size_t slices = w.size() / static_cast<std::size_t>(k * k);
  for (std::size_t q = 0; q < slices; ++q) {
    T* slice = w.data() + q * k * k;
    const double c = slice[0];
    for (int y = 0; y < k; ++y) {
      for (int x = 0; x < k; ++x) slice[y * k + x] = static_cast<T>(c * tap[y] * tap[x]);
    }
  }
}

#define GAZEGAN_INSTANTIATE(T)                                   \
  template class Conv2d<T>;                                      \
  template class ConvTranspose2d<T>;                             \
  template class InstanceNorm<T>;                                \
  template class Activation<T>;                                  \
  template class Sequential<T>;                                  \
  template class ResidualBlock<T>;                               \
  template void init_gaussian<T>(Sequential<T>&, std::uint64_t, double); \
  template void init_interpolating<T>(ConvTranspose2d<T>&);

GAZEGAN_INSTANTIATE(float)
GAZEGAN_INSTANTIATE(double)

#undef GAZEGAN_INSTANTIATE

}  // namespace gazegan::nn
