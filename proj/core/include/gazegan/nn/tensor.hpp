#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace gazegan::nn {

/// 64-byte aligned storage. Vectorized reductions peel differently
/// depending on the start address, so fixed alignment keeps results
/// bit-identical between runs.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const noexcept {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense NCHW tensor.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape), data_(shape.numel(), fill) {}
  Tensor(int n, int c, int h, int w, T fill = T(0)) : Tensor(Shape{n, c, h, w}, fill) {}

  const Shape& shape() const noexcept { return shape_; }
  int n() const noexcept { return shape_.n; }
  int c() const noexcept { return shape_.c; }
  int h() const noexcept { return shape_.h; }
  int w() const noexcept { return shape_.w; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> span() noexcept { return data_; }
  std::span<const T> span() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T& at(int n, int c, int y, int x) noexcept { return data_[index(n, c, y, x)]; }
  const T& at(int n, int c, int y, int x) const noexcept { return data_[index(n, c, y, x)]; }

  /// Pointer to the (n, c) spatial plane.
  T* plane(int n, int c) noexcept { return data_.data() + index(n, c, 0, 0); }
  const T* plane(int n, int c) const noexcept { return data_.data() + index(n, c, 0, 0); }
  /// Pointer to batch item n (C*H*W contiguous values).
  T* item(int n) noexcept { return plane(n, 0); }
  const T* item(int n) const noexcept { return plane(n, 0); }

  void fill(T v) noexcept {
    for (auto& x : data_) x = v;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t index(int n, int c, int y, int x) const noexcept {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  Shape shape_;
  AlignedVector<T> data_;
};

/// Throws ShapeMismatch when the shapes differ.
void require_same_shape(const Shape& a, const Shape& b, const char* what);

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
  Tensor<To> out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = static_cast<To>(t[i]);
  return out;
}

}  // namespace gazegan::nn
