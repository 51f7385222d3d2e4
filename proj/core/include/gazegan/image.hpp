#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gazegan {

inline constexpr int kEyeWidth = 400;
inline constexpr int kEyeHeight = 300;

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Interleaved 8-bit RGB raster, row-major. Channel order is RGB everywhere
/// inside the library; conversion to BGR happens only in image_io.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int width, int height, Rgb fill = {});

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return data_.empty(); }
  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  Rgb at(int x, int y) const {
    const std::uint8_t* p = data_.data() + offset(x, y);
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) {
    std::uint8_t* p = data_.data() + offset(x, y);
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }
  std::uint8_t channel(int x, int y, int c) const { return data_[offset(x, y) + c]; }

  std::span<std::uint8_t> bytes() noexcept { return data_; }
  std::span<const std::uint8_t> bytes() const noexcept { return data_; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  std::size_t offset(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

struct Frame {
  RgbImage pixels;
  std::string source_id;
  std::int64_t timestamp_ms = 0;
};

enum class Provenance { Raw, Labeled, Translated };

/// A 400x300 eye crop. The size is enforced on construction.
class EyeImage {
 public:
  EyeImage();
  explicit EyeImage(RgbImage pixels, Provenance provenance = Provenance::Raw);

  const RgbImage& pixels() const noexcept { return pixels_; }
  Provenance provenance() const noexcept { return provenance_; }
  void set_provenance(Provenance p) noexcept { provenance_ = p; }

  Rgb at(int x, int y) const { return pixels_.at(x, y); }
  void set(int x, int y, Rgb c) { pixels_.set(x, y, c); }

  friend bool operator==(const EyeImage&, const EyeImage&) = default;

 private:
  RgbImage pixels_;
  Provenance provenance_ = Provenance::Raw;
};

/// Pupil marker paint. Must stay green-dominant so color-band search can
/// separate it from skin and sclera.
class MarkerColor {
 public:
  constexpr MarkerColor() = default;
  explicit MarkerColor(Rgb rgb);

  constexpr Rgb rgb() const noexcept { return rgb_; }

  friend bool operator==(const MarkerColor&, const MarkerColor&) = default;

 private:
  Rgb rgb_{45, 253, 9};
};

}  // namespace gazegan
