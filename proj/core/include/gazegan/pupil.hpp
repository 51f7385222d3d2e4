#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gazegan/image.hpp"

namespace gazegan::pupil {

class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool fill = false);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool get(int x, int y) const noexcept { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool v = true) noexcept { bits_[index(x, y)] = v ? 1 : 0; }
  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  std::size_t count() const noexcept;
  BinaryMask complement() const;
  /// True when every set bit of *this is also set in `other`.
  bool subset_of(const BinaryMask& other) const;

  const std::vector<std::uint8_t>& raw() const noexcept { return bits_; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Square structuring element and iteration counts for the cleanup step.
struct MorphParams {
  int element = 3;
  int erode_iterations = 2;
  int dilate_iterations = 2;

  void validate() const;
};

/// Value assumed for pixels outside the frame. Zero padding is the default
/// for both operations; the set-border variant exists so the exact
/// complement duality can be expressed.
enum class Border { Unset, Set };

struct PupilDetection {
  double cx = 0.0;
  double cy = 0.0;
  int area = 0;
  double confidence = 0.0;
};

struct DetectorParams {
  MarkerColor color{};
  int tolerance = 40;
  MorphParams morph{};
  int min_area = 20;
};

/// inRange-style band test: every channel within [c - tol, c + tol], clipped
/// to [0, 255].
BinaryMask color_band_mask(const RgbImage& image, MarkerColor color, int tolerance = 40);

BinaryMask erode(const BinaryMask& mask, const MorphParams& params, Border border = Border::Unset);
BinaryMask dilate(const BinaryMask& mask, const MorphParams& params, Border border = Border::Unset);

/// 8-connected components; the largest (ties broken by smaller centroid y,
/// then x) is reported when its area reaches `min_area`.
std::optional<PupilDetection> largest_blob_centroid(const BinaryMask& mask, int min_area = 20);

std::optional<PupilDetection> detect_pupil(const RgbImage& image, const DetectorParams& params = {});
inline std::optional<PupilDetection> detect_pupil(const EyeImage& image,
                                                  const DetectorParams& params = {}) {
  return detect_pupil(image.pixels(), params);
}

}  // namespace gazegan::pupil
