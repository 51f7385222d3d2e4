#include "gazegan/image.hpp"

#include "gazegan/error.hpp"

namespace gazegan {

RgbImage::RgbImage(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorKind::ShapeMismatch, "image dimensions must be positive");
  }
  data_.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill.r;
    data_[i + 1] = fill.g;
    data_[i + 2] = fill.b;
  }
}

EyeImage::EyeImage() : pixels_(kEyeWidth, kEyeHeight) {}

EyeImage::EyeImage(RgbImage pixels, Provenance provenance)
    : pixels_(std::move(pixels)), provenance_(provenance) {
  if (pixels_.width() != kEyeWidth || pixels_.height() != kEyeHeight) {
    throw Error(ErrorKind::ShapeMismatch,
                "eye image must be 400x300, got " + std::to_string(pixels_.width()) + "x" +
                    std::to_string(pixels_.height()));
  }
}

MarkerColor::MarkerColor(Rgb rgb) : rgb_(rgb) {
  if (!(rgb.g > rgb.r && rgb.g > rgb.b)) {
    throw Error(ErrorKind::InvalidConfig, "marker color must be green-dominant");
  }
}

}  // namespace gazegan
