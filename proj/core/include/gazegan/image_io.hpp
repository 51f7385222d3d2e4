#pragma once

#include <filesystem>

#include "gazegan/image.hpp"

namespace cv {
class Mat;
}

namespace gazegan::io {

/// Reads any format OpenCV can decode and converts to RGB.
RgbImage read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& image);

RgbImage from_bgr_mat(const cv::Mat& bgr);
cv::Mat to_bgr_mat(const RgbImage& image);

}  // namespace gazegan::io
