#include "gazegan/image_io.hpp"

#include <cstring>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "gazegan/error.hpp"

namespace gazegan::io {

RgbImage from_bgr_mat(const cv::Mat& bgr) {
  cv::Mat rgb;
  if (bgr.channels() == 1) {
    cv::cvtColor(bgr, rgb, cv::COLOR_GRAY2RGB);
  } else if (bgr.channels() == 4) {
    cv::cvtColor(bgr, rgb, cv::COLOR_BGRA2RGB);
  } else {
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  }
  if (rgb.depth() != CV_8U) {
    rgb.convertTo(rgb, CV_8UC3);
  }
  RgbImage out(rgb.cols, rgb.rows);
  auto dst = out.bytes();
  for (int y = 0; y < rgb.rows; ++y) {
    std::memcpy(dst.data() + static_cast<std::size_t>(y) * rgb.cols * 3, rgb.ptr<std::uint8_t>(y),
                static_cast<std::size_t>(rgb.cols) * 3);
  }
  return out;
}

cv::Mat to_bgr_mat(const RgbImage& image) {
  cv::Mat rgb(image.height(), image.width(), CV_8UC3,
              const_cast<std::uint8_t*>(image.bytes().data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

RgbImage read_image(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (m.empty()) {
    throw Error(ErrorKind::MissingImage, "cannot read image " + path.string());
  }
  return from_bgr_mat(m);
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  if (!cv::imwrite(path.string(), to_bgr_mat(image))) {
    throw Error(ErrorKind::Io, "cannot write image " + path.string());
  }
}

}  // namespace gazegan::io
