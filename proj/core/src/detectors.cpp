#include <opencv2/face.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/objdetect.hpp>

#include "gazegan/dataset.hpp"
#include "gazegan/error.hpp"
#include "gazegan/image_io.hpp"

namespace gazegan::dataset {

struct CascadeFaceDetector::Impl {
  cv::CascadeClassifier cascade;
};

CascadeFaceDetector::CascadeFaceDetector(const fs::path& model_file) : impl_(std::make_unique<Impl>()) {
  if (!fs::exists(model_file) || !impl_->cascade.load(model_file.string())) {
    throw Error(ErrorKind::MissingModelFile, "cannot load face cascade " + model_file.string());
  }
}

CascadeFaceDetector::~CascadeFaceDetector() = default;

std::vector<RegionBox> CascadeFaceDetector::detect(const Frame& frame) {
  cv::Mat gray;
  cv::cvtColor(io::to_bgr_mat(frame.pixels), gray, cv::COLOR_BGR2GRAY);
  cv::equalizeHist(gray, gray);
  std::vector<cv::Rect> faces;
  impl_->cascade.detectMultiScale(gray, faces, 1.1, 3, 0, cv::Size(30, 30));
  std::vector<RegionBox> out;
  out.reserve(faces.size());
  for (const auto& r : faces) out.push_back({r.x, r.y, r.x + r.width, r.y + r.height});
  return out;
}

struct LbfLandmarkPredictor::Impl {
  cv::Ptr<cv::face::Facemark> facemark;
};

LbfLandmarkPredictor::LbfLandmarkPredictor(const fs::path& model_file)
    : impl_(std::make_unique<Impl>()) {
  if (!fs::exists(model_file)) {
    throw Error(ErrorKind::MissingModelFile, "landmark model not found: " + model_file.string());
  }
  impl_->facemark = cv::face::createFacemarkLBF();
  try {
    impl_->facemark->loadModel(model_file.string());
  } catch (const cv::Exception& e) {
    throw Error(ErrorKind::MissingModelFile, std::string("cannot load landmark model: ") + e.what());
  }
}

LbfLandmarkPredictor::~LbfLandmarkPredictor() = default;

std::vector<Point2> LbfLandmarkPredictor::predict(const Frame& frame, const RegionBox& face) {
  cv::Mat bgr = io::to_bgr_mat(frame.pixels);
  std::vector<cv::Rect> faces{cv::Rect(face.x0, face.y0, face.width(), face.height())};
  std::vector<std::vector<cv::Point2f>> shapes;
  if (!impl_->facemark->fit(bgr, faces, shapes) || shapes.empty()) return {};
  std::vector<Point2> out;
  out.reserve(shapes[0].size());
  for (const auto& p : shapes[0]) out.push_back({p.x, p.y});
  return out;
}

}  // namespace gazegan::dataset
