#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gazegan/image.hpp"

namespace gazegan::dataset {

namespace fs = std::filesystem;

inline constexpr int kLandmarkCount = 68;
inline constexpr int kEyeFirstLandmark = 36;
inline constexpr int kEyeLastLandmark = 41;
inline constexpr int kDefaultEyePad = 30;
inline constexpr int kDefaultPupilRadius = 12;

struct LandmarkSet {
  std::vector<Point2> points;
};

/// Half-open pixel box [x0, x1) x [y0, y1).
struct RegionBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
  long long area() const noexcept {
    return width() > 0 && height() > 0 ? static_cast<long long>(width()) * height() : 0;
  }

  friend bool operator==(const RegionBox&, const RegionBox&) = default;
};

struct PupilLabel {
  double cx = 0.0;
  double cy = 0.0;
  double radius = kDefaultPupilRadius;
};

struct LabelRow {
  std::string filename;
  int cx = 0;
  int cy = 0;
  int radius = kDefaultPupilRadius;

  friend bool operator==(const LabelRow&, const LabelRow&) = default;
};

/// On-disk training layout: root/trainA, root/trainB, root/labels.csv.
struct DatasetPair {
  fs::path root;
  std::vector<std::string> domain_a;
  std::vector<std::string> domain_b;
  std::vector<LabelRow> labels;

  fs::path dir_a() const { return root / "trainA"; }
  fs::path dir_b() const { return root / "trainB"; }
  fs::path labels_path() const { return root / "labels.csv"; }
};

// ------------------------------------------------------------- detectors

class FaceDetector {
 public:
  virtual ~FaceDetector() = default;
  virtual std::vector<RegionBox> detect(const Frame& frame) = 0;
};

class LandmarkPredictor {
 public:
  virtual ~LandmarkPredictor() = default;
  virtual std::vector<Point2> predict(const Frame& frame, const RegionBox& face) = 0;
};

/// Viola-Jones cascade loaded from an OpenCV XML model file.
class CascadeFaceDetector final : public FaceDetector {
 public:
  explicit CascadeFaceDetector(const fs::path& model_file);
  ~CascadeFaceDetector() override;
  std::vector<RegionBox> detect(const Frame& frame) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// 68-point LBF facemark model loaded from a YAML model file.
class LbfLandmarkPredictor final : public LandmarkPredictor {
 public:
  explicit LbfLandmarkPredictor(const fs::path& model_file);
  ~LbfLandmarkPredictor() override;
  std::vector<Point2> predict(const Frame& frame, const RegionBox& face) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// ------------------------------------------------------------ operations

/// Largest reported face by area, or none.
std::optional<RegionBox> detect_face(const Frame& frame, FaceDetector& detector);

LandmarkSet locate_eye_landmarks(const Frame& frame, const RegionBox& face,
                                 LandmarkPredictor& predictor);

/// Bounding box of landmarks 36-41 grown by `pad` on every side and clamped
/// to a `frame_width` x `frame_height` frame.
RegionBox eye_region_box(const LandmarkSet& landmarks, int pad, int frame_width, int frame_height);

/// Bilinear resampling with pixel-center alignment.
RgbImage resize_bilinear(const RgbImage& src, int width, int height);

EyeImage crop_resize(const Frame& frame, const RegionBox& box);

/// Sets every pixel within `radius` of the (half-up rounded) center to the
/// marker color.
EyeImage paint_pupil(const EyeImage& image, const PupilLabel& label, MarkerColor color = {});

/// Round-half-up used for all label coordinates.
int round_half_up(double v);

struct RowError {
  std::size_t line = 0;
  std::string filename;
  std::string kind;
  std::string message;
};

struct ConversionResult {
  DatasetPair pair;
  std::vector<RowError> errors;
};

struct SourceSize {
  int width = 1280;
  int height = 720;
};

/// Resizes annotated source images to 400x300 (domain A), paints the
/// rescaled pupil (domain B) and writes the dataset layout under `out_root`.
/// Per-row problems are collected rather than thrown.
ConversionResult convert_annotated_dataset(const fs::path& image_dir, const fs::path& coords_table,
                                           const fs::path& out_root, SourceSize source_size = {},
                                           int radius = kDefaultPupilRadius,
                                           MarkerColor color = {});

struct NamedEyeImage {
  std::string filename;
  EyeImage image;
};

/// Writes raw crops to trainA, paints every labeled crop into trainB and
/// writes labels.csv.
DatasetPair build_domain_pair(const std::vector<NamedEyeImage>& raw_images,
                              const std::vector<LabelRow>& labels, const fs::path& out_root,
                              MarkerColor color = {});

std::vector<LabelRow> read_labels(const fs::path& csv);
void write_labels(const fs::path& csv, const std::vector<LabelRow>& rows);

/// Scans an existing dataset layout.
DatasetPair load_dataset(const fs::path& root);

}  // namespace gazegan::dataset
