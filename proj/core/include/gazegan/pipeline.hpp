#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gazegan/calibration.hpp"
#include "gazegan/cyclegan.hpp"
#include "gazegan/dataset.hpp"
#include "gazegan/pupil.hpp"

namespace gazegan::tracker {

namespace fs = std::filesystem;

struct PipelineConfig {
  fs::path face_model;      // cascade XML
  fs::path landmark_model;  // LBF YAML
  fs::path checkpoint;      // directory with manifest.json
  fs::path dataset;         // optional
  fs::path calibration;     // optional model.json
  fs::path session_dir = "sessions";
  MarkerColor marker;
  int color_tolerance = 40;
  pupil::MorphParams morph;
  int min_blob_area = 20;
  int eye_pad = dataset::kDefaultEyePad;
  calib::ScreenGeometry geometry;
  double dwell_seconds = calib::kDefaultDwellSeconds;
  double settle_seconds = calib::kDefaultSettleSeconds;
  int camera_index = 0;
  int port = 8765;
  std::uint64_t seed = 1;

  /// Throws ConfigError when a referenced path is missing or a value is
  /// out of range. Optional paths are checked only when set.
  void validate(bool need_models = true) const;
  pupil::DetectorParams detector_params() const;
};

std::string pipeline_config_to_json(const PipelineConfig& config);
/// Relative paths are resolved against `base_dir`.
PipelineConfig pipeline_config_from_json(const std::string& text, const fs::path& base_dir = {});
PipelineConfig load_pipeline_config(const fs::path& path);

struct PupilFix {
  double cx = 0.0;
  double cy = 0.0;
  double confidence = 0.0;
};

struct GazeUpdate {
  std::int64_t timestamp_ms = 0;
  std::optional<PupilFix> pupil;
  std::optional<Point2> screen;
  std::uint64_t seq = 0;
};

/// {"type":"gaze","t":ms,"px":f,"py":f,"conf":f,"sx":f|null,"sy":f|null,"seq":n};
/// px, py and conf are null without a pupil.
std::string gaze_message(const GazeUpdate& update);

/// Everything run_frame needs. Detector stages are injectable.
struct TrackerState {
  std::unique_ptr<dataset::FaceDetector> face_detector;
  std::unique_ptr<dataset::LandmarkPredictor> landmark_predictor;
  std::optional<nn::Sequential<float>> generator;  // A -> B
  pupil::DetectorParams detector;
  int eye_pad = dataset::kDefaultEyePad;
  std::optional<calib::CalibrationModel> calibration;
  std::uint64_t next_seq = 1;

  bool ready() const noexcept { return face_detector && landmark_predictor && generator.has_value(); }
};

/// Loads detectors, the A->B generator and an optional calibration model.
TrackerState make_tracker_state(const PipelineConfig& config);

/// Frame -> face -> eye landmarks -> crop -> translate -> detect -> map. A
/// stage with no result yields a pupil-less update. Throws PipelineNotReady.
GazeUpdate run_frame(const Frame& frame, TrackerState& state);

/// Eye-crop stage alone: the translated 400x300 eye and its pupil, or none.
std::optional<PupilFix> locate_pupil_in_eye(const EyeImage& eye, const TrackerState& state);

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  /// Next frame, or none at end of stream.
  virtual std::optional<Frame> next() = 0;
};

/// Sorted image files of a directory; timestamps advance by `frame_interval_ms`.
class DirectoryFrameSource final : public FrameSource {
 public:
  explicit DirectoryFrameSource(const fs::path& dir, std::int64_t frame_interval_ms = 33);
  std::optional<Frame> next() override;
  std::size_t size() const noexcept { return files_.size(); }

 private:
  std::vector<fs::path> files_;
  std::size_t pos_ = 0;
  std::int64_t interval_;
};

class CameraFrameSource final : public FrameSource {
 public:
  explicit CameraFrameSource(int index);
  ~CameraFrameSource() override;
  std::optional<Frame> next() override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gazegan::tracker
