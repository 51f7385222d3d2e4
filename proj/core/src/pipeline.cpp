#include "gazegan/pipeline.hpp"

#include <algorithm>

#include <opencv2/videoio.hpp>

#include "gazegan/checkpoint.hpp"
#include "gazegan/error.hpp"
#include "gazegan/image_io.hpp"
#include "json_util.hpp"

namespace gazegan::tracker {

using nlohmann::json;

namespace {

const char* const kConfigKeys[] = {"face_model",     "landmark_model", "checkpoint",      "dataset",
                                   "calibration",    "session_dir",    "marker_color",    "color_tolerance",
                                   "morph",          "min_blob_area",  "eye_pad",         "geometry",
                                   "dwell_seconds",  "settle_seconds", "camera_index",    "port",
                                   "seed"};

void require_file(const fs::path& p, const char* what) {
  if (p.empty()) throw Error(ErrorKind::ConfigError, std::string(what) + " path is not set");
  if (!fs::exists(p)) throw Error(ErrorKind::ConfigError, std::string(what) + " not found: " + p.string());
}

fs::path resolve(const json& j, const char* key, const fs::path& base) {
  if (!j.contains(key) || j.at(key).is_null()) return {};
  fs::path p = j.at(key).get<std::string>();
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

}  // namespace

void PipelineConfig::validate(bool need_models) const {
  if (need_models) {
    require_file(face_model, "face_model");
    require_file(landmark_model, "landmark_model");
    require_file(checkpoint / "manifest.json", "checkpoint manifest");
  }
  if (!dataset.empty()) require_file(dataset, "dataset");
  if (!calibration.empty()) require_file(calibration, "calibration");
  if (color_tolerance < 0 || color_tolerance > 255) throw Error(ErrorKind::ConfigError, "color_tolerance in [0,255]");
  if (min_blob_area < 1 || eye_pad < 0) throw Error(ErrorKind::ConfigError, "min_blob_area >= 1, eye_pad >= 0");
  if (!(dwell_seconds > settle_seconds) || settle_seconds < 0) {
    throw Error(ErrorKind::ConfigError, "need 0 <= settle_seconds < dwell_seconds");
  }
  if (port < 0 || port > 65535) throw Error(ErrorKind::ConfigError, "port out of range");
  try {
    morph.validate();
    geometry.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, e.what());
  }
}

pupil::DetectorParams PipelineConfig::detector_params() const {
  return {marker, color_tolerance, morph, min_blob_area};
}

std::string pipeline_config_to_json(const PipelineConfig& c) {
  const Rgb m = c.marker.rgb();
  json j{{"face_model", c.face_model.generic_string()},
         {"landmark_model", c.landmark_model.generic_string()},
         {"checkpoint", c.checkpoint.generic_string()},
         {"dataset", c.dataset.generic_string()},
         {"calibration", c.calibration.generic_string()},
         {"session_dir", c.session_dir.generic_string()},
         {"marker_color", {m.r, m.g, m.b}},
         {"color_tolerance", c.color_tolerance},
         {"morph",
          {{"element", c.morph.element},
           {"erode_iterations", c.morph.erode_iterations},
           {"dilate_iterations", c.morph.dilate_iterations}}},
         {"min_blob_area", c.min_blob_area},
         {"eye_pad", c.eye_pad},
         {"geometry", json::parse(calib::geometry_to_json(c.geometry))},
         {"dwell_seconds", c.dwell_seconds},
         {"settle_seconds", c.settle_seconds},
         {"camera_index", c.camera_index},
         {"port", c.port},
         {"seed", c.seed}};
  return j.dump(2) + "\n";
}

PipelineConfig pipeline_config_from_json(const std::string& text, const fs::path& base_dir) {
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw Error(ErrorKind::ConfigError, "pipeline config must be a JSON object");
    detail::reject_unknown_keys(j, kConfigKeys, "pipeline config");
    PipelineConfig c;
    c.face_model = resolve(j, "face_model", base_dir);
    c.landmark_model = resolve(j, "landmark_model", base_dir);
    c.checkpoint = resolve(j, "checkpoint", base_dir);
    c.dataset = resolve(j, "dataset", base_dir);
    c.calibration = resolve(j, "calibration", base_dir);
    if (j.contains("session_dir")) c.session_dir = resolve(j, "session_dir", base_dir);
    if (j.contains("marker_color")) {
      const auto v = j.at("marker_color").get<std::vector<int>>();
      if (v.size() != 3 || std::any_of(v.begin(), v.end(), [](int x) { return x < 0 || x > 255; })) {
        throw Error(ErrorKind::ConfigError, "marker_color must be three values in [0,255]");
      }
      c.marker = MarkerColor(Rgb{static_cast<std::uint8_t>(v[0]), static_cast<std::uint8_t>(v[1]),
                                 static_cast<std::uint8_t>(v[2])});
    }
    c.color_tolerance = j.value("color_tolerance", c.color_tolerance);
    if (j.contains("morph")) {
      const json& m = j.at("morph");
      c.morph.element = m.value("element", c.morph.element);
      c.morph.erode_iterations = m.value("erode_iterations", c.morph.erode_iterations);
      c.morph.dilate_iterations = m.value("dilate_iterations", c.morph.dilate_iterations);
    }
    c.min_blob_area = j.value("min_blob_area", c.min_blob_area);
    c.eye_pad = j.value("eye_pad", c.eye_pad);
    if (j.contains("geometry")) c.geometry = calib::geometry_from_json(j.at("geometry").dump());
    c.dwell_seconds = j.value("dwell_seconds", c.dwell_seconds);
    c.settle_seconds = j.value("settle_seconds", c.settle_seconds);
    c.camera_index = j.value("camera_index", c.camera_index);
    c.port = j.value("port", c.port);
    c.seed = j.value("seed", c.seed);
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("pipeline config JSON: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigError) throw;
    throw Error(ErrorKind::ConfigError, e.what());
  }
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  return pipeline_config_from_json(detail::read_file(path, ErrorKind::ConfigError), path.parent_path());
}

std::string gaze_message(const GazeUpdate& u) {
  json j{{"type", "gaze"}, {"t", u.timestamp_ms}};
  if (u.pupil) {
    j["px"] = u.pupil->cx;
    j["py"] = u.pupil->cy;
    j["conf"] = u.pupil->confidence;
  } else {
    j["px"] = nullptr;
    j["py"] = nullptr;
    j["conf"] = nullptr;
  }
  j["sx"] = u.screen ? json(u.screen->x) : json(nullptr);
  j["sy"] = u.screen ? json(u.screen->y) : json(nullptr);
  j["seq"] = u.seq;
  return j.dump();
}

TrackerState make_tracker_state(const PipelineConfig& config) {
  config.validate(true);
  TrackerState s;
  s.face_detector = std::make_unique<dataset::CascadeFaceDetector>(config.face_model);
  s.landmark_predictor = std::make_unique<dataset::LbfLandmarkPredictor>(config.landmark_model);
  s.generator = engine::load_checkpoint(config.checkpoint).g;
  s.detector = config.detector_params();
  s.eye_pad = config.eye_pad;
  if (!config.calibration.empty()) s.calibration = calib::load_model(config.calibration);
  return s;
}

std::optional<PupilFix> locate_pupil_in_eye(const EyeImage& eye, const TrackerState& state) {
  if (!state.generator) throw Error(ErrorKind::PipelineNotReady, "no generator loaded");
  const EyeImage translated = engine::translate(*state.generator, eye);
  const auto d = pupil::detect_pupil(translated, state.detector);
  if (!d) return std::nullopt;
  return PupilFix{d->cx, d->cy, d->confidence};
}

GazeUpdate run_frame(const Frame& frame, TrackerState& state) {
  if (!state.ready()) throw Error(ErrorKind::PipelineNotReady, "tracker state is not initialized");
  GazeUpdate u;
  u.timestamp_ms = frame.timestamp_ms;
  u.seq = state.next_seq++;
  const auto face = dataset::detect_face(frame, *state.face_detector);
  if (!face) return u;
  EyeImage eye;
  try {
    const auto marks = dataset::locate_eye_landmarks(frame, *face, *state.landmark_predictor);
    const auto box = dataset::eye_region_box(marks, state.eye_pad, frame.pixels.width(), frame.pixels.height());
    eye = dataset::crop_resize(frame, box);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::LandmarkFailure || e.kind() == ErrorKind::DegenerateRegion) return u;
    throw;
  }
  u.pupil = locate_pupil_in_eye(eye, state);
  if (u.pupil && state.calibration) {
    u.screen = calib::map_gaze(*state.calibration, {u.pupil->cx, u.pupil->cy}).screen;
  }
  return u;
}

DirectoryFrameSource::DirectoryFrameSource(const fs::path& dir, std::int64_t frame_interval_ms)
    : interval_(frame_interval_ms) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::DataError, "frame directory not found: " + dir.string());
  for (const auto& e : fs::directory_iterator(dir)) {
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (e.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp")) {
      files_.push_back(e.path());
    }
  }
  std::sort(files_.begin(), files_.end());
}

std::optional<Frame> DirectoryFrameSource::next() {
  if (pos_ >= files_.size()) return std::nullopt;
  Frame f;
  f.pixels = io::read_image(files_[pos_]);
  f.source_id = files_[pos_].filename().string();
  f.timestamp_ms = static_cast<std::int64_t>(pos_) * interval_;
  ++pos_;
  return f;
}

struct CameraFrameSource::Impl {
  cv::VideoCapture capture;
  std::int64_t origin = -1;
};

CameraFrameSource::CameraFrameSource(int index) : impl_(std::make_unique<Impl>()) {
  if (!impl_->capture.open(index)) {
    throw Error(ErrorKind::ConfigError, "cannot open camera " + std::to_string(index));
  }
}

CameraFrameSource::~CameraFrameSource() = default;

std::optional<Frame> CameraFrameSource::next() {
  cv::Mat bgr;
  if (!impl_->capture.read(bgr) || bgr.empty()) return std::nullopt;
  const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now().time_since_epoch())
                       .count();
  if (impl_->origin < 0) impl_->origin = now;
  Frame f;
  f.pixels = io::from_bgr_mat(bgr);
  f.source_id = "camera";
  f.timestamp_ms = now - impl_->origin;
  return f;
}

}  // namespace gazegan::tracker
