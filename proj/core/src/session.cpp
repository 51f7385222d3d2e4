#include "gazegan/session.hpp"

#include <cstdio>
#include <sstream>

#include "gazegan/error.hpp"
#include "json_util.hpp"

namespace gazegan::tracker {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Shortest representation that round-trips; keeps replay output stable.
std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  for (int digits = 1; digits <= 17; ++digits) {
    std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace

std::string sample_to_json(const GazeSample& s) {
  std::string out = "{\"t\":" + std::to_string(s.timestamp_ms) + ",\"px\":" + number(s.px) +
                    ",\"py\":" + number(s.py) + ",\"target\":" +
                    (s.target_index ? std::to_string(*s.target_index) : std::string("null")) +
                    ",\"conf\":" + number(s.confidence);
  if (s.screen) out += ",\"sx\":" + number(s.screen->x) + ",\"sy\":" + number(s.screen->y);
  return out + "}";
}

GazeSample sample_from_json(const std::string& line) {
  try {
    const json j = json::parse(line);
    GazeSample s;
    s.timestamp_ms = j.at("t").get<std::int64_t>();
    s.px = j.at("px").get<double>();
    s.py = j.at("py").get<double>();
    if (j.contains("target") && !j.at("target").is_null()) {
      const int t = j.at("target").get<int>();
      if (t < 1 || t > calib::kTargetCount) throw Error(ErrorKind::DataError, "target index out of range");
      s.target_index = t;
    }
    s.confidence = j.value("conf", 1.0);
    const bool sx = j.contains("sx") && !j.at("sx").is_null();
    const bool sy = j.contains("sy") && !j.at("sy").is_null();
    if (sx != sy) throw Error(ErrorKind::DataError, "sx and sy must appear together");
    if (sx) s.screen = Point2{j.at("sx").get<double>(), j.at("sy").get<double>()};
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::DataError, std::string("session line: ") + e.what());
  }
}

std::string session_to_jsonl(const std::vector<GazeSample>& samples) {
  std::string out;
  for (const auto& s : samples) out += sample_to_json(s) + "\n";
  return out;
}

std::vector<GazeSample> session_from_jsonl(const std::string& text) {
  std::vector<GazeSample> out;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    GazeSample s;
    try {
      s = sample_from_json(line);
    } catch (const Error& e) {
      throw Error(ErrorKind::DataError, "line " + std::to_string(n) + ": " + e.what());
    }
    if (!out.empty() && s.timestamp_ms < out.back().timestamp_ms) {
      throw Error(ErrorKind::DataError, "line " + std::to_string(n) + ": timestamp goes backwards");
    }
    out.push_back(s);
  }
  return out;
}

void write_session(const fs::path& path, const std::vector<GazeSample>& samples) {
  detail::write_file(path, session_to_jsonl(samples));
}

std::vector<GazeSample> read_session(const fs::path& path) {
  return session_from_jsonl(detail::read_file(path, ErrorKind::DataError));
}

std::vector<Trial> split_trials(const std::vector<GazeSample>& samples) {
  std::vector<Trial> out;
  for (const auto& s : samples) {
    if (!s.target_index) continue;
    if (out.empty() || out.back().target_index != *s.target_index) out.push_back({*s.target_index, {}});
    out.back().samples.push_back(s);
  }
  return out;
}

CalibrationOutcome calibrate_session(const std::vector<GazeSample>& samples, const calib::ScreenGeometry& geometry,
                                     const FixationWindow& window) {
  const auto targets = calib::calibration_targets(geometry, window.dwell_seconds);
  CalibrationOutcome out;
  for (const Trial& trial : split_trials(samples)) {
    out.pupil_fixations.push_back(
        calib::aggregate_fixation(trial.samples, window.dwell_seconds, window.settle_seconds));
    out.screen_targets.push_back(targets[static_cast<std::size_t>(trial.target_index - 1)].center);
  }
  out.model = calib::fit_mapping(out.pupil_fixations, out.screen_targets, geometry);
  std::vector<GazeSample> stripped = samples;
  for (auto& s : stripped) s.screen.reset();
  out.report = evaluate_session(stripped, geometry, out.model, window);
  return out;
}

calib::ErrorGrid evaluate_session(const std::vector<GazeSample>& samples, const calib::ScreenGeometry& geometry,
                                  const std::optional<calib::CalibrationModel>& model,
                                  const FixationWindow& window) {
  const auto targets = calib::calibration_targets(geometry, window.dwell_seconds);
  const auto trials = split_trials(samples);
  std::optional<calib::CalibrationModel> mapping = model;
  std::vector<std::vector<Point2>> estimates(calib::kTargetCount);
  for (const Trial& trial : trials) {
    Point2 p;
    const bool live = std::all_of(trial.samples.begin(), trial.samples.end(),
                                  [](const GazeSample& s) { return s.screen.has_value(); });
    if (live) {
      p = calib::aggregate_screen_fixation(trial.samples, window.dwell_seconds, window.settle_seconds);
    } else {
      if (!mapping) mapping = calibrate_session(samples, geometry, window).model;
      p = calib::map_gaze(*mapping, calib::aggregate_fixation(trial.samples, window.dwell_seconds,
                                                              window.settle_seconds))
              .screen;
    }
    estimates[static_cast<std::size_t>(trial.target_index - 1)].push_back(p);
  }
  return calib::evaluate_grid(estimates, targets, geometry);
}

void save_session_record(const fs::path& dir, const SessionRecord& record) {
  fs::create_directories(dir);
  write_session(dir / "session.jsonl", record.samples);
  calib::save_model(dir / "model.json", record.model);
  detail::write_file(dir / "report.csv", calib::error_report_csv(record.report));
  detail::write_file(dir / "config.json", record.config_json.empty() ? "{}\n" : record.config_json);
}

}  // namespace gazegan::tracker
