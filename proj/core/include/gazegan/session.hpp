#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gazegan/calibration.hpp"

namespace gazegan::tracker {

using calib::GazeSample;

/// One JSON object per line:
/// {"t":ms,"px":f,"py":f,"target":i|null,"conf":f[,"sx":f,"sy":f]}
std::string sample_to_json(const GazeSample& sample);
GazeSample sample_from_json(const std::string& line);

std::string session_to_jsonl(const std::vector<GazeSample>& samples);
std::vector<GazeSample> session_from_jsonl(const std::string& text);
void write_session(const std::filesystem::path& path, const std::vector<GazeSample>& samples);
/// Throws DataError on malformed lines or non-monotone timestamps.
std::vector<GazeSample> read_session(const std::filesystem::path& path);

/// A maximal run of consecutive samples tagged with the same target.
struct Trial {
  int target_index = 0;
  std::vector<GazeSample> samples;
};

std::vector<Trial> split_trials(const std::vector<GazeSample>& samples);

struct FixationWindow {
  double dwell_seconds = calib::kDefaultDwellSeconds;
  double settle_seconds = calib::kDefaultSettleSeconds;
};

struct CalibrationOutcome {
  calib::CalibrationModel model;
  calib::ErrorGrid report;
  std::vector<Point2> pupil_fixations;
  std::vector<Point2> screen_targets;
};

/// Aggregates each trial to a pupil fixation, fits the quadratic mapping to
/// the target centers and evaluates it on the same trials.
CalibrationOutcome calibrate_session(const std::vector<GazeSample>& samples, const calib::ScreenGeometry& geometry,
                                     const FixationWindow& window = {});

/// Per-target angular error. Trials whose samples carry live screen points
/// use them; other trials are mapped through `model`. Without a model and
/// without screen points the mapping is fitted from the session itself.
calib::ErrorGrid evaluate_session(const std::vector<GazeSample>& samples, const calib::ScreenGeometry& geometry,
                                  const std::optional<calib::CalibrationModel>& model,
                                  const FixationWindow& window = {});

/// Files written for a finished calibration sequence.
struct SessionRecord {
  std::string config_json;
  std::vector<GazeSample> samples;
  calib::CalibrationModel model;
  calib::ErrorGrid report;
};

/// Writes session.jsonl, model.json, report.csv and config.json into `dir`.
void save_session_record(const std::filesystem::path& dir, const SessionRecord& record);

}  // namespace gazegan::tracker
