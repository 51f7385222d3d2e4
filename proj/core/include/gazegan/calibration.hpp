#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gazegan/image.hpp"

namespace gazegan::calib {

inline constexpr int kGridRows = 4;
inline constexpr int kGridCols = 5;
inline constexpr int kTargetCount = kGridRows * kGridCols;
inline constexpr double kTargetAreaMm2 = 780.0;  // 7.8 cm^2
inline constexpr double kDefaultDwellSeconds = 5.0;
inline constexpr double kDefaultSettleSeconds = 0.5;
inline constexpr int kMinFixationSamples = 5;

struct ScreenGeometry {
  double diagonal_mm = 558.8;
  int horizontal_px = 1366;
  int vertical_px = 768;
  double viewing_distance_mm = 500.0;

  /// Throws InvalidConfig for non-positive sizes or non-square pixels.
  void validate() const;
  double physical_width_mm() const;
  double physical_height_mm() const;
  double pixel_pitch() const;           // mm per px, horizontal
  double vertical_pixel_pitch() const;  // mm per px

  friend bool operator==(const ScreenGeometry&, const ScreenGeometry&) = default;
};

double pixel_pitch(const ScreenGeometry& geometry);

/// atan(|offset| * pitch / viewing distance), in degrees.
double pixels_to_degrees(double offset_px, const ScreenGeometry& geometry);
double pixels_to_degrees(Point2 offset_px, const ScreenGeometry& geometry);

/// Side in pixels of a square of `area_mm2` at the geometry's pitch.
int square_side_px(const ScreenGeometry& geometry, double area_mm2 = kTargetAreaMm2);

struct CalibrationTarget {
  int index = 0;  // 1..20, row-major
  int row = 0;    // 1..4
  int col = 0;    // 1..5
  Point2 center;
  int square_side = 0;
  Rgb color;
  double dwell_seconds = kDefaultDwellSeconds;
};

/// 4x5 row-major layout with equal gaps between squares and screen edges.
/// Throws GridOverflow when the squares do not fit.
std::vector<CalibrationTarget> calibration_targets(const ScreenGeometry& geometry,
                                                   double dwell_seconds = kDefaultDwellSeconds,
                                                   double area_mm2 = kTargetAreaMm2);

struct GazeSample {
  std::int64_t timestamp_ms = 0;
  double px = 0.0;
  double py = 0.0;
  std::optional<int> target_index;
  double confidence = 1.0;
  /// Screen point mapped live, when a model was active while recording.
  std::optional<Point2> screen;

  friend bool operator==(const GazeSample&, const GazeSample&) = default;
};

/// Drops samples inside the settle window after onset (first sample when
/// `onset_ms` is empty) and beyond the dwell, then returns the
/// coordinate-wise median of the pupil positions.
Point2 aggregate_fixation(const std::vector<GazeSample>& samples,
                          double dwell_seconds = kDefaultDwellSeconds,
                          double settle_seconds = kDefaultSettleSeconds,
                          std::optional<std::int64_t> onset_ms = std::nullopt);

/// Same windowing, over the recorded screen points.
Point2 aggregate_screen_fixation(const std::vector<GazeSample>& samples,
                                 double dwell_seconds = kDefaultDwellSeconds,
                                 double settle_seconds = kDefaultSettleSeconds,
                                 std::optional<std::int64_t> onset_ms = std::nullopt);

/// Coefficients over the basis [1, px, py, px*py, px^2, py^2].
struct CalibrationModel {
  std::array<double, 6> coef_x{};
  std::array<double, 6> coef_y{};
  double residual_rms_x = 0.0;
  double residual_rms_y = 0.0;
  /// Root mean squared Euclidean residual in screen pixels.
  double residual_rms = 0.0;
  int point_count = 0;
  ScreenGeometry geometry;

  friend bool operator==(const CalibrationModel&, const CalibrationModel&) = default;
};

std::array<double, 6> quadratic_basis(double px, double py);

CalibrationModel fit_mapping(const std::vector<Point2>& pupil_points, const std::vector<Point2>& screen_points,
                             const ScreenGeometry& geometry = {});

struct MappedGaze {
  Point2 screen;
  bool on_screen = false;
};

MappedGaze map_gaze(const CalibrationModel& model, Point2 pupil);

class ErrorGrid {
 public:
  ErrorGrid() = default;
  /// Row-major cells; the overall mean is their arithmetic mean.
  static ErrorGrid from_cells(const std::array<double, kTargetCount>& cells);

  double at(int row, int col) const { return cells_[static_cast<std::size_t>((row - 1) * kGridCols + (col - 1))]; }
  const std::array<double, kTargetCount>& cells() const noexcept { return cells_; }
  double overall_mean() const noexcept { return mean_; }
  /// Cells rounded half-up to integers, as in a printed table.
  std::array<int, kTargetCount> rounded_cells() const;

  friend bool operator==(const ErrorGrid&, const ErrorGrid&) = default;

 private:
  std::array<double, kTargetCount> cells_{};
  double mean_ = 0.0;
};

/// `trials[i]` holds screen-space fixation estimates for target i + 1.
/// Throws MissingTarget when any target has no trials.
ErrorGrid evaluate_grid(const std::vector<std::vector<Point2>>& trials,
                        const std::vector<CalibrationTarget>& targets, const ScreenGeometry& geometry);

/// Short form of the overall mean, e.g. "1.7".
std::string format_degrees(double degrees);

/// Header `position,1,2,3,4,5`, four grid rows, then `mean_deg,<value>`.
std::string error_report_csv(const ErrorGrid& grid);
/// Human-readable grid with rounded cells and the overall mean.
std::string render_error_table(const ErrorGrid& grid);

std::string model_to_json(const CalibrationModel& model);
CalibrationModel model_from_json(const std::string& text);
void save_model(const std::filesystem::path& path, const CalibrationModel& model);
CalibrationModel load_model(const std::filesystem::path& path);

std::string geometry_to_json(const ScreenGeometry& geometry);
ScreenGeometry geometry_from_json(const std::string& text);

}  // namespace gazegan::calib
