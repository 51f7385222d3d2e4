#include "gazegan/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "gazegan/error.hpp"
#include "json_util.hpp"

namespace gazegan::calib {

using nlohmann::json;

void ScreenGeometry::validate() const {
  if (!(diagonal_mm > 0) || horizontal_px < 1 || vertical_px < 1 || !(viewing_distance_mm > 0)) {
    throw Error(ErrorKind::InvalidConfig, "screen geometry needs positive sizes");
  }
}

double ScreenGeometry::physical_width_mm() const {
  const double h = horizontal_px;
  const double v = vertical_px;
  return diagonal_mm * h / std::sqrt(h * h + v * v);
}

double ScreenGeometry::physical_height_mm() const {
  const double h = horizontal_px;
  const double v = vertical_px;
  return diagonal_mm * v / std::sqrt(h * h + v * v);
}

double ScreenGeometry::pixel_pitch() const { return physical_width_mm() / horizontal_px; }
double ScreenGeometry::vertical_pixel_pitch() const { return physical_height_mm() / vertical_px; }

double pixel_pitch(const ScreenGeometry& geometry) { return geometry.pixel_pitch(); }

double pixels_to_degrees(double offset_px, const ScreenGeometry& geometry) {
  const double mm = std::abs(offset_px) * geometry.pixel_pitch();
  return std::atan(mm / geometry.viewing_distance_mm) * 180.0 / std::numbers::pi;
}

double pixels_to_degrees(Point2 offset_px, const ScreenGeometry& geometry) {
  return pixels_to_degrees(std::hypot(offset_px.x, offset_px.y), geometry);
}

int square_side_px(const ScreenGeometry& geometry, double area_mm2) {
  if (!(area_mm2 > 0)) throw Error(ErrorKind::InvalidConfig, "target area must be positive");
  return static_cast<int>(std::lround(std::sqrt(area_mm2) / geometry.pixel_pitch()));
}

namespace {

Rgb bright_color(int i, int n) {
  // Fully saturated hue wheel.
  const double h = 6.0 * i / n;
  const int sector = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const auto u = [](double v) { return static_cast<std::uint8_t>(std::lround(255.0 * v)); };
  switch (sector) {
    case 0: return {255, u(f), 0};
    case 1: return {u(1 - f), 255, 0};
    case 2: return {0, 255, u(f)};
    case 3: return {0, u(1 - f), 255};
    case 4: return {u(f), 0, 255};
    default: return {255, 0, u(1 - f)};
  }
}

}  // namespace

std::vector<CalibrationTarget> calibration_targets(const ScreenGeometry& geometry, double dwell_seconds,
                                                   double area_mm2) {
  geometry.validate();
  if (!(dwell_seconds > 0)) throw Error(ErrorKind::InvalidConfig, "dwell must be positive");
  const int side = square_side_px(geometry, area_mm2);
  if (side * kGridCols > geometry.horizontal_px || side * kGridRows > geometry.vertical_px) {
    throw Error(ErrorKind::GridOverflow, "calibration squares of " + std::to_string(side) +
                                             " px do not fit a 4x5 grid on the screen");
  }
  const double gap_x = static_cast<double>(geometry.horizontal_px - side * kGridCols) / (kGridCols + 1);
  const double gap_y = static_cast<double>(geometry.vertical_px - side * kGridRows) / (kGridRows + 1);
  std::vector<CalibrationTarget> out;
  for (int r = 1; r <= kGridRows; ++r) {
    for (int c = 1; c <= kGridCols; ++c) {
      CalibrationTarget t;
      t.index = (r - 1) * kGridCols + c;
      t.row = r;
      t.col = c;
      t.center = {gap_x * c + side * (c - 0.5), gap_y * r + side * (r - 0.5)};
      t.square_side = side;
      t.color = bright_color(t.index - 1, kTargetCount);
      t.dwell_seconds = dwell_seconds;
      out.push_back(t);
    }
  }
  return out;
}

namespace {

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lo + hi);
}

template <typename Get>
Point2 aggregate(const std::vector<GazeSample>& samples, double dwell_seconds, double settle_seconds,
                 std::optional<std::int64_t> onset_ms, Get get) {
  if (samples.empty()) throw Error(ErrorKind::InsufficientSamples, "no samples for fixation");
  const std::int64_t onset = onset_ms.value_or(samples.front().timestamp_ms);
  const double from = static_cast<double>(onset) + settle_seconds * 1000.0;
  const double to = static_cast<double>(onset) + dwell_seconds * 1000.0;
  std::vector<double> xs, ys;
  for (const auto& s : samples) {
    const double t = static_cast<double>(s.timestamp_ms);
    if (t < from || t > to) continue;
    const auto p = get(s);
    if (!p) continue;
    xs.push_back(p->x);
    ys.push_back(p->y);
  }
  if (xs.size() < static_cast<std::size_t>(kMinFixationSamples)) {
    throw Error(ErrorKind::InsufficientSamples,
                "fixation has " + std::to_string(xs.size()) + " usable samples after settling, need " +
                    std::to_string(kMinFixationSamples));
  }
  return {median(std::move(xs)), median(std::move(ys))};
}

}  // namespace

Point2 aggregate_fixation(const std::vector<GazeSample>& samples, double dwell_seconds, double settle_seconds,
                          std::optional<std::int64_t> onset_ms) {
  return aggregate(samples, dwell_seconds, settle_seconds, onset_ms,
                   [](const GazeSample& s) { return std::optional<Point2>(Point2{s.px, s.py}); });
}

Point2 aggregate_screen_fixation(const std::vector<GazeSample>& samples, double dwell_seconds,
                                 double settle_seconds, std::optional<std::int64_t> onset_ms) {
  return aggregate(samples, dwell_seconds, settle_seconds, onset_ms,
                   [](const GazeSample& s) { return s.screen; });
}

std::array<double, 6> quadratic_basis(double px, double py) {
  return {1.0, px, py, px * py, px * px, py * py};
}

CalibrationModel fit_mapping(const std::vector<Point2>& pupil_points, const std::vector<Point2>& screen_points,
                             const ScreenGeometry& geometry) {
  if (pupil_points.size() != screen_points.size()) {
    throw Error(ErrorKind::ShapeMismatch, "pupil and screen point counts differ");
  }
  const auto n = static_cast<Eigen::Index>(pupil_points.size());
  if (n < 6) {
    throw Error(ErrorKind::TooFewPoints, "quadratic fit needs at least 6 points, got " + std::to_string(n));
  }
  Eigen::MatrixXd a(n, 6);
  Eigen::MatrixXd b(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = quadratic_basis(pupil_points[i].x, pupil_points[i].y);
    for (int j = 0; j < 6; ++j) a(i, j) = row[j];
    b(i, 0) = screen_points[i].x;
    b(i, 1) = screen_points[i].y;
  }
  // Column scaling keeps the squared terms from dominating the pivoting.
  Eigen::VectorXd scale(6);
  for (int j = 0; j < 6; ++j) {
    const double m = a.col(j).cwiseAbs().maxCoeff();
    scale(j) = m > 0 ? m : 1.0;
    a.col(j) /= scale(j);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < 6) {
    throw Error(ErrorKind::RankDeficient, "calibration points do not determine a quadratic mapping");
  }
  const Eigen::MatrixXd x = qr.solve(b);
  CalibrationModel m;
  m.geometry = geometry;
  m.point_count = static_cast<int>(n);
  for (int j = 0; j < 6; ++j) {
    m.coef_x[j] = x(j, 0) / scale(j);
    m.coef_y[j] = x(j, 1) / scale(j);
  }
  double sx = 0.0, sy = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const MappedGaze g = map_gaze(m, pupil_points[i]);
    const double dx = g.screen.x - screen_points[i].x;
    const double dy = g.screen.y - screen_points[i].y;
    sx += dx * dx;
    sy += dy * dy;
  }
  m.residual_rms_x = std::sqrt(sx / n);
  m.residual_rms_y = std::sqrt(sy / n);
  m.residual_rms = std::sqrt((sx + sy) / n);
  return m;
}

MappedGaze map_gaze(const CalibrationModel& model, Point2 pupil) {
  const auto basis = quadratic_basis(pupil.x, pupil.y);
  MappedGaze g;
  for (int j = 0; j < 6; ++j) {
    g.screen.x += model.coef_x[j] * basis[j];
    g.screen.y += model.coef_y[j] * basis[j];
  }
  g.on_screen = g.screen.x >= 0 && g.screen.y >= 0 && g.screen.x < model.geometry.horizontal_px &&
                g.screen.y < model.geometry.vertical_px;
  return g;
}

ErrorGrid ErrorGrid::from_cells(const std::array<double, kTargetCount>& cells) {
  ErrorGrid g;
  g.cells_ = cells;
  double sum = 0.0;
  for (double c : cells) sum += c;
  g.mean_ = sum / kTargetCount;
  return g;
}

std::array<int, kTargetCount> ErrorGrid::rounded_cells() const {
  std::array<int, kTargetCount> out{};
  for (std::size_t i = 0; i < cells_.size(); ++i) out[i] = static_cast<int>(std::floor(cells_[i] + 0.5));
  return out;
}

ErrorGrid evaluate_grid(const std::vector<std::vector<Point2>>& trials,
                        const std::vector<CalibrationTarget>& targets, const ScreenGeometry& geometry) {
  if (targets.size() != static_cast<std::size_t>(kTargetCount)) {
    throw Error(ErrorKind::MissingTarget, "expected 20 targets");
  }
  std::array<double, kTargetCount> cells{};
  for (int i = 0; i < kTargetCount; ++i) {
    if (static_cast<std::size_t>(i) >= trials.size() || trials[i].empty()) {
      throw Error(ErrorKind::MissingTarget, "target " + std::to_string(i + 1) + " has no trials");
    }
    const Point2 c = targets[i].center;
    double sum = 0.0;
    for (const Point2& p : trials[i]) sum += pixels_to_degrees(Point2{p.x - c.x, p.y - c.y}, geometry);
    cells[i] = sum / static_cast<double>(trials[i].size());
  }
  return ErrorGrid::from_cells(cells);
}

std::string format_degrees(double degrees) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", degrees);
  return buf;
}

std::string error_report_csv(const ErrorGrid& grid) {
  std::ostringstream os;
  os << "position";
  for (int c = 1; c <= kGridCols; ++c) os << ',' << c;
  os << '\n';
  char buf[32];
  for (int r = 1; r <= kGridRows; ++r) {
    os << r;
    for (int c = 1; c <= kGridCols; ++c) {
      std::snprintf(buf, sizeof(buf), "%.6f", grid.at(r, c));
      os << ',' << buf;
    }
    os << '\n';
  }
  os << "mean_deg," << format_degrees(grid.overall_mean()) << '\n';
  return os.str();
}

std::string render_error_table(const ErrorGrid& grid) {
  const auto rounded = grid.rounded_cells();
  std::ostringstream os;
  os << "position\t1\t2\t3\t4\t5\n";
  for (int r = 1; r <= kGridRows; ++r) {
    os << r;
    for (int c = 1; c <= kGridCols; ++c) os << '\t' << rounded[static_cast<std::size_t>((r - 1) * kGridCols + c - 1)];
    os << '\n';
  }
  os << "mean_deg=" << format_degrees(grid.overall_mean()) << '\n';
  return os.str();
}

namespace {

json geometry_json(const ScreenGeometry& g) {
  return json{{"diagonal_mm", g.diagonal_mm},
              {"horizontal_px", g.horizontal_px},
              {"vertical_px", g.vertical_px},
              {"viewing_distance_mm", g.viewing_distance_mm}};
}

const char* const kGeometryKeys[] = {"diagonal_mm", "horizontal_px", "vertical_px", "viewing_distance_mm"};

ScreenGeometry geometry_parse(const json& j) {
  detail::reject_unknown_keys(j, kGeometryKeys, "screen geometry");
  ScreenGeometry g;
  g.diagonal_mm = j.value("diagonal_mm", g.diagonal_mm);
  g.horizontal_px = j.value("horizontal_px", g.horizontal_px);
  g.vertical_px = j.value("vertical_px", g.vertical_px);
  g.viewing_distance_mm = j.value("viewing_distance_mm", g.viewing_distance_mm);
  g.validate();
  return g;
}

}  // namespace

std::string geometry_to_json(const ScreenGeometry& geometry) { return geometry_json(geometry).dump(2); }

ScreenGeometry geometry_from_json(const std::string& text) {
  try {
    return geometry_parse(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("geometry JSON: ") + e.what());
  }
}

std::string model_to_json(const CalibrationModel& m) {
  json j{{"basis", {"1", "px", "py", "px*py", "px^2", "py^2"}},
         {"coef_x", m.coef_x},
         {"coef_y", m.coef_y},
         {"residual_rms_x", m.residual_rms_x},
         {"residual_rms_y", m.residual_rms_y},
         {"residual_rms", m.residual_rms},
         {"point_count", m.point_count},
         {"geometry", geometry_json(m.geometry)}};
  return j.dump(2) + "\n";
}

CalibrationModel model_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    CalibrationModel m;
    m.coef_x = j.at("coef_x").get<std::array<double, 6>>();
    m.coef_y = j.at("coef_y").get<std::array<double, 6>>();
    m.residual_rms_x = j.value("residual_rms_x", 0.0);
    m.residual_rms_y = j.value("residual_rms_y", 0.0);
    m.residual_rms = j.value("residual_rms", 0.0);
    m.point_count = j.value("point_count", 0);
    if (j.contains("geometry")) m.geometry = geometry_parse(j.at("geometry"));
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::DataError, std::string("calibration model JSON: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const CalibrationModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << model_to_json(model);
}

CalibrationModel load_model(const std::filesystem::path& path) {
  return model_from_json(detail::read_file(path, ErrorKind::MissingModelFile));
}

}  // namespace gazegan::calib
