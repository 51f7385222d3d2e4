#include "gazegan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "gazegan/error.hpp"
#include "gazegan/image_io.hpp"

namespace gazegan::dataset {

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

std::optional<RegionBox> detect_face(const Frame& frame, FaceDetector& detector) {
  const auto faces = detector.detect(frame);
  std::optional<RegionBox> best;
  for (const auto& f : faces) {
    if (f.area() <= 0) continue;
    if (!best || f.area() > best->area()) best = f;
  }
  return best;
}

LandmarkSet locate_eye_landmarks(const Frame& frame, const RegionBox& face,
                                 LandmarkPredictor& predictor) {
  const int w = frame.pixels.width();
  const int h = frame.pixels.height();
  if (face.area() <= 0 || face.x0 < 0 || face.y0 < 0 || face.x1 > w || face.y1 > h) {
    throw Error(ErrorKind::LandmarkFailure, "face box lies outside the frame");
  }
  auto points = predictor.predict(frame, face);
  if (points.size() < static_cast<std::size_t>(kLandmarkCount)) {
    throw Error(ErrorKind::LandmarkFailure,
                "predictor returned " + std::to_string(points.size()) + " points");
  }
  points.resize(kLandmarkCount);
  return LandmarkSet{std::move(points)};
}

RegionBox eye_region_box(const LandmarkSet& landmarks, int pad, int frame_width, int frame_height) {
  if (landmarks.points.size() < static_cast<std::size_t>(kLandmarkCount)) {
    throw Error(ErrorKind::LandmarkFailure, "eye region needs 68 landmarks");
  }
  double min_x = landmarks.points[kEyeFirstLandmark].x;
  double max_x = min_x;
  double min_y = landmarks.points[kEyeFirstLandmark].y;
  double max_y = min_y;
  for (int i = kEyeFirstLandmark; i <= kEyeLastLandmark; ++i) {
    const Point2& p = landmarks.points[i];
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  RegionBox box;
  box.x0 = std::clamp(static_cast<int>(std::floor(min_x - pad)), 0, frame_width);
  box.y0 = std::clamp(static_cast<int>(std::floor(min_y - pad)), 0, frame_height);
  box.x1 = std::clamp(static_cast<int>(std::ceil(max_x + pad)), 0, frame_width);
  box.y1 = std::clamp(static_cast<int>(std::ceil(max_y + pad)), 0, frame_height);
  if (box.area() <= 0) {
    throw Error(ErrorKind::DegenerateRegion, "eye region has zero area after clamping");
  }
  return box;
}

RgbImage resize_bilinear(const RgbImage& src, int width, int height) {
  RgbImage dst(width, height);
  const int sw = src.width();
  const int sh = src.height();
  const double scale_x = static_cast<double>(sw) / width;
  const double scale_y = static_cast<double>(sh) / height;
  std::vector<int> x0(width), x1(width);
  std::vector<double> fx(width);
  for (int x = 0; x < width; ++x) {
    const double sx = std::clamp((x + 0.5) * scale_x - 0.5, 0.0, static_cast<double>(sw - 1));
    x0[x] = static_cast<int>(std::floor(sx));
    x1[x] = std::min(x0[x] + 1, sw - 1);
    fx[x] = sx - x0[x];
  }
  for (int y = 0; y < height; ++y) {
    const double sy = std::clamp((y + 0.5) * scale_y - 0.5, 0.0, static_cast<double>(sh - 1));
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, sh - 1);
    const double fy = sy - y0;
    for (int x = 0; x < width; ++x) {
      std::uint8_t out[3];
      for (int c = 0; c < 3; ++c) {
        const double top = src.channel(x0[x], y0, c) * (1.0 - fx[x]) + src.channel(x1[x], y0, c) * fx[x];
        const double bot = src.channel(x0[x], y1, c) * (1.0 - fx[x]) + src.channel(x1[x], y1, c) * fx[x];
        const double v = top * (1.0 - fy) + bot * fy;
        out[c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
      dst.set(x, y, {out[0], out[1], out[2]});
    }
  }
  return dst;
}

EyeImage crop_resize(const Frame& frame, const RegionBox& box) {
  const RgbImage& img = frame.pixels;
  if (box.area() <= 0 || box.x0 < 0 || box.y0 < 0 || box.x1 > img.width() || box.y1 > img.height()) {
    throw Error(ErrorKind::DegenerateRegion, "crop box is empty or outside the frame");
  }
  RgbImage crop(box.width(), box.height());
  for (int y = 0; y < box.height(); ++y) {
    for (int x = 0; x < box.width(); ++x) crop.set(x, y, img.at(box.x0 + x, box.y0 + y));
  }
  return EyeImage(resize_bilinear(crop, kEyeWidth, kEyeHeight), Provenance::Raw);
}

EyeImage paint_pupil(const EyeImage& image, const PupilLabel& label, MarkerColor color) {
  if (!(label.radius >= 1.0)) {
    throw Error(ErrorKind::InvalidLabel, "pupil radius must be >= 1");
  }
  const int cx = round_half_up(label.cx);
  const int cy = round_half_up(label.cy);
  const double r2 = label.radius * label.radius;
  // Closest canvas pixel to the center decides whether the disk touches it.
  const int nx = std::clamp(cx, 0, kEyeWidth - 1);
  const int ny = std::clamp(cy, 0, kEyeHeight - 1);
  const double d2 = static_cast<double>(nx - cx) * (nx - cx) + static_cast<double>(ny - cy) * (ny - cy);
  if (d2 > r2) {
    throw Error(ErrorKind::InvalidLabel, "pupil disk misses the canvas");
  }
  EyeImage out = image;
  const int reach = static_cast<int>(std::ceil(label.radius));
  const Rgb rgb = color.rgb();
  for (int y = std::max(0, cy - reach); y <= std::min(kEyeHeight - 1, cy + reach); ++y) {
    for (int x = std::max(0, cx - reach); x <= std::min(kEyeWidth - 1, cx + reach); ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      if (dx * dx + dy * dy <= r2) out.set(x, y, rgb);
    }
  }
  out.set_provenance(Provenance::Labeled);
  return out;
}

// ------------------------------------------------------------------ CSV

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

bool parse_int(const std::string& s, int& out) {
  double v = 0.0;
  if (!parse_number(s, v) || v != std::floor(v)) return false;
  out = static_cast<int>(v);
  return true;
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create directory " + p.string());
}

}  // namespace

std::vector<LabelRow> read_labels(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw Error(ErrorKind::MissingImage, "cannot open labels table " + csv.string());
  std::string line;
  std::getline(in, line);
  const auto header = split_csv(line);
  if (header != std::vector<std::string>{"filename", "cx", "cy", "radius"}) {
    throw Error(ErrorKind::MalformedRow, "labels header must be filename,cx,cy,radius");
  }
  std::vector<LabelRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    LabelRow row;
    if (f.size() != 4 || f[0].empty() || !parse_int(f[1], row.cx) || !parse_int(f[2], row.cy) ||
        !parse_int(f[3], row.radius)) {
      throw Error(ErrorKind::MalformedRow, csv.string() + ":" + std::to_string(line_no));
    }
    row.filename = f[0];
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_labels(const fs::path& csv, const std::vector<LabelRow>& rows) {
  std::ofstream out(csv, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + csv.string());
  out << "filename,cx,cy,radius\n";
  for (const auto& r : rows) {
    out << r.filename << ',' << r.cx << ',' << r.cy << ',' << r.radius << '\n';
  }
}

ConversionResult convert_annotated_dataset(const fs::path& image_dir, const fs::path& coords_table,
                                           const fs::path& out_root, SourceSize source_size,
                                           int radius, MarkerColor color) {
  if (source_size.width < 1 || source_size.height < 1) {
    throw Error(ErrorKind::InvalidConfig, "source size must be positive");
  }
  std::ifstream in(coords_table);
  if (!in) throw Error(ErrorKind::MissingImage, "cannot open coordinate table " + coords_table.string());
  std::string line;
  std::getline(in, line);
  if (split_csv(line) != std::vector<std::string>{"filename", "px", "py"}) {
    throw Error(ErrorKind::MalformedRow, "coordinate table header must be filename,px,py");
  }

  ConversionResult result;
  result.pair.root = out_root;
  ensure_dir(result.pair.dir_a());
  ensure_dir(result.pair.dir_b());
  std::set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    double px = 0.0;
    double py = 0.0;
    if (f.size() != 3 || f[0].empty() || !parse_number(f[1], px) || !parse_number(f[2], py)) {
      result.errors.push_back({line_no, f.empty() ? "" : f[0], "MalformedRow", "unparseable row"});
      continue;
    }
    const fs::path src = image_dir / f[0];
    const std::string out_name = fs::path(f[0]).stem().string() + ".png";
    try {
      if (!fs::exists(src)) throw Error(ErrorKind::MissingImage, src.string());
      if (seen.count(out_name)) throw Error(ErrorKind::DuplicateFilename, out_name);
      RgbImage img = io::read_image(src);
      if (img.width() != source_size.width || img.height() != source_size.height) {
        throw Error(ErrorKind::MalformedRow, "image is " + std::to_string(img.width()) + "x" +
                                                 std::to_string(img.height()) +
                                                 ", table expects source size " +
                                                 std::to_string(source_size.width) + "x" +
                                                 std::to_string(source_size.height));
      }
      const LabelRow label{out_name,
                           round_half_up(px * kEyeWidth / source_size.width),
                           round_half_up(py * kEyeHeight / source_size.height), radius};
      EyeImage raw(resize_bilinear(img, kEyeWidth, kEyeHeight));
      EyeImage painted =
          paint_pupil(raw, {static_cast<double>(label.cx), static_cast<double>(label.cy),
                            static_cast<double>(label.radius)},
                      color);
      io::write_png(result.pair.dir_a() / out_name, raw.pixels());
      io::write_png(result.pair.dir_b() / out_name, painted.pixels());
      seen.insert(out_name);
      result.pair.domain_a.push_back(out_name);
      result.pair.domain_b.push_back(out_name);
      result.pair.labels.push_back(label);
    } catch (const Error& e) {
      result.errors.push_back({line_no, f[0], std::string(to_string(e.kind())), e.what()});
    }
  }
  write_labels(result.pair.labels_path(), result.pair.labels);
  return result;
}

DatasetPair build_domain_pair(const std::vector<NamedEyeImage>& raw_images,
                              const std::vector<LabelRow>& labels, const fs::path& out_root,
                              MarkerColor color) {
  std::map<std::string, const EyeImage*> by_name;
  for (const auto& r : raw_images) {
    if (!by_name.emplace(r.filename, &r.image).second) {
      throw Error(ErrorKind::DuplicateFilename, r.filename);
    }
  }
  std::set<std::string> labeled;
  for (const auto& l : labels) {
    if (!labeled.insert(l.filename).second) throw Error(ErrorKind::DuplicateFilename, l.filename);
    if (!by_name.count(l.filename)) throw Error(ErrorKind::MissingImage, l.filename);
  }
  // Validate every label before anything touches the disk.
  std::vector<EyeImage> painted;
  painted.reserve(labels.size());
  for (const auto& l : labels) {
    painted.push_back(paint_pupil(*by_name.at(l.filename),
                                  {static_cast<double>(l.cx), static_cast<double>(l.cy),
                                   static_cast<double>(l.radius)},
                                  color));
  }

  DatasetPair pair;
  pair.root = out_root;
  ensure_dir(pair.dir_a());
  ensure_dir(pair.dir_b());
  for (const auto& r : raw_images) {
    io::write_png(pair.dir_a() / r.filename, r.image.pixels());
    pair.domain_a.push_back(r.filename);
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    io::write_png(pair.dir_b() / labels[i].filename, painted[i].pixels());
    pair.domain_b.push_back(labels[i].filename);
  }
  pair.labels = labels;
  write_labels(pair.labels_path(), pair.labels);
  return pair;
}

DatasetPair load_dataset(const fs::path& root) {
  DatasetPair pair;
  pair.root = root;
  if (!fs::is_directory(pair.dir_a()) || !fs::is_directory(pair.dir_b())) {
    throw Error(ErrorKind::DataError, "dataset layout missing under " + root.string());
  }
  auto list = [](const fs::path& dir) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".png") {
        names.push_back(e.path().filename().string());
      }
    }
    std::sort(names.begin(), names.end());
    return names;
  };
  pair.domain_a = list(pair.dir_a());
  pair.domain_b = list(pair.dir_b());
  if (fs::exists(pair.labels_path())) pair.labels = read_labels(pair.labels_path());
  std::set<std::string> labeled;
  for (const auto& l : pair.labels) labeled.insert(l.filename);
  for (const auto& b : pair.domain_b) {
    if (!labeled.count(b)) throw Error(ErrorKind::DataError, "no label row for trainB/" + b);
  }
  return pair;
}

}  // namespace gazegan::dataset
