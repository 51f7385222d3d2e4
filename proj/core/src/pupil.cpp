#include "gazegan/pupil.hpp"

#include <algorithm>
#include <numeric>

#include "gazegan/error.hpp"

namespace gazegan::pupil {

BinaryMask::BinaryMask(int width, int height, bool fill)
    : width_(width), height_(height),
      bits_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill ? 1 : 0) {}

std::size_t BinaryMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

BinaryMask BinaryMask::complement() const {
  BinaryMask out = *this;
  for (auto& b : out.bits_) b = b ? 0 : 1;
  return out;
}

bool BinaryMask::subset_of(const BinaryMask& other) const {
  if (other.width_ != width_ || other.height_ != height_) return false;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] && !other.bits_[i]) return false;
  }
  return true;
}

void MorphParams::validate() const {
  if (element < 1 || element % 2 == 0) {
    throw Error(ErrorKind::InvalidConfig, "structuring element side must be odd and >= 1");
  }
  if (erode_iterations < 0 || dilate_iterations < 0) {
    throw Error(ErrorKind::InvalidConfig, "morphology iterations must be >= 0");
  }
}

BinaryMask color_band_mask(const RgbImage& image, MarkerColor color, int tolerance) {
  if (tolerance < 0) throw Error(ErrorKind::InvalidConfig, "tolerance must be >= 0");
  const Rgb c = color.rgb();
  const int lo[3] = {std::max(0, c.r - tolerance), std::max(0, c.g - tolerance),
                     std::max(0, c.b - tolerance)};
  const int hi[3] = {std::min(255, c.r + tolerance), std::min(255, c.g + tolerance),
                     std::min(255, c.b + tolerance)};
  BinaryMask mask(image.width(), image.height());
  const auto px = image.bytes();
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const std::size_t i = (static_cast<std::size_t>(y) * image.width() + x) * 3;
      const bool in = px[i] >= lo[0] && px[i] <= hi[0] && px[i + 1] >= lo[1] &&
                      px[i + 1] <= hi[1] && px[i + 2] >= lo[2] && px[i + 2] <= hi[2];
      if (in) mask.set(x, y);
    }
  }
  return mask;
}

namespace {

// One pass of a square min (erode) or max (dilate) filter, separable into a
// horizontal and a vertical sweep.
BinaryMask square_filter(const BinaryMask& in, int side, bool is_erode, bool border_set) {
  const int r = side / 2;
  const int w = in.width();
  const int h = in.height();
  const bool outside = border_set;
  BinaryMask horiz(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool acc = is_erode;
      for (int dx = -r; dx <= r; ++dx) {
        const int xx = x + dx;
        const bool v = (xx >= 0 && xx < w) ? in.get(xx, y) : outside;
        if (is_erode) {
          if (!v) { acc = false; break; }
        } else if (v) {
          acc = true;
          break;
        }
      }
      horiz.set(x, y, acc);
    }
  }
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool acc = is_erode;
      for (int dy = -r; dy <= r; ++dy) {
        const int yy = y + dy;
        // Rows outside the frame consist entirely of border pixels.
        const bool v = (yy >= 0 && yy < h) ? horiz.get(x, yy) : outside;
        if (is_erode) {
          if (!v) { acc = false; break; }
        } else if (v) {
          acc = true;
          break;
        }
      }
      out.set(x, y, acc);
    }
  }
  return out;
}

}  // namespace

BinaryMask erode(const BinaryMask& mask, const MorphParams& params, Border border) {
  params.validate();
  BinaryMask cur = mask;
  for (int i = 0; i < params.erode_iterations; ++i) {
    cur = square_filter(cur, params.element, true, border == Border::Set);
  }
  return cur;
}

BinaryMask dilate(const BinaryMask& mask, const MorphParams& params, Border border) {
  params.validate();
  BinaryMask cur = mask;
  for (int i = 0; i < params.dilate_iterations; ++i) {
    cur = square_filter(cur, params.element, false, border == Border::Set);
  }
  return cur;
}

std::optional<PupilDetection> largest_blob_centroid(const BinaryMask& mask, int min_area) {
  const int w = mask.width();
  const int h = mask.height();
  std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
  std::vector<int> stack;

  struct Blob {
    long long area = 0;
    double sx = 0.0;
    double sy = 0.0;
  };
  std::vector<Blob> blobs;
  long long total = 0;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (!mask.get(x, y) || label[idx] >= 0) continue;
      const int id = static_cast<int>(blobs.size());
      Blob blob;
      label[idx] = id;
      stack.push_back(static_cast<int>(idx));
      while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        const int cx = cur % w;
        const int cy = cur / w;
        ++blob.area;
        blob.sx += cx;
        blob.sy += cy;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx;
            const int ny = cy + dy;
            if ((dx == 0 && dy == 0) || !mask.contains(nx, ny) || !mask.get(nx, ny)) continue;
            const std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
            if (label[nidx] >= 0) continue;
            label[nidx] = id;
            stack.push_back(static_cast<int>(nidx));
          }
        }
      }
      total += blob.area;
      blobs.push_back(blob);
    }
  }
  if (blobs.empty()) return std::nullopt;

  const Blob* best = nullptr;
  for (const auto& b : blobs) {
    if (!best || b.area > best->area) {
      best = &b;
      continue;
    }
    if (b.area == best->area) {
      const double by = b.sy / b.area, bx = b.sx / b.area;
      const double ey = best->sy / best->area, ex = best->sx / best->area;
      if (by < ey || (by == ey && bx < ex)) best = &b;
    }
  }
  if (best->area < min_area) return std::nullopt;
  PupilDetection det;
  det.cx = best->sx / static_cast<double>(best->area);
  det.cy = best->sy / static_cast<double>(best->area);
  det.area = static_cast<int>(best->area);
  det.confidence = static_cast<double>(best->area) / static_cast<double>(total);
  return det;
}

std::optional<PupilDetection> detect_pupil(const RgbImage& image, const DetectorParams& params) {
  BinaryMask mask = color_band_mask(image, params.color, params.tolerance);
  mask = erode(mask, params.morph);
  mask = dilate(mask, params.morph);
  return largest_blob_centroid(mask, params.min_area);
}

}  // namespace gazegan::pupil
