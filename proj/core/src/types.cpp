#include "tgssl/types.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace tgssl {

double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

double planar_distance(const std::array<double, 3>& a,
                       const std::array<double, 3>& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  return std::sqrt(dx * dx + dy * dy);
}

double planar_range(const std::array<double, 3>& p) {
  return std::sqrt(p[0] * p[0] + p[1] * p[1]);
}

std::size_t Video::detection_count() const {
  std::size_t n = 0;
  for (const auto& f : frames) n += f.detections.size();
  return n;
}

void validate_box(const Box3D& b) {
  for (double c : b.center) {
    if (!std::isfinite(c)) throw std::invalid_argument("box center not finite");
  }
  for (double s : b.size) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw std::invalid_argument("box size must be positive and finite");
    }
  }
  if (!std::isfinite(b.yaw) || b.yaw <= -kPi || b.yaw > kPi) {
    throw std::invalid_argument("yaw must lie in (-pi, pi]");
  }
  for (double v : b.velocity) {
    if (!std::isfinite(v)) throw std::invalid_argument("velocity not finite");
  }
}

void validate_video(const Video& v) {
  if (v.frames.empty()) throw std::invalid_argument("video has no frames");
  double prev_ts = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.frames.size(); ++i) {
    const Frame& f = v.frames[i];
    if (f.frame_idx != static_cast<int>(i)) {
      throw std::invalid_argument("frame_idx " + std::to_string(f.frame_idx) +
                                  " does not match position " +
                                  std::to_string(i));
    }
    if (!std::isfinite(f.timestamp) || f.timestamp <= prev_ts) {
      throw std::invalid_argument("timestamps must be strictly increasing");
    }
    prev_ts = f.timestamp;
    for (const Detection& d : f.detections) {
      validate_box(d.box);
      if (!(d.score >= 0.0 && d.score <= 1.0)) {
        throw std::invalid_argument("detection score outside [0, 1]");
      }
      if (d.num_points < 0) {
        throw std::invalid_argument("num_points must be >= 0");
      }
      if (d.frame_idx != f.frame_idx) {
        throw std::invalid_argument("detection frame_idx mismatch");
      }
    }
    if (v.labeled && !f.gt_boxes.has_value()) {
      throw std::invalid_argument("labeled video frame missing gt_boxes");
    }
    if (f.gt_boxes) {
      for (const GtBox& g : *f.gt_boxes) validate_box(g.box);
    }
  }
}

}  // namespace tgssl
