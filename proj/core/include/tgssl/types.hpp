#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tgssl {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

/// Wrap an angle into (-pi, pi].
double wrap_angle(double a);

/// Oriented 3D box on the ground plane with an estimated planar velocity.
struct Box3D {
  std::array<double, 3> center{0, 0, 0};   // meters
  std::array<double, 3> size{1, 1, 1};     // (w, l, h), meters
  double yaw = 0.0;                        // radians in (-pi, pi]
  std::array<double, 2> velocity{0, 0};    // (vx, vy), m/s

  bool operator==(const Box3D&) const = default;
};

double planar_distance(const std::array<double, 3>& a,
                       const std::array<double, 3>& b);
double planar_range(const std::array<double, 3>& p);  // distance to origin

/// One candidate detection: a scored box plus the per-box detector outputs
/// used as node features downstream.
struct Detection {
  Box3D box;
  double score = 0.0;    // in [0, 1]
  int class_id = 0;
  int num_points = 0;    // simulated LiDAR returns inside the box, >= 0
  int det_id = 0;        // unique within a video
  int frame_idx = 0;

  bool operator==(const Detection&) const = default;
};

struct GtBox {
  Box3D box;
  int class_id = 0;
  int track_id = 0;

  bool operator==(const GtBox&) const = default;
};

struct Frame {
  int frame_idx = 0;
  double timestamp = 0.0;  // seconds, strictly increasing across a video
  std::vector<Detection> detections;
  std::optional<std::vector<GtBox>> gt_boxes;  // present iff video labeled

  bool operator==(const Frame&) const = default;
};

struct Video {
  std::string video_id;
  bool labeled = false;
  std::vector<Frame> frames;

  /// In-memory guard: temporal refinement overwrites detection scores and is
  /// meaningful only once per video. Not serialized.
  bool refined = false;

  bool operator==(const Video& o) const {
    return video_id == o.video_id && labeled == o.labeled && frames == o.frames;
  }

  std::size_t detection_count() const;
};

/// Per-detection supervision derived from ground truth: binary node label
/// plus the 7-dim residual (x, y, z, w, l, h, yaw) to the matched box.
struct GtLabel {
  int label = 0;  // 1 iff matched
  std::optional<int> matched_gt_track;
  std::array<double, 7> residuals{0, 0, 0, 0, 0, 0, 0};

  bool operator==(const GtLabel&) const = default;
};

/// Throws std::invalid_argument on any violated invariant (non-finite
/// values, non-positive sizes, score range, timestamp order, frame_idx /
/// position mismatch, labeled video missing gt_boxes).
void validate_video(const Video& v);
void validate_box(const Box3D& b);

}  // namespace tgssl
