#pragma once

#include <vector>

#include "tgssl/types.hpp"

namespace tgssl {

struct MatchConfig {
  double dist_threshold = 2.0;  // planar center distance, meters
  bool class_aware = true;
};

/// Greedy assignment of a frame's detections to its ground-truth boxes:
/// detections in descending score order each take the nearest unmatched
/// (same-class) GT within the threshold. Returns one GtLabel per detection,
/// in detection order. Residuals are (gt - det) over (x, y, z, w, l, h, yaw)
/// with the yaw difference wrapped into (-pi, pi].
/// Throws std::invalid_argument if the frame has no gt_boxes.
std::vector<GtLabel> match_to_gt(const Frame& frame,
                                 const MatchConfig& cfg = {});

/// Labels for every detection of a labeled video, flattened frame-major.
std::vector<GtLabel> match_video_to_gt(const Video& v,
                                       const MatchConfig& cfg = {});

}  // namespace tgssl
