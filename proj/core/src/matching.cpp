#include "tgssl/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace tgssl {

std::vector<GtLabel> match_to_gt(const Frame& frame, const MatchConfig& cfg) {
  if (!frame.gt_boxes.has_value()) {
    throw std::invalid_argument("match_to_gt: frame has no ground truth");
  }
  const auto& gts = *frame.gt_boxes;
  const auto& dets = frame.detections;

  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });

  std::vector<bool> gt_taken(gts.size(), false);
  std::vector<GtLabel> labels(dets.size());
  for (std::size_t oi : order) {
    const Detection& d = dets[oi];
    int best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      if (gt_taken[gi]) continue;
      if (cfg.class_aware && gts[gi].class_id != d.class_id) continue;
      const double dist = planar_distance(d.box.center, gts[gi].box.center);
      if (dist > cfg.dist_threshold) continue;
      if (best < 0 || dist < best_dist) {
        best = static_cast<int>(gi);
        best_dist = dist;
      }
    }
    GtLabel& lab = labels[oi];
    if (best >= 0) {
      gt_taken[best] = true;
      const Box3D& g = gts[best].box;
      const Box3D& b = d.box;
      lab.label = 1;
      lab.matched_gt_track = gts[best].track_id;
      lab.residuals = {g.center[0] - b.center[0], g.center[1] - b.center[1],
                       g.center[2] - b.center[2], g.size[0] - b.size[0],
                       g.size[1] - b.size[1],     g.size[2] - b.size[2],
                       wrap_angle(g.yaw - b.yaw)};
    }
  }
  return labels;
}

std::vector<GtLabel> match_video_to_gt(const Video& v, const MatchConfig& cfg) {
  std::vector<GtLabel> out;
  out.reserve(v.detection_count());
  for (const Frame& f : v.frames) {
    auto labels = match_to_gt(f, cfg);
    out.insert(out.end(), labels.begin(), labels.end());
  }
  return out;
}

}  // namespace tgssl
