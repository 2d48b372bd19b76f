#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "tgssl/matching.hpp"
#include "tgssl/types.hpp"

namespace tgssl {

/// Node features: (score, normalized point count, w, l, h).
using NodeFeature = std::array<double, 5>;
/// Edge features for src -> dst: (distance between the source's projected
/// center and the target's center; dst - src size difference per axis;
/// wrapped yaw difference).
using EdgeFeature = std::array<double, 5>;

struct GraphBuildConfig {
  double dist_threshold = 10.0;       // meters
  int temporal_radius = 4;            // frames on each side
  double point_count_normalizer = 2000.0;
  /// Project with the position-prediction formula exactly as commonly
  /// printed, i.e. v * (t_from - t_to), which runs against the travel
  /// direction. Off by default; standard forward kinematics is used instead.
  bool eq1_literal = false;
};

struct GraphNode {
  int det_id = 0;
  int frame_idx = 0;
  NodeFeature feature{};
  // Payload carried along for pseudo-label assembly and score write-back.
  Box3D box;
  int class_id = 0;
  double raw_score = 0.0;
  int num_points = 0;
};

struct GraphEdge {
  int src = 0;
  int dst = 0;
  EdgeFeature feature{};
};

/// Temporal detection graph over one video. Edges connect detections in
/// frames 1..N apart whose velocity-projected centers fall within the
/// distance threshold; they are stored directed, both ways per connected
/// pair, each direction with its own feature vector.
struct VideoGraph {
  std::string video_id;
  GraphBuildConfig config;
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  std::vector<std::vector<int>> in_edges;  // node -> incoming edge indices
  std::vector<GtLabel> labels;             // empty until attach_labels

  bool has_labels() const { return !labels.empty(); }
};

/// Constant-velocity projection of a center from t_from to t_to. Planar
/// components move by v * (t_to - t_from); z is unchanged.
std::array<double, 3> project_center(const std::array<double, 3>& p,
                                     const std::array<double, 2>& v,
                                     double t_from, double t_to,
                                     bool eq1_literal = false);

VideoGraph build_graph(const Video& video, const GraphBuildConfig& cfg = {});

/// Annotates every node with its ground-truth label (greedy per-frame
/// matching). Throws std::invalid_argument on unlabeled videos.
void attach_labels(VideoGraph& graph, const Video& video,
                   const MatchConfig& match = {});

void save_graph(const VideoGraph& g, const std::string& path);
VideoGraph load_graph(const std::string& path);

}  // namespace tgssl
