#include "tgssl/graph.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "tgssl/io.hpp"

using nlohmann::json;

namespace tgssl {

std::array<double, 3> project_center(const std::array<double, 3>& p,
                                     const std::array<double, 2>& v,
                                     double t_from, double t_to,
                                     bool eq1_literal) {
  const double dt = eq1_literal ? (t_from - t_to) : (t_to - t_from);
  return {p[0] + v[0] * dt, p[1] + v[1] * dt, p[2]};
}

namespace {

EdgeFeature edge_feature(const GraphNode& src, const GraphNode& dst,
                         double src_ts, double dst_ts,
                         const GraphBuildConfig& cfg) {
  const auto projected = project_center(src.box.center, src.box.velocity,
                                        src_ts, dst_ts, cfg.eq1_literal);
  return {planar_distance(projected, dst.box.center),
          dst.box.size[0] - src.box.size[0],
          dst.box.size[1] - src.box.size[1],
          dst.box.size[2] - src.box.size[2],
          wrap_angle(dst.box.yaw - src.box.yaw)};
}

}  // namespace

VideoGraph build_graph(const Video& video, const GraphBuildConfig& cfg) {
  if (video.frames.empty()) {
    throw std::invalid_argument("build_graph: empty video");
  }
  if (!(cfg.dist_threshold > 0.0) || cfg.temporal_radius < 1) {
    throw std::invalid_argument("build_graph: invalid config");
  }

  VideoGraph g;
  g.video_id = video.video_id;
  g.config = cfg;

  std::vector<double> node_ts;
  std::vector<int> frame_begin(video.frames.size() + 1, 0);
  for (std::size_t fi = 0; fi < video.frames.size(); ++fi) {
    const Frame& f = video.frames[fi];
    frame_begin[fi] = static_cast<int>(g.nodes.size());
    for (const Detection& d : f.detections) {
      GraphNode n;
      n.det_id = d.det_id;
      n.frame_idx = f.frame_idx;
      n.box = d.box;
      n.class_id = d.class_id;
      n.raw_score = d.score;
      n.num_points = d.num_points;
      n.feature = {d.score,
                   std::min(1.0, d.num_points / cfg.point_count_normalizer),
                   d.box.size[0], d.box.size[1], d.box.size[2]};
      g.nodes.push_back(std::move(n));
      node_ts.push_back(f.timestamp);
    }
  }
  frame_begin[video.frames.size()] = static_cast<int>(g.nodes.size());

  g.in_edges.assign(g.nodes.size(), {});

  // A pair in frames 1..N apart is connected when either endpoint's
  // velocity-projected center lands within the threshold of the other;
  // both directed edges are then stored with per-direction features.
  const int n_frames = static_cast<int>(video.frames.size());
  auto connected_one_way = [&](int a, int b) {
    const auto projected =
        project_center(g.nodes[a].box.center, g.nodes[a].box.velocity,
                       node_ts[a], node_ts[b], cfg.eq1_literal);
    return planar_distance(projected, g.nodes[b].box.center) <
           cfg.dist_threshold;
  };
  auto add_edge = [&](int src, int dst) {
    GraphEdge e;
    e.src = src;
    e.dst = dst;
    e.feature = edge_feature(g.nodes[src], g.nodes[dst], node_ts[src],
                             node_ts[dst], cfg);
    g.in_edges[dst].push_back(static_cast<int>(g.edges.size()));
    g.edges.push_back(std::move(e));
  };

  for (int fa = 0; fa < n_frames; ++fa) {
    const int fb_end = std::min(n_frames - 1, fa + cfg.temporal_radius);
    for (int fb = fa + 1; fb <= fb_end; ++fb) {
      for (int i = frame_begin[fa]; i < frame_begin[fa + 1]; ++i) {
        for (int j = frame_begin[fb]; j < frame_begin[fb + 1]; ++j) {
          if (connected_one_way(i, j) || connected_one_way(j, i)) {
            add_edge(i, j);
            add_edge(j, i);
          }
        }
      }
    }
  }
  return g;
}

void attach_labels(VideoGraph& graph, const Video& video,
                   const MatchConfig& match) {
  if (!video.labeled) {
    throw std::invalid_argument("attach_labels: video is not labeled");
  }
  auto labels = match_video_to_gt(video, match);
  if (labels.size() != graph.nodes.size()) {
    throw std::invalid_argument(
        "attach_labels: graph does not match the video");
  }
  graph.labels = std::move(labels);
}

void save_graph(const VideoGraph& g, const std::string& path) {
  json j;
  j["video_id"] = g.video_id;
  j["threshold"] = g.config.dist_threshold;
  j["radius"] = g.config.temporal_radius;
  json nodes = json::array();
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const GraphNode& n = g.nodes[i];
    json nj;
    nj["det_id"] = n.det_id;
    nj["frame_idx"] = n.frame_idx;
    nj["features"] = {quantize9(n.feature[0]), quantize9(n.feature[1]),
                      quantize9(n.feature[2]), quantize9(n.feature[3]),
                      quantize9(n.feature[4])};
    if (g.has_labels()) {
      nj["label"] = g.labels[i].label;
    }
    nodes.push_back(std::move(nj));
  }
  j["nodes"] = std::move(nodes);
  json edges = json::array();
  for (const GraphEdge& e : g.edges) {
    edges.push_back({e.src, e.dst,
                     {quantize9(e.feature[0]), quantize9(e.feature[1]),
                      quantize9(e.feature[2]), quantize9(e.feature[3]),
                      quantize9(e.feature[4])}});
  }
  j["edges"] = std::move(edges);
  write_text_file(path, j.dump() + "\n");
}

VideoGraph load_graph(const std::string& path) {
  const json j = json::parse(read_text_file(path));
  VideoGraph g;
  g.video_id = j.at("video_id").get<std::string>();
  g.config.dist_threshold = j.at("threshold").get<double>();
  g.config.temporal_radius = j.at("radius").get<int>();
  bool any_label = false;
  for (const json& nj : j.at("nodes")) {
    GraphNode n;
    n.det_id = nj.at("det_id").get<int>();
    n.frame_idx = nj.at("frame_idx").get<int>();
    const auto& f = nj.at("features");
    for (int k = 0; k < 5; ++k) n.feature[k] = f[k].get<double>();
    n.raw_score = n.feature[0];
    g.nodes.push_back(std::move(n));
    if (nj.contains("label")) {
      GtLabel lab;
      lab.label = nj["label"].get<int>();
      g.labels.push_back(lab);
      any_label = true;
    }
  }
  if (!any_label || g.labels.size() != g.nodes.size()) g.labels.clear();
  g.in_edges.assign(g.nodes.size(), {});
  for (const json& ej : j.at("edges")) {
    GraphEdge e;
    e.src = ej[0].get<int>();
    e.dst = ej[1].get<int>();
    for (int k = 0; k < 5; ++k) e.feature[k] = ej[2][k].get<double>();
    g.in_edges[e.dst].push_back(static_cast<int>(g.edges.size()));
    g.edges.push_back(std::move(e));
  }
  return g;
}

}  // namespace tgssl
