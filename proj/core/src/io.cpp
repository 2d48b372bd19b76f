#include "tgssl/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace tgssl {

using nlohmann::json;

double quantize9(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("non-finite float");
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return std::strtod(buf, nullptr);
}

namespace {

json box_to_json(const Box3D& b) {
  json j;
  j["center"] = {quantize9(b.center[0]), quantize9(b.center[1]),
                 quantize9(b.center[2])};
  j["size"] = {quantize9(b.size[0]), quantize9(b.size[1]),
               quantize9(b.size[2])};
  j["yaw"] = quantize9(b.yaw);
  j["velocity"] = {quantize9(b.velocity[0]), quantize9(b.velocity[1])};
  return j;
}

std::array<double, 3> vec3_from(const json& j, const char* name) {
  if (!j.is_array() || j.size() != 3) {
    throw std::runtime_error(std::string(name) + " must be a 3-array");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Box3D box_from_json(const json& j) {
  Box3D b;
  b.center = vec3_from(j.at("center"), "center");
  b.size = vec3_from(j.at("size"), "size");
  b.yaw = j.at("yaw").get<double>();
  const json& v = j.at("velocity");
  if (!v.is_array() || v.size() != 2) {
    throw std::runtime_error("velocity must be a 2-array");
  }
  b.velocity = {v[0].get<double>(), v[1].get<double>()};
  return b;
}

json frame_to_json(const Frame& f) {
  json j;
  j["frame_idx"] = f.frame_idx;
  j["timestamp"] = quantize9(f.timestamp);
  json dets = json::array();
  for (const Detection& d : f.detections) {
    json dj = box_to_json(d.box);
    dj["score"] = quantize9(d.score);
    dj["class_id"] = d.class_id;
    dj["num_points"] = d.num_points;
    dj["det_id"] = d.det_id;
    dets.push_back(std::move(dj));
  }
  j["detections"] = std::move(dets);
  if (f.gt_boxes) {
    json gts = json::array();
    for (const GtBox& g : *f.gt_boxes) {
      json gj = box_to_json(g.box);
      gj["class_id"] = g.class_id;
      gj["track_id"] = g.track_id;
      gts.push_back(std::move(gj));
    }
    j["gt_boxes"] = std::move(gts);
  } else {
    j["gt_boxes"] = nullptr;
  }
  return j;
}

Frame frame_from_json(const json& j) {
  Frame f;
  f.frame_idx = j.at("frame_idx").get<int>();
  f.timestamp = j.at("timestamp").get<double>();
  for (const json& dj : j.at("detections")) {
    Detection d;
    d.box = box_from_json(dj);
    d.score = dj.at("score").get<double>();
    d.class_id = dj.at("class_id").get<int>();
    d.num_points = dj.at("num_points").get<int>();
    d.det_id = dj.at("det_id").get<int>();
    d.frame_idx = f.frame_idx;
    f.detections.push_back(std::move(d));
  }
  const json& gj = j.at("gt_boxes");
  if (!gj.is_null()) {
    std::vector<GtBox> gts;
    for (const json& g : gj) {
      GtBox gt;
      gt.box = box_from_json(g);
      gt.class_id = g.at("class_id").get<int>();
      gt.track_id = g.at("track_id").get<int>();
      gts.push_back(std::move(gt));
    }
    f.gt_boxes = std::move(gts);
  }
  return f;
}

}  // namespace

std::string video_to_jsonl(const Video& v) {
  validate_video(v);
  std::ostringstream out;
  json header;
  header["video_id"] = v.video_id;
  header["labeled"] = v.labeled;
  out << header.dump() << '\n';
  for (const Frame& f : v.frames) out << frame_to_json(f).dump() << '\n';
  return out.str();
}

namespace {

// Frame-local invariants, checked while parsing so errors carry the line.
void check_frame(const Frame& f, bool labeled, int expected_idx,
                 double prev_ts) {
  if (f.frame_idx != expected_idx) {
    throw std::runtime_error("frame_idx " + std::to_string(f.frame_idx) +
                             " does not match position " +
                             std::to_string(expected_idx));
  }
  if (!std::isfinite(f.timestamp) || f.timestamp <= prev_ts) {
    throw std::runtime_error("timestamps must be strictly increasing");
  }
  for (const Detection& d : f.detections) {
    validate_box(d.box);
    if (!(d.score >= 0.0 && d.score <= 1.0)) {
      throw std::runtime_error("detection score outside [0, 1]");
    }
    if (d.num_points < 0) throw std::runtime_error("num_points must be >= 0");
  }
  if (labeled && !f.gt_boxes.has_value()) {
    throw std::runtime_error("labeled video frame missing gt_boxes");
  }
  if (f.gt_boxes) {
    for (const GtBox& g : *f.gt_boxes) validate_box(g.box);
  }
}

}  // namespace

Video parse_video_jsonl(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  Video v;
  bool have_header = false;
  double prev_ts = -std::numeric_limits<double>::infinity();
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error(origin + ": parse error at line " +
                               std::to_string(line_no) + ": " + e.what());
    }
    try {
      if (!have_header) {
        v.video_id = j.at("video_id").get<std::string>();
        v.labeled = j.at("labeled").get<bool>();
        have_header = true;
      } else {
        Frame f = frame_from_json(j);
        check_frame(f, v.labeled, static_cast<int>(v.frames.size()), prev_ts);
        prev_ts = f.timestamp;
        v.frames.push_back(std::move(f));
      }
    } catch (const std::exception& e) {
      throw std::runtime_error(origin + ": invalid line " +
                               std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw std::runtime_error(origin + ": missing header line");
  if (v.frames.empty()) throw std::runtime_error(origin + ": video has no frames");
  return v;
}

Video load_video(const std::string& path) {
  return parse_video_jsonl(read_text_file(path), path);
}

void save_video(const Video& v, const std::string& path) {
  write_text_file(path, video_to_jsonl(v));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace tgssl
