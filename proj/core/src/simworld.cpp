#include "tgssl/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include <json.hpp>

#include "tgssl/io.hpp"
#include "tgssl/parallel.hpp"
#include "tgssl/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tgssl {

namespace {

// Two object classes with nominal (w, l, h); per-object sizes jitter +-10%.
constexpr int kNumClasses = 2;
constexpr std::array<std::array<double, 3>, kNumClasses> kNominalSize{{
    {1.9, 4.5, 1.6},    // vehicle-like
    {0.7, 0.7, 1.75},   // pedestrian-like
}};

// Clutter detections sit on sparser returns than solid objects; their point
// counts are scaled down by a factor drawn from this range.
constexpr double kClutterPointLo = 0.05;
constexpr double kClutterPointHi = 0.35;

// Clutter boxes are ill-formed: an overall scale factor plus extra per-axis
// distortion on top of the class-nominal size.
constexpr double kClutterScaleLo = 0.5;
constexpr double kClutterScaleHi = 1.8;
constexpr double kClutterAxisJitter = 0.25;

// Half the clutter is ghost returns shadowing a real object (reflections,
// double detections): born a few meters from a live object and moving with
// it. The rest is free-standing arena clutter.
constexpr double kClutterNearProb = 0.5;
constexpr double kClutterNearLo = 2.5;  // meters from the host object
constexpr double kClutterNearHi = 9.0;

constexpr double kScoreFloor = 0.1;        // candidate filter threshold
constexpr double kYawDriftSigma = kPi / 180.0;       // 1 deg per frame
constexpr double kYawNoiseSigma = 2.0 * kPi / 180.0; // detector yaw noise
constexpr double kPointBudget = 2000.0;

// Systematic center-estimation miscalibration: a fixed per-class planar
// offset of half the jitter sigma. Small enough that 3-sigma containment
// still holds, large enough that a refinement head can recover it.
constexpr double kBiasFraction = 0.5;
constexpr std::array<double, kNumClasses> kBiasAngle{0.7, 3.5};  // radians

int sample_points(Rng& rng, const std::array<double, 3>& center,
                  double scale) {
  const double range = planar_range(center);
  const double base = kPointBudget / std::max(1.0, range);
  const double noisy = base * scale * (1.0 + rng.uniform(-0.2, 0.2));
  return std::max(0, static_cast<int>(std::lround(noisy)));
}

struct ClutterTrack {
  int expires_frame = 0;  // first frame it is gone
  int class_id = 0;
  Box3D box;              // advanced frame to frame by its velocity
};

Detection detect_from_box(Rng& rng, const Box3D& truth, int class_id,
                          const WorldConfig& cfg, double point_scale,
                          double score, bool class_bias) {
  Detection d;
  d.class_id = class_id;
  d.score = score;

  Box3D b = truth;
  if (class_bias) {
    const double bias = kBiasFraction * cfg.loc_noise_sigma;
    b.center[0] += bias * std::cos(kBiasAngle[class_id]);
    b.center[1] += bias * std::sin(kBiasAngle[class_id]);
  }
  // Planar displacement: uniform direction, Gaussian magnitude; half the
  // sigma vertically.
  const double theta = rng.uniform(0.0, 2.0 * kPi);
  const double r = rng.normal(0.0, cfg.loc_noise_sigma);
  b.center[0] += r * std::cos(theta);
  b.center[1] += r * std::sin(theta);
  b.center[2] += rng.normal(0.0, 0.5 * cfg.loc_noise_sigma);
  for (double& s : b.size) s *= 1.0 + rng.uniform(-0.05, 0.05);
  b.yaw = wrap_angle(b.yaw + rng.normal(0.0, kYawNoiseSigma));
  b.velocity[0] += rng.normal(0.0, cfg.vel_noise_sigma);
  b.velocity[1] += rng.normal(0.0, cfg.vel_noise_sigma);
  d.box = b;
  d.num_points = sample_points(rng, b.center, point_scale);
  return d;
}

}  // namespace

void validate(const WorldConfig& cfg) {
  if (cfg.n_objects < 0 || cfg.n_frames < 1) {
    throw std::invalid_argument("world: n_objects >= 0, n_frames >= 1");
  }
  if (!(cfg.frame_dt > 0.0)) throw std::invalid_argument("world: frame_dt > 0");
  if (cfg.miss_prob < 0.0 || cfg.miss_prob > 1.0) {
    throw std::invalid_argument("world: miss_prob in [0, 1]");
  }
  if (cfg.fp_rate < 0.0) throw std::invalid_argument("world: fp_rate >= 0");
  if (cfg.fp_lifetime.first < 1 || cfg.fp_lifetime.second < cfg.fp_lifetime.first) {
    throw std::invalid_argument("world: fp_lifetime range invalid");
  }
  if (cfg.loc_noise_sigma < 0.0 || cfg.vel_noise_sigma < 0.0) {
    throw std::invalid_argument("world: noise sigmas >= 0");
  }
  if (cfg.speed_range.second < cfg.speed_range.first ||
      cfg.speed_range.first < 0.0) {
    throw std::invalid_argument("world: speed_range invalid");
  }
  if (cfg.arena_half_extent <= 0.0) {
    throw std::invalid_argument("world: arena_half_extent > 0");
  }
}

std::vector<TrueTrajectory> generate_world(const WorldConfig& cfg) {
  validate(cfg);
  Rng rng = Rng::stream(cfg.seed, 0);
  std::vector<TrueTrajectory> world;
  world.reserve(cfg.n_objects);
  for (int i = 0; i < cfg.n_objects; ++i) {
    TrueTrajectory tr;
    tr.track_id = i;
    tr.class_id = static_cast<int>(rng.uniform_int(kNumClasses));

    std::array<double, 3> size = kNominalSize[tr.class_id];
    for (double& s : size) s *= 1.0 + rng.uniform(-0.1, 0.1);

    const double x0 = rng.uniform(-cfg.arena_half_extent, cfg.arena_half_extent);
    const double y0 = rng.uniform(-cfg.arena_half_extent, cfg.arena_half_extent);
    const double speed = rng.uniform(cfg.speed_range.first, cfg.speed_range.second);
    const double heading = rng.uniform(0.0, 2.0 * kPi);
    const double vx = speed * std::cos(heading);
    const double vy = speed * std::sin(heading);

    double yaw = wrap_angle(heading);
    tr.boxes.reserve(cfg.n_frames);
    for (int t = 0; t < cfg.n_frames; ++t) {
      Box3D b;
      b.center = {x0 + vx * cfg.frame_dt * t, y0 + vy * cfg.frame_dt * t,
                  size[2] / 2.0};
      b.size = size;
      b.yaw = yaw;
      b.velocity = {vx, vy};
      tr.boxes.push_back(b);
      yaw = wrap_angle(yaw + rng.normal(0.0, kYawDriftSigma));
    }
    world.push_back(std::move(tr));
  }
  return world;
}

Video simulate_detector(const std::vector<TrueTrajectory>& world,
                        const WorldConfig& cfg, const std::string& video_id) {
  validate(cfg);
  Rng rng = Rng::stream(cfg.seed, 1);
  Video v;
  v.video_id = video_id;
  v.labeled = true;

  int next_det_id = 0;
  std::vector<ClutterTrack> clutter;
  for (int t = 0; t < cfg.n_frames; ++t) {
    Frame frame;
    frame.frame_idx = t;
    frame.timestamp = cfg.frame_dt * t;
    frame.gt_boxes.emplace();

    for (const TrueTrajectory& tr : world) {
      const Box3D& truth = tr.boxes[t];
      frame.gt_boxes->push_back({truth, tr.class_id, tr.track_id});
      if (rng.uniform() < cfg.miss_prob) continue;
      const double score =
          rng.beta(cfg.score_beta_tp.first, cfg.score_beta_tp.second);
      Detection d = detect_from_box(rng, truth, tr.class_id, cfg, 1.0, score, true);
      if (d.score < kScoreFloor) continue;
      d.det_id = next_det_id++;
      d.frame_idx = t;
      frame.detections.push_back(std::move(d));
    }

    // Clutter births, then emissions for every active clutter track.
    const int births = rng.poisson(cfg.fp_rate);
    for (int bi = 0; bi < births; ++bi) {
      ClutterTrack c;
      const int lifetime =
          cfg.fp_lifetime.first +
          static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(
              cfg.fp_lifetime.second - cfg.fp_lifetime.first + 1)));
      c.expires_frame = t + lifetime;
      c.class_id = static_cast<int>(rng.uniform_int(kNumClasses));
      std::array<double, 3> size = kNominalSize[c.class_id];
      const double scale = rng.uniform(kClutterScaleLo, kClutterScaleHi);
      for (double& s : size) {
        s *= scale * (1.0 + rng.uniform(-kClutterAxisJitter, kClutterAxisJitter));
      }
      c.box.size = size;
      const bool near_object =
          !world.empty() && rng.uniform() < kClutterNearProb;
      if (near_object) {
        const TrueTrajectory& host = world[rng.uniform_int(world.size())];
        const double r = rng.uniform(kClutterNearLo, kClutterNearHi);
        const double phi = rng.uniform(0.0, 2.0 * kPi);
        const Box3D& hb = host.boxes[t];
        c.box.center = {hb.center[0] + r * std::cos(phi),
                        hb.center[1] + r * std::sin(phi), size[2] / 2.0};
        c.box.yaw = hb.yaw;
        c.box.velocity = hb.velocity;  // ghost shadows its host
      } else {
        const double speed = rng.uniform(0.0, 2.0);
        const double heading = rng.uniform(0.0, 2.0 * kPi);
        c.box.center = {
            rng.uniform(-cfg.arena_half_extent, cfg.arena_half_extent),
            rng.uniform(-cfg.arena_half_extent, cfg.arena_half_extent),
            size[2] / 2.0};
        c.box.yaw = wrap_angle(heading);
        c.box.velocity = {speed * std::cos(heading),
                          speed * std::sin(heading)};
      }
      clutter.push_back(c);
    }
    for (ClutterTrack& c : clutter) {
      if (t >= c.expires_frame) continue;
      const double score =
          rng.beta(cfg.score_beta_fp.first, cfg.score_beta_fp.second);
      const double point_scale = rng.uniform(kClutterPointLo, kClutterPointHi);
      Detection d =
          detect_from_box(rng, c.box, c.class_id, cfg, point_scale, score, false);
      if (d.score >= kScoreFloor) {
        d.det_id = next_det_id++;
        d.frame_idx = t;
        frame.detections.push_back(std::move(d));
      }
      c.box.center[0] += c.box.velocity[0] * cfg.frame_dt;
      c.box.center[1] += c.box.velocity[1] * cfg.frame_dt;
    }
    clutter.erase(std::remove_if(clutter.begin(), clutter.end(),
                                 [&](const ClutterTrack& c) {
                                   return t + 1 >= c.expires_frame;
                                 }),
                  clutter.end());

    v.frames.push_back(std::move(frame));
  }
  return v;
}

namespace {

json world_to_json(const WorldConfig& c) {
  json j;
  j["n_objects"] = c.n_objects;
  j["n_frames"] = c.n_frames;
  j["frame_dt"] = c.frame_dt;
  j["arena_half_extent"] = c.arena_half_extent;
  j["speed_range"] = {c.speed_range.first, c.speed_range.second};
  j["miss_prob"] = c.miss_prob;
  j["fp_rate"] = c.fp_rate;
  j["fp_lifetime"] = {c.fp_lifetime.first, c.fp_lifetime.second};
  j["loc_noise_sigma"] = c.loc_noise_sigma;
  j["score_beta_tp"] = {c.score_beta_tp.first, c.score_beta_tp.second};
  j["score_beta_fp"] = {c.score_beta_fp.first, c.score_beta_fp.second};
  j["vel_noise_sigma"] = c.vel_noise_sigma;
  j["seed"] = c.seed;
  return j;
}

WorldConfig world_from_json(const json& j) {
  WorldConfig c;
  if (j.contains("n_objects")) c.n_objects = j["n_objects"].get<int>();
  if (j.contains("n_frames")) c.n_frames = j["n_frames"].get<int>();
  if (j.contains("frame_dt")) c.frame_dt = j["frame_dt"].get<double>();
  if (j.contains("arena_half_extent")) {
    c.arena_half_extent = j["arena_half_extent"].get<double>();
  }
  if (j.contains("speed_range")) {
    c.speed_range = {j["speed_range"][0].get<double>(),
                     j["speed_range"][1].get<double>()};
  }
  if (j.contains("miss_prob")) c.miss_prob = j["miss_prob"].get<double>();
  if (j.contains("fp_rate")) c.fp_rate = j["fp_rate"].get<double>();
  if (j.contains("fp_lifetime")) {
    c.fp_lifetime = {j["fp_lifetime"][0].get<int>(),
                     j["fp_lifetime"][1].get<int>()};
  }
  if (j.contains("loc_noise_sigma")) {
    c.loc_noise_sigma = j["loc_noise_sigma"].get<double>();
  }
  if (j.contains("score_beta_tp")) {
    c.score_beta_tp = {j["score_beta_tp"][0].get<double>(),
                       j["score_beta_tp"][1].get<double>()};
  }
  if (j.contains("score_beta_fp")) {
    c.score_beta_fp = {j["score_beta_fp"][0].get<double>(),
                       j["score_beta_fp"][1].get<double>()};
  }
  if (j.contains("vel_noise_sigma")) {
    c.vel_noise_sigma = j["vel_noise_sigma"].get<double>();
  }
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  return c;
}

Video strip_ground_truth(Video v) {
  v.labeled = false;
  for (Frame& f : v.frames) f.gt_boxes.reset();
  return v;
}

}  // namespace

std::string world_config_to_json(const WorldConfig& cfg) {
  return world_to_json(cfg).dump(2);
}

WorldConfig world_config_from_json_text(const std::string& text) {
  return world_from_json(json::parse(text));
}

WorldConfig load_world_config(const std::string& path) {
  return world_config_from_json_text(read_text_file(path));
}

BenchmarkManifest make_benchmark(int n_labeled, int n_unlabeled,
                                 int n_heldout, const WorldConfig& cfg,
                                 const std::string& out_dir) {
  if (n_labeled < 0 || n_unlabeled < 0 || n_heldout < 0) {
    throw std::invalid_argument("make_benchmark: counts must be >= 0");
  }
  validate(cfg);
  const fs::path root(out_dir);
  fs::create_directories(root / "labeled");
  fs::create_directories(root / "unlabeled");
  fs::create_directories(root / "heldout");
  fs::create_directories(root / "sealed");

  BenchmarkManifest m;
  m.seed = cfg.seed;
  m.world = cfg;
  m.sealed_dir = "sealed";
  m.root = root.string();

  struct Slot {
    std::string split;
    std::string name;
    bool strip;
  };
  std::vector<Slot> slots;
  auto add = [&](const std::string& split, int count, bool strip) {
    for (int i = 0; i < count; ++i) {
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%03d.jsonl", split.c_str(), i);
      slots.push_back({split, name, strip});
    }
  };
  add("labeled", n_labeled, false);
  add("unlabeled", n_unlabeled, true);
  add("heldout", n_heldout, true);

  parallel_for(slots.size(), [&](std::size_t i) {
    const Slot& slot = slots[i];
    WorldConfig vc = cfg;
    vc.seed = mix_seed(cfg.seed, 1000 + i);
    const auto world = generate_world(vc);
    Video full = simulate_detector(world, vc, slot.name.substr(0, slot.name.size() - 6));
    const fs::path rel = fs::path(slot.split) / slot.name;
    if (slot.strip) {
      save_video(full, (root / "sealed" / slot.name).string());
      save_video(strip_ground_truth(full), (root / rel).string());
    } else {
      save_video(full, (root / rel).string());
    }
  });

  for (const Slot& slot : slots) {
    const std::string rel = (fs::path(slot.split) / slot.name).string();
    if (slot.split == "labeled") m.labeled.push_back(rel);
    else if (slot.split == "unlabeled") m.unlabeled.push_back(rel);
    else m.heldout.push_back(rel);
  }

  json j;
  j["seed"] = m.seed;
  j["world"] = world_to_json(cfg);
  j["labeled"] = m.labeled;
  j["unlabeled"] = m.unlabeled;
  j["heldout"] = m.heldout;
  j["sealed"] = m.sealed_dir;
  write_text_file((root / "manifest.json").string(), j.dump(2) + "\n");
  return m;
}

BenchmarkManifest load_manifest(const std::string& manifest_path) {
  const json j = json::parse(read_text_file(manifest_path));
  BenchmarkManifest m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.world = world_from_json(j.at("world"));
  m.labeled = j.at("labeled").get<std::vector<std::string>>();
  m.unlabeled = j.at("unlabeled").get<std::vector<std::string>>();
  m.heldout = j.at("heldout").get<std::vector<std::string>>();
  m.sealed_dir = j.at("sealed").get<std::string>();
  m.root = fs::path(manifest_path).parent_path().string();
  return m;
}

}  // namespace tgssl
