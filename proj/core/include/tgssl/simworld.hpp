#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tgssl/types.hpp"

namespace tgssl {

/// Statistical model of a single-frame detector running on a scene of
/// moving objects: per-frame misses, Poisson clutter with short lifetimes,
/// localization / size / yaw / velocity noise, and score distributions that
/// overlap between true and false detections.
struct WorldConfig {
  int n_objects = 2;
  int n_frames = 40;
  double frame_dt = 0.5;            // seconds
  double arena_half_extent = 40.0;  // meters, spawn region half-width
  std::pair<double, double> speed_range{0.0, 4.0};  // m/s
  double miss_prob = 0.15;          // per-frame miss probability per object
  double fp_rate = 1.0;             // expected clutter births per frame
  std::pair<int, int> fp_lifetime{1, 3};  // frames, inclusive
  double loc_noise_sigma = 0.5;     // meters
  std::pair<double, double> score_beta_tp{5.0, 2.0};
  std::pair<double, double> score_beta_fp{2.0, 5.0};
  double vel_noise_sigma = 0.2;     // m/s
  std::uint64_t seed = 0;
};

void validate(const WorldConfig& cfg);

/// Ground-truth object: one box per frame, constant velocity with a small
/// cumulative yaw drift.
struct TrueTrajectory {
  int track_id = 0;
  int class_id = 0;
  std::vector<Box3D> boxes;  // index = frame
};

std::vector<TrueTrajectory> generate_world(const WorldConfig& cfg);

/// Simulates the detector over a world. Detections below score 0.1 are
/// dropped, mirroring a low-threshold candidate filter. The returned video
/// is labeled (gt_boxes carry every true object each frame).
Video simulate_detector(const std::vector<TrueTrajectory>& world,
                        const WorldConfig& cfg,
                        const std::string& video_id = "sim");

/// Dataset splits written by make_benchmark. Paths are relative to root.
struct BenchmarkManifest {
  std::uint64_t seed = 0;
  WorldConfig world;
  std::vector<std::string> labeled;
  std::vector<std::string> unlabeled;
  std::vector<std::string> heldout;
  std::string sealed_dir;  // evaluation-only ground truth sidecars
  std::string root;        // directory containing manifest.json
};

/// Generates n_labeled + n_unlabeled + n_heldout videos under out_dir.
/// Unlabeled and held-out files have ground truth stripped; full labeled
/// copies go to the sealed sidecar directory, which only evaluation reads.
BenchmarkManifest make_benchmark(int n_labeled, int n_unlabeled,
                                 int n_heldout, const WorldConfig& cfg,
                                 const std::string& out_dir);

BenchmarkManifest load_manifest(const std::string& manifest_path);

std::string world_config_to_json(const WorldConfig& cfg);
WorldConfig world_config_from_json_text(const std::string& text);
WorldConfig load_world_config(const std::string& path);

}  // namespace tgssl
