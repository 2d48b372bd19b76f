#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "tgssl/rng.hpp"
#include "tgssl/types.hpp"

namespace tgssl {

struct AugmentConfig {
  std::pair<int, int> copy_paste_m_range{1, 5};
  double paste_max_offset = 10.0;     // meters from an existing detection
  int trim_min_frames = 10;
  double noise_loc_size_frac = 0.10;  // of the box size, per axis
  double noise_yaw_deg = 10.0;
  double noise_score_abs = 0.15;
  std::uint64_t seed = 0;
};

/// A ground-truth track's detections within one labeled video, ordered by
/// frame. Identity comes from the per-frame greedy matching.
struct TrackSlice {
  int track_id = 0;
  std::vector<std::pair<int, int>> members;  // (frame position, det position)
};

std::vector<TrackSlice> video_trajectories(const Video& v);

/// Copies 1..5 random trajectory clips from the donor into the target,
/// translated next to an existing target detection, and removes the same
/// number of target trajectories. Ground-truth entries move with the
/// detections so labels stay consistent. Throws if the donor has no
/// trajectories.
Video copy_paste(const Video& target, const Video& donor,
                 const AugmentConfig& cfg, Rng& rng);

/// Uniformly chosen contiguous frame window of length >= trim_min_frames;
/// frame indices re-based to zero, timestamps preserved.
Video random_trim(const Video& v, const AugmentConfig& cfg, Rng& rng);

/// Uniform location / size / yaw jitter on every detection; score jitter
/// only on detections strictly inside their trajectory (never endpoints,
/// never clutter). Requires a labeled video.
Video random_noise(const Video& v, const AugmentConfig& cfg, Rng& rng);

/// The full chain used before GNN training: copy_paste, then trim, then
/// noise.
Video augment_video(const Video& target, const Video& donor,
                    const AugmentConfig& cfg, Rng& rng);

}  // namespace tgssl
