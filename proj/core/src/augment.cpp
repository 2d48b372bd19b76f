#include "tgssl/augment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "tgssl/matching.hpp"

namespace tgssl {

std::vector<TrackSlice> video_trajectories(const Video& v) {
  if (!v.labeled) {
    throw std::invalid_argument("video_trajectories: video not labeled");
  }
  std::map<int, TrackSlice> by_track;
  for (std::size_t fi = 0; fi < v.frames.size(); ++fi) {
    const auto labels = match_to_gt(v.frames[fi]);
    for (std::size_t di = 0; di < labels.size(); ++di) {
      if (!labels[di].matched_gt_track) continue;
      const int track = *labels[di].matched_gt_track;
      auto& slice = by_track[track];
      slice.track_id = track;
      slice.members.emplace_back(static_cast<int>(fi), static_cast<int>(di));
    }
  }
  std::vector<TrackSlice> out;
  out.reserve(by_track.size());
  for (auto& [_, slice] : by_track) out.push_back(std::move(slice));
  return out;
}

namespace {

int max_det_id(const Video& v) {
  int m = -1;
  for (const Frame& f : v.frames) {
    for (const Detection& d : f.detections) m = std::max(m, d.det_id);
  }
  return m;
}

int max_track_id(const Video& v) {
  int m = -1;
  for (const Frame& f : v.frames) {
    if (!f.gt_boxes) continue;
    for (const GtBox& g : *f.gt_boxes) m = std::max(m, g.track_id);
  }
  return m;
}

}  // namespace

Video copy_paste(const Video& target, const Video& donor,
                 const AugmentConfig& cfg, Rng& rng) {
  const auto donor_tracks = video_trajectories(donor);
  if (donor_tracks.empty()) {
    throw std::invalid_argument("copy_paste: donor has no trajectories");
  }
  Video out = target;
  const int span = cfg.copy_paste_m_range.second - cfg.copy_paste_m_range.first + 1;
  int m = cfg.copy_paste_m_range.first +
          static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(span)));

  // Existing detections as paste anchors, flattened (frame, det) pairs.
  std::vector<std::pair<int, int>> anchors;
  for (std::size_t fi = 0; fi < target.frames.size(); ++fi) {
    for (std::size_t di = 0; di < target.frames[fi].detections.size(); ++di) {
      anchors.emplace_back(static_cast<int>(fi), static_cast<int>(di));
    }
  }

  int next_det = max_det_id(target) + 1;
  int next_track = std::max(max_track_id(target), max_track_id(donor)) + 1;
  const int n_frames = static_cast<int>(out.frames.size());

  const int paste_count = std::min<int>(m, static_cast<int>(donor_tracks.size()));
  for (int pi = 0; pi < paste_count; ++pi) {
    const TrackSlice& track =
        donor_tracks[rng.uniform_int(donor_tracks.size())];
    const int len = static_cast<int>(track.members.size());
    int a = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(len)));
    int b = a + static_cast<int>(rng.uniform_int(
                    static_cast<std::uint64_t>(len - a)));
    const int first_frame = track.members[a].first;
    // Shrink the clip until its frame span fits the target.
    while (b > a && track.members[b].first - first_frame + 1 > n_frames) --b;
    const int frame_span = track.members[b].first - first_frame + 1;
    if (frame_span > n_frames) continue;
    const int start = static_cast<int>(
        rng.uniform_int(static_cast<std::uint64_t>(n_frames - frame_span + 1)));

    // Planar translation putting the clip's first box near a target
    // detection (or leaving it in place when the target is empty).
    double off_x = 0.0;
    double off_y = 0.0;
    const Box3D& first_box =
        donor.frames[track.members[a].first].detections[track.members[a].second].box;
    if (!anchors.empty()) {
      const auto& [afr, adt] = anchors[rng.uniform_int(anchors.size())];
      const Box3D& anchor = target.frames[afr].detections[adt].box;
      const double radius = cfg.paste_max_offset * std::sqrt(rng.uniform());
      const double theta = rng.uniform(0.0, 2.0 * kPi);
      off_x = anchor.center[0] + radius * std::cos(theta) - first_box.center[0];
      off_y = anchor.center[1] + radius * std::sin(theta) - first_box.center[1];
    }

    // Detections of the clip.
    for (int q = a; q <= b; ++q) {
      const auto& [dfr, ddt] = track.members[q];
      const int tf = start + (dfr - first_frame);
      Detection d = donor.frames[dfr].detections[ddt];
      d.box.center[0] += off_x;
      d.box.center[1] += off_y;
      d.det_id = next_det++;
      d.frame_idx = tf;
      out.frames[tf].detections.push_back(std::move(d));
    }
    // Ground truth of the track over the clipped frame span (includes
    // frames where the detector missed, preserving flicker gaps).
    for (int df = first_frame; df <= track.members[b].first; ++df) {
      const int tf = start + (df - first_frame);
      if (!donor.frames[df].gt_boxes || !out.frames[tf].gt_boxes) continue;
      for (const GtBox& gb : *donor.frames[df].gt_boxes) {
        if (gb.track_id != track.track_id) continue;
        GtBox moved = gb;
        moved.box.center[0] += off_x;
        moved.box.center[1] += off_y;
        moved.track_id = next_track;
        out.frames[tf].gt_boxes->push_back(std::move(moved));
      }
    }
    ++next_track;
  }

  // Remove the same number of target trajectories: their ground truth and
  // any detections matched to them. Clutter detections stay.
  const auto target_tracks = video_trajectories(target);
  std::vector<int> removable;
  for (const auto& t : target_tracks) removable.push_back(t.track_id);
  std::set<int> removed;
  const int remove_count =
      std::min<int>(paste_count, static_cast<int>(removable.size()));
  for (int ri = 0; ri < remove_count; ++ri) {
    std::size_t pick = rng.uniform_int(removable.size());
    removed.insert(removable[pick]);
    removable.erase(removable.begin() + static_cast<long>(pick));
  }
  if (!removed.empty()) {
    std::set<std::pair<int, int>> doomed;  // (frame_idx, det_id)
    for (const auto& t : target_tracks) {
      if (!removed.count(t.track_id)) continue;
      for (const auto& [fi, di] : t.members) {
        doomed.insert({fi, target.frames[fi].detections[di].det_id});
      }
    }
    for (Frame& f : out.frames) {
      std::erase_if(f.detections, [&](const Detection& d) {
        return doomed.count({f.frame_idx, d.det_id}) > 0;
      });
      if (f.gt_boxes) {
        std::erase_if(*f.gt_boxes, [&](const GtBox& g) {
          return removed.count(g.track_id) > 0;
        });
      }
    }
  }
  return out;
}

Video random_trim(const Video& v, const AugmentConfig& cfg, Rng& rng) {
  const int n = static_cast<int>(v.frames.size());
  const int min_len = std::max(2, cfg.trim_min_frames);
  if (n < min_len) {
    throw std::invalid_argument("random_trim: video shorter than minimum");
  }
  // Uniform over all (start, length) windows with length >= min_len.
  std::uint64_t total = 0;
  for (int len = min_len; len <= n; ++len) total += n - len + 1;
  std::uint64_t pick = rng.uniform_int(total);
  int start = 0;
  int len = min_len;
  for (int L = min_len; L <= n; ++L) {
    const std::uint64_t windows = n - L + 1;
    if (pick < windows) {
      len = L;
      start = static_cast<int>(pick);
      break;
    }
    pick -= windows;
  }

  Video out;
  out.video_id = v.video_id;
  out.labeled = v.labeled;
  out.frames.assign(v.frames.begin() + start, v.frames.begin() + start + len);
  for (int i = 0; i < len; ++i) {
    out.frames[i].frame_idx = i;
    for (Detection& d : out.frames[i].detections) d.frame_idx = i;
  }
  return out;
}

Video random_noise(const Video& v, const AugmentConfig& cfg, Rng& rng) {
  if (!v.labeled) {
    throw std::invalid_argument("random_noise: video not labeled");
  }
  // Detections eligible for score noise: strictly inside their trajectory.
  std::set<std::pair<int, int>> middle;  // (frame position, det position)
  for (const TrackSlice& t : video_trajectories(v)) {
    for (std::size_t q = 1; q + 1 < t.members.size(); ++q) {
      middle.insert(t.members[q]);
    }
  }

  const double yaw_span = cfg.noise_yaw_deg * kPi / 180.0;
  Video out = v;
  for (std::size_t fi = 0; fi < out.frames.size(); ++fi) {
    auto& dets = out.frames[fi].detections;
    for (std::size_t di = 0; di < dets.size(); ++di) {
      Box3D& b = dets[di].box;
      const std::array<double, 3> size = b.size;
      for (int ax = 0; ax < 3; ++ax) {
        b.center[ax] += rng.uniform(-cfg.noise_loc_size_frac * size[ax],
                                    cfg.noise_loc_size_frac * size[ax]);
        b.size[ax] *= 1.0 + rng.uniform(-cfg.noise_loc_size_frac,
                                        cfg.noise_loc_size_frac);
      }
      b.yaw = wrap_angle(b.yaw + rng.uniform(-yaw_span, yaw_span));
      if (middle.count({static_cast<int>(fi), static_cast<int>(di)})) {
        const double jitter =
            rng.uniform(-cfg.noise_score_abs, cfg.noise_score_abs);
        dets[di].score = std::clamp(dets[di].score + jitter, 0.0, 1.0);
      }
    }
  }
  return out;
}

Video augment_video(const Video& target, const Video& donor,
                    const AugmentConfig& cfg, Rng& rng) {
  Video v = copy_paste(target, donor, cfg, rng);
  const int min_len = std::max(2, cfg.trim_min_frames);
  if (static_cast<int>(v.frames.size()) >= min_len) {
    v = random_trim(v, cfg, rng);
  }
  return random_noise(v, cfg, rng);
}

}  // namespace tgssl
