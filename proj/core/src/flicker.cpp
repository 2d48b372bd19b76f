#include "tgssl/flicker.hpp"

#include "tgssl/graph.hpp"

namespace tgssl {

Video flicker_rescore(const Video& v, int radius, double dist_threshold) {
  Video out = v;
  const int n_frames = static_cast<int>(v.frames.size());
  for (int fi = 0; fi < n_frames; ++fi) {
    const Frame& frame = v.frames[fi];
    for (std::size_t di = 0; di < frame.detections.size(); ++di) {
      const Detection& d = frame.detections[di];
      double pool_sum = 0.0;
      long pool_count = 0;
      const int lo = std::max(0, fi - radius);
      const int hi = std::min(n_frames - 1, fi + radius);
      for (int fj = lo; fj <= hi; ++fj) {
        if (fj == fi) continue;
        const Frame& other = v.frames[fj];
        const auto projected =
            project_center(d.box.center, d.box.velocity, frame.timestamp,
                           other.timestamp);
        for (const Detection& cand : other.detections) {
          if (planar_distance(projected, cand.box.center) < dist_threshold) {
            pool_sum += cand.score;
            ++pool_count;
          }
        }
      }
      const double c_avg =
          pool_count > 0 ? pool_sum / static_cast<double>(pool_count) : 0.0;
      out.frames[fi].detections[di].score = c_avg * d.score;
    }
  }
  return out;
}

}  // namespace tgssl
