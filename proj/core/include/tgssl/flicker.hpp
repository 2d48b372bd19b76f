#pragma once

#include "tgssl/types.hpp"

namespace tgssl {

/// Temporal-consistency rescoring baseline: each detection is projected by
/// its velocity into the N preceding and N succeeding frames; detections
/// within dist_threshold of the projected position are pooled across those
/// frames and the score becomes mean(pool) * old score. An empty pool zeroes
/// the score, suppressing temporally isolated detections.
Video flicker_rescore(const Video& v, int radius = 4,
                      double dist_threshold = 10.0);

}  // namespace tgssl
