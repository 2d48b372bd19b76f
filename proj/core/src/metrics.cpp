#include "tgssl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "tgssl/calibration.hpp"
#include "tgssl/matching.hpp"

using nlohmann::json;

namespace tgssl {

namespace {

struct PooledDet {
  double score = 0.0;
  int video = 0;
  int frame = 0;
  int det = 0;  // index within the frame
};

const Video* find_gt(const std::vector<Video>& gts, const std::string& id) {
  for (const Video& g : gts) {
    if (g.video_id == id) return &g;
  }
  return nullptr;
}

}  // namespace

double average_precision(const std::vector<Video>& preds,
                         const std::vector<Video>& gts, int class_id,
                         double dist_threshold) {
  long n_gt = 0;
  std::vector<PooledDet> pool;
  // gt_taken[video][frame][gt index in class list]
  std::vector<std::vector<std::vector<bool>>> gt_taken(preds.size());
  std::vector<std::vector<std::vector<const GtBox*>>> gt_boxes(preds.size());

  for (std::size_t vi = 0; vi < preds.size(); ++vi) {
    const Video& pv = preds[vi];
    const Video* gv = find_gt(gts, pv.video_id);
    if (!gv) throw std::invalid_argument("no ground truth for " + pv.video_id);
    if (gv->frames.size() != pv.frames.size()) {
      throw std::invalid_argument("frame count mismatch for " + pv.video_id);
    }
    gt_taken[vi].resize(pv.frames.size());
    gt_boxes[vi].resize(pv.frames.size());
    for (std::size_t fi = 0; fi < pv.frames.size(); ++fi) {
      if (!gv->frames[fi].gt_boxes) {
        throw std::invalid_argument("ground truth video is unlabeled");
      }
      for (const GtBox& g : *gv->frames[fi].gt_boxes) {
        if (g.class_id != class_id) continue;
        gt_boxes[vi][fi].push_back(&g);
        ++n_gt;
      }
      gt_taken[vi][fi].assign(gt_boxes[vi][fi].size(), false);
      const Frame& pf = pv.frames[fi];
      for (std::size_t di = 0; di < pf.detections.size(); ++di) {
        if (pf.detections[di].class_id != class_id) continue;
        pool.push_back({pf.detections[di].score, static_cast<int>(vi),
                        static_cast<int>(fi), static_cast<int>(di)});
      }
    }
  }
  if (n_gt == 0) return -1.0;
  if (pool.empty()) return 0.0;

  std::stable_sort(pool.begin(), pool.end(),
                   [](const PooledDet& a, const PooledDet& b) {
                     return a.score > b.score;
                   });

  double ap = 0.0;
  long tp = 0;
  long fp = 0;
  for (const PooledDet& pd : pool) {
    const Detection& d = preds[pd.video].frames[pd.frame].detections[pd.det];
    const auto& frame_gts = gt_boxes[pd.video][pd.frame];
    auto& taken = gt_taken[pd.video][pd.frame];
    int best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t gi = 0; gi < frame_gts.size(); ++gi) {
      if (taken[gi]) continue;
      const double dist =
          planar_distance(d.box.center, frame_gts[gi]->box.center);
      if (dist > dist_threshold) continue;
      if (best < 0 || dist < best_dist) {
        best = static_cast<int>(gi);
        best_dist = dist;
      }
    }
    if (best >= 0) {
      taken[best] = true;
      ++tp;
      // Recall rises by 1/n_gt; the step contributes precision * delta.
      ap += (static_cast<double>(tp) / static_cast<double>(tp + fp)) /
            static_cast<double>(n_gt);
    } else {
      ++fp;
    }
  }
  return ap;
}

double mean_ap(const std::vector<Video>& preds, const std::vector<Video>& gts,
               const std::vector<double>& thresholds) {
  std::set<int> classes;
  for (const Video& g : gts) {
    for (const Frame& f : g.frames) {
      if (!f.gt_boxes) continue;
      for (const GtBox& b : *f.gt_boxes) classes.insert(b.class_id);
    }
  }
  double total = 0.0;
  long count = 0;
  for (int c : classes) {
    for (double thr : thresholds) {
      const double ap = average_precision(preds, gts, c, thr);
      if (ap >= 0.0) {
        total += ap;
        ++count;
      }
    }
  }
  if (count == 0) throw std::invalid_argument("mean_ap: no evaluable class");
  return total / static_cast<double>(count);
}

double roc_auc(const std::vector<double>& scores,
               const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw std::invalid_argument("roc_auc: bad input");
  }
  const long n = static_cast<long>(scores.size());
  long n_pos = 0;
  for (int y : labels) {
    if (y != 0) ++n_pos;
  }
  const long n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw std::invalid_argument("roc_auc: single-class input");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  // Rank sum of positives with average ranks over ties.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) {
      ++j;
    }
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) +
                                   static_cast<double>(j + 1));
    for (std::size_t q = i; q <= j; ++q) {
      if (labels[order[q]] != 0) rank_sum += avg_rank;
    }
    i = j + 1;
  }
  const double u = rank_sum - 0.5 * static_cast<double>(n_pos) *
                                  (static_cast<double>(n_pos) + 1.0);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

EvalReport evaluate(const std::vector<Video>& preds,
                    const std::vector<Video>& gts, int calibration_bins) {
  EvalReport r;
  std::set<int> classes;
  for (const Video& g : gts) {
    for (const Frame& f : g.frames) {
      if (!f.gt_boxes) continue;
      for (const GtBox& b : *f.gt_boxes) classes.insert(b.class_id);
      r.n_gt += f.gt_boxes->size();
    }
  }
  const std::vector<double> thresholds = {0.5, 1.0, 2.0, 4.0};
  double total = 0.0;
  long count = 0;
  for (int c : classes) {
    for (double thr : thresholds) {
      const double ap = average_precision(preds, gts, c, thr);
      if (ap >= 0.0) {
        r.per_class_ap[c][thr] = ap;
        total += ap;
        ++count;
      }
    }
  }
  if (count == 0) throw std::invalid_argument("evaluate: no evaluable class");
  r.map = total / static_cast<double>(count);

  // Detection-level scores vs. matched labels for AUC / calibration error.
  std::vector<double> scores;
  std::vector<int> labels;
  for (const Video& pv : preds) {
    const Video* gv = find_gt(gts, pv.video_id);
    if (!gv) continue;
    for (std::size_t fi = 0; fi < pv.frames.size(); ++fi) {
      Frame merged = pv.frames[fi];
      merged.gt_boxes = gv->frames[fi].gt_boxes;
      const auto frame_labels = match_to_gt(merged);
      for (std::size_t di = 0; di < frame_labels.size(); ++di) {
        scores.push_back(
            std::clamp(pv.frames[fi].detections[di].score, 0.0, 1.0));
        labels.push_back(frame_labels[di].label);
      }
    }
  }
  r.n_detections = static_cast<long>(scores.size());
  r.auc = roc_auc(scores, labels);
  r.ece = ece(scores, labels, calibration_bins);
  return r;
}

std::string eval_report_to_json(const EvalReport& r) {
  json j;
  json per_class;
  for (const auto& [cls, row] : r.per_class_ap) {
    json jrow;
    for (const auto& [thr, ap] : row) {
      std::ostringstream key;
      key << thr;
      jrow[key.str()] = ap;
    }
    per_class[std::to_string(cls)] = std::move(jrow);
  }
  j["per_class_ap"] = std::move(per_class);
  j["map"] = r.map;
  j["auc"] = r.auc;
  j["ece"] = r.ece;
  j["n_detections"] = r.n_detections;
  j["n_gt"] = r.n_gt;
  return j.dump(2) + "\n";
}

std::string eval_report_to_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "class_id,threshold,ap\n";
  for (const auto& [cls, row] : r.per_class_ap) {
    for (const auto& [thr, ap] : row) {
      out << cls << ',' << thr << ',' << ap << '\n';
    }
  }
  return out.str();
}

}  // namespace tgssl
