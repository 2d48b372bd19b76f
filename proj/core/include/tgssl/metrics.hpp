#pragma once

#include <map>
#include <string>
#include <vector>

#include "tgssl/types.hpp"

namespace tgssl {

/// Exact area under the precision-recall step curve for one class at one
/// planar center-distance threshold. Detections are pooled across all
/// videos/frames, sorted by descending score, and greedily matched to the
/// nearest unmatched same-class ground-truth box in their frame.
/// Returns -1 when the class has no ground truth (excluded from the mean).
double average_precision(const std::vector<Video>& preds,
                         const std::vector<Video>& gts, int class_id,
                         double dist_threshold);

/// Mean of average_precision over every class present in the ground truth
/// and over the distance thresholds. Throws when no class is evaluable.
double mean_ap(const std::vector<Video>& preds, const std::vector<Video>& gts,
               const std::vector<double>& thresholds = {0.5, 1.0, 2.0, 4.0});

/// Mann-Whitney AUC with ties counted 1/2. Throws unless both classes are
/// present.
double roc_auc(const std::vector<double>& scores,
               const std::vector<int>& labels);

struct EvalReport {
  std::map<int, std::map<double, double>> per_class_ap;
  double map = 0.0;
  double auc = 0.0;  // detection scores vs. matched labels
  double ece = 0.0;
  long n_detections = 0;
  long n_gt = 0;
};

/// Full detection evaluation of prediction videos against labeled
/// ground-truth videos (paired by video_id).
EvalReport evaluate(const std::vector<Video>& preds,
                    const std::vector<Video>& gts, int calibration_bins = 10);

std::string eval_report_to_json(const EvalReport& r);
std::string eval_report_to_csv(const EvalReport& r);

}  // namespace tgssl
