#pragma once

#include <Eigen/Dense>
#include <vector>

#include "tgssl/calibration.hpp"
#include "tgssl/graph.hpp"
#include "tgssl/types.hpp"

namespace tgssl {

/// Teacher output for one detection: the candidate box with a calibrated
/// score and its entropy uncertainty. Positive polarity when the calibrated
/// score exceeds 0.5.
struct PseudoLabel {
  int det_id = 0;
  int frame_idx = 0;
  Box3D box;
  int class_id = 0;
  double calibrated_score = 0.0;
  double uncertainty = 0.0;

  bool positive() const { return calibrated_score > 0.5; }
};

enum class RegWeightMode {
  kAsWritten,  // weight = u (uncertainty scales the regression term up)
  kInverse,    // weight = 1 - u
};

struct LossConfig {
  double focusing_k = 2.0;
  RegWeightMode reg_weight_mode = RegWeightMode::kAsWritten;
  double smooth_l1_delta = 1.0;
  /// Ablation switch: when false, both loss terms use weight 1 regardless
  /// of uncertainty.
  bool uncertainty_weighting = true;
};

/// One pseudo label per graph node; scores must align with graph.nodes.
std::vector<PseudoLabel> make_pseudo_labels(const VideoGraph& graph,
                                            const Eigen::VectorXd& gnn_scores,
                                            const CalibrationMap& cal);

/// Uncertainty-weighted classification loss:
///   -(1-u)^k log(p)     when the pseudo label is positive,
///   -(1-u)^k log(1-p)   when negative,
///   0                   at exactly 0.5 (the weight vanishes there anyway).
/// p is clamped to [1e-7, 1 - 1e-7].
double cls_loss(double p, const PseudoLabel& pl, double k);

double smooth_l1(double x, double delta);

/// Weighted smooth-L1 over the 7 box residuals (x, y, z, w, l, h, yaw) from
/// pred_box to the pseudo-label box, yaw wrapped. Only meaningful for
/// positive-polarity labels; throws otherwise.
double reg_loss(const Box3D& pred_box, const PseudoLabel& pl,
                const LossConfig& cfg);

struct StudentPrediction {
  double p = 0.5;  // probability the detection is a true object
  Box3D box;       // refined box
};

/// Mean classification loss over every pseudo label plus mean regression
/// loss over the positive ones.
double semi_loss(const std::vector<StudentPrediction>& preds,
                 const std::vector<PseudoLabel>& pls, const LossConfig& cfg);

/// Pseudo labels for one video, aligned with its detections flattened
/// frame-major (the `.pl.json` sidecar consumed by train-student).
void save_pseudo_labels(const std::vector<PseudoLabel>& pls,
                        const std::string& video_id, const std::string& path);
std::vector<PseudoLabel> load_pseudo_labels(const std::string& path);

}  // namespace tgssl
