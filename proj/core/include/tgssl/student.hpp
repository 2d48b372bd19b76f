#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "tgssl/matching.hpp"
#include "tgssl/ssl_loss.hpp"
#include "tgssl/types.hpp"

namespace tgssl {

inline constexpr int kStudentFeatureDim = 6;
inline constexpr int kBoxResidualDim = 7;

/// Single-frame rescoring and box-refinement model standing in for a full
/// detector: a logistic head p = sigmoid(w . f + b) over standardized
/// per-detection features and a linear residual head predicting a 7-dim box
/// correction. feat_mean / feat_scale are fitted once on the initial labeled
/// split and frozen; they are model preprocessing, not trainable weights.
struct StudentParams {
  Eigen::VectorXd w;      // kStudentFeatureDim
  double b = 0.0;
  Eigen::MatrixXd w_reg;  // kBoxResidualDim x kStudentFeatureDim
  Eigen::VectorXd feat_mean;   // kStudentFeatureDim
  Eigen::VectorXd feat_scale;  // kStudentFeatureDim, > 0

  static StudentParams zeros();
  static std::size_t parameter_count();
  /// Trainable weights only; the frozen normalizer is not part of the
  /// optimizer/EMA state.
  std::vector<double> to_vector() const;
  StudentParams with_vector(const std::vector<double>& flat) const;
};

/// Raw features: (logit of the raw score, normalized point count, w, l, h,
/// planar range to the origin).
Eigen::VectorXd student_features(const Detection& d);

/// Per-feature mean / standard deviation over every detection of the given
/// videos (deviation floored away from zero).
void fit_feature_normalizer(const std::vector<const Video*>& videos,
                            StudentParams& params);

StudentPrediction student_predict(const StudentParams& params,
                                  const Detection& d);

/// Detection copies with student scores (and refined boxes when
/// refine_boxes) written back.
Video apply_student(const StudentParams& params, const Video& v,
                    bool refine_boxes = true);

struct StudentTrainConfig {
  double learning_rate = 1e-3;
  int batch_frames = 4;
  int epochs = 5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::uint64_t seed = 0;
  MatchConfig match;
  LossConfig loss;
};

/// One unlabeled video plus the teacher's pseudo labels, aligned with the
/// video's detections flattened frame-major.
struct PseudoVideo {
  const Video* video = nullptr;
  const std::vector<PseudoLabel>* labels = nullptr;
};

struct StudentTrainResult {
  StudentParams params;
  std::vector<double> epoch_loss;
};

/// Supervised loss (BCE against greedy GT matches plus smooth-L1 on matched
/// residuals) on labeled videos, uncertainty-weighted semi-supervised loss
/// on pseudo-labeled ones. Adam, frame batches, deterministic under seed.
StudentTrainResult train_student(const std::vector<const Video*>& labeled,
                                 const std::vector<PseudoVideo>& pseudo,
                                 const StudentTrainConfig& cfg,
                                 const StudentParams* init = nullptr);

/// Loss and flat gradient of one batch; exposed for gradient checking.
struct StudentBatchItem {
  const Detection* det = nullptr;
  // Supervised target when pl == nullptr, pseudo target otherwise.
  const GtLabel* gt = nullptr;
  const PseudoLabel* pl = nullptr;
};
double student_loss_and_grad(const StudentParams& params,
                             const std::vector<StudentBatchItem>& batch,
                             const LossConfig& loss,
                             std::vector<double>* grad_out);

void save_student(const StudentParams& p, const std::string& path);
StudentParams load_student(const std::string& path);

}  // namespace tgssl
