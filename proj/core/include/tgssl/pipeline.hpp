#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tgssl/augment.hpp"
#include "tgssl/calibration.hpp"
#include "tgssl/gnn.hpp"
#include "tgssl/simworld.hpp"
#include "tgssl/ssl_loss.hpp"
#include "tgssl/student.hpp"

namespace tgssl {

struct SslConfig {
  double ema_alpha = 0.1;
  double unlabeled_fraction_per_iter = 0.2;
  int iterations = 2;
  int student_epochs = 5;
  int gnn_epochs = 5;
  std::uint64_t seed = 0;

  // Initialization protocol. The student surrogate is tiny, so a short
  // supervised warm-up leaves the gradual iterations with real training
  // left to do.
  int init_student_epochs = 1;
  int init_gnn_epochs = 50;

  int calibration_bins = 10;
  double learning_rate = 1e-3;
  /// One video per optimizer step; the labeled split is small enough that
  /// larger batches would leave the optimizer with almost no updates.
  int gnn_batch_videos = 1;
  int student_batch_frames = 4;

  bool augment = true;
  AugmentConfig augment_cfg;
  GraphBuildConfig graph;
  MatchConfig match;
  LossConfig loss;

  /// Also write pseudo_iter_{i}/<video>.pl.json next to the reports.
  bool dump_pseudo_labels = false;
};

struct IterationReport {
  int iteration = 0;
  int activated_unlabeled = 0;
  long pseudo_label_count = 0;
  std::optional<double> mean_uncertainty;
  std::vector<double> student_loss;
  std::vector<double> gnn_loss;
  // Evaluation fields are present only when the sealed ground-truth sidecar
  // exists; training never reads it.
  std::optional<double> heldout_map;
  std::optional<double> gnn_node_auc;
  std::optional<double> raw_node_auc;
  std::optional<double> flicker_node_auc;
};

/// Exponential-moving-average teacher update:
/// theta_T <- alpha * theta_S + (1 - alpha) * theta_T, elementwise.
StudentParams ema_update(const StudentParams& teacher,
                         const StudentParams& student, double alpha);

/// Temporal rescoring of one video: build the graph, run the network,
/// optionally calibrate, and write scores back onto the detections (boxes
/// untouched). Single application per video; throws if already refined.
Video refine(const Video& v, const GnnParams& params,
             const CalibrationMap* cal = nullptr,
             const GraphBuildConfig& graph_cfg = {});

/// GNN training over a labeled split with per-epoch augmentation: each
/// epoch sees the original graphs plus one fresh augmented variant per
/// video. The same routine run_ssl uses; exposed for the CLI.
GnnTrainResult train_gnn_on_labeled_videos(
    const std::vector<Video>& labeled_videos, const SslConfig& cfg,
    int epochs, const GnnParams* init = nullptr,
    std::uint64_t seed_salt = 2);

/// The full gradual self-training loop. Writes report_iter_{i}.json and
/// summary.csv under out_dir (when non-empty) and returns the reports,
/// index 0 being the supervised-only initialization.
std::vector<IterationReport> run_ssl(const BenchmarkManifest& manifest,
                                     const SslConfig& cfg,
                                     const std::string& out_dir = "");

std::string iteration_report_to_json(const IterationReport& r);

}  // namespace tgssl
