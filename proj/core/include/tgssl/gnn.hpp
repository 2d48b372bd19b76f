#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tgssl/graph.hpp"

namespace tgssl {

inline constexpr int kGnnLayers = 4;
inline constexpr int kGnnHidden = 8;

/// Per-layer weights: a message network applied to
/// concat(x_dst, x_src, edge_feature) and an update network applied to
/// concat(x_node, aggregated_message). Layer outputs are ReLU except the
/// last, which is a 1-dim sigmoid producing the refined score.
struct GnnLayerParams {
  Eigen::MatrixXd w_msg;  // kGnnHidden x msg_in
  Eigen::VectorXd b_msg;
  Eigen::MatrixXd w_upd;  // out x (prev_dim + kGnnHidden)
  Eigen::VectorXd b_upd;
};

struct GnnParams {
  std::vector<GnnLayerParams> layers;  // size kGnnLayers

  static int input_dim(int layer);     // message net input width
  static int update_in_dim(int layer);
  static int layer_out_dim(int layer);
  static std::size_t parameter_count();

  std::vector<double> to_vector() const;
  static GnnParams from_vector(const std::vector<double>& flat);
  static GnnParams zeros();

  /// Throws std::invalid_argument when any matrix deviates from the fixed
  /// architecture.
  void check_shapes() const;
};

/// Uniform(+-sqrt(6 / fan_in)) weights, zero biases.
GnnParams init_params(std::uint64_t seed);

/// Intermediate activations kept for the backward pass.
struct GnnForwardCache {
  std::vector<Eigen::MatrixXd> x;    // x[0..kGnnLayers], nodes x dim
  std::vector<Eigen::MatrixXd> msg;  // per layer, edges x kGnnHidden (post-ReLU)
  std::vector<Eigen::MatrixXd> agg;  // per layer, nodes x kGnnHidden
};

/// Refined per-node scores in (0, 1). Aggregation is the elementwise mean
/// over in-edges, zero for isolated nodes.
Eigen::VectorXd gnn_forward(const VideoGraph& g, const GnnParams& params,
                            GnnForwardCache* cache = nullptr);

/// Exact reverse-mode gradients of sum_i upstream_i * score_i with respect
/// to every weight and bias. cache must come from gnn_forward on the same
/// graph and params.
GnnParams gnn_backward(const VideoGraph& g, const GnnParams& params,
                       const Eigen::VectorXd& upstream,
                       const GnnForwardCache& cache);

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_videos = 50;
  int epochs = 5;          // 50 is the usual choice for initial training
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::uint64_t seed = 0;
};

struct GnnTrainResult {
  GnnParams params;
  std::vector<double> epoch_loss;  // mean per-node BCE per epoch
};

/// Minimizes mean binary cross-entropy of node scores against attached
/// labels. Deterministic under cfg.seed (fixed shuffling and reduction
/// order). Every graph must carry labels.
GnnTrainResult train_gnn(const std::vector<VideoGraph>& graphs,
                         const TrainConfig& cfg,
                         const GnnParams* init = nullptr);

/// Same trainer, but the graph set is re-drawn each epoch (used for
/// augmented training). provider(epoch) returns the graphs for that epoch;
/// optimizer state persists across epochs.
GnnTrainResult train_gnn_epochs(
    const std::function<std::vector<const VideoGraph*>(int)>& provider,
    int epochs, const TrainConfig& cfg, const GnnParams* init = nullptr);

/// Mean BCE of `scores` against graph labels (test/diagnostic helper).
double node_bce(const VideoGraph& g, const Eigen::VectorXd& scores);

void save_gnn_params(const GnnParams& p, const std::string& path);
GnnParams load_gnn_params(const std::string& path);

}  // namespace tgssl
