#include "tgssl/ssl_loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "tgssl/io.hpp"

namespace tgssl {

namespace {
constexpr double kProbEps = 1e-7;

double reg_weight(const PseudoLabel& pl, const LossConfig& cfg) {
  if (!cfg.uncertainty_weighting) return 1.0;
  return cfg.reg_weight_mode == RegWeightMode::kAsWritten
             ? pl.uncertainty
             : 1.0 - pl.uncertainty;
}
}  // namespace

std::vector<PseudoLabel> make_pseudo_labels(const VideoGraph& graph,
                                            const Eigen::VectorXd& gnn_scores,
                                            const CalibrationMap& cal) {
  if (gnn_scores.size() != static_cast<Eigen::Index>(graph.nodes.size())) {
    throw std::invalid_argument("make_pseudo_labels: score/node mismatch");
  }
  std::vector<PseudoLabel> out;
  out.reserve(graph.nodes.size());
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const GraphNode& n = graph.nodes[i];
    PseudoLabel pl;
    pl.det_id = n.det_id;
    pl.frame_idx = n.frame_idx;
    pl.box = n.box;
    pl.class_id = n.class_id;
    pl.calibrated_score = apply_binning(cal, gnn_scores(i));
    pl.uncertainty = entropy_uncertainty(pl.calibrated_score);
    out.push_back(std::move(pl));
  }
  return out;
}

double cls_loss(double p, const PseudoLabel& pl, double k) {
  if (k < 0.0) throw std::invalid_argument("cls_loss: k must be >= 0");
  const double pc = std::clamp(p, kProbEps, 1.0 - kProbEps);
  if (pl.calibrated_score == 0.5) return 0.0;
  const double weight = std::pow(1.0 - pl.uncertainty, k);
  return pl.calibrated_score > 0.5 ? -weight * std::log(pc)
                                   : -weight * std::log(1.0 - pc);
}

double smooth_l1(double x, double delta) {
  const double a = std::abs(x);
  return a <= delta ? 0.5 * x * x / delta : a - 0.5 * delta;
}

double reg_loss(const Box3D& pred_box, const PseudoLabel& pl,
                const LossConfig& cfg) {
  if (!pl.positive()) {
    throw std::invalid_argument("reg_loss: negative-polarity pseudo label");
  }
  const Box3D& t = pl.box;
  const std::array<double, 7> residual = {
      t.center[0] - pred_box.center[0], t.center[1] - pred_box.center[1],
      t.center[2] - pred_box.center[2], t.size[0] - pred_box.size[0],
      t.size[1] - pred_box.size[1],     t.size[2] - pred_box.size[2],
      wrap_angle(t.yaw - pred_box.yaw)};
  double total = 0.0;
  for (double r : residual) total += smooth_l1(r, cfg.smooth_l1_delta);
  return reg_weight(pl, cfg) * total;
}

double semi_loss(const std::vector<StudentPrediction>& preds,
                 const std::vector<PseudoLabel>& pls, const LossConfig& cfg) {
  if (preds.size() != pls.size()) {
    throw std::invalid_argument("semi_loss: prediction/label mismatch");
  }
  if (preds.empty()) throw std::invalid_argument("semi_loss: empty input");

  double cls_total = 0.0;
  double reg_total = 0.0;
  long reg_count = 0;
  for (std::size_t i = 0; i < pls.size(); ++i) {
    const PseudoLabel& pl = pls[i];
    if (cfg.uncertainty_weighting) {
      cls_total += cls_loss(preds[i].p, pl, cfg.focusing_k);
    } else {
      // Plain BCE against the hard polarity label.
      const double pc = std::clamp(preds[i].p, kProbEps, 1.0 - kProbEps);
      cls_total += pl.positive() ? -std::log(pc) : -std::log(1.0 - pc);
    }
    if (pl.positive()) {
      reg_total += reg_loss(preds[i].box, pl, cfg);
      ++reg_count;
    }
  }
  const double cls_mean = cls_total / static_cast<double>(pls.size());
  const double reg_mean =
      reg_count > 0 ? reg_total / static_cast<double>(reg_count) : 0.0;
  return cls_mean + reg_mean;
}

void save_pseudo_labels(const std::vector<PseudoLabel>& pls,
                        const std::string& video_id, const std::string& path) {
  using nlohmann::json;
  json labels = json::array();
  for (const PseudoLabel& pl : pls) {
    json lj;
    lj["det_id"] = pl.det_id;
    lj["frame_idx"] = pl.frame_idx;
    lj["class_id"] = pl.class_id;
    lj["calibrated_score"] = pl.calibrated_score;
    lj["uncertainty"] = pl.uncertainty;
    lj["center"] = {pl.box.center[0], pl.box.center[1], pl.box.center[2]};
    lj["size"] = {pl.box.size[0], pl.box.size[1], pl.box.size[2]};
    lj["yaw"] = pl.box.yaw;
    lj["velocity"] = {pl.box.velocity[0], pl.box.velocity[1]};
    labels.push_back(std::move(lj));
  }
  json j;
  j["video_id"] = video_id;
  j["labels"] = std::move(labels);
  write_text_file(path, j.dump() + "\n");
}

std::vector<PseudoLabel> load_pseudo_labels(const std::string& path) {
  using nlohmann::json;
  const json j = json::parse(read_text_file(path));
  std::vector<PseudoLabel> out;
  for (const json& lj : j.at("labels")) {
    PseudoLabel pl;
    pl.det_id = lj.at("det_id").get<int>();
    pl.frame_idx = lj.at("frame_idx").get<int>();
    pl.class_id = lj.at("class_id").get<int>();
    pl.calibrated_score = lj.at("calibrated_score").get<double>();
    pl.uncertainty = lj.at("uncertainty").get<double>();
    for (int k = 0; k < 3; ++k) {
      pl.box.center[k] = lj.at("center").at(k).get<double>();
      pl.box.size[k] = lj.at("size").at(k).get<double>();
    }
    pl.box.yaw = lj.at("yaw").get<double>();
    pl.box.velocity = {lj.at("velocity").at(0).get<double>(),
                       lj.at("velocity").at(1).get<double>()};
    out.push_back(std::move(pl));
  }
  return out;
}

}  // namespace tgssl
