#include "tgssl/student.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "tgssl/adam.hpp"
#include "tgssl/io.hpp"
#include "tgssl/rng.hpp"

using nlohmann::json;

namespace tgssl {

namespace {
constexpr double kProbEps = 1e-7;
constexpr double kLogitEps = 1e-6;
constexpr double kMinSize = 0.05;

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double smooth_l1_grad(double x, double delta) {
  if (x > delta) return 1.0;
  if (x < -delta) return -1.0;
  return x / delta;
}

std::array<double, 7> box_residual(const Box3D& target, const Box3D& base) {
  return {target.center[0] - base.center[0], target.center[1] - base.center[1],
          target.center[2] - base.center[2], target.size[0] - base.size[0],
          target.size[1] - base.size[1],     target.size[2] - base.size[2],
          wrap_angle(target.yaw - base.yaw)};
}

}  // namespace

StudentParams StudentParams::zeros() {
  StudentParams p;
  p.w = Eigen::VectorXd::Zero(kStudentFeatureDim);
  p.b = 0.0;
  p.w_reg = Eigen::MatrixXd::Zero(kBoxResidualDim, kStudentFeatureDim);
  p.feat_mean = Eigen::VectorXd::Zero(kStudentFeatureDim);
  p.feat_scale = Eigen::VectorXd::Ones(kStudentFeatureDim);
  return p;
}

std::size_t StudentParams::parameter_count() {
  return kStudentFeatureDim + 1 +
         static_cast<std::size_t>(kBoxResidualDim) * kStudentFeatureDim;
}

std::vector<double> StudentParams::to_vector() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  flat.insert(flat.end(), w.data(), w.data() + w.size());
  flat.push_back(b);
  flat.insert(flat.end(), w_reg.data(), w_reg.data() + w_reg.size());
  return flat;
}

StudentParams StudentParams::with_vector(const std::vector<double>& flat) const {
  if (flat.size() != parameter_count()) {
    throw std::invalid_argument("student params: wrong flat size");
  }
  StudentParams p = *this;
  std::copy_n(flat.begin(), p.w.size(), p.w.data());
  p.b = flat[kStudentFeatureDim];
  std::copy_n(flat.begin() + kStudentFeatureDim + 1, p.w_reg.size(),
              p.w_reg.data());
  return p;
}

Eigen::VectorXd student_features(const Detection& d) {
  Eigen::VectorXd f(kStudentFeatureDim);
  const double s = std::clamp(d.score, kLogitEps, 1.0 - kLogitEps);
  f(0) = std::log(s / (1.0 - s));
  f(1) = std::min(1.0, d.num_points / 2000.0);
  f(2) = d.box.size[0];
  f(3) = d.box.size[1];
  f(4) = d.box.size[2];
  f(5) = planar_range(d.box.center);
  return f;
}

void fit_feature_normalizer(const std::vector<const Video*>& videos,
                            StudentParams& params) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(kStudentFeatureDim);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(kStudentFeatureDim);
  long n = 0;
  for (const Video* v : videos) {
    for (const Frame& fr : v->frames) {
      for (const Detection& d : fr.detections) {
        const Eigen::VectorXd f = student_features(d);
        sum += f;
        sum_sq += f.cwiseProduct(f);
        ++n;
      }
    }
  }
  if (n == 0) {
    params.feat_mean = Eigen::VectorXd::Zero(kStudentFeatureDim);
    params.feat_scale = Eigen::VectorXd::Ones(kStudentFeatureDim);
    return;
  }
  params.feat_mean = sum / static_cast<double>(n);
  for (int i = 0; i < kStudentFeatureDim; ++i) {
    const double var = sum_sq(i) / static_cast<double>(n) -
                       params.feat_mean(i) * params.feat_mean(i);
    params.feat_scale(i) = std::sqrt(std::max(var, 1e-12));
    if (params.feat_scale(i) < 1e-6) params.feat_scale(i) = 1.0;
  }
}

namespace {
Eigen::VectorXd normalized_features(const StudentParams& params,
                                    const Detection& d) {
  return (student_features(d) - params.feat_mean)
      .cwiseQuotient(params.feat_scale);
}
}  // namespace

StudentPrediction student_predict(const StudentParams& params,
                                  const Detection& d) {
  const Eigen::VectorXd f = normalized_features(params, d);
  StudentPrediction out;
  out.p = sigmoid(params.w.dot(f) + params.b);
  const Eigen::VectorXd r = params.w_reg * f;
  out.box = d.box;
  out.box.center[0] += r(0);
  out.box.center[1] += r(1);
  out.box.center[2] += r(2);
  out.box.size[0] += r(3);
  out.box.size[1] += r(4);
  out.box.size[2] += r(5);
  out.box.yaw = wrap_angle(out.box.yaw + r(6));
  return out;
}

Video apply_student(const StudentParams& params, const Video& v,
                    bool refine_boxes) {
  Video out = v;
  for (Frame& f : out.frames) {
    for (Detection& d : f.detections) {
      const StudentPrediction pred = student_predict(params, d);
      d.score = pred.p;
      if (refine_boxes) {
        d.box = pred.box;
        for (double& s : d.box.size) s = std::max(s, kMinSize);
      }
    }
  }
  return out;
}

double student_loss_and_grad(const StudentParams& params,
                             const std::vector<StudentBatchItem>& batch,
                             const LossConfig& loss,
                             std::vector<double>* grad_out) {
  long sup_cls = 0, sup_reg = 0, pl_cls = 0, pl_reg = 0;
  for (const auto& item : batch) {
    if (item.pl) {
      ++pl_cls;
      if (item.pl->positive()) ++pl_reg;
    } else {
      ++sup_cls;
      if (item.gt && item.gt->label == 1) ++sup_reg;
    }
  }

  Eigen::VectorXd gw = Eigen::VectorXd::Zero(kStudentFeatureDim);
  double gb = 0.0;
  Eigen::MatrixXd greg =
      Eigen::MatrixXd::Zero(kBoxResidualDim, kStudentFeatureDim);
  double total = 0.0;

  for (const auto& item : batch) {
    const Detection& d = *item.det;
    const Eigen::VectorXd f = normalized_features(params, d);
    const double z = params.w.dot(f) + params.b;
    const double p = sigmoid(z);
    const double pc = std::clamp(p, kProbEps, 1.0 - kProbEps);
    const Eigen::VectorXd rhat = params.w_reg * f;

    double dz = 0.0;
    if (item.pl) {
      const PseudoLabel& pl = *item.pl;
      const double inv_cls = 1.0 / static_cast<double>(pl_cls);
      if (loss.uncertainty_weighting) {
        total += inv_cls * cls_loss(p, pl, loss.focusing_k);
        if (pl.calibrated_score != 0.5) {
          const double weight =
              std::pow(1.0 - pl.uncertainty, loss.focusing_k);
          dz = inv_cls * weight * (pl.positive() ? p - 1.0 : p);
        }
      } else {
        total += inv_cls * (pl.positive() ? -std::log(pc) : -std::log(1.0 - pc));
        dz = inv_cls * (pl.positive() ? p - 1.0 : p);
      }
      if (pl.positive() && pl_reg > 0) {
        const double inv_reg = 1.0 / static_cast<double>(pl_reg);
        double weight = 1.0;
        if (loss.uncertainty_weighting) {
          weight = loss.reg_weight_mode == RegWeightMode::kAsWritten
                       ? pl.uncertainty
                       : 1.0 - pl.uncertainty;
        }
        const auto target = box_residual(pl.box, d.box);
        for (int j = 0; j < kBoxResidualDim; ++j) {
          const double r = j == 6 ? wrap_angle(target[j] - rhat(j))
                                  : target[j] - rhat(j);
          total += inv_reg * weight * smooth_l1(r, loss.smooth_l1_delta);
          const double dr =
              -inv_reg * weight * smooth_l1_grad(r, loss.smooth_l1_delta);
          greg.row(j) += dr * f.transpose();
        }
      }
    } else {
      const GtLabel& gt = *item.gt;
      const double y = gt.label;
      const double inv_cls = 1.0 / static_cast<double>(sup_cls);
      total += inv_cls * -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
      dz = inv_cls * (p - y);
      if (gt.label == 1 && sup_reg > 0) {
        const double inv_reg = 1.0 / static_cast<double>(sup_reg);
        for (int j = 0; j < kBoxResidualDim; ++j) {
          const double r = j == 6 ? wrap_angle(gt.residuals[j] - rhat(j))
                                  : gt.residuals[j] - rhat(j);
          total += inv_reg * smooth_l1(r, loss.smooth_l1_delta);
          const double dr = -inv_reg * smooth_l1_grad(r, loss.smooth_l1_delta);
          greg.row(j) += dr * f.transpose();
        }
      }
    }
    gw += dz * f;
    gb += dz;
  }

  if (grad_out) {
    StudentParams g = StudentParams::zeros();
    g.w = gw;
    g.b = gb;
    g.w_reg = greg;
    *grad_out = g.to_vector();
  }
  return total;
}

StudentTrainResult train_student(const std::vector<const Video*>& labeled,
                                 const std::vector<PseudoVideo>& pseudo,
                                 const StudentTrainConfig& cfg,
                                 const StudentParams* init) {
  if (labeled.empty()) {
    throw std::invalid_argument("train_student: no labeled videos");
  }
  if (!(cfg.learning_rate > 0.0) || cfg.batch_frames < 1) {
    throw std::invalid_argument("train_student: invalid config");
  }

  // Flattened frame units. Label storage must outlive the batches.
  std::vector<std::vector<GtLabel>> gt_store;
  struct FrameUnit {
    std::vector<StudentBatchItem> items;
  };
  std::vector<FrameUnit> units;

  for (const Video* v : labeled) {
    for (const Frame& f : v->frames) {
      gt_store.push_back(match_to_gt(f, cfg.match));
    }
  }
  std::size_t store_pos = 0;
  for (const Video* v : labeled) {
    for (const Frame& f : v->frames) {
      const auto& labels = gt_store[store_pos++];
      FrameUnit unit;
      for (std::size_t di = 0; di < f.detections.size(); ++di) {
        unit.items.push_back({&f.detections[di], &labels[di], nullptr});
      }
      if (!unit.items.empty()) units.push_back(std::move(unit));
    }
  }
  for (const PseudoVideo& pv : pseudo) {
    if (!pv.video || !pv.labels) continue;
    if (pv.labels->size() != pv.video->detection_count()) {
      throw std::invalid_argument("train_student: pseudo labels misaligned");
    }
    std::size_t off = 0;
    for (const Frame& f : pv.video->frames) {
      FrameUnit unit;
      for (std::size_t di = 0; di < f.detections.size(); ++di) {
        unit.items.push_back(
            {&f.detections[di], nullptr, &(*pv.labels)[off + di]});
      }
      off += f.detections.size();
      if (!unit.items.empty()) units.push_back(std::move(unit));
    }
  }

  StudentParams params = init ? *init : StudentParams::zeros();
  if (!init) fit_feature_normalizer(labeled, params);
  std::vector<double> flat = params.to_vector();
  Adam opt(flat.size(), cfg.learning_rate, cfg.beta1, cfg.beta2);
  StudentTrainResult result;

  std::vector<std::size_t> order(units.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = Rng::stream(cfg.seed, 0x54d3u + epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);
    }
    double epoch_loss = 0.0;
    long batches = 0;
    std::size_t pos = 0;
    std::vector<double> grad;
    while (pos < order.size()) {
      const std::size_t end = std::min(
          order.size(), pos + static_cast<std::size_t>(cfg.batch_frames));
      std::vector<StudentBatchItem> batch;
      for (std::size_t ui = pos; ui < end; ++ui) {
        const auto& items = units[order[ui]].items;
        batch.insert(batch.end(), items.begin(), items.end());
      }
      pos = end;
      if (batch.empty()) continue;
      const StudentParams cur = params.with_vector(flat);
      epoch_loss += student_loss_and_grad(cur, batch, cfg.loss, &grad);
      opt.step(flat, grad);
      ++batches;
    }
    result.epoch_loss.push_back(batches > 0 ? epoch_loss / batches : 0.0);
  }
  result.params = params.with_vector(flat);
  return result;
}

void save_student(const StudentParams& p, const std::string& path) {
  json j;
  j["w"] = std::vector<double>(p.w.data(), p.w.data() + p.w.size());
  j["b"] = p.b;
  json rows = json::array();
  for (Eigen::Index r = 0; r < p.w_reg.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < p.w_reg.cols(); ++c) {
      row.push_back(p.w_reg(r, c));
    }
    rows.push_back(std::move(row));
  }
  j["w_reg"] = std::move(rows);
  j["feat_mean"] = std::vector<double>(p.feat_mean.data(),
                                       p.feat_mean.data() + p.feat_mean.size());
  j["feat_scale"] = std::vector<double>(
      p.feat_scale.data(), p.feat_scale.data() + p.feat_scale.size());
  write_text_file(path, j.dump() + "\n");
}

StudentParams load_student(const std::string& path) {
  const json j = json::parse(read_text_file(path));
  StudentParams p = StudentParams::zeros();
  const auto w = j.at("w").get<std::vector<double>>();
  if (w.size() != kStudentFeatureDim) {
    throw std::runtime_error("student file: wrong feature width");
  }
  for (int i = 0; i < kStudentFeatureDim; ++i) p.w(i) = w[i];
  p.b = j.at("b").get<double>();
  const json& rows = j.at("w_reg");
  if (rows.size() != kBoxResidualDim) {
    throw std::runtime_error("student file: wrong residual rows");
  }
  for (int r = 0; r < kBoxResidualDim; ++r) {
    for (int c = 0; c < kStudentFeatureDim; ++c) {
      p.w_reg(r, c) = rows.at(r).at(c).get<double>();
    }
  }
  if (j.contains("feat_mean")) {
    const auto mean = j["feat_mean"].get<std::vector<double>>();
    const auto scale = j.at("feat_scale").get<std::vector<double>>();
    if (mean.size() != kStudentFeatureDim || scale.size() != kStudentFeatureDim) {
      throw std::runtime_error("student file: wrong normalizer width");
    }
    for (int i = 0; i < kStudentFeatureDim; ++i) {
      p.feat_mean(i) = mean[i];
      p.feat_scale(i) = scale[i];
    }
  }
  return p;
}

}  // namespace tgssl
