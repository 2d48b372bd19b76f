#include "tgssl/gnn.hpp"

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

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
}  // namespace

int GnnParams::input_dim(int layer) {
  const int node_dim = layer == 0 ? 5 : kGnnHidden;
  return 2 * node_dim + 5;  // x_dst, x_src, edge feature
}

int GnnParams::update_in_dim(int layer) {
  const int node_dim = layer == 0 ? 5 : kGnnHidden;
  return node_dim + kGnnHidden;
}

int GnnParams::layer_out_dim(int layer) {
  return layer == kGnnLayers - 1 ? 1 : kGnnHidden;
}

std::size_t GnnParams::parameter_count() {
  std::size_t n = 0;
  for (int k = 0; k < kGnnLayers; ++k) {
    n += static_cast<std::size_t>(kGnnHidden) * input_dim(k) + kGnnHidden;
    n += static_cast<std::size_t>(layer_out_dim(k)) * update_in_dim(k) +
         layer_out_dim(k);
  }
  return n;
}

GnnParams GnnParams::zeros() {
  GnnParams p;
  p.layers.resize(kGnnLayers);
  for (int k = 0; k < kGnnLayers; ++k) {
    p.layers[k].w_msg = Eigen::MatrixXd::Zero(kGnnHidden, input_dim(k));
    p.layers[k].b_msg = Eigen::VectorXd::Zero(kGnnHidden);
    p.layers[k].w_upd = Eigen::MatrixXd::Zero(layer_out_dim(k), update_in_dim(k));
    p.layers[k].b_upd = Eigen::VectorXd::Zero(layer_out_dim(k));
  }
  return p;
}

void GnnParams::check_shapes() const {
  if (layers.size() != kGnnLayers) {
    throw std::invalid_argument("gnn params: wrong layer count");
  }
  for (int k = 0; k < kGnnLayers; ++k) {
    const auto& l = layers[k];
    if (l.w_msg.rows() != kGnnHidden || l.w_msg.cols() != input_dim(k) ||
        l.b_msg.size() != kGnnHidden ||
        l.w_upd.rows() != layer_out_dim(k) ||
        l.w_upd.cols() != update_in_dim(k) ||
        l.b_upd.size() != layer_out_dim(k)) {
      throw std::invalid_argument("gnn params: shape mismatch at layer " +
                                  std::to_string(k));
    }
  }
}

std::vector<double> GnnParams::to_vector() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& l : layers) {
    flat.insert(flat.end(), l.w_msg.data(), l.w_msg.data() + l.w_msg.size());
    flat.insert(flat.end(), l.b_msg.data(), l.b_msg.data() + l.b_msg.size());
    flat.insert(flat.end(), l.w_upd.data(), l.w_upd.data() + l.w_upd.size());
    flat.insert(flat.end(), l.b_upd.data(), l.b_upd.data() + l.b_upd.size());
  }
  return flat;
}

GnnParams GnnParams::from_vector(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) {
    throw std::invalid_argument("gnn params: wrong flat size");
  }
  GnnParams p = zeros();
  std::size_t off = 0;
  for (auto& l : p.layers) {
    std::copy_n(flat.begin() + off, l.w_msg.size(), l.w_msg.data());
    off += l.w_msg.size();
    std::copy_n(flat.begin() + off, l.b_msg.size(), l.b_msg.data());
    off += l.b_msg.size();
    std::copy_n(flat.begin() + off, l.w_upd.size(), l.w_upd.data());
    off += l.w_upd.size();
    std::copy_n(flat.begin() + off, l.b_upd.size(), l.b_upd.data());
    off += l.b_upd.size();
  }
  return p;
}

GnnParams init_params(std::uint64_t seed) {
  Rng rng(seed);
  GnnParams p = GnnParams::zeros();
  for (int k = 0; k < kGnnLayers; ++k) {
    auto& l = p.layers[k];
    const double bm = std::sqrt(6.0 / GnnParams::input_dim(k));
    for (Eigen::Index i = 0; i < l.w_msg.size(); ++i) {
      l.w_msg.data()[i] = rng.uniform(-bm, bm);
    }
    const double bu = std::sqrt(6.0 / GnnParams::update_in_dim(k));
    for (Eigen::Index i = 0; i < l.w_upd.size(); ++i) {
      l.w_upd.data()[i] = rng.uniform(-bu, bu);
    }
  }
  return p;
}

Eigen::VectorXd gnn_forward(const VideoGraph& g, const GnnParams& params,
                            GnnForwardCache* cache) {
  params.check_shapes();
  const int n = static_cast<int>(g.nodes.size());
  const int m = static_cast<int>(g.edges.size());

  GnnForwardCache local;
  GnnForwardCache& c = cache ? *cache : local;
  c.x.assign(kGnnLayers + 1, {});
  c.msg.assign(kGnnLayers, {});
  c.agg.assign(kGnnLayers, {});

  Eigen::MatrixXd x(n, 5);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < 5; ++k) x(i, k) = g.nodes[i].feature[k];
  }
  c.x[0] = x;

  for (int k = 0; k < kGnnLayers; ++k) {
    const auto& l = params.layers[k];
    const Eigen::MatrixXd& prev = c.x[k];
    const int prev_dim = static_cast<int>(prev.cols());
    const int out_dim = GnnParams::layer_out_dim(k);

    // Messages along every directed edge: ReLU(W * [x_dst; x_src; e] + b).
    Eigen::MatrixXd msg(m, kGnnHidden);
    Eigen::VectorXd in(GnnParams::input_dim(k));
    for (int e = 0; e < m; ++e) {
      const GraphEdge& edge = g.edges[e];
      in.head(prev_dim) = prev.row(edge.dst).transpose();
      in.segment(prev_dim, prev_dim) = prev.row(edge.src).transpose();
      for (int q = 0; q < 5; ++q) in(2 * prev_dim + q) = edge.feature[q];
      msg.row(e) =
          (l.w_msg * in + l.b_msg).cwiseMax(0.0).transpose();
    }
    c.msg[k] = msg;

    // Mean aggregation over in-edges; isolated nodes aggregate to zero.
    Eigen::MatrixXd agg = Eigen::MatrixXd::Zero(n, kGnnHidden);
    for (int i = 0; i < n; ++i) {
      const auto& incoming = g.in_edges[i];
      if (incoming.empty()) continue;
      for (int e : incoming) agg.row(i) += msg.row(e);
      agg.row(i) /= static_cast<double>(incoming.size());
    }
    c.agg[k] = agg;

    Eigen::MatrixXd next(n, out_dim);
    Eigen::VectorXd uin(GnnParams::update_in_dim(k));
    for (int i = 0; i < n; ++i) {
      uin.head(prev_dim) = prev.row(i).transpose();
      uin.tail(kGnnHidden) = agg.row(i).transpose();
      Eigen::VectorXd z = l.w_upd * uin + l.b_upd;
      if (k == kGnnLayers - 1) {
        next(i, 0) = sigmoid(z(0));
      } else {
        next.row(i) = z.cwiseMax(0.0).transpose();
      }
    }
    c.x[k + 1] = next;
  }
  return c.x[kGnnLayers].col(0);
}

GnnParams gnn_backward(const VideoGraph& g, const GnnParams& params,
                       const Eigen::VectorXd& upstream,
                       const GnnForwardCache& cache) {
  params.check_shapes();
  const int n = static_cast<int>(g.nodes.size());
  if (upstream.size() != n) {
    throw std::invalid_argument("gnn_backward: upstream size mismatch");
  }
  if (cache.x.size() != kGnnLayers + 1 || cache.x[0].rows() != n) {
    throw std::invalid_argument("gnn_backward: cache does not match graph");
  }

  GnnParams grad = GnnParams::zeros();
  Eigen::MatrixXd dx = upstream;  // n x 1 at the output

  for (int k = kGnnLayers - 1; k >= 0; --k) {
    const auto& l = params.layers[k];
    const Eigen::MatrixXd& prev = cache.x[k];
    const Eigen::MatrixXd& out = cache.x[k + 1];
    const int prev_dim = static_cast<int>(prev.cols());
    const int out_dim = GnnParams::layer_out_dim(k);
    auto& gl = grad.layers[k];

    // Through the update activation.
    Eigen::MatrixXd dz(n, out_dim);
    if (k == kGnnLayers - 1) {
      for (int i = 0; i < n; ++i) {
        const double s = out(i, 0);
        dz(i, 0) = dx(i, 0) * s * (1.0 - s);
      }
    } else {
      for (int i = 0; i < n; ++i) {
        for (int q = 0; q < out_dim; ++q) {
          dz(i, q) = out(i, q) > 0.0 ? dx(i, q) : 0.0;
        }
      }
    }

    // Through the update network.
    Eigen::MatrixXd dprev = Eigen::MatrixXd::Zero(n, prev_dim);
    Eigen::MatrixXd dagg = Eigen::MatrixXd::Zero(n, kGnnHidden);
    Eigen::VectorXd uin(GnnParams::update_in_dim(k));
    for (int i = 0; i < n; ++i) {
      uin.head(prev_dim) = prev.row(i).transpose();
      uin.tail(kGnnHidden) = cache.agg[k].row(i).transpose();
      const Eigen::VectorXd dzi = dz.row(i).transpose();
      gl.w_upd.noalias() += dzi * uin.transpose();
      gl.b_upd += dzi;
      const Eigen::VectorXd dcat = l.w_upd.transpose() * dzi;
      dprev.row(i) += dcat.head(prev_dim).transpose();
      dagg.row(i) += dcat.tail(kGnnHidden).transpose();
    }

    // Through mean aggregation and the message network.
    Eigen::VectorXd min_(GnnParams::input_dim(k));
    for (int i = 0; i < n; ++i) {
      const auto& incoming = g.in_edges[i];
      if (incoming.empty()) continue;
      const double inv_deg = 1.0 / static_cast<double>(incoming.size());
      for (int e : incoming) {
        const GraphEdge& edge = g.edges[e];
        Eigen::VectorXd dmsg =
            (dagg.row(i) * inv_deg).transpose();
        for (int q = 0; q < kGnnHidden; ++q) {
          if (cache.msg[k](e, q) <= 0.0) dmsg(q) = 0.0;
        }
        min_.head(prev_dim) = prev.row(edge.dst).transpose();
        min_.segment(prev_dim, prev_dim) = prev.row(edge.src).transpose();
        for (int q = 0; q < 5; ++q) min_(2 * prev_dim + q) = edge.feature[q];
        gl.w_msg.noalias() += dmsg * min_.transpose();
        gl.b_msg += dmsg;
        const Eigen::VectorXd dcat = l.w_msg.transpose() * dmsg;
        dprev.row(edge.dst) += dcat.head(prev_dim).transpose();
        dprev.row(edge.src) += dcat.segment(prev_dim, prev_dim).transpose();
      }
    }

    dx = dprev;
  }
  return grad;
}

double node_bce(const VideoGraph& g, const Eigen::VectorXd& scores) {
  if (!g.has_labels()) throw std::invalid_argument("node_bce: no labels");
  double total = 0.0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const double s = std::clamp(scores(i), kProbEps, 1.0 - kProbEps);
    const double y = g.labels[i].label;
    total += -(y * std::log(s) + (1.0 - y) * std::log(1.0 - s));
  }
  return scores.size() > 0 ? total / static_cast<double>(scores.size()) : 0.0;
}

namespace {

// Accumulates the BCE gradient for one labeled graph; returns (sum of
// per-node BCE, node count). The parameter gradient is scaled by the caller.
std::pair<double, long> accumulate_bce_grad(const VideoGraph& g,
                                            const GnnParams& params,
                                            std::vector<double>& grad_flat) {
  GnnForwardCache cache;
  const Eigen::VectorXd scores = gnn_forward(g, params, &cache);
  const long n = scores.size();
  Eigen::VectorXd upstream(n);
  double loss_sum = 0.0;
  for (long i = 0; i < n; ++i) {
    const double s = std::clamp(scores(i), kProbEps, 1.0 - kProbEps);
    const double y = g.labels[i].label;
    loss_sum += -(y * std::log(s) + (1.0 - y) * std::log(1.0 - s));
    upstream(i) = (s - y) / (s * (1.0 - s));
  }
  const GnnParams grad = gnn_backward(g, params, upstream, cache);
  const std::vector<double> gflat = grad.to_vector();
  for (std::size_t i = 0; i < gflat.size(); ++i) grad_flat[i] += gflat[i];
  return {loss_sum, n};
}

}  // namespace

GnnTrainResult train_gnn_epochs(
    const std::function<std::vector<const VideoGraph*>(int)>& provider,
    int epochs, const TrainConfig& cfg, const GnnParams* init) {
  if (!(cfg.learning_rate > 0.0) || cfg.batch_videos < 1) {
    throw std::invalid_argument("train_gnn: invalid config");
  }
  GnnParams params = init ? *init : init_params(cfg.seed);
  params.check_shapes();

  std::vector<double> flat = params.to_vector();
  Adam opt(flat.size(), cfg.learning_rate, cfg.beta1, cfg.beta2);
  GnnTrainResult result;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    const std::vector<const VideoGraph*> graphs = provider(epoch);
    if (graphs.empty()) throw std::invalid_argument("train_gnn: no graphs");
    for (const VideoGraph* g : graphs) {
      if (!g->has_labels()) {
        throw std::invalid_argument("train_gnn: graph without labels");
      }
    }
    std::vector<std::size_t> order(graphs.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = Rng::stream(cfg.seed, 0x5u + epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);
    }

    double epoch_loss = 0.0;
    long epoch_nodes = 0;
    std::size_t pos = 0;
    std::vector<double> grad_flat(flat.size());
    while (pos < order.size()) {
      const std::size_t end =
          std::min(order.size(), pos + static_cast<std::size_t>(cfg.batch_videos));
      std::fill(grad_flat.begin(), grad_flat.end(), 0.0);
      const GnnParams cur = GnnParams::from_vector(flat);
      double batch_loss = 0.0;
      long batch_nodes = 0;
      for (std::size_t bi = pos; bi < end; ++bi) {
        const auto [loss_sum, n] =
            accumulate_bce_grad(*graphs[order[bi]], cur, grad_flat);
        batch_loss += loss_sum;
        batch_nodes += n;
      }
      if (batch_nodes > 0) {
        const double inv = 1.0 / static_cast<double>(batch_nodes);
        for (double& gv : grad_flat) gv *= inv;
        opt.step(flat, grad_flat);
        epoch_loss += batch_loss;
        epoch_nodes += batch_nodes;
      }
      pos = end;
    }
    result.epoch_loss.push_back(
        epoch_nodes > 0 ? epoch_loss / static_cast<double>(epoch_nodes) : 0.0);
  }
  result.params = GnnParams::from_vector(flat);
  return result;
}

GnnTrainResult train_gnn(const std::vector<VideoGraph>& graphs,
                         const TrainConfig& cfg, const GnnParams* init) {
  if (graphs.empty()) throw std::invalid_argument("train_gnn: empty set");
  std::vector<const VideoGraph*> ptrs;
  ptrs.reserve(graphs.size());
  for (const auto& g : graphs) ptrs.push_back(&g);
  return train_gnn_epochs([&](int) { return ptrs; }, cfg.epochs, cfg, init);
}

void save_gnn_params(const GnnParams& p, const std::string& path) {
  p.check_shapes();
  json layers = json::array();
  for (const auto& l : p.layers) {
    json lj;
    auto mat = [](const Eigen::MatrixXd& w) {
      json rows = json::array();
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < w.cols(); ++c) row.push_back(w(r, c));
        rows.push_back(std::move(row));
      }
      return rows;
    };
    auto vec = [](const Eigen::VectorXd& v) {
      json out = json::array();
      for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
      return out;
    };
    lj["w_msg"] = mat(l.w_msg);
    lj["b_msg"] = vec(l.b_msg);
    lj["w_upd"] = mat(l.w_upd);
    lj["b_upd"] = vec(l.b_upd);
    layers.push_back(std::move(lj));
  }
  json j;
  j["layers"] = std::move(layers);
  write_text_file(path, j.dump() + "\n");
}

GnnParams load_gnn_params(const std::string& path) {
  const json j = json::parse(read_text_file(path));
  GnnParams p = GnnParams::zeros();
  const json& layers = j.at("layers");
  if (layers.size() != kGnnLayers) {
    throw std::runtime_error("gnn params file: wrong layer count");
  }
  for (int k = 0; k < kGnnLayers; ++k) {
    auto& l = p.layers[k];
    const json& lj = layers[k];
    const json& wm = lj.at("w_msg");
    for (Eigen::Index r = 0; r < l.w_msg.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.w_msg.cols(); ++c) {
        l.w_msg(r, c) = wm.at(r).at(c).get<double>();
      }
    }
    const json& bm = lj.at("b_msg");
    for (Eigen::Index i = 0; i < l.b_msg.size(); ++i) {
      l.b_msg(i) = bm.at(i).get<double>();
    }
    const json& wu = lj.at("w_upd");
    for (Eigen::Index r = 0; r < l.w_upd.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.w_upd.cols(); ++c) {
        l.w_upd(r, c) = wu.at(r).at(c).get<double>();
      }
    }
    const json& bu = lj.at("b_upd");
    for (Eigen::Index i = 0; i < l.b_upd.size(); ++i) {
      l.b_upd(i) = bu.at(i).get<double>();
    }
  }
  p.check_shapes();
  return p;
}

}  // namespace tgssl
