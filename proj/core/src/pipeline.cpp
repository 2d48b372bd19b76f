#include "tgssl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "tgssl/flicker.hpp"
#include "tgssl/io.hpp"
#include "tgssl/metrics.hpp"
#include "tgssl/parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tgssl {

StudentParams ema_update(const StudentParams& teacher,
                         const StudentParams& student, double alpha) {
  if (teacher.w.size() != student.w.size() ||
      teacher.w_reg.rows() != student.w_reg.rows() ||
      teacher.w_reg.cols() != student.w_reg.cols()) {
    throw std::invalid_argument("ema_update: shape mismatch");
  }
  if (teacher.feat_mean != student.feat_mean ||
      teacher.feat_scale != student.feat_scale) {
    throw std::invalid_argument("ema_update: feature normalizers differ");
  }
  const std::vector<double> t = teacher.to_vector();
  const std::vector<double> s = student.to_vector();
  std::vector<double> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    out[i] = alpha * s[i] + (1.0 - alpha) * t[i];
  }
  return teacher.with_vector(out);
}

Video refine(const Video& v, const GnnParams& params,
             const CalibrationMap* cal, const GraphBuildConfig& graph_cfg) {
  if (v.frames.empty()) throw std::invalid_argument("refine: empty video");
  if (v.refined) {
    throw std::invalid_argument("refine: video already refined once");
  }
  const VideoGraph g = build_graph(v, graph_cfg);
  const Eigen::VectorXd scores = gnn_forward(g, params);
  Video out = v;
  std::size_t node = 0;
  for (Frame& f : out.frames) {
    for (Detection& d : f.detections) {
      double s = scores(static_cast<Eigen::Index>(node++));
      if (cal) s = apply_binning(*cal, s);
      d.score = s;
    }
  }
  out.refined = true;
  return out;
}

namespace {

struct LoadedDataset {
  std::vector<Video> labeled;
  std::vector<Video> unlabeled;
  std::vector<Video> heldout;
  bool sealed_available = false;
  std::vector<Video> sealed_unlabeled;  // aligned with unlabeled
  std::vector<Video> sealed_heldout;    // aligned with heldout
};

LoadedDataset load_dataset(const BenchmarkManifest& m) {
  LoadedDataset d;
  const fs::path root(m.root);
  for (const auto& rel : m.labeled) {
    d.labeled.push_back(load_video((root / rel).string()));
  }
  for (const auto& rel : m.unlabeled) {
    d.unlabeled.push_back(load_video((root / rel).string()));
  }
  for (const auto& rel : m.heldout) {
    d.heldout.push_back(load_video((root / rel).string()));
  }
  if (d.labeled.empty()) {
    throw std::invalid_argument("run_ssl: labeled split is empty");
  }
  // The sealed sidecar is evaluation-only; its absence must not affect
  // training, so probe rather than require.
  auto sealed_path = [&](const std::string& rel) {
    return root / m.sealed_dir / fs::path(rel).filename();
  };
  d.sealed_available = true;
  for (const auto& rel : m.unlabeled) {
    if (!fs::exists(sealed_path(rel))) d.sealed_available = false;
  }
  for (const auto& rel : m.heldout) {
    if (!fs::exists(sealed_path(rel))) d.sealed_available = false;
  }
  if (d.sealed_available) {
    for (const auto& rel : m.unlabeled) {
      d.sealed_unlabeled.push_back(load_video(sealed_path(rel).string()));
    }
    for (const auto& rel : m.heldout) {
      d.sealed_heldout.push_back(load_video(sealed_path(rel).string()));
    }
  }
  return d;
}

// The teacher detector pass: rescored scores and refined boxes, the
// candidate set the temporal graph is built from.
std::vector<Video> rescore_with(const StudentParams& teacher,
                                const std::vector<Video>& videos) {
  std::vector<Video> out(videos.size());
  parallel_for(videos.size(), [&](std::size_t i) {
    out[i] = apply_student(teacher, videos[i], /*refine_boxes=*/true);
  });
  return out;
}

std::vector<VideoGraph> build_graphs(const std::vector<Video>& videos,
                                     const GraphBuildConfig& cfg) {
  std::vector<VideoGraph> out(videos.size());
  parallel_for(videos.size(), [&](std::size_t i) {
    out[i] = build_graph(videos[i], cfg);
  });
  return out;
}

/// Node labels for diagnostics, via the sealed ground truth.
std::vector<int> node_labels_from_sealed(const Video& video,
                                         const Video& sealed,
                                         const MatchConfig& match) {
  std::vector<int> labels;
  for (std::size_t fi = 0; fi < video.frames.size(); ++fi) {
    Frame merged = video.frames[fi];
    merged.gt_boxes = sealed.frames[fi].gt_boxes;
    for (const GtLabel& l : match_to_gt(merged, match)) {
      labels.push_back(l.label);
    }
  }
  return labels;
}

double node_auc(const std::vector<Video>& videos,
                const std::vector<Video>& sealed,
                const std::vector<Eigen::VectorXd>& scores,
                const MatchConfig& match) {
  std::vector<double> s;
  std::vector<int> y;
  for (std::size_t vi = 0; vi < videos.size(); ++vi) {
    const auto labels = node_labels_from_sealed(videos[vi], sealed[vi], match);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      s.push_back(scores[vi](static_cast<Eigen::Index>(i)));
      y.push_back(labels[i]);
    }
  }
  return roc_auc(s, y);
}

double score_auc(const std::vector<Video>& videos,
                 const std::vector<Video>& sealed, const MatchConfig& match) {
  std::vector<Eigen::VectorXd> scores(videos.size());
  for (std::size_t vi = 0; vi < videos.size(); ++vi) {
    Eigen::VectorXd sv(videos[vi].detection_count());
    Eigen::Index k = 0;
    for (const Frame& f : videos[vi].frames) {
      for (const Detection& d : f.detections) sv(k++) = d.score;
    }
    scores[vi] = std::move(sv);
  }
  return node_auc(videos, sealed, scores, match);
}

}  // namespace

GnnTrainResult train_gnn_on_labeled_videos(
    const std::vector<Video>& labeled_videos, const SslConfig& cfg,
    int epochs, const GnnParams* init, std::uint64_t seed_salt) {
  std::vector<VideoGraph> base = build_graphs(labeled_videos, cfg.graph);
  for (std::size_t i = 0; i < base.size(); ++i) {
    attach_labels(base[i], labeled_videos[i], cfg.match);
  }

  TrainConfig tc;
  tc.learning_rate = cfg.learning_rate;
  tc.batch_videos = cfg.gnn_batch_videos;
  tc.seed = mix_seed(cfg.seed, seed_salt);

  if (!cfg.augment) {
    std::vector<const VideoGraph*> ptrs;
    for (const auto& g : base) ptrs.push_back(&g);
    return train_gnn_epochs([&](int) { return ptrs; }, epochs, tc, init);
  }

  // Each epoch trains on the original graphs plus fresh augmented variants
  // per video (copy-paste from a random other labeled video, trim, noise).
  // Storage lives for the duration of the epoch.
  constexpr int kVariantsPerEpoch = 2;
  std::vector<VideoGraph> epoch_storage;
  const bool donors_ok = [&] {
    for (const auto& v : labeled_videos) {
      if (video_trajectories(v).empty()) return false;
    }
    return true;
  }();

  auto provider = [&, donors_ok](int epoch) {
    std::vector<const VideoGraph*> ptrs;
    for (const auto& g : base) ptrs.push_back(&g);
    if (!donors_ok) return ptrs;
    const std::size_t n_aug = labeled_videos.size() * kVariantsPerEpoch;
    epoch_storage.clear();
    epoch_storage.reserve(n_aug);
    std::vector<Video> augmented(n_aug);
    parallel_for(n_aug, [&](std::size_t ai) {
      const std::size_t vi = ai % labeled_videos.size();
      Rng rng = Rng::stream(mix_seed(cfg.seed, seed_salt ^ 0xa06u),
                            static_cast<std::uint64_t>(epoch) * 8191u + ai);
      std::size_t donor = rng.uniform_int(labeled_videos.size());
      augmented[ai] = augment_video(labeled_videos[vi], labeled_videos[donor],
                                    cfg.augment_cfg, rng);
    });
    for (std::size_t ai = 0; ai < augmented.size(); ++ai) {
      VideoGraph g = build_graph(augmented[ai], cfg.graph);
      attach_labels(g, augmented[ai], cfg.match);
      epoch_storage.push_back(std::move(g));
    }
    for (const auto& g : epoch_storage) ptrs.push_back(&g);
    return ptrs;
  };
  return train_gnn_epochs(provider, epochs, tc, init);
}

namespace {

json report_to_json_obj(const IterationReport& r) {
  json j;
  j["iteration"] = r.iteration;
  j["activated_unlabeled"] = r.activated_unlabeled;
  j["pseudo_label_count"] = r.pseudo_label_count;
  j["mean_uncertainty"] =
      r.mean_uncertainty ? json(*r.mean_uncertainty) : json(nullptr);
  j["student_loss"] = r.student_loss;
  j["gnn_loss"] = r.gnn_loss;
  j["heldout_map"] = r.heldout_map ? json(*r.heldout_map) : json(nullptr);
  j["gnn_node_auc"] = r.gnn_node_auc ? json(*r.gnn_node_auc) : json(nullptr);
  j["raw_node_auc"] = r.raw_node_auc ? json(*r.raw_node_auc) : json(nullptr);
  j["flicker_node_auc"] =
      r.flicker_node_auc ? json(*r.flicker_node_auc) : json(nullptr);
  return j;
}

}  // namespace

std::string iteration_report_to_json(const IterationReport& r) {
  return report_to_json_obj(r).dump(2) + "\n";
}

std::vector<IterationReport> run_ssl(const BenchmarkManifest& manifest,
                                     const SslConfig& cfg,
                                     const std::string& out_dir) {
  if (cfg.iterations < 0 || cfg.unlabeled_fraction_per_iter <= 0.0 ||
      cfg.unlabeled_fraction_per_iter > 1.0) {
    throw std::invalid_argument("run_ssl: invalid config");
  }
  LoadedDataset data = load_dataset(manifest);
  const std::size_t n_unlabeled = data.unlabeled.size();

  std::vector<IterationReport> reports;

  // Initialization: supervised student, teacher copy, GNN on labeled graphs.
  StudentTrainConfig stc;
  stc.learning_rate = cfg.learning_rate;
  stc.batch_frames = cfg.student_batch_frames;
  stc.epochs = cfg.init_student_epochs;
  stc.seed = mix_seed(cfg.seed, 1);
  stc.match = cfg.match;
  stc.loss = cfg.loss;
  std::vector<const Video*> labeled_ptrs;
  for (const Video& v : data.labeled) labeled_ptrs.push_back(&v);
  StudentTrainResult student = train_student(labeled_ptrs, {}, stc, nullptr);
  StudentParams teacher = student.params;

  GnnTrainResult gnn = train_gnn_on_labeled_videos(
      data.labeled, cfg, cfg.init_gnn_epochs, nullptr, 2);

  auto evaluate_iteration = [&](IterationReport& r, const StudentParams& st,
                                const GnnParams& gp,
                                const std::vector<Video>& heldout_for_gnn) {
    if (!data.sealed_available || data.heldout.empty()) return;
    // Student detection quality on held-out videos.
    std::vector<Video> rescored(data.heldout.size());
    parallel_for(data.heldout.size(), [&](std::size_t i) {
      rescored[i] = apply_student(st, data.heldout[i], /*refine_boxes=*/true);
    });
    r.heldout_map = mean_ap(rescored, data.sealed_heldout);

    // Node-level diagnostics on held-out graphs.
    const auto graphs = build_graphs(heldout_for_gnn, cfg.graph);
    std::vector<Eigen::VectorXd> gnn_scores(graphs.size());
    parallel_for(graphs.size(), [&](std::size_t i) {
      gnn_scores[i] = gnn_forward(graphs[i], gp);
    });
    r.gnn_node_auc =
        node_auc(heldout_for_gnn, data.sealed_heldout, gnn_scores, cfg.match);
    r.raw_node_auc = score_auc(data.heldout, data.sealed_heldout, cfg.match);
    std::vector<Video> flickered(data.heldout.size());
    parallel_for(data.heldout.size(), [&](std::size_t i) {
      flickered[i] = flicker_rescore(data.heldout[i], cfg.graph.temporal_radius,
                                     cfg.graph.dist_threshold);
    });
    r.flicker_node_auc =
        score_auc(flickered, data.sealed_heldout, cfg.match);
  };

  {
    IterationReport r0;
    r0.iteration = 0;
    r0.student_loss = student.epoch_loss;
    r0.gnn_loss = gnn.epoch_loss;
    evaluate_iteration(r0, student.params, gnn.params, data.heldout);
    reports.push_back(std::move(r0));
  }

  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    IterationReport r;
    r.iteration = iter;

    const int activated = static_cast<int>(std::min<double>(
        static_cast<double>(n_unlabeled),
        std::ceil(cfg.unlabeled_fraction_per_iter * iter *
                      static_cast<double>(n_unlabeled) -
                  1e-9)));
    r.activated_unlabeled = activated;

    // Teacher pass over the active unlabeled videos: rescore with the EMA
    // detector, rebuild graphs, refine with the GNN.
    std::vector<Video> active(data.unlabeled.begin(),
                              data.unlabeled.begin() + activated);
    const std::vector<Video> active_rescored = rescore_with(teacher, active);
    const auto active_graphs = build_graphs(active_rescored, cfg.graph);
    std::vector<Eigen::VectorXd> active_scores(active_graphs.size());
    parallel_for(active_graphs.size(), [&](std::size_t i) {
      active_scores[i] = gnn_forward(active_graphs[i], gnn.params);
    });

    // Calibration is fitted on the labeled split run through the same
    // teacher pipeline (the only split with ground truth).
    const std::vector<Video> labeled_rescored =
        rescore_with(teacher, data.labeled);
    auto labeled_graphs = build_graphs(labeled_rescored, cfg.graph);
    std::vector<double> cal_scores;
    std::vector<int> cal_labels;
    for (std::size_t i = 0; i < labeled_graphs.size(); ++i) {
      attach_labels(labeled_graphs[i], labeled_rescored[i], cfg.match);
      const Eigen::VectorXd s = gnn_forward(labeled_graphs[i], gnn.params);
      for (Eigen::Index k = 0; k < s.size(); ++k) {
        cal_scores.push_back(s(k));
        cal_labels.push_back(labeled_graphs[i].labels[k].label);
      }
    }
    const CalibrationMap cal =
        fit_binning(cal_scores, cal_labels, cfg.calibration_bins);

    // Pseudo labels, aligned with the pristine unlabeled videos.
    std::vector<std::vector<PseudoLabel>> pseudo_labels(active_graphs.size());
    double u_sum = 0.0;
    long u_count = 0;
    for (std::size_t i = 0; i < active_graphs.size(); ++i) {
      pseudo_labels[i] =
          make_pseudo_labels(active_graphs[i], active_scores[i], cal);
      for (const PseudoLabel& pl : pseudo_labels[i]) {
        u_sum += pl.uncertainty;
        ++u_count;
      }
    }
    r.pseudo_label_count = u_count;
    if (u_count > 0) r.mean_uncertainty = u_sum / u_count;

    if (cfg.dump_pseudo_labels && !out_dir.empty()) {
      const fs::path dir =
          fs::path(out_dir) / ("pseudo_iter_" + std::to_string(iter));
      fs::create_directories(dir);
      for (std::size_t i = 0; i < pseudo_labels.size(); ++i) {
        save_pseudo_labels(pseudo_labels[i], active[i].video_id,
                           (dir / (active[i].video_id + ".pl.json")).string());
        save_video(active[i], (dir / (active[i].video_id + ".jsonl")).string());
      }
    }

    // Student: supervised + uncertainty-weighted semi-supervised loss.
    std::vector<PseudoVideo> pseudo_set;
    for (std::size_t i = 0; i < pseudo_labels.size(); ++i) {
      pseudo_set.push_back({&active[i], &pseudo_labels[i]});
    }
    stc.epochs = cfg.student_epochs;
    stc.seed = mix_seed(cfg.seed, 100 + iter);
    StudentTrainResult st =
        train_student(labeled_ptrs, pseudo_set, stc, &student.params);
    student.params = st.params;
    r.student_loss = st.epoch_loss;

    teacher = ema_update(teacher, student.params, cfg.ema_alpha);

    // Refresh the temporal network on labeled graphs rebuilt from the
    // updated teacher's rescored detections.
    const std::vector<Video> teacher_labeled =
        rescore_with(teacher, data.labeled);
    GnnTrainResult gt = train_gnn_on_labeled_videos(
        teacher_labeled, cfg, cfg.gnn_epochs, &gnn.params, 200 + iter);
    gnn.params = gt.params;
    r.gnn_loss = gt.epoch_loss;

    evaluate_iteration(r, student.params, gnn.params,
                       rescore_with(teacher, data.heldout));
    reports.push_back(std::move(r));
  }

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    for (const auto& r : reports) {
      write_text_file((fs::path(out_dir) /
                       ("report_iter_" + std::to_string(r.iteration) + ".json"))
                          .string(),
                      iteration_report_to_json(r));
    }
    std::ostringstream csv;
    csv << "iteration,activated_unlabeled,pseudo_label_count,"
           "mean_uncertainty,heldout_map,gnn_node_auc,raw_node_auc,"
           "flicker_node_auc\n";
    auto cell = [](const std::optional<double>& v) {
      if (!v) return std::string();
      std::ostringstream s;
      s << *v;
      return s.str();
    };
    for (const auto& r : reports) {
      csv << r.iteration << ',' << r.activated_unlabeled << ','
          << r.pseudo_label_count << ',' << cell(r.mean_uncertainty) << ','
          << cell(r.heldout_map) << ',' << cell(r.gnn_node_auc) << ','
          << cell(r.raw_node_auc) << ',' << cell(r.flicker_node_auc) << '\n';
    }
    write_text_file((fs::path(out_dir) / "summary.csv").string(), csv.str());
  }
  return reports;
}

}  // namespace tgssl
