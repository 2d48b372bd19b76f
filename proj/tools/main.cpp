// Command-line front end: dataset simulation, graph building, training,
// calibration, baselines, evaluation, and the full self-training loop.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "tgssl/calibration.hpp"
#include "tgssl/flicker.hpp"
#include "tgssl/gnn.hpp"
#include "tgssl/io.hpp"
#include "tgssl/metrics.hpp"
#include "tgssl/pipeline.hpp"
#include "tgssl/simworld.hpp"
#include "tgssl/ssl_loss.hpp"
#include "tgssl/student.hpp"

namespace fs = std::filesystem;
using namespace tgssl;

namespace {

std::vector<std::string> list_files(const std::string& dir,
                                    const std::string& suffix) {
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string p = entry.path().string();
    if (p.size() >= suffix.size() &&
        p.compare(p.size() - suffix.size(), suffix.size(), suffix) == 0) {
      out.push_back(p);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> load_number_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<double> out;
  double x;
  while (in >> x) out.push_back(x);
  return out;
}

RegWeightMode parse_reg_mode(const std::string& mode) {
  if (mode == "as_written") return RegWeightMode::kAsWritten;
  if (mode == "inverse") return RegWeightMode::kInverse;
  throw CLI::ValidationError("--reg-mode must be as_written or inverse");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"temporal-graph semi-supervised detection toolkit"};
  app.require_subcommand(1);

  // ---- simulate ----
  auto* sim = app.add_subcommand("simulate", "generate a benchmark dataset");
  std::string sim_out;
  int sim_labeled = 10, sim_unlabeled = 50, sim_heldout = 10;
  std::uint64_t sim_seed = 0;
  std::string sim_config;
  sim->add_option("--out", sim_out, "output directory")->required();
  sim->add_option("--labeled", sim_labeled, "labeled video count");
  sim->add_option("--unlabeled", sim_unlabeled, "unlabeled video count");
  sim->add_option("--heldout", sim_heldout, "held-out video count");
  sim->add_option("--seed", sim_seed, "random seed");
  sim->add_option("--config", sim_config, "world config JSON file");
  sim->callback([&] {
    WorldConfig cfg;
    if (!sim_config.empty()) cfg = load_world_config(sim_config);
    cfg.seed = sim_seed;
    make_benchmark(sim_labeled, sim_unlabeled, sim_heldout, cfg, sim_out);
    std::cout << "wrote " << (sim_labeled + sim_unlabeled + sim_heldout)
              << " videos under " << sim_out << "\n";
  });

  // ---- build-graph ----
  auto* bg = app.add_subcommand("build-graph", "build a temporal graph");
  std::string bg_video, bg_out;
  GraphBuildConfig bg_cfg;
  bg->add_option("--video", bg_video, "input video JSONL")->required();
  bg->add_option("--out", bg_out, "output graph JSON")->required();
  bg->add_option("--threshold", bg_cfg.dist_threshold, "distance threshold (m)");
  bg->add_option("--radius", bg_cfg.temporal_radius, "temporal radius (frames)");
  bg->add_flag("--eq1-literal", bg_cfg.eq1_literal,
               "project with the literal printed sign convention");
  bg->callback([&] {
    const Video v = load_video(bg_video);
    VideoGraph g = build_graph(v, bg_cfg);
    if (v.labeled) attach_labels(g, v);
    save_graph(g, bg_out);
    std::cout << g.nodes.size() << " nodes, " << g.edges.size() << " edges\n";
  });

  // ---- train-gnn ----
  auto* tg = app.add_subcommand("train-gnn", "train the rescoring network");
  std::string tg_graphs, tg_videos, tg_out, tg_init, tg_augment = "off";
  TrainConfig tg_cfg;
  tg_cfg.epochs = 50;
  tg->add_option("--graphs", tg_graphs, "directory of labeled graph JSON");
  tg->add_option("--videos", tg_videos, "directory of labeled video JSONL");
  tg->add_option("--out", tg_out, "output params JSON")->required();
  tg->add_option("--epochs", tg_cfg.epochs, "training epochs");
  tg->add_option("--lr", tg_cfg.learning_rate, "learning rate");
  tg->add_option("--batch", tg_cfg.batch_videos, "videos per step");
  tg->add_option("--seed", tg_cfg.seed, "random seed");
  tg->add_option("--init", tg_init, "warm-start params JSON");
  tg->add_option("--augment", tg_augment,
                 "on|off; requires --videos (augmentation rebuilds graphs)");
  tg->callback([&] {
    if (tg_graphs.empty() == tg_videos.empty()) {
      throw CLI::ValidationError("pass exactly one of --graphs / --videos");
    }
    GnnParams init;
    const GnnParams* init_ptr = nullptr;
    if (!tg_init.empty()) {
      init = load_gnn_params(tg_init);
      init_ptr = &init;
    }
    GnnTrainResult result;
    if (!tg_graphs.empty()) {
      if (tg_augment == "on") {
        throw CLI::ValidationError("--augment on requires --videos");
      }
      std::vector<VideoGraph> graphs;
      for (const auto& p : list_files(tg_graphs, ".json")) {
        graphs.push_back(load_graph(p));
      }
      result = train_gnn(graphs, tg_cfg, init_ptr);
    } else {
      std::vector<Video> videos;
      for (const auto& p : list_files(tg_videos, ".jsonl")) {
        videos.push_back(load_video(p));
      }
      SslConfig ssl;
      ssl.seed = tg_cfg.seed;
      ssl.learning_rate = tg_cfg.learning_rate;
      ssl.gnn_batch_videos = tg_cfg.batch_videos;
      ssl.augment = tg_augment == "on";
      // Reuse the pipeline's labeled-split trainer for the augmented path.
      std::vector<VideoGraph> graphs;
      if (!ssl.augment) {
        for (const Video& v : videos) {
          VideoGraph g = build_graph(v, ssl.graph);
          attach_labels(g, v, ssl.match);
          graphs.push_back(std::move(g));
        }
        TrainConfig tc = tg_cfg;
        result = train_gnn(graphs, tc, init_ptr);
      } else {
        result = train_gnn_on_labeled_videos(videos, ssl, tg_cfg.epochs,
                                             init_ptr);
      }
    }
    save_gnn_params(result.params, tg_out);
    std::cout << "final epoch loss "
              << (result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back())
              << "\n";
  });

  // ---- calibrate ----
  auto* cal = app.add_subcommand("calibrate", "fit histogram binning");
  std::string cal_scores, cal_labels, cal_out;
  int cal_bins = 10;
  cal->add_option("--scores", cal_scores, "file with one score per line")
      ->required();
  cal->add_option("--labels", cal_labels, "file with one 0/1 label per line")
      ->required();
  cal->add_option("--bins", cal_bins, "bin count");
  cal->add_option("--out", cal_out, "output map JSON")->required();
  cal->callback([&] {
    const auto scores = load_number_lines(cal_scores);
    const auto label_vals = load_number_lines(cal_labels);
    std::vector<int> labels(label_vals.size());
    for (std::size_t i = 0; i < label_vals.size(); ++i) {
      labels[i] = label_vals[i] != 0.0 ? 1 : 0;
    }
    const CalibrationMap map = fit_binning(scores, labels, cal_bins);
    save_calibration(map, cal_out);
    std::cout << "ece before calibration: " << ece(scores, labels, cal_bins)
              << "\n";
  });

  // ---- train-student ----
  auto* ts = app.add_subcommand("train-student", "train the rescoring student");
  std::string ts_labeled, ts_pseudo, ts_out, ts_init, ts_reg_mode = "as_written";
  StudentTrainConfig ts_cfg;
  ts->add_option("--labeled", ts_labeled, "directory of labeled videos")
      ->required();
  ts->add_option("--pseudo", ts_pseudo,
                 "directory of <video>.jsonl + <video>.pl.json pairs");
  ts->add_option("--k", ts_cfg.loss.focusing_k, "focusing parameter");
  ts->add_option("--reg-mode", ts_reg_mode, "as_written|inverse");
  ts->add_option("--epochs", ts_cfg.epochs, "training epochs");
  ts->add_option("--lr", ts_cfg.learning_rate, "learning rate");
  ts->add_option("--seed", ts_cfg.seed, "random seed");
  ts->add_option("--init", ts_init, "warm-start params JSON");
  ts->add_option("--out", ts_out, "output params JSON")->required();
  ts->callback([&] {
    ts_cfg.loss.reg_weight_mode = parse_reg_mode(ts_reg_mode);
    std::vector<Video> labeled;
    for (const auto& p : list_files(ts_labeled, ".jsonl")) {
      labeled.push_back(load_video(p));
    }
    std::vector<const Video*> labeled_ptrs;
    for (const Video& v : labeled) labeled_ptrs.push_back(&v);

    std::vector<Video> pseudo_videos;
    std::vector<std::vector<PseudoLabel>> pseudo_labels;
    if (!ts_pseudo.empty()) {
      for (const auto& p : list_files(ts_pseudo, ".pl.json")) {
        const std::string stem = p.substr(0, p.size() - 8);  // drop .pl.json
        pseudo_videos.push_back(load_video(stem + ".jsonl"));
        pseudo_labels.push_back(load_pseudo_labels(p));
      }
    }
    std::vector<PseudoVideo> pseudo;
    for (std::size_t i = 0; i < pseudo_videos.size(); ++i) {
      pseudo.push_back({&pseudo_videos[i], &pseudo_labels[i]});
    }
    StudentParams init;
    const StudentParams* init_ptr = nullptr;
    if (!ts_init.empty()) {
      init = load_student(ts_init);
      init_ptr = &init;
    }
    const StudentTrainResult result =
        train_student(labeled_ptrs, pseudo, ts_cfg, init_ptr);
    save_student(result.params, ts_out);
    std::cout << "final epoch loss "
              << (result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back())
              << "\n";
  });

  // ---- baseline-flicker ----
  auto* fl = app.add_subcommand("baseline-flicker",
                                "temporal-consistency rescoring baseline");
  std::string fl_video, fl_out;
  int fl_radius = 4;
  double fl_threshold = 10.0;
  fl->add_option("--video", fl_video, "input video JSONL")->required();
  fl->add_option("--out", fl_out, "output video JSONL")->required();
  fl->add_option("--radius", fl_radius, "temporal radius (frames)");
  fl->add_option("--threshold", fl_threshold, "distance threshold (m)");
  fl->callback([&] {
    save_video(flicker_rescore(load_video(fl_video), fl_radius, fl_threshold),
               fl_out);
  });

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "detection evaluation");
  std::string ev_pred, ev_gt, ev_out;
  ev->add_option("--pred", ev_pred, "directory of prediction videos")
      ->required();
  ev->add_option("--gt", ev_gt, "directory of labeled ground-truth videos")
      ->required();
  ev->add_option("--out", ev_out, "output metrics JSON")->required();
  ev->callback([&] {
    std::vector<Video> preds, gts;
    for (const auto& p : list_files(ev_pred, ".jsonl")) {
      preds.push_back(load_video(p));
    }
    for (const auto& p : list_files(ev_gt, ".jsonl")) {
      gts.push_back(load_video(p));
    }
    if (preds.empty() || gts.empty()) {
      throw std::runtime_error("eval: missing prediction or ground truth files");
    }
    const EvalReport report = evaluate(preds, gts);
    write_text_file(ev_out, eval_report_to_json(report));
    const fs::path csv = fs::path(ev_out).replace_extension(".csv");
    write_text_file(csv.string(), eval_report_to_csv(report));
    std::cout << "mAP " << report.map << ", AUC " << report.auc << ", ECE "
              << report.ece << "\n";
  });

  // ---- run-ssl ----
  auto* ssl = app.add_subcommand("run-ssl", "gradual self-training loop");
  std::string ssl_manifest, ssl_out_dir, ssl_reg_mode = "as_written",
              ssl_uncertainty = "on", ssl_augment = "on";
  SslConfig ssl_cfg;
  bool ssl_dump_pseudo = false;
  ssl->add_option("--manifest", ssl_manifest, "dataset manifest JSON")
      ->required();
  ssl->add_option("--iterations", ssl_cfg.iterations, "refinement iterations");
  ssl->add_option("--ema-alpha", ssl_cfg.ema_alpha, "teacher EMA coefficient");
  ssl->add_option("--k", ssl_cfg.loss.focusing_k, "focusing parameter");
  ssl->add_option("--seed", ssl_cfg.seed, "random seed");
  ssl->add_option("--out-dir", ssl_out_dir, "report directory")->required();
  ssl->add_option("--reg-mode", ssl_reg_mode, "as_written|inverse");
  ssl->add_option("--uncertainty", ssl_uncertainty,
                  "on|off (off = unweighted pseudo labels)");
  ssl->add_option("--augment", ssl_augment, "on|off graph augmentation");
  ssl->add_flag("--dump-pseudo", ssl_dump_pseudo,
                "write pseudo-label sidecars per iteration");
  ssl->callback([&] {
    ssl_cfg.loss.reg_weight_mode = parse_reg_mode(ssl_reg_mode);
    ssl_cfg.loss.uncertainty_weighting = ssl_uncertainty != "off";
    ssl_cfg.augment = ssl_augment != "off";
    ssl_cfg.dump_pseudo_labels = ssl_dump_pseudo;
    const BenchmarkManifest manifest = load_manifest(ssl_manifest);
    const auto reports = run_ssl(manifest, ssl_cfg, ssl_out_dir);
    for (const auto& r : reports) {
      std::cout << "iter " << r.iteration;
      if (r.heldout_map) std::cout << " heldout mAP " << *r.heldout_map;
      if (r.gnn_node_auc) std::cout << " gnn AUC " << *r.gnn_node_auc;
      std::cout << "\n";
    }
  });

  CLI11_PARSE(app, argc, argv);
  return 0;
}
