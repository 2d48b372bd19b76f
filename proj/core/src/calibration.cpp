#include "tgssl/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "tgssl/io.hpp"

using nlohmann::json;

namespace tgssl {

namespace {

void check_score(double s) {
  if (!(s >= 0.0 && s <= 1.0)) {
    throw std::invalid_argument("score outside [0, 1]");
  }
}

/// Neumaier compensated accumulator.
struct KahanSum {
  double sum = 0.0;
  double comp = 0.0;
  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + comp; }
};

}  // namespace

int bin_index(const CalibrationMap& map, double score) {
  check_score(score);
  // First boundary >= score among a_2..a_{M+1}; bin 1 absorbs score == 0.
  const auto it = std::lower_bound(map.boundaries.begin() + 1,
                                   map.boundaries.end(), score);
  const int idx =
      static_cast<int>(it - (map.boundaries.begin() + 1));
  return std::min(idx, map.bins - 1);
}

CalibrationMap fit_binning(const std::vector<double>& scores,
                           const std::vector<int>& labels, int bins) {
  if (scores.empty()) throw std::invalid_argument("fit_binning: empty input");
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("fit_binning: scores/labels length mismatch");
  }
  if (bins < 1) throw std::invalid_argument("fit_binning: bins must be >= 1");

  CalibrationMap map;
  map.bins = bins;
  map.boundaries.resize(bins + 1);
  for (int m = 0; m <= bins; ++m) {
    map.boundaries[m] = static_cast<double>(m) / bins;
  }

  std::vector<long> count(bins, 0);
  std::vector<long> positives(bins, 0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    check_score(scores[i]);
    const int m = bin_index(map, scores[i]);
    ++count[m];
    if (labels[i] != 0) ++positives[m];
  }
  map.theta.resize(bins);
  for (int m = 0; m < bins; ++m) {
    if (count[m] > 0) {
      map.theta[m] = static_cast<double>(positives[m]) /
                     static_cast<double>(count[m]);
    } else {
      map.theta[m] = 0.5 * (map.boundaries[m] + map.boundaries[m + 1]);
    }
  }
  return map;
}

double apply_binning(const CalibrationMap& map, double score) {
  if (map.bins < 1 || map.theta.size() != static_cast<std::size_t>(map.bins)) {
    throw std::invalid_argument("apply_binning: invalid map");
  }
  return map.theta[bin_index(map, score)];
}

double entropy_uncertainty(double s) {
  check_score(s);
  if (s == 0.0 || s == 1.0) return 0.0;
  return -s * std::log2(s) - (1.0 - s) * std::log2(1.0 - s);
}

double ece(const std::vector<double>& scores, const std::vector<int>& labels,
           int bins) {
  if (scores.empty()) throw std::invalid_argument("ece: empty input");
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("ece: scores/labels length mismatch");
  }
  if (bins < 1) throw std::invalid_argument("ece: bins must be >= 1");

  CalibrationMap map;
  map.bins = bins;
  map.boundaries.resize(bins + 1);
  for (int m = 0; m <= bins; ++m) {
    map.boundaries[m] = static_cast<double>(m) / bins;
  }

  std::vector<long> count(bins, 0);
  std::vector<long> positives(bins, 0);
  std::vector<KahanSum> score_sum(bins);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    check_score(scores[i]);
    const int m = bin_index(map, scores[i]);
    ++count[m];
    if (labels[i] != 0) ++positives[m];
    score_sum[m].add(scores[i]);
  }
  double total = 0.0;
  const double n = static_cast<double>(scores.size());
  for (int m = 0; m < bins; ++m) {
    if (count[m] == 0) continue;
    const double k = static_cast<double>(count[m]);
    const double mean_label = static_cast<double>(positives[m]) / k;
    const double mean_score = score_sum[m].value() / k;
    total += (k / n) * std::abs(mean_label - mean_score);
  }
  return total;
}

void save_calibration(const CalibrationMap& map, const std::string& path) {
  json j;
  j["bins"] = map.bins;
  j["boundaries"] = map.boundaries;
  j["theta"] = map.theta;
  write_text_file(path, j.dump() + "\n");
}

CalibrationMap load_calibration(const std::string& path) {
  const json j = json::parse(read_text_file(path));
  CalibrationMap map;
  map.bins = j.at("bins").get<int>();
  map.boundaries = j.at("boundaries").get<std::vector<double>>();
  map.theta = j.at("theta").get<std::vector<double>>();
  if (map.bins < 1 ||
      map.boundaries.size() != static_cast<std::size_t>(map.bins) + 1 ||
      map.theta.size() != static_cast<std::size_t>(map.bins)) {
    throw std::runtime_error("calibration file: inconsistent shapes");
  }
  return map;
}

}  // namespace tgssl
