#pragma once

#include <string>
#include <vector>

namespace tgssl {

/// Histogram-binning calibration: uniform boundaries 0 = a_1 <= ... <=
/// a_{M+1} = 1, bin m covering (a_m, a_{m+1}] (bin 1 also contains 0), and a
/// calibrated score theta_m per bin equal to the empirical positive fraction
/// of that bin's fitting samples.
struct CalibrationMap {
  int bins = 0;
  std::vector<double> boundaries;  // size bins + 1
  std::vector<double> theta;       // size bins
};

/// Index of the bin containing `score` under the half-open convention.
int bin_index(const CalibrationMap& map, double score);

/// Fits theta to minimize the bin-wise squared loss; the minimizer is the
/// per-bin mean label. Empty bins fall back to the bin midpoint.
CalibrationMap fit_binning(const std::vector<double>& scores,
                           const std::vector<int>& labels, int bins);

double apply_binning(const CalibrationMap& map, double score);

/// Binary entropy of the calibrated score in bits, so the result lies in
/// [0, 1] with u(0) = u(1) = 0 and u(0.5) = 1. 0 log 0 := 0.
double entropy_uncertainty(double calibrated_score);

/// Expected calibration error over the same uniform bins:
/// sum_m (|B_m| / n) * |mean_label(B_m) - mean_score(B_m)| on non-empty
/// bins. Per-bin sums use compensated summation so that scoring a fitting
/// set with its own binning map reports exactly zero.
double ece(const std::vector<double>& scores, const std::vector<int>& labels,
           int bins);

void save_calibration(const CalibrationMap& map, const std::string& path);
CalibrationMap load_calibration(const std::string& path);

}  // namespace tgssl
