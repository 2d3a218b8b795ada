#pragma once

#include <span>
#include <vector>

#include "noir/signal.hpp"

namespace noir::ssvep {

using signal::Matrix;
using signal::Vector;

// Canonical reference signals per stimulus frequency:
// rows [sin(2 pi f t); cos(2 pi f t); sin(4 pi f t); cos(4 pi f t)] at
// t = k / fs for k = 1..n_samples.
struct ReferenceSignalBank {
  std::vector<double> frequencies;
  double fs = 0.0;
  Eigen::Index n_samples = 0;
  std::vector<Matrix> references;  // one 4 x n_samples block per frequency
};

ReferenceSignalBank build_reference_bank(std::span<const double> frequencies, double fs, Eigen::Index n_samples);

struct CanonicalCorrelation {
  double rho = 0.0;
  Vector w_x;
  Vector w_y;
};

// Largest canonical correlation between the rows of x (C x T) and y (Q x T).
// Rows are mean-centered internally; both auto-covariances get a ridge of
// 1e-8 * trace / dim.
CanonicalCorrelation cca_max_correlation(const Matrix& x, const Matrix& y);

struct FrequencyScore {
  double frequency = 0.0;
  double rho = 0.0;
  Vector w_x;
  Vector w_y;
};

struct CcaResult {
  std::vector<FrequencyScore> scores;  // bank order
  std::vector<std::size_t> ranking;    // indices into scores, rho descending

  double best_frequency() const { return scores[ranking.front()].frequency; }
  std::size_t best_index() const { return ranking.front(); }
};

// Input must already be channel-selected and notch-filtered, with exactly
// bank.n_samples samples. Ties rank the lower frequency first.
CcaResult classify_ssvep(const signal::Epoch& epoch, const ReferenceSignalBank& bank);

// Channel selection, notch filtering and CCA in one step. The bank is
// rebuilt for each epoch's length and rate.
class SsvepDecoder {
 public:
  SsvepDecoder(std::vector<double> frequencies, signal::Montage montage,
               signal::FilterSpec notch = signal::FilterSpec::notch(60.0, 2, false),
               std::string subset = "visual");

  CcaResult decode(const signal::Epoch& raw) const;
  const std::vector<double>& frequencies() const { return frequencies_; }

 private:
  std::vector<double> frequencies_;
  signal::Montage montage_;
  signal::FilterSpec notch_;
  std::string subset_;
};

}  // namespace noir::ssvep
