#pragma once

#include <span>
#include <vector>

#include "noir/signal.hpp"

namespace noir::emg {

struct EmgCalibration {
  std::vector<double> m_rest;
  std::vector<double> m_clench;
  double threshold = 0.0;
  bool overlap = false;      // set when max(m_rest) >= min(m_clench)
  double window_s = 0.0;     // duration of the calibration windows
};

// Variance of the channel with the median variance. Even channel counts use
// the lower median.
double median_channel_variance(const signal::Epoch& epoch);

// threshold = (max m_rest + min m_clench) / 2
EmgCalibration calibrate_emg(std::span<const signal::Epoch> rest, std::span<const signal::Epoch> clench);

// Builds the calibration straight from median variances (no epochs).
EmgCalibration calibrate_from_medians(std::vector<double> m_rest, std::vector<double> m_clench, double window_s);

// Strictly above threshold. The window must match the calibration duration
// within 10%.
bool detect_clench(const EmgCalibration& calib, const signal::Epoch& window);

}  // namespace noir::emg
