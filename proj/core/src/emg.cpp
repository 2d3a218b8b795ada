#include "noir/emg.hpp"

#include <algorithm>
#include <cmath>

#include "noir/error.hpp"

namespace noir::emg {

double median_channel_variance(const signal::Epoch& epoch) {
  const signal::Vector var = signal::channel_variances(epoch.data());
  std::vector<double> v(var.data(), var.data() + var.size());
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

EmgCalibration calibrate_from_medians(std::vector<double> m_rest, std::vector<double> m_clench, double window_s) {
  require(!m_rest.empty() && !m_clench.empty(), "EMG calibration needs at least one trial per class");
  EmgCalibration c;
  c.m_rest = std::move(m_rest);
  c.m_clench = std::move(m_clench);
  const double max_rest = *std::max_element(c.m_rest.begin(), c.m_rest.end());
  const double min_clench = *std::min_element(c.m_clench.begin(), c.m_clench.end());
  c.threshold = 0.5 * (max_rest + min_clench);
  c.overlap = max_rest >= min_clench;
  c.window_s = window_s;
  require(std::isfinite(c.threshold), "EMG threshold is not finite");
  return c;
}

EmgCalibration calibrate_emg(std::span<const signal::Epoch> rest, std::span<const signal::Epoch> clench) {
  require(!rest.empty() && !clench.empty(), "EMG calibration needs at least one trial per class");
  std::vector<double> m_rest, m_clench;
  for (const auto& e : rest) m_rest.push_back(median_channel_variance(e));
  for (const auto& e : clench) m_clench.push_back(median_channel_variance(e));
  return calibrate_from_medians(std::move(m_rest), std::move(m_clench), rest.front().duration_s());
}

bool detect_clench(const EmgCalibration& calib, const signal::Epoch& window) {
  if (calib.window_s > 0) {
    require(std::abs(window.duration_s() - calib.window_s) <= 0.1 * calib.window_s,
            "window duration mismatch beyond 10% of calibration window");
  }
  return median_channel_variance(window) > calib.threshold;
}

}  // namespace noir::emg
