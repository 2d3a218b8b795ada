#pragma once

#include <complex>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace noir::signal {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// One fixed-duration multichannel block, channels x samples.
//
// Invariants (checked on construction): at least one channel, at least two
// samples, fs > 0, one unique label per row and only finite samples.
class Epoch {
 public:
  Epoch(Matrix data, double fs, std::vector<std::string> channel_ids,
        std::optional<std::string> label = std::nullopt);

  const Matrix& data() const { return data_; }
  double fs() const { return fs_; }
  const std::vector<std::string>& channel_ids() const { return channel_ids_; }
  const std::optional<std::string>& label() const { return label_; }

  Eigen::Index channels() const { return data_.rows(); }
  Eigen::Index samples() const { return data_.cols(); }
  double duration_s() const { return static_cast<double>(samples()) / fs_; }

  std::optional<Eigen::Index> channel_index(std::string_view id) const;

  // Same metadata, new samples. The shape may change in the time axis only.
  Epoch with_data(Matrix data) const;
  Epoch with_label(std::optional<std::string> label) const;
  Epoch scaled(double factor) const;

 private:
  Matrix data_;
  double fs_;
  std::vector<std::string> channel_ids_;
  std::optional<std::string> label_;
};

// Named electrode layout plus the task-relevant channel subsets.
struct Montage {
  std::string name;
  std::vector<std::string> channels;
  std::map<std::string, std::vector<std::string>, std::less<>> subsets;

  // Every subset must be a non-empty, order-preserving sub-list of channels.
  void validate() const;
  const std::vector<std::string>& subset(std::string_view name) const;

  // Synthetic 16-channel net: "visual" holds 4 posterior labels, "motor" 8
  // central labels.
  static Montage default16();
};

enum class FilterKind { notch, band_pass };

struct FilterSpec {
  FilterKind kind = FilterKind::band_pass;
  double f_notch = 60.0;
  double f_lo = 8.0;
  double f_hi = 30.0;
  int order = 4;
  bool zero_phase = true;
  double q = 30.0;  // notch quality factor

  static FilterSpec notch(double f_hz = 60.0, int order = 2, bool zero_phase = false);
  static FilterSpec band_pass(double lo_hz = 8.0, double hi_hz = 30.0, int order = 4,
                              bool zero_phase = true);

  // Throws if the spec cannot be realized at sampling rate fs.
  void validate(double fs) const;
};

// Second-order section with a0 normalized to 1.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;
};

struct SosFilter {
  std::vector<Biquad> sections;

  // Complex response of the cascade at freq_hz.
  std::complex<double> response(double freq_hz, double fs) const;
};

// Notch: RBJ second-order notch, order/2 identical sections.
// Band-pass: digital Butterworth via bilinear transform with pre-warping;
// `order` is the low-pass prototype order, giving `order` biquads.
SosFilter design_filter(const FilterSpec& spec, double fs);

// Causal direct-form II transposed filtering, zero initial state.
void sos_filter_inplace(const SosFilter& filter, std::span<double> x);

// Zero-phase filtering of one row. The row is extended by odd reflection of
// `pad` samples at both ends; the result is the average of forward-backward
// and backward-forward passes, so the operator commutes with time reversal.
std::vector<double> filtfilt(const SosFilter& filter, std::span<const double> x, std::size_t pad);

// Applies spec independently to every channel.
Epoch apply_filter(const Epoch& epoch, const FilterSpec& spec);

// Rows of the named montage subset, in subset order.
Epoch select_channels(const Epoch& epoch, const Montage& montage, std::string_view subset);
Epoch select_labels(const Epoch& epoch, std::span<const std::string> labels);

// Per-channel population variance (1/T normalization).
Vector channel_variances(const Matrix& data);

// Subtracts each row's mean.
Matrix center_rows(const Matrix& data);

}  // namespace noir::signal
