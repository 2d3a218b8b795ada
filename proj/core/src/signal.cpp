#include "noir/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "noir/error.hpp"

namespace noir::signal {

Epoch::Epoch(Matrix data, double fs, std::vector<std::string> channel_ids,
             std::optional<std::string> label)
    : data_(std::move(data)), fs_(fs), channel_ids_(std::move(channel_ids)), label_(std::move(label)) {
  require(data_.rows() >= 1, "epoch needs at least one channel");
  require(data_.cols() >= 2, "epoch needs at least two samples");
  require(fs_ > 0 && std::isfinite(fs_), "sampling rate must be positive");
  require(static_cast<Eigen::Index>(channel_ids_.size()) == data_.rows(),
          "channel label count does not match data rows");
  std::set<std::string_view> seen;
  for (const auto& id : channel_ids_) {
    require(seen.insert(id).second, "duplicate channel label '" + id + "'");
  }
  require(data_.allFinite(), "epoch contains non-finite samples");
}

std::optional<Eigen::Index> Epoch::channel_index(std::string_view id) const {
  auto it = std::find(channel_ids_.begin(), channel_ids_.end(), id);
  if (it == channel_ids_.end()) return std::nullopt;
  return static_cast<Eigen::Index>(it - channel_ids_.begin());
}

Epoch Epoch::with_data(Matrix data) const {
  require(data.rows() == data_.rows(), "with_data cannot change the channel count");
  return Epoch(std::move(data), fs_, channel_ids_, label_);
}

Epoch Epoch::with_label(std::optional<std::string> label) const {
  return Epoch(data_, fs_, channel_ids_, std::move(label));
}

Epoch Epoch::scaled(double factor) const { return with_data(data_ * factor); }

void Montage::validate() const {
  std::set<std::string_view> seen;
  for (const auto& c : channels) require(seen.insert(c).second, "duplicate montage channel '" + c + "'");
  for (const auto& [name, labels] : subsets) {
    require(!labels.empty(), "montage subset '" + name + "' is empty");
    std::size_t cursor = 0;
    for (const auto& label : labels) {
      auto it = std::find(channels.begin() + static_cast<std::ptrdiff_t>(cursor), channels.end(), label);
      require(it != channels.end(),
              "montage subset '" + name + "' is not an ordered sub-list of channels (at '" + label + "')");
      cursor = static_cast<std::size_t>(it - channels.begin()) + 1;
    }
  }
}

const std::vector<std::string>& Montage::subset(std::string_view name) const {
  auto it = subsets.find(name);
  if (it == subsets.end()) throw Error("unknown channel subset '" + std::string(name) + "'");
  return it->second;
}

Montage Montage::default16() {
  Montage m;
  m.name = "synthetic16";
  m.channels = {"F3", "Fz", "F4", "C3", "C1", "Cz", "C2", "C4",
                "CP3", "CPz", "CP4", "Pz", "POz", "O1", "Oz", "O2"};
  m.subsets["visual"] = {"POz", "O1", "Oz", "O2"};
  m.subsets["motor"] = {"C3", "C1", "Cz", "C2", "C4", "CP3", "CPz", "CP4"};
  m.subsets["all"] = m.channels;
  return m;
}

FilterSpec FilterSpec::notch(double f_hz, int order, bool zero_phase) {
  FilterSpec s;
  s.kind = FilterKind::notch;
  s.f_notch = f_hz;
  s.order = order;
  s.zero_phase = zero_phase;
  return s;
}

FilterSpec FilterSpec::band_pass(double lo_hz, double hi_hz, int order, bool zero_phase) {
  FilterSpec s;
  s.kind = FilterKind::band_pass;
  s.f_lo = lo_hz;
  s.f_hi = hi_hz;
  s.order = order;
  s.zero_phase = zero_phase;
  return s;
}

void FilterSpec::validate(double fs) const {
  require(order >= 1, "filter order must be positive");
  const double nyquist = fs / 2.0;
  if (kind == FilterKind::notch) {
    require(order % 2 == 0, "notch order must be even (one biquad per 2 orders)");
    require(f_notch > 0 && f_notch < nyquist, "notch frequency outside (0, Nyquist)");
    require(q > 0, "notch quality factor must be positive");
  } else {
    require(f_lo > 0 && f_lo < f_hi && f_hi < nyquist, "band outside Nyquist: need 0 < f_lo < f_hi < fs/2");
  }
}

std::complex<double> SosFilter::response(double freq_hz, double fs) const {
  const double w = 2.0 * std::numbers::pi * freq_hz / fs;
  const std::complex<double> z1 = std::polar(1.0, -w);
  const std::complex<double> z2 = z1 * z1;
  std::complex<double> h = 1.0;
  for (const auto& s : sections) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  return h;
}

namespace {

using cd = std::complex<double>;

SosFilter design_notch(const FilterSpec& spec, double fs) {
  const double w0 = 2.0 * std::numbers::pi * spec.f_notch / fs;
  const double alpha = std::sin(w0) / (2.0 * spec.q);
  const double a0 = 1.0 + alpha;
  Biquad b;
  b.b0 = 1.0 / a0;
  b.b1 = -2.0 * std::cos(w0) / a0;
  b.b2 = 1.0 / a0;
  b.a1 = -2.0 * std::cos(w0) / a0;
  b.a2 = (1.0 - alpha) / a0;
  return SosFilter{std::vector<Biquad>(static_cast<std::size_t>(spec.order / 2), b)};
}

SosFilter design_butter_band_pass(const FilterSpec& spec, double fs) {
  const int n = spec.order;
  const double pi = std::numbers::pi;
  const double w1 = 2.0 * fs * std::tan(pi * spec.f_lo / fs);
  const double w2 = 2.0 * fs * std::tan(pi * spec.f_hi / fs);
  const double w0 = std::sqrt(w1 * w2);
  const double bw = w2 - w1;

  std::vector<cd> zpoles;
  zpoles.reserve(static_cast<std::size_t>(2 * n));
  for (int k = 1; k <= n; ++k) {
    const cd p = std::polar(1.0, pi * (2.0 * k + n - 1) / (2.0 * n));
    const cd half = p * bw / 2.0;
    const cd root = std::sqrt(half * half - w0 * w0);
    for (const cd s : {half + root, half - root}) zpoles.push_back((2.0 * fs + s) / (2.0 * fs - s));
  }

  // Conjugate pairs first, then real poles two at a time.
  std::vector<std::pair<cd, cd>> pairs;
  std::vector<double> reals;
  for (const cd z : zpoles) {
    if (z.imag() > 1e-12) pairs.emplace_back(z, std::conj(z));
    else if (std::abs(z.imag()) <= 1e-12) reals.push_back(z.real());
  }
  std::sort(reals.begin(), reals.end());
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) pairs.emplace_back(cd(reals[i]), cd(reals[i + 1]));
  require(static_cast<int>(pairs.size()) == n, "butterworth pole pairing failed");

  const double wc = 2.0 * std::atan(w0 / (2.0 * fs));
  const cd z1 = std::polar(1.0, -wc);
  SosFilter f;
  for (const auto& [p, q] : pairs) {
    Biquad b;
    b.b0 = 1.0;
    b.b1 = 0.0;
    b.b2 = -1.0;
    b.a1 = -(p + q).real();
    b.a2 = (p * q).real();
    const cd h = (1.0 - z1 * z1) / (1.0 + b.a1 * z1 + b.a2 * z1 * z1);
    const double g = 1.0 / std::abs(h);
    b.b0 = g;
    b.b2 = -g;
    f.sections.push_back(b);
  }
  return f;
}

void reverse_filter_pass(const SosFilter& f, std::vector<double>& x) {
  std::reverse(x.begin(), x.end());
  sos_filter_inplace(f, x);
  std::reverse(x.begin(), x.end());
}

}  // namespace

SosFilter design_filter(const FilterSpec& spec, double fs) {
  spec.validate(fs);
  return spec.kind == FilterKind::notch ? design_notch(spec, fs) : design_butter_band_pass(spec, fs);
}

void sos_filter_inplace(const SosFilter& filter, std::span<double> x) {
  for (const auto& s : filter.sections) {
    double z1 = 0.0, z2 = 0.0;
    for (double& v : x) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
}

std::vector<double> filtfilt(const SosFilter& filter, std::span<const double> x, std::size_t pad) {
  const std::size_t n = x.size();
  require(n >= 2, "filtfilt needs at least two samples");
  pad = std::min(pad, n - 1);

  std::vector<double> ext(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) ext[i] = 2.0 * x[0] - x[pad - i];
  std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));
  for (std::size_t i = 0; i < pad; ++i) ext[pad + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];

  std::vector<double> fb = ext;  // forward then backward
  sos_filter_inplace(filter, fb);
  reverse_filter_pass(filter, fb);

  std::vector<double> bf = ext;  // backward then forward
  reverse_filter_pass(filter, bf);
  sos_filter_inplace(filter, bf);

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = 0.5 * (fb[pad + i] + bf[pad + i]);
  return out;
}

Epoch apply_filter(const Epoch& epoch, const FilterSpec& spec) {
  spec.validate(epoch.fs());
  const auto pad = static_cast<std::size_t>(3 * spec.order);
  require(epoch.samples() >= 3 * spec.order, "epoch too short for filter order (need T >= 3*order)");
  const SosFilter f = design_filter(spec, epoch.fs());

  Matrix out(epoch.channels(), epoch.samples());
  std::vector<double> row(static_cast<std::size_t>(epoch.samples()));
  for (Eigen::Index c = 0; c < epoch.channels(); ++c) {
    for (Eigen::Index t = 0; t < epoch.samples(); ++t) row[static_cast<std::size_t>(t)] = epoch.data()(c, t);
    if (spec.zero_phase) {
      row = filtfilt(f, row, pad);
    } else {
      sos_filter_inplace(f, row);
    }
    for (Eigen::Index t = 0; t < epoch.samples(); ++t) out(c, t) = row[static_cast<std::size_t>(t)];
  }
  return epoch.with_data(std::move(out));
}

Epoch select_labels(const Epoch& epoch, std::span<const std::string> labels) {
  require(!labels.empty(), "channel selection is empty");
  Matrix out(static_cast<Eigen::Index>(labels.size()), epoch.samples());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto idx = epoch.channel_index(labels[i]);
    if (!idx) throw Error("label missing from epoch: '" + labels[i] + "'");
    out.row(static_cast<Eigen::Index>(i)) = epoch.data().row(*idx);
  }
  return Epoch(std::move(out), epoch.fs(), std::vector<std::string>(labels.begin(), labels.end()), epoch.label());
}

Epoch select_channels(const Epoch& epoch, const Montage& montage, std::string_view subset) {
  return select_labels(epoch, montage.subset(subset));
}

Vector channel_variances(const Matrix& data) {
  const Vector mean = data.rowwise().mean();
  return (data.colwise() - mean).array().square().rowwise().mean();
}

Matrix center_rows(const Matrix& data) { return data.colwise() - data.rowwise().mean(); }

}  // namespace noir::signal
