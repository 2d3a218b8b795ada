#include "noir/synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <set>

#include "noir/error.hpp"

namespace noir::synth {

namespace {

constexpr int kPinkOctaves = 16;

Eigen::Index samples_for(double seconds, double fs) {
  return static_cast<Eigen::Index>(std::llround(seconds * fs));
}

// Mean of |H|^4 over [0, pi]: variance gain of zero-phase filtered unit
// white noise.
double zero_phase_noise_gain(const signal::SosFilter& f, double fs) {
  constexpr int n = 8192;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double freq = (i + 0.5) / n * fs / 2.0;
    acc += std::pow(std::norm(f.response(freq, fs)), 2);
  }
  return acc / n;
}

}  // namespace

void SsvepStimulus::validate(double fs) const {
  require(!frequencies.empty(), "stimulus needs at least one frequency");
  require(duration_s > 0, "stimulus duration must be positive");
  std::set<double> seen;
  for (double f : frequencies) {
    require(f > 0 && f < fs / 2.0, "stimulus frequency must lie in (0, fs/2)");
    require(seen.insert(f).second, "stimulus frequencies must be distinct");
  }
}

std::string_view to_string(MiClass c) {
  switch (c) {
    case MiClass::LeftHand: return "LeftHand";
    case MiClass::RightHand: return "RightHand";
    case MiClass::Legs: return "Legs";
    case MiClass::Rest: return "Rest";
  }
  return "?";
}

MiClass mi_class_from_string(std::string_view s) {
  for (auto c : {MiClass::LeftHand, MiClass::RightHand, MiClass::Legs, MiClass::Rest}) {
    if (to_string(c) == s) return c;
  }
  throw Error("unknown MI class '" + std::string(s) + "'");
}

std::vector<std::string> MiProfile::group(MiClass c) const {
  if (auto it = groups.find(c); it != groups.end()) return it->second;
  switch (c) {
    case MiClass::LeftHand: return {"C4", "C2", "CP4"};
    case MiClass::RightHand: return {"C3", "C1", "CP3"};
    case MiClass::Legs: return {"Cz", "CPz"};
    case MiClass::Rest: return {};
  }
  return {};
}

void MiProfile::validate(const signal::Montage& montage) const {
  require(!classes.empty(), "MI profile needs at least one class");
  require(epoch_s > 0, "MI epoch length must be positive");
  require(band[0] > 0 && band[0] < band[1], "MI band must satisfy 0 < lo < hi");
  require(source_band[0] >= band[0] && source_band[1] <= band[1] && source_band[0] < source_band[1],
          "MI source band must lie inside the decoding band");
  require(noise_floor > 0, "MI noise floor must be positive");
  std::set<MiClass> seen_classes;
  std::set<std::string> used;
  const auto& motor = montage.subset("motor");
  for (auto c : classes) {
    require(seen_classes.insert(c).second, "duplicate MI class in profile");
    if (c == MiClass::Rest) continue;
    const auto g = group(c);
    require(!g.empty(), "MI class '" + std::string(to_string(c)) + "' has an empty channel group");
    for (const auto& label : g) {
      require(std::find(motor.begin(), motor.end(), label) != motor.end(),
              "MI group channel '" + label + "' is not in the motor subset");
      require(used.insert(label).second, "MI channel groups must be disjoint ('" + label + "')");
    }
  }
}

void ClenchProfile::validate() const {
  require(window_s > 0, "clench window must be positive");
  require(rest_var > 0 && clench_var > 0, "clench variances must be positive");
  require(clench_var > rest_var, "clench variance must exceed rest variance");
}

Matrix pink_noise(Eigen::Index rows, Eigen::Index samples, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, samples);
  const double norm = 1.0 / std::sqrt(static_cast<double>(kPinkOctaves + 1));
  for (Eigen::Index r = 0; r < rows; ++r) {
    std::array<double, kPinkOctaves> octave{};
    double running = 0.0;
    for (auto& v : octave) {
      v = normal(rng);
      running += v;
    }
    for (Eigen::Index t = 0; t < samples; ++t) {
      // Octave k refreshes every 2^k samples.
      const auto counter = static_cast<std::uint64_t>(t + 1);
      const int k = std::countr_zero(counter);
      if (k < kPinkOctaves) {
        running -= octave[static_cast<std::size_t>(k)];
        octave[static_cast<std::size_t>(k)] = normal(rng);
        running += octave[static_cast<std::size_t>(k)];
      }
      out(r, t) = (running + normal(rng)) * norm;
    }
  }
  return out;
}

Epoch gen_ssvep(const SynthContext& ctx, const SsvepStimulus& stim, int target_index, std::uint64_t seed) {
  stim.validate(ctx.fs);
  require(target_index >= 0 && target_index < static_cast<int>(stim.frequencies.size()),
          "SSVEP target index out of range");
  const double f = stim.frequencies[static_cast<std::size_t>(target_index)];
  const Eigen::Index n = samples_for(stim.duration_s, ctx.fs);
  require(n >= 2, "SSVEP epoch too short");
  const auto& channels = ctx.montage.channels;
  const auto& visual = ctx.montage.subset("visual");

  Rng rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const bool noisy = std::isfinite(stim.snr_db);
  const double signal_power = 0.5 * (stim.harmonic_weights[0] * stim.harmonic_weights[0] +
                                     stim.harmonic_weights[1] * stim.harmonic_weights[1]);
  const double noise_std = noisy ? std::sqrt(signal_power / std::pow(10.0, stim.snr_db / 10.0)) : 0.0;

  Matrix data = Matrix::Zero(static_cast<Eigen::Index>(channels.size()), n);
  if (noisy) data = pink_noise(data.rows(), n, rng) * noise_std;

  for (std::size_t c = 0; c < channels.size(); ++c) {
    if (std::find(visual.begin(), visual.end(), channels[c]) == visual.end()) continue;
    const double phi1 = phase(rng);
    const double phi2 = phase(rng);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double t = static_cast<double>(k + 1) / ctx.fs;
      const double w = 2.0 * std::numbers::pi * f * t;
      data(static_cast<Eigen::Index>(c), k) +=
          stim.harmonic_weights[0] * std::sin(w + phi1) + stim.harmonic_weights[1] * std::sin(2.0 * w + phi2);
    }
  }
  return Epoch(std::move(data), ctx.fs, channels, "ssvep:" + std::to_string(target_index));
}

Epoch gen_mi(const SynthContext& ctx, const MiProfile& profile, int class_index, std::uint64_t seed) {
  profile.validate(ctx.montage);
  require(class_index >= 0 && class_index < static_cast<int>(profile.classes.size()), "MI class index out of range");
  const MiClass cls = profile.classes[static_cast<std::size_t>(class_index)];
  const Eigen::Index n = samples_for(profile.epoch_s, ctx.fs);
  // One second of guard on each side keeps filter edge effects out of the epoch.
  const Eigen::Index guard = samples_for(1.0, ctx.fs);
  const auto& channels = ctx.montage.channels;

  const auto spec = signal::FilterSpec::band_pass(profile.source_band[0], profile.source_band[1], 6, true);
  const auto filter = signal::design_filter(spec, ctx.fs);
  const double scale = profile.noise_floor / std::sqrt(zero_phase_noise_gain(filter, ctx.fs));
  const double boost = std::pow(10.0, profile.modulation_db / 20.0);
  const auto group = profile.group(cls);

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix data(static_cast<Eigen::Index>(channels.size()), n);
  std::vector<double> raw(static_cast<std::size_t>(n + 2 * guard));
  for (std::size_t c = 0; c < channels.size(); ++c) {
    for (auto& v : raw) v = normal(rng);
    const auto shaped = signal::filtfilt(filter, raw, static_cast<std::size_t>(3 * spec.order));
    const bool boosted = std::find(group.begin(), group.end(), channels[c]) != group.end();
    const double gain = scale * (boosted ? boost : 1.0);
    for (Eigen::Index t = 0; t < n; ++t) {
      data(static_cast<Eigen::Index>(c), t) = gain * shaped[static_cast<std::size_t>(t + guard)];
    }
  }
  return Epoch(std::move(data), ctx.fs, channels, std::string(to_string(cls)));
}

std::vector<Epoch> gen_calibration_session(const SynthContext& ctx, const MiProfile& profile, std::uint64_t seed,
                                           int blocks, int trials_per_block) {
  require(blocks >= 1 && trials_per_block >= 1, "calibration session needs positive block sizes");
  Rng order_rng(derive_seed(seed, {0x0b10c}));
  std::vector<Epoch> session;
  session.reserve(static_cast<std::size_t>(blocks * trials_per_block) * profile.classes.size());
  for (int b = 0; b < blocks; ++b) {
    std::vector<int> order;
    for (int c = 0; c < static_cast<int>(profile.classes.size()); ++c) {
      for (int i = 0; i < trials_per_block; ++i) order.push_back(c);
    }
    std::shuffle(order.begin(), order.end(), order_rng);
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto trial_seed = derive_seed(seed, {static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(i)});
      session.push_back(gen_mi(ctx, profile, order[i], trial_seed));
    }
  }
  return session;
}

Epoch gen_clench_window(const SynthContext& ctx, const ClenchProfile& profile, bool is_clench, std::uint64_t seed) {
  profile.validate();
  const Eigen::Index n = samples_for(profile.window_s, ctx.fs);
  require(n >= 2, "clench window too short");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(is_clench ? profile.clench_var : profile.rest_var));
  Matrix data(static_cast<Eigen::Index>(ctx.montage.channels.size()), n);
  for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = normal(rng);
  return Epoch(std::move(data), ctx.fs, ctx.montage.channels, is_clench ? "Clench" : "Rest");
}

}  // namespace noir::synth
