#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "noir/random.hpp"
#include "noir/signal.hpp"

namespace noir::synth {

using signal::Epoch;
using signal::Matrix;

// Recording setup shared by all generators.
struct SynthContext {
  double fs = 250.0;
  signal::Montage montage = signal::Montage::default16();
};

struct SsvepStimulus {
  std::vector<double> frequencies{6.0, 7.5, 8.57, 10.0};
  double duration_s = 10.0;
  std::array<double, 2> harmonic_weights{1.0, 0.5};  // fundamental, 2nd harmonic
  // Target sinusoid power over pink-noise power on the visual subset, in dB.
  // +infinity disables noise entirely.
  double snr_db = 0.0;

  void validate(double fs) const;
};

enum class MiClass { LeftHand, RightHand, Legs, Rest };

std::string_view to_string(MiClass c);
MiClass mi_class_from_string(std::string_view s);

struct MiProfile {
  std::vector<MiClass> classes{MiClass::LeftHand, MiClass::RightHand, MiClass::Legs, MiClass::Rest};
  double epoch_s = 5.0;
  std::array<double, 2> band{8.0, 30.0};
  // Spectral support of the generated activity. It sits well inside `band`
  // so that the decoder's band-pass leaves the variance unchanged.
  std::array<double, 2> source_band{11.0, 22.0};
  double modulation_db = 6.0;  // variance boost of the class's channel group
  double noise_floor = 1.0;    // std of the background rhythm on every channel
  // Channel group per non-Rest class. Empty means contralateral defaults:
  // LeftHand -> right motor, RightHand -> left motor, Legs -> midline.
  std::map<MiClass, std::vector<std::string>> groups;

  void validate(const signal::Montage& montage) const;
  std::vector<std::string> group(MiClass c) const;
};

struct ClenchProfile {
  double window_s = 0.5;
  double rest_var = 1.0;
  double clench_var = 100.0;

  void validate() const;
};

// Unit-variance 1/f noise, Voss-McCartney summation over 16 octaves plus a
// white term. One independent row per channel.
Matrix pink_noise(Eigen::Index rows, Eigen::Index samples, Rng& rng);

Epoch gen_ssvep(const SynthContext& ctx, const SsvepStimulus& stim, int target_index, std::uint64_t seed);

Epoch gen_mi(const SynthContext& ctx, const MiProfile& profile, int class_index, std::uint64_t seed);

// `blocks` blocks, each holding every class `trials_per_block` times in a
// shuffled order. Defaults give 20 trials per class.
std::vector<Epoch> gen_calibration_session(const SynthContext& ctx, const MiProfile& profile,
                                           std::uint64_t seed, int blocks = 4, int trials_per_block = 5);

// White noise at rest_var or clench_var on every channel.
Epoch gen_clench_window(const SynthContext& ctx, const ClenchProfile& profile, bool is_clench,
                        std::uint64_t seed);

}  // namespace noir::synth
