#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "noir/error.hpp"
#include "noir/signal.hpp"
#include "noir/synth.hpp"

using namespace noir;
using namespace noir::synth;

namespace {

double row_var(const signal::Matrix& m, Eigen::Index r) {
  const double mean = m.row(r).mean();
  return (m.row(r).array() - mean).square().mean();
}

// Power of a single row in [lo, hi) Hz by direct DFT over the band's bins.
double band_power(const Eigen::RowVectorXd& x, double fs, double lo, double hi) {
  const auto n = x.size();
  double p = 0.0;
  for (Eigen::Index k = 1; k < n / 2; ++k) {
    const double f = static_cast<double>(k) * fs / static_cast<double>(n);
    if (f < lo || f >= hi) continue;
    double re = 0, im = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
      const double w = 2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n);
      re += x(t) * std::cos(w);
      im -= x(t) * std::sin(w);
    }
    p += re * re + im * im;
  }
  return p;
}

}  // namespace

TEST_CASE("generators are pure functions of their seed") {
  const SynthContext ctx;
  SsvepStimulus stim;
  CHECK(gen_ssvep(ctx, stim, 1, 9).data() == gen_ssvep(ctx, stim, 1, 9).data());
  CHECK(gen_ssvep(ctx, stim, 1, 9).data() != gen_ssvep(ctx, stim, 1, 10).data());
  const MiProfile mi;
  CHECK(gen_mi(ctx, mi, 2, 4).data() == gen_mi(ctx, mi, 2, 4).data());
  const ClenchProfile cl;
  CHECK(gen_clench_window(ctx, cl, true, 4).data() == gen_clench_window(ctx, cl, true, 4).data());
}

TEST_CASE("SSVEP epochs have the stimulus duration and live on the visual channels") {
  const SynthContext ctx;
  SsvepStimulus stim;
  stim.snr_db = std::numeric_limits<double>::infinity();
  const auto e = gen_ssvep(ctx, stim, 0, 1);
  CHECK(e.samples() == 2500);
  CHECK(e.channels() == 16);
  const auto& visual = ctx.montage.subset("visual");
  for (Eigen::Index r = 0; r < e.channels(); ++r) {
    const bool v = std::find(visual.begin(), visual.end(), e.channel_ids()[static_cast<std::size_t>(r)]) != visual.end();
    // 1^2/2 + 0.5^2/2
    if (v) CHECK(row_var(e.data(), r) == doctest::Approx(0.625).epsilon(0.01));
    else CHECK(e.data().row(r).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK_THROWS_AS(gen_ssvep(ctx, stim, 4, 1), Error);
}

TEST_CASE("SSVEP noise power follows the requested SNR") {
  const SynthContext ctx;
  SsvepStimulus stim;
  stim.snr_db = -10.0;
  // Non-visual rows carry noise only; signal power is 0.625. Mean power,
  // not variance: the slow pink octaves show up as per-epoch offsets.
  const auto& visual = ctx.montage.subset("visual");
  double acc = 0;
  int rows = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto e = gen_ssvep(ctx, stim, 0, s);
    for (Eigen::Index r = 0; r < e.channels(); ++r) {
      if (std::find(visual.begin(), visual.end(), e.channel_ids()[static_cast<std::size_t>(r)]) != visual.end()) continue;
      acc += e.data().row(r).array().square().mean();
      ++rows;
    }
  }
  CHECK(acc / rows == doctest::Approx(6.25).epsilon(0.15));
}

TEST_CASE("pink noise has unit variance and falls off with frequency") {
  Rng rng(11);
  const auto m = pink_noise(1, 4096, rng);
  CHECK(row_var(m, 0) == doctest::Approx(1.0).epsilon(0.2));
  const Eigen::RowVectorXd x = m.row(0);
  const double low = band_power(x, 256.0, 1.0, 5.0) / 4.0;
  const double high = band_power(x, 256.0, 60.0, 100.0) / 40.0;
  CHECK(low > 3.0 * high);
}

TEST_CASE("MI modulation boosts the class's channel group by the configured ratio") {
  const SynthContext ctx;
  MiProfile p;
  p.modulation_db = 6.0;
  double boosted = 0, other = 0;
  int nb = 0, no = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto e = gen_mi(ctx, p, 0, s);
    const auto group = p.group(MiClass::LeftHand);
    for (Eigen::Index r = 0; r < e.channels(); ++r) {
      const bool in = std::find(group.begin(), group.end(), e.channel_ids()[static_cast<std::size_t>(r)]) != group.end();
      (in ? boosted : other) += row_var(e.data(), r);
      ++(in ? nb : no);
    }
  }
  CHECK(other / no == doctest::Approx(1.0).epsilon(0.1));
  CHECK((boosted / nb) / (other / no) == doctest::Approx(std::pow(10.0, 0.6)).epsilon(0.15));
}

TEST_CASE("rest produces no group boost and groups are disjoint") {
  const MiProfile p;
  CHECK(p.group(MiClass::Rest).empty());
  CHECK_NOTHROW(p.validate(signal::Montage::default16()));
  MiProfile bad;
  bad.groups[MiClass::LeftHand] = bad.group(MiClass::RightHand);
  CHECK_THROWS_AS(bad.validate(signal::Montage::default16()), Error);
}

TEST_CASE("calibration sessions are balanced per block") {
  const SynthContext ctx;
  const MiProfile p;
  const auto s = gen_calibration_session(ctx, p, 5);
  REQUIRE(s.size() == 80);
  for (int b = 0; b < 4; ++b) {
    std::map<std::string, int> count;
    for (int i = 0; i < 20; ++i) ++count[*s[static_cast<std::size_t>(b * 20 + i)].label()];
    CHECK(count.size() == 4);
    for (const auto& [label, n] : count) CHECK(n == 5);
  }
}

TEST_CASE("clench windows have the profile variances") {
  const SynthContext ctx;
  const ClenchProfile p;
  const auto r = gen_clench_window(ctx, p, false, 1);
  const auto c = gen_clench_window(ctx, p, true, 1);
  CHECK(r.samples() == 125);
  CHECK(r.data().array().square().mean() == doctest::Approx(1.0).epsilon(0.1));
  CHECK(c.data().array().square().mean() == doctest::Approx(100.0).epsilon(0.1));
  ClenchProfile bad;
  bad.clench_var = 0.5;
  CHECK_THROWS_AS(bad.validate(), Error);
}
