#include <doctest.h>

#include <cmath>
#include <numbers>

#include "noir/random.hpp"
#include "noir/ssvep.hpp"
#include "noir/synth.hpp"

using namespace noir;
using namespace noir::ssvep;

TEST_CASE("reference bank holds sin and cos of the fundamental and second harmonic") {
  const std::vector<double> f{8.0};
  const auto bank = build_reference_bank(f, 250.0, 100);
  REQUIRE(bank.references.size() == 1);
  const auto& y = bank.references[0];
  CHECK(y.rows() == 4);
  CHECK(y.cols() == 100);
  const double t = 1.0 / 250.0;  // first sample sits at k = 1
  CHECK(y(0, 0) == doctest::Approx(std::sin(2 * std::numbers::pi * 8 * t)));
  CHECK(y(1, 0) == doctest::Approx(std::cos(2 * std::numbers::pi * 8 * t)));
  CHECK(y(2, 0) == doctest::Approx(std::sin(4 * std::numbers::pi * 8 * t)));
  CHECK(y(3, 0) == doctest::Approx(std::cos(4 * std::numbers::pi * 8 * t)));
}

TEST_CASE("canonical correlation of a linear mix is one") {
  Rng rng(2);
  std::normal_distribution<double> n;
  signal::Matrix y(3, 400);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = n(rng);
  signal::Matrix mix(2, 3);
  mix << 1, -2, 0.5, 0.3, 0, 1;
  const signal::Matrix x = mix * y;
  CHECK(cca_max_correlation(x, y).rho == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("canonical correlation is bounded and scale invariant") {
  Rng rng(4);
  std::normal_distribution<double> n;
  signal::Matrix x(4, 500), y(4, 500);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng), y.data()[i] = n(rng);
  const auto a = cca_max_correlation(x, y);
  CHECK(a.rho >= 0.0);
  CHECK(a.rho < 0.35);  // independent noise
  signal::Matrix xs = x;
  xs.row(0) *= 10.0;
  xs.row(2) *= 0.1;
  CHECK(cca_max_correlation(xs, y).rho == doctest::Approx(a.rho).epsilon(1e-5));
  // symmetric in its arguments
  CHECK(cca_max_correlation(y, x).rho == doctest::Approx(a.rho).epsilon(1e-9));
}

TEST_CASE("decoder picks the stimulated frequency on clean epochs") {
  synth::SynthContext ctx;
  synth::SsvepStimulus stim;
  stim.snr_db = std::numeric_limits<double>::infinity();
  const SsvepDecoder d(stim.frequencies, ctx.montage);
  for (int target = 0; target < 4; ++target) {
    const auto r = d.decode(synth::gen_ssvep(ctx, stim, target, 100 + static_cast<std::uint64_t>(target)));
    CHECK(r.best_index() == static_cast<std::size_t>(target));
    CHECK(r.scores[r.best_index()].rho > 0.99);
    for (std::size_t i = 1; i < r.ranking.size(); ++i) CHECK(r.scores[r.ranking[i - 1]].rho >= r.scores[r.ranking[i]].rho);
  }
}

TEST_CASE("decoding is deterministic and independent of non-visual channels") {
  synth::SynthContext ctx;
  synth::SsvepStimulus stim;
  stim.snr_db = 0.0;
  const SsvepDecoder d(stim.frequencies, ctx.montage);
  const auto e = synth::gen_ssvep(ctx, stim, 2, 77);
  auto m = e.data();
  m.row(*e.channel_index(ctx.montage.subset("motor").front())).setConstant(50.0);
  const auto a = d.decode(e), b = d.decode(e.with_data(m));
  for (std::size_t i = 0; i < a.scores.size(); ++i) CHECK(a.scores[i].rho == b.scores[i].rho);
}
