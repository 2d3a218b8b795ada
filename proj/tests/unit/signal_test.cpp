#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "noir/error.hpp"
#include "noir/random.hpp"
#include "noir/signal.hpp"

using namespace noir;
using namespace noir::signal;

namespace {

std::vector<double> tone(double f, double fs, std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = std::sin(2.0 * std::numbers::pi * f * static_cast<double>(k) / fs);
  return x;
}

// Amplitude of the f component over the tail of x, by projection on sin and cos.
double amplitude(const std::vector<double>& x, double f, double fs, std::size_t from) {
  double s = 0, c = 0;
  for (std::size_t k = from; k < x.size(); ++k) {
    const double w = 2.0 * std::numbers::pi * f * static_cast<double>(k) / fs;
    s += x[k] * std::sin(w);
    c += x[k] * std::cos(w);
  }
  return 2.0 * std::hypot(s, c) / static_cast<double>(x.size() - from);
}

// Direct evaluation of prod_i B_i(z) / A_i(z) at z = e^{jw}.
double gain_from_coefficients(const SosFilter& f, double freq, double fs) {
  const std::complex<double> z1 = std::polar(1.0, -2.0 * std::numbers::pi * freq / fs);
  std::complex<double> h = 1.0;
  for (const auto& s : f.sections) h *= (s.b0 + s.b1 * z1 + s.b2 * z1 * z1) / (1.0 + s.a1 * z1 + s.a2 * z1 * z1);
  return std::abs(h);
}

double db(double g) { return 20.0 * std::log10(g); }

}  // namespace

TEST_CASE("notch removes mains and leaves the SSVEP band alone") {
  const double fs = 250.0;
  const auto f = design_filter(FilterSpec::notch(60.0, 2, false), fs);
  CHECK(db(gain_from_coefficients(f, 60.0, fs)) <= -20.0);
  CHECK(std::abs(db(gain_from_coefficients(f, 10.0, fs))) < 0.1);
  CHECK(std::abs(std::abs(f.response(60.0, fs)) - gain_from_coefficients(f, 60.0, fs)) < 1e-12);
}

TEST_CASE("Butterworth band-pass has the designed pass and stop bands") {
  const double fs = 250.0;
  const auto f = design_filter(FilterSpec::band_pass(8.0, 30.0, 4, false), fs);
  CHECK(f.sections.size() == 4);
  CHECK(std::abs(db(gain_from_coefficients(f, 15.0, fs))) <= 1.0);
  CHECK(db(gain_from_coefficients(f, 2.0, fs)) <= -20.0);
  // -3 dB at the pre-warped edges
  CHECK(db(gain_from_coefficients(f, 8.0, fs)) == doctest::Approx(-3.0103).epsilon(0.01));
  CHECK(db(gain_from_coefficients(f, 30.0, fs)) == doctest::Approx(-3.0103).epsilon(0.01));
}

TEST_CASE("causal filtering of a tone matches the coefficient response") {
  const double fs = 250.0;
  const auto f = design_filter(FilterSpec::band_pass(8.0, 30.0, 4, false), fs);
  for (double freq : {5.0, 12.0, 20.0, 40.0}) {
    auto x = tone(freq, fs, 5000);
    sos_filter_inplace(f, x);
    CHECK(amplitude(x, freq, fs, 2500) == doctest::Approx(gain_from_coefficients(f, freq, fs)).epsilon(0.01));
  }
}

TEST_CASE("zero-phase filtering squares the gain and commutes with time reversal") {
  const double fs = 250.0;
  const auto f = design_filter(FilterSpec::band_pass(8.0, 30.0, 4, true), fs);
  const auto x = tone(12.0, fs, 3000);
  const auto y = filtfilt(f, x, 300);
  REQUIRE(y.size() == x.size());
  const double g = gain_from_coefficients(f, 12.0, fs);
  CHECK(amplitude(std::vector<double>(y.begin() + 500, y.end() - 500), 12.0, fs, 0) ==
        doctest::Approx(g * g).epsilon(0.02));

  Rng rng(3);
  std::normal_distribution<double> n;
  std::vector<double> r(800);
  for (auto& v : r) v = n(rng);
  auto rev = r;
  std::reverse(rev.begin(), rev.end());
  auto a = filtfilt(f, r, 100);
  auto b = filtfilt(f, rev, 100);
  std::reverse(b.begin(), b.end());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-9));
}

TEST_CASE("filters that cannot be realized are rejected") {
  CHECK_THROWS_AS(FilterSpec::band_pass(30.0, 8.0).validate(250.0), Error);
  CHECK_THROWS_AS(FilterSpec::band_pass(8.0, 130.0).validate(250.0), Error);
  CHECK_THROWS_AS(FilterSpec::notch(60.0, 3).validate(250.0), Error);
}

TEST_CASE("epochs enforce their invariants") {
  Matrix m = Matrix::Ones(2, 10);
  CHECK_NOTHROW(Epoch(m, 250.0, {"a", "b"}));
  CHECK_THROWS_AS(Epoch(m, 250.0, {"a", "a"}), Error);
  CHECK_THROWS_AS(Epoch(m, 0.0, {"a", "b"}), Error);
  CHECK_THROWS_AS(Epoch(m, 250.0, {"a"}), Error);
  m(1, 3) = std::nan("");
  CHECK_THROWS_AS(Epoch(m, 250.0, {"a", "b"}), Error);
}

TEST_CASE("channel selection follows the montage subset order") {
  const auto mont = Montage::default16();
  CHECK_NOTHROW(mont.validate());
  Matrix m(16, 4);
  for (int r = 0; r < 16; ++r) m.row(r).setConstant(r);
  const Epoch e(m, 250.0, mont.channels);
  const auto v = select_channels(e, mont, "visual");
  REQUIRE(v.channels() == static_cast<Eigen::Index>(mont.subset("visual").size()));
  for (Eigen::Index r = 0; r < v.channels(); ++r) {
    CHECK(v.channel_ids()[static_cast<std::size_t>(r)] == mont.subset("visual")[static_cast<std::size_t>(r)]);
    CHECK(v.data()(r, 0) == static_cast<double>(*e.channel_index(v.channel_ids()[static_cast<std::size_t>(r)])));
  }
  CHECK_THROWS_AS(select_channels(e, mont, "frontal"), Error);
}

TEST_CASE("channel variances use the population normalization") {
  Matrix m(1, 4);
  m << 1, 2, 3, 4;
  CHECK(channel_variances(m)(0) == doctest::Approx(1.25));
  CHECK(center_rows(m).sum() == doctest::Approx(0.0));
}
