#include <doctest.h>

#include <cmath>

#include "noir/error.hpp"
#include "noir/mi.hpp"
#include "noir/random.hpp"
#include "noir/synth.hpp"

using namespace noir;
using namespace noir::mi;

namespace {

std::vector<signal::Epoch> session(int n_classes, double db, std::uint64_t seed) {
  synth::SynthContext ctx;
  synth::MiProfile p;
  p.classes.resize(static_cast<std::size_t>(n_classes));
  p.modulation_db = db;
  return synth::gen_calibration_session(ctx, p, seed);
}

std::vector<signal::Epoch> preprocess(const std::vector<signal::Epoch>& raw) {
  const MiPreprocessor pre;
  std::vector<signal::Epoch> out;
  for (const auto& e : raw) out.push_back(pre.apply(e));
  return out;
}

double off_diagonal_share(const Matrix& m) {
  const double off = (m - Matrix(m.diagonal().asDiagonal())).squaredNorm();
  return std::sqrt(off / m.squaredNorm());
}

}  // namespace

TEST_CASE("two-class CSP filters diagonalize both class covariances") {
  const auto epochs = preprocess(session(2, 6.0, 3));
  const auto csp = fit_csp(epochs, 8);
  REQUIRE(csp.class_covariances.size() == 2);
  const Matrix d1 = csp.q.transpose() * csp.class_covariances[0] * csp.q;
  const Matrix d2 = csp.q.transpose() * csp.class_covariances[1] * csp.q;
  CHECK(off_diagonal_share(d1) < 1e-6);
  CHECK(off_diagonal_share(d2) < 1e-6);
  // Rayleigh quotients equal the stored generalized eigenvalues, descending.
  for (Eigen::Index i = 0; i < 8; ++i) {
    CHECK(d1(i, i) / d2(i, i) == doctest::Approx(csp.eigenvalues[0](i)).epsilon(1e-6));
    if (i > 0) CHECK(csp.eigenvalues[0](i - 1) >= csp.eigenvalues[0](i));
  }
}

TEST_CASE("multi-class CSP stacks one block per class") {
  const auto epochs = preprocess(session(4, 6.0, 4));
  const auto csp = fit_csp(epochs, 4);
  CHECK(csp.class_list == std::vector<std::string>{"LeftHand", "RightHand", "Legs", "Rest"});
  CHECK(csp.n_kept() == 16);
  CHECK(csp.eigenvalues.size() == 4);
}

TEST_CASE("CSP features are log variance shares") {
  const auto epochs = preprocess(session(2, 6.0, 5));
  const auto csp = fit_csp(epochs, 4);
  for (std::size_t i = 0; i < 5; ++i) {
    const Vector f = csp_features(csp, epochs[i]);
    CHECK(f.array().exp().sum() == doctest::Approx(1.0));
    CHECK(f.maxCoeff() < 0.0);
  }
}

TEST_CASE("CSP rejects bad shapes") {
  const auto epochs = preprocess(session(2, 6.0, 6));
  CHECK_THROWS_AS(fit_csp(epochs, 1), Error);
  CHECK_THROWS_AS(fit_csp(epochs, 9), Error);
  const auto csp = fit_csp(epochs, 4);
  CHECK_THROWS_AS(csp_features(csp, session(2, 6.0, 6).front()), Error);
}

TEST_CASE("QDA separates well separated Gaussians and normalizes posteriors") {
  Rng rng(1);
  std::normal_distribution<double> n;
  std::vector<LabeledFeature> data;
  for (int i = 0; i < 40; ++i) {
    Vector a(2), b(2);
    a << n(rng), n(rng);
    b << 6 + 0.3 * n(rng), 6 + 3 * n(rng);
    data.push_back({a, "a"});
    data.push_back({b, "b"});
  }
  const auto m = fit_qda(data);
  CHECK(m.class_list() == std::vector<std::string>{"a", "b"});
  Vector x(2);
  x << 0.2, -0.1;
  auto r = qda_rank(m, x);
  CHECK(r.front().label == "a");
  CHECK(std::exp(r[0].log_posterior) + std::exp(r[1].log_posterior) == doctest::Approx(1.0));
  x << 6.1, 9.0;
  CHECK(qda_rank(m, x).front().label == "b");
  CHECK_THROWS_AS(fit_qda(data, {}, 1.5), Error);
}

TEST_CASE("shrinkage pulls QDA covariance toward a scaled identity") {
  std::vector<LabeledFeature> data;
  for (int i = 0; i < 10; ++i) {
    Vector a(2), b(2);
    a << i, 2.0 * i;
    b << -i, 0.5 * i + (i % 2);
    data.push_back({a, "a"});
    data.push_back({b, "b"});
  }
  const auto full = fit_qda(data, {}, 1.0);
  const Matrix& c = full.classes[0].covariance;
  CHECK(c(0, 1) == doctest::Approx(0.0));
  CHECK(c(0, 0) == doctest::Approx(c(1, 1)));
}

TEST_CASE("stratified cross validation scores the synthetic session") {
  const auto strong = cross_validate(preprocess(session(4, 6.0, 8)), 4);
  CHECK(strong.fold_accuracies.size() == 4);
  CHECK(strong.accuracy >= 0.85);
  const auto none = cross_validate(preprocess(session(4, 0.0, 8)), 4);
  CHECK(none.accuracy < 0.5);
  CHECK_THROWS_AS(cross_validate(preprocess(session(2, 6.0, 8)), 21), Error);
}

TEST_CASE("the pipeline round-trips through JSON") {
  const auto raw = session(2, 6.0, 9);
  const auto p = fit_mi_pipeline(raw);
  const auto q = mi_pipeline_from_json(to_json(p));
  for (std::size_t i = 0; i < 10; ++i) {
    const auto a = p.rank(raw[i]), b = q.rank(raw[i]);
    CHECK(a.front().label == b.front().label);
    CHECK(a.front().log_posterior == doctest::Approx(b.front().log_posterior).epsilon(1e-9));
  }
}

TEST_CASE("cursor steps follow the imagined hand") {
  const auto raw = session(2, 10.0, 10);
  const auto p = fit_mi_pipeline(raw);
  synth::SynthContext ctx;
  synth::MiProfile prof;
  prof.classes.resize(2);
  prof.modulation_db = 10.0;
  int agree = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const int cls = static_cast<int>(s % 2);
    const auto e = p.preprocess.apply(synth::gen_mi(ctx, prof, cls, 500 + s));
    agree += cursor_step(p.decoder, e, Axis::x) == (cls == 0 ? -1 : 1);
  }
  CHECK(agree >= 19);
  const auto four = fit_mi_pipeline(session(4, 6.0, 11));
  CHECK_THROWS_AS(cursor_step(four.decoder, four.preprocess.apply(raw[0]), Axis::y), Error);
}
