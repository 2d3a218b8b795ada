#include "noir/ssvep.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "noir/error.hpp"

namespace noir::ssvep {

namespace {

Matrix covariance(const Matrix& a, const Matrix& b) { return a * b.transpose() / static_cast<double>(a.cols()); }

void add_ridge(Matrix& c, const char* which) {
  const double tr = c.trace();
  require(tr > 0 && std::isfinite(tr),
          std::string("rank-deficient covariance after regularization: ") + which + " signals constant");
  c.diagonal().array() += 1e-8 * tr / static_cast<double>(c.rows());
}

Matrix inverse_sqrt(const Matrix& c) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(c);
  require(eig.info() == Eigen::Success, "eigendecomposition failed");
  const Vector& values = eig.eigenvalues();
  require(values.minCoeff() > 0, "rank-deficient covariance after regularization");
  return eig.eigenvectors() * values.cwiseSqrt().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

ReferenceSignalBank build_reference_bank(std::span<const double> frequencies, double fs, Eigen::Index n_samples) {
  require(fs > 0, "sampling rate must be positive");
  require(n_samples >= 8, "reference bank needs at least 8 samples");
  require(!frequencies.empty(), "reference bank needs at least one frequency");
  ReferenceSignalBank bank;
  bank.fs = fs;
  bank.n_samples = n_samples;
  for (double f : frequencies) {
    require(f > 0, "stimulus frequency must be positive");
    require(2.0 * f < fs / 2.0, "harmonic exceeds Nyquist: 2*f must be below fs/2");
    Matrix y(4, n_samples);
    for (Eigen::Index k = 0; k < n_samples; ++k) {
      const double t = static_cast<double>(k + 1) / fs;
      const double w = 2.0 * std::numbers::pi * f * t;
      y(0, k) = std::sin(w);
      y(1, k) = std::cos(w);
      y(2, k) = std::sin(2.0 * w);
      y(3, k) = std::cos(2.0 * w);
    }
    bank.frequencies.push_back(f);
    bank.references.push_back(std::move(y));
  }
  return bank;
}

CanonicalCorrelation cca_max_correlation(const Matrix& x, const Matrix& y) {
  require(x.cols() == y.cols(), "CCA views must have the same number of samples");
  require(x.cols() > x.rows() + y.rows(), "CCA needs more samples than channels + references");
  const Matrix xc = signal::center_rows(x);
  const Matrix yc = signal::center_rows(y);

  Matrix cxx = covariance(xc, xc);
  Matrix cyy = covariance(yc, yc);
  const Matrix cxy = covariance(xc, yc);
  add_ridge(cxx, "X");
  add_ridge(cyy, "Y");

  const Matrix kx = inverse_sqrt(cxx);
  const Eigen::LDLT<Matrix> cyy_ldlt(cyy);
  const Matrix cyy_inv_cyx = cyy_ldlt.solve(cxy.transpose());
  Matrix m = kx * cxy * cyy_inv_cyx * kx;
  m = 0.5 * (m + m.transpose());

  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  require(eig.info() == Eigen::Success, "CCA eigendecomposition failed");
  const Eigen::Index top = m.rows() - 1;  // eigenvalues ascending
  const double lambda = std::max(eig.eigenvalues()(top), 0.0);

  CanonicalCorrelation out;
  out.rho = std::sqrt(lambda);
  out.w_x = kx * eig.eigenvectors().col(top);
  Vector wy = cyy_inv_cyx * out.w_x;
  const double wy_var = wy.dot(cyy * wy);
  out.w_y = wy_var > 0 ? Vector(wy / std::sqrt(wy_var)) : wy;
  return out;
}

CcaResult classify_ssvep(const signal::Epoch& epoch, const ReferenceSignalBank& bank) {
  require(epoch.samples() == bank.n_samples, "length mismatch between epoch and reference bank");
  require(std::abs(epoch.fs() - bank.fs) < 1e-9, "sampling rate mismatch between epoch and reference bank");
  CcaResult result;
  for (std::size_t i = 0; i < bank.frequencies.size(); ++i) {
    auto cc = cca_max_correlation(epoch.data(), bank.references[i]);
    result.scores.push_back({bank.frequencies[i], cc.rho, std::move(cc.w_x), std::move(cc.w_y)});
  }
  result.ranking.resize(result.scores.size());
  std::iota(result.ranking.begin(), result.ranking.end(), 0);
  std::sort(result.ranking.begin(), result.ranking.end(), [&](std::size_t a, std::size_t b) {
    const auto& sa = result.scores[a];
    const auto& sb = result.scores[b];
    if (sa.rho != sb.rho) return sa.rho > sb.rho;
    return sa.frequency < sb.frequency;
  });
  return result;
}

SsvepDecoder::SsvepDecoder(std::vector<double> frequencies, signal::Montage montage, signal::FilterSpec notch,
                           std::string subset)
    : frequencies_(std::move(frequencies)),
      montage_(std::move(montage)),
      notch_(notch),
      subset_(std::move(subset)) {
  montage_.validate();
  require(notch_.kind == signal::FilterKind::notch, "SSVEP preprocessing filter must be a notch");
}

CcaResult SsvepDecoder::decode(const signal::Epoch& raw) const {
  const auto visual = signal::select_channels(raw, montage_, subset_);
  const auto filtered = signal::apply_filter(visual, notch_);
  return classify_ssvep(filtered, build_reference_bank(frequencies_, filtered.fs(), filtered.samples()));
}

}  // namespace noir::ssvep
