#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "noir/signal.hpp"

namespace noir::mi {

using signal::Epoch;
using signal::Matrix;
using signal::Vector;

// Spatial filters from simultaneous diagonalization of class covariances.
//
// Two classes: columns of q are generalized eigenvectors of
// Cov2^-1 Cov1, sorted by descending eigenvalue, first n_csp kept.
// More classes: one binary class-vs-rest block per class, concatenated.
struct CspModel {
  Matrix q;  // channels x n_kept
  int n_csp = 4;
  std::vector<std::string> class_list;
  std::vector<Matrix> class_covariances;  // averaged per-trial covariance, class_list order
  std::vector<Vector> eigenvalues;        // kept generalized eigenvalues, one block per binary problem

  Eigen::Index channels() const { return q.rows(); }
  Eigen::Index n_kept() const { return q.cols(); }
};

// Orders labels as LeftHand, RightHand, Legs, Rest, then any other labels
// lexicographically.
std::vector<std::string> canonical_class_list(std::span<const Epoch> epochs);

// Averaged per-trial covariance (1/T) X X^T over mean-centered trials.
Matrix mean_trial_covariance(std::span<const Epoch* const> trials);

CspModel fit_csp(std::span<const Epoch> epochs, int n_csp = 4, std::vector<std::string> class_list = {});

// f_p = log(Var_p / sum_j Var_j) over the kept components.
Vector csp_features(const CspModel& model, const Epoch& epoch);

struct QdaClass {
  std::string label;
  Vector mean;
  Matrix covariance;  // shrunk
  Matrix precision;
  double log_det = 0.0;
  double log_prior = 0.0;
};

struct QdaModel {
  std::vector<QdaClass> classes;
  double shrinkage = 0.1;

  std::vector<std::string> class_list() const;
  Eigen::Index dim() const { return classes.empty() ? 0 : classes.front().mean.size(); }
};

struct LabeledFeature {
  Vector x;
  std::string label;
};

// Per-class Gaussian MLE, covariance shrunk toward (trace/d) I by `shrinkage`,
// uniform priors. An empty class_list means the labels seen in order of
// first appearance.
QdaModel fit_qda(std::span<const LabeledFeature> features, std::vector<std::string> class_list = {},
                 double shrinkage = 0.1);

struct RankedClass {
  std::string label;
  double log_posterior = 0.0;
};

// Classes by normalized log-posterior, descending; ties keep class_list order.
std::vector<RankedClass> qda_rank(const QdaModel& model, const Vector& x);

struct MiFitConfig {
  int n_csp = 4;
  double shrinkage = 0.1;
};

struct MiDecoder {
  CspModel csp;
  QdaModel qda;

  const std::vector<std::string>& class_list() const { return csp.class_list; }
};

// Fits CSP on all epochs, then QDA on their CSP features.
MiDecoder fit_mi_decoder(std::span<const Epoch> epochs, const MiFitConfig& config = {},
                         std::vector<std::string> class_list = {});

std::vector<RankedClass> classify_mi(const CspModel& csp, const QdaModel& qda, const Epoch& epoch);
inline std::vector<RankedClass> classify_mi(const MiDecoder& d, const Epoch& epoch) {
  return classify_mi(d.csp, d.qda, epoch);
}

struct CrossValidation {
  double accuracy = 0.0;
  std::vector<double> fold_accuracies;
};

// Stratified k-fold: the j-th trial of each class goes to fold j mod k.
// CSP and QDA are refit on every training split.
CrossValidation cross_validate(std::span<const Epoch> epochs, int k_folds = 4, const MiFitConfig& config = {});

enum class Axis { x, y, z };
char axis_name(Axis a);

// LeftHand -> -1, RightHand -> +1 along the given axis.
int cursor_step(const MiDecoder& decoder, const Epoch& epoch, Axis axis);

// Channel selection + band-pass ahead of the decoder.
struct MiPreprocessor {
  signal::Montage montage = signal::Montage::default16();
  std::string subset = "motor";
  signal::FilterSpec filter = signal::FilterSpec::band_pass(8.0, 30.0, 4, true);

  Epoch apply(const Epoch& raw) const;
};

struct MiPipeline {
  MiPreprocessor preprocess;
  MiDecoder decoder;

  std::vector<RankedClass> rank(const Epoch& raw) const { return classify_mi(decoder, preprocess.apply(raw)); }
};

MiPipeline fit_mi_pipeline(std::span<const Epoch> raw_epochs, const MiPreprocessor& pre = {},
                           const MiFitConfig& config = {}, std::vector<std::string> class_list = {});

nlohmann::json to_json(const MiPipeline& p);
MiPipeline mi_pipeline_from_json(const nlohmann::json& j);

}  // namespace noir::mi
