#include "noir/mi.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "noir/config.hpp"
#include "noir/error.hpp"

namespace noir::mi {

namespace {

const std::vector<std::string>& known_order() {
  static const std::vector<std::string> order{"LeftHand", "RightHand", "Legs", "Rest"};
  return order;
}

void add_relative_ridge(Matrix& c) {
  const double tr = c.trace();
  require(tr > 0 && std::isfinite(tr), "singular class covariance after regularization");
  c.diagonal().array() += 1e-8 * tr / static_cast<double>(c.rows());
}

struct GeneralizedEigen {
  Matrix vectors;  // columns, descending eigenvalue
  Vector values;
};

// Solves cov1 v = lambda cov2 v by whitening cov2 and diagonalizing the
// whitened cov1.
GeneralizedEigen whitened_generalized_eigen(Matrix cov1, Matrix cov2) {
  add_relative_ridge(cov1);
  add_relative_ridge(cov2);
  Eigen::SelfAdjointEigenSolver<Matrix> e2(cov2);
  require(e2.info() == Eigen::Success && e2.eigenvalues().minCoeff() > 0,
          "singular class covariance after regularization");
  const Matrix whiten = e2.eigenvectors() * e2.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                        e2.eigenvectors().transpose();
  Matrix s = whiten * cov1 * whiten;
  s = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> e1(s);
  require(e1.info() == Eigen::Success, "CSP eigendecomposition failed");
  GeneralizedEigen out;
  const Eigen::Index n = s.rows();
  out.vectors.resize(n, n);
  out.values.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.vectors.col(i) = whiten * e1.eigenvectors().col(n - 1 - i);
    out.values(i) = e1.eigenvalues()(n - 1 - i);
  }
  return out;
}

std::map<std::string, std::vector<const Epoch*>> group_by_label(std::span<const Epoch> epochs) {
  std::map<std::string, std::vector<const Epoch*>> groups;
  for (const auto& e : epochs) {
    require(e.label().has_value(), "MI training epochs must be labeled");
    groups[*e.label()].push_back(&e);
  }
  return groups;
}

void check_class_list(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  require(a == b, "class_list mismatch between CSP and QDA models");
}

}  // namespace

std::vector<std::string> canonical_class_list(std::span<const Epoch> epochs) {
  std::vector<std::string> labels;
  for (const auto& e : epochs) {
    require(e.label().has_value(), "MI training epochs must be labeled");
    if (std::find(labels.begin(), labels.end(), *e.label()) == labels.end()) labels.push_back(*e.label());
  }
  auto rank = [](const std::string& s) {
    const auto& order = known_order();
    auto it = std::find(order.begin(), order.end(), s);
    return static_cast<std::size_t>(it - order.begin());
  };
  std::sort(labels.begin(), labels.end(), [&](const std::string& a, const std::string& b) {
    const auto ra = rank(a), rb = rank(b);
    if (ra != rb) return ra < rb;
    return a < b;
  });
  return labels;
}

Matrix mean_trial_covariance(std::span<const Epoch* const> trials) {
  require(!trials.empty(), "covariance needs at least one trial");
  const Eigen::Index c = trials.front()->channels();
  Matrix acc = Matrix::Zero(c, c);
  for (const Epoch* e : trials) {
    require(e->channels() == c, "trials disagree on channel count");
    const Matrix x = signal::center_rows(e->data());
    acc += x * x.transpose() / static_cast<double>(x.cols());
  }
  return acc / static_cast<double>(trials.size());
}

CspModel fit_csp(std::span<const Epoch> epochs, int n_csp, std::vector<std::string> class_list) {
  if (class_list.empty()) class_list = canonical_class_list(epochs);
  require(class_list.size() >= 2, "CSP needs at least two classes");
  auto groups = group_by_label(epochs);
  for (const auto& label : class_list) {
    require(groups.count(label) && groups[label].size() >= 2,
            "fewer than 2 trials in class '" + label + "'");
  }
  const Eigen::Index channels = epochs.front().channels();
  require(n_csp >= 2 && n_csp <= channels, "n_csp must lie in [2, channels]");

  CspModel model;
  model.n_csp = n_csp;
  model.class_list = class_list;
  for (const auto& label : class_list) model.class_covariances.push_back(mean_trial_covariance(groups[label]));

  auto keep = [&](const GeneralizedEigen& ge) {
    const Eigen::Index old = model.q.cols();
    model.q.conservativeResize(channels, old + n_csp);
    model.q.rightCols(n_csp) = ge.vectors.leftCols(n_csp);
    model.eigenvalues.push_back(ge.values.head(n_csp));
  };

  if (class_list.size() == 2) {
    keep(whitened_generalized_eigen(model.class_covariances[0], model.class_covariances[1]));
  } else {
    for (const auto& label : class_list) {
      std::vector<const Epoch*> rest;
      for (const auto& other : class_list) {
        if (other != label) rest.insert(rest.end(), groups[other].begin(), groups[other].end());
      }
      keep(whitened_generalized_eigen(mean_trial_covariance(groups[label]), mean_trial_covariance(rest)));
    }
  }
  require(model.q.allFinite(), "CSP produced non-finite filters");
  return model;
}

Vector csp_features(const CspModel& model, const Epoch& epoch) {
  require(epoch.channels() == model.channels(), "shape mismatch: epoch channels differ from CSP model");
  const Matrix projected = model.q.transpose() * signal::center_rows(epoch.data());
  const Vector var = projected.array().square().rowwise().mean();
  const double total = var.sum();
  require(total > 0 && var.minCoeff() > 0, "degenerate CSP component variance");
  return (var / total).array().log();
}

std::vector<std::string> QdaModel::class_list() const {
  std::vector<std::string> out;
  for (const auto& c : classes) out.push_back(c.label);
  return out;
}

QdaModel fit_qda(std::span<const LabeledFeature> features, std::vector<std::string> class_list, double shrinkage) {
  require(shrinkage >= 0 && shrinkage <= 1, "QDA shrinkage must lie in [0, 1]");
  if (class_list.empty()) {
    for (const auto& f : features) {
      if (std::find(class_list.begin(), class_list.end(), f.label) == class_list.end()) class_list.push_back(f.label);
    }
  }
  require(class_list.size() >= 2, "QDA needs at least two classes");
  require(!features.empty(), "QDA needs training data");
  const Eigen::Index d = features.front().x.size();

  QdaModel model;
  model.shrinkage = shrinkage;
  const double log_prior = -std::log(static_cast<double>(class_list.size()));
  for (const auto& label : class_list) {
    std::vector<const Vector*> xs;
    for (const auto& f : features) {
      require(f.x.size() == d, "QDA features disagree on dimension");
      if (f.label == label) xs.push_back(&f.x);
    }
    require(!xs.empty(), "class '" + label + "' absent from training data");
    require(xs.size() >= 2, "QDA needs at least 2 samples in class '" + label + "'");

    QdaClass c;
    c.label = label;
    c.mean = Vector::Zero(d);
    for (const auto* x : xs) c.mean += *x;
    c.mean /= static_cast<double>(xs.size());
    Matrix cov = Matrix::Zero(d, d);
    for (const auto* x : xs) {
      const Vector z = *x - c.mean;
      cov += z * z.transpose();
    }
    cov /= static_cast<double>(xs.size());
    const double mu = cov.trace() / static_cast<double>(d);
    cov = (1.0 - shrinkage) * cov + shrinkage * mu * Matrix::Identity(d, d);
    if (cov.trace() <= 0) cov += 1e-12 * Matrix::Identity(d, d);

    Eigen::LLT<Matrix> llt(cov);
    require(llt.info() == Eigen::Success, "QDA covariance not positive definite for '" + label + "'");
    c.covariance = cov;
    c.precision = llt.solve(Matrix::Identity(d, d));
    c.log_det = 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
    c.log_prior = log_prior;
    model.classes.push_back(std::move(c));
  }
  return model;
}

std::vector<RankedClass> qda_rank(const QdaModel& model, const Vector& x) {
  require(x.size() == model.dim(), "feature dimension does not match QDA model");
  std::vector<RankedClass> out;
  for (const auto& c : model.classes) {
    const Vector z = x - c.mean;
    out.push_back({c.label, c.log_prior - 0.5 * c.log_det - 0.5 * z.dot(c.precision * z)});
  }
  double top = out.front().log_posterior;
  for (const auto& r : out) top = std::max(top, r.log_posterior);
  double sum = 0.0;
  for (const auto& r : out) sum += std::exp(r.log_posterior - top);
  const double log_norm = top + std::log(sum);
  for (auto& r : out) r.log_posterior -= log_norm;
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedClass& a, const RankedClass& b) { return a.log_posterior > b.log_posterior; });
  return out;
}

MiDecoder fit_mi_decoder(std::span<const Epoch> epochs, const MiFitConfig& config,
                         std::vector<std::string> class_list) {
  MiDecoder d;
  d.csp = fit_csp(epochs, config.n_csp, std::move(class_list));
  std::vector<LabeledFeature> features;
  features.reserve(epochs.size());
  for (const auto& e : epochs) features.push_back({csp_features(d.csp, e), *e.label()});
  d.qda = fit_qda(features, d.csp.class_list, config.shrinkage);
  return d;
}

std::vector<RankedClass> classify_mi(const CspModel& csp, const QdaModel& qda, const Epoch& epoch) {
  check_class_list(csp.class_list, qda.class_list());
  return qda_rank(qda, csp_features(csp, epoch));
}

CrossValidation cross_validate(std::span<const Epoch> epochs, int k_folds, const MiFitConfig& config) {
  require(k_folds >= 2, "cross validation needs at least 2 folds");
  const auto class_list = canonical_class_list(epochs);
  std::map<std::string, int> seen;
  std::vector<int> fold_of(epochs.size());
  for (std::size_t i = 0; i < epochs.size(); ++i) fold_of[i] = seen[*epochs[i].label()]++ % k_folds;
  for (const auto& label : class_list) {
    require(seen[label] >= k_folds, "insufficient trials: class '" + label + "' has fewer trials than folds");
  }

  CrossValidation cv;
  for (int fold = 0; fold < k_folds; ++fold) {
    std::vector<Epoch> train;
    std::vector<const Epoch*> test;
    for (std::size_t i = 0; i < epochs.size(); ++i) {
      if (fold_of[i] == fold) test.push_back(&epochs[i]);
      else train.push_back(epochs[i]);
    }
    const auto decoder = fit_mi_decoder(train, config, class_list);
    int correct = 0;
    for (const Epoch* e : test) correct += classify_mi(decoder, *e).front().label == *e->label();
    cv.fold_accuracies.push_back(static_cast<double>(correct) / static_cast<double>(test.size()));
  }
  cv.accuracy = std::accumulate(cv.fold_accuracies.begin(), cv.fold_accuracies.end(), 0.0) /
                static_cast<double>(k_folds);
  return cv;
}

char axis_name(Axis a) {
  switch (a) {
    case Axis::x: return 'x';
    case Axis::y: return 'y';
    case Axis::z: return 'z';
  }
  return '?';
}

int cursor_step(const MiDecoder& decoder, const Epoch& epoch, Axis /*axis*/) {
  auto classes = decoder.class_list();
  std::sort(classes.begin(), classes.end());
  require(classes == std::vector<std::string>{"LeftHand", "RightHand"},
          "cursor decoder must be 2-way LeftHand/RightHand (wrong decoder arity)");
  return classify_mi(decoder, epoch).front().label == "LeftHand" ? -1 : +1;
}

Epoch MiPreprocessor::apply(const Epoch& raw) const {
  return signal::apply_filter(signal::select_channels(raw, montage, subset), filter);
}

MiPipeline fit_mi_pipeline(std::span<const Epoch> raw_epochs, const MiPreprocessor& pre, const MiFitConfig& config,
                           std::vector<std::string> class_list) {
  std::vector<Epoch> processed;
  processed.reserve(raw_epochs.size());
  for (const auto& e : raw_epochs) processed.push_back(pre.apply(e));
  return MiPipeline{pre, fit_mi_decoder(processed, config, std::move(class_list))};
}

nlohmann::json to_json(const MiPipeline& p) {
  using nlohmann::json;
  const auto& csp = p.decoder.csp;
  json j;
  j["format"] = "noir-mi-model-v1";
  j["preprocess"] = {{"montage", config::to_json(p.preprocess.montage)},
                     {"subset", p.preprocess.subset},
                     {"filter", config::to_json(p.preprocess.filter)}};
  j["config"] = {{"n_csp", csp.n_csp}, {"shrinkage", p.decoder.qda.shrinkage}};
  j["class_list"] = csp.class_list;
  j["csp"] = {{"q", config::matrix_to_json(csp.q)}};
  json covs = json::array();
  for (const auto& c : csp.class_covariances) covs.push_back(config::matrix_to_json(c));
  j["csp"]["class_covariances"] = covs;
  json eig = json::array();
  for (const auto& v : csp.eigenvalues) eig.push_back(config::vector_to_json(v));
  j["csp"]["eigenvalues"] = eig;
  json classes = json::array();
  for (const auto& c : p.decoder.qda.classes) {
    classes.push_back({{"label", c.label},
                       {"mean", config::vector_to_json(c.mean)},
                       {"covariance", config::matrix_to_json(c.covariance)},
                       {"log_prior", c.log_prior}});
  }
  j["qda"] = {{"classes", classes}};
  return j;
}

MiPipeline mi_pipeline_from_json(const nlohmann::json& j) {
  require(j.value("format", "") == "noir-mi-model-v1", "not an MI model file");
  MiPipeline p;
  p.preprocess.montage = config::montage_from_json(j.at("preprocess").at("montage"));
  p.preprocess.subset = j.at("preprocess").at("subset").get<std::string>();
  p.preprocess.filter = config::filter_from_json(j.at("preprocess").at("filter"));
  auto& csp = p.decoder.csp;
  csp.n_csp = j.at("config").at("n_csp").get<int>();
  csp.class_list = j.at("class_list").get<std::vector<std::string>>();
  csp.q = config::matrix_from_json(j.at("csp").at("q"));
  for (const auto& c : j.at("csp").at("class_covariances")) csp.class_covariances.push_back(config::matrix_from_json(c));
  for (const auto& v : j.at("csp").at("eigenvalues")) csp.eigenvalues.push_back(config::vector_from_json(v));
  auto& qda = p.decoder.qda;
  qda.shrinkage = j.at("config").at("shrinkage").get<double>();
  for (const auto& jc : j.at("qda").at("classes")) {
    QdaClass c;
    c.label = jc.at("label").get<std::string>();
    c.mean = config::vector_from_json(jc.at("mean"));
    c.covariance = config::matrix_from_json(jc.at("covariance"));
    c.log_prior = jc.at("log_prior").get<double>();
    Eigen::LLT<Matrix> llt(c.covariance);
    require(llt.info() == Eigen::Success, "stored QDA covariance is not positive definite");
    c.precision = llt.solve(Matrix::Identity(c.covariance.rows(), c.covariance.cols()));
    c.log_det = 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
    qda.classes.push_back(std::move(c));
  }
  check_class_list(csp.class_list, qda.class_list());
  return p;
}

}  // namespace noir::mi
