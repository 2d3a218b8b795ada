#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "noir/mlp.hpp"

namespace noir::memory {

// Labeled scene features, one row per sample. Labels are "object|skill".
struct FeatureMatrix {
  Eigen::MatrixXd data;  // N x D
  std::vector<std::string> labels;

  Eigen::Index size() const { return data.rows(); }
  Eigen::Index dim() const { return data.cols(); }
};

struct ObjectSkill {
  std::string object_id;
  std::string skill_id;
};

ObjectSkill split_label(std::string_view label);
std::string join_label(std::string_view object_id, std::string_view skill_id);

// max(||a - p|| - ||a - n|| + alpha, 0)
double triplet_loss(const Eigen::VectorXd& a, const Eigen::VectorXd& p, const Eigen::VectorXd& n, double alpha);

// Mean triplet loss of a stacked batch [anchors | positives | negatives]
// (columns) and its gradient with respect to that batch.
template <typename Mat>
double triplet_batch_loss(const Mat& out, double alpha, Mat& grad) {
  using Scalar = typename Mat::Scalar;
  const Eigen::Index b = out.cols() / 3;
  require(b > 0 && out.cols() == 3 * b, "triplet batch must stack anchors, positives and negatives");
  grad = Mat::Zero(out.rows(), out.cols());
  double total = 0.0;
  const auto inv_b = static_cast<Scalar>(1.0 / static_cast<double>(b));
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto a = out.col(i);
    const auto p = out.col(b + i);
    const auto n = out.col(2 * b + i);
    const auto dap = (a - p).eval();
    const auto dan = (a - n).eval();
    const Scalar lp = dap.norm();
    const Scalar ln = dan.norm();
    const double loss = static_cast<double>(lp) - static_cast<double>(ln) + alpha;
    if (loss <= 0) continue;
    total += loss;
    // Subgradient 0 where a distance vanishes.
    if (lp > Scalar(0)) {
      grad.col(i) += dap / lp * inv_b;
      grad.col(b + i) -= dap / lp * inv_b;
    }
    if (ln > Scalar(0)) {
      grad.col(i) -= dan / ln * inv_b;
      grad.col(2 * b + i) += dan / ln * inv_b;
    }
  }
  return total / static_cast<double>(b);
}

using EmbeddingNet = Mlp<float>;

struct TrainConfig {
  int input_dim = 2048;
  int hidden_layers = 5;
  int hidden_dim = 1024;
  int output_dim = 1024;
  int epochs = 100;
  int batch_size = 40;
  double learning_rate = 1e-3;
  double margin = 1.0;
  std::uint64_t seed = 0;

  std::vector<int> layer_dims() const;
};

struct TrainResult {
  EmbeddingNet net;
  std::vector<double> epoch_loss;  // mean training triplet loss per epoch
  double initial_loss = 0.0;       // fixed evaluation triplets, before training
  double final_loss = 0.0;         // same triplets, after training
};

// Triplet training with Adam. Every epoch visits each sample once as anchor,
// with one random positive and one random negative per anchor.
TrainResult train_embedding(const FeatureMatrix& dataset, const TrainConfig& config);

// Mean loss over `triplets` (anchor, positive, negative row indices).
double mean_triplet_loss(const EmbeddingNet& net, const FeatureMatrix& dataset,
                         std::span<const std::array<Eigen::Index, 3>> triplets, double margin);

Eigen::MatrixXf embed(const EmbeddingNet& net, const Eigen::MatrixXd& rows);  // returns out x N

struct MemoryRecord {
  Eigen::VectorXf embedding;
  std::string object_id;
  std::string skill_id;
  std::string provenance;
};

struct Retrieval {
  std::string object_id;
  std::string skill_id;
  double distance = 0.0;
  std::size_t index = 0;
  bool confident = true;  // distance <= tau
};

class MemoryStore {
 public:
  MemoryStore() = default;
  MemoryStore(EmbeddingNet net, const FeatureMatrix& train);

  const EmbeddingNet& net() const { return net_; }
  const std::vector<MemoryRecord>& records() const { return records_; }
  double tau() const { return tau_; }
  void set_tau(double tau) { tau_ = tau; }
  void add(MemoryRecord r) { records_.push_back(std::move(r)); }

  // Nearest record in embedding space; ties go to the earliest record.
  Retrieval retrieve(const Eigen::VectorXd& query) const;
  Retrieval retrieve_embedding(const Eigen::VectorXf& embedding) const;

  // 95th percentile of each record's distance to its nearest other record.
  static double self_distance_tau(std::span<const MemoryRecord> records, double quantile = 0.95);

 private:
  EmbeddingNet net_;
  std::vector<MemoryRecord> records_;
  double tau_ = std::numeric_limits<double>::infinity();
};

// Fraction of rows where object and skill both match.
double evaluate_retrieval(const MemoryStore& store, const FeatureMatrix& test);

// Raw-feature baseline: predict the label of the nearest class mean.
double nearest_centroid_accuracy(const FeatureMatrix& train, const FeatureMatrix& test);

// Stand-in for a pretrained visual encoder. A scene descriptor is reduced to
// a latent vector (a per-stage code plus a nuisance block that varies
// smoothly with object layout, appearance and background), then mapped
// through a fixed seeded random projection and rectifier into D dimensions,
// with additive noise.
struct SceneObject {
  std::string category;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // normalized to roughly [-1, 1]
  double yaw = 0.0;  // radians
  int instance = 0;  // appearance id; attributes derive from it
};

struct SceneDescriptor {
  int stage = 0;
  std::vector<SceneObject> objects;
  std::vector<int> context_items;  // background objects by id
};

struct FeaturizerConfig {
  int dim = 2048;
  int stage_dims = 16;     // latent block carrying the task stage
  int nuisance_dims = 32;  // latent block carrying object layout and context
  double stage_scale = 1.2;
  double position_scale = 1.0;
  double orientation_scale = 0.6;
  double instance_scale = 1.0;
  double context_scale = 1.0;
  double bias = 4.0;  // keeps most projected units active
  double noise_scale = 0.1;
  std::uint64_t seed = 7;
};

class SyntheticFeaturizer {
 public:
  explicit SyntheticFeaturizer(FeaturizerConfig config = {});
  Eigen::VectorXd featurize(const SceneDescriptor& scene, std::uint64_t noise_seed) const;
  const FeaturizerConfig& config() const { return config_; }

 private:
  Eigen::VectorXd latent(const SceneDescriptor& scene) const;
  FeaturizerConfig config_;
  Eigen::MatrixXd projection_;  // dim x (stage_dims + nuisance_dims)
  Eigen::VectorXd bias_;
};

enum class Variation { none, position, pose, instance, context };
std::string_view to_string(Variation v);
Variation variation_from_string(std::string_view s);

struct RetrievalCorpusConfig {
  std::vector<std::string> labels;       // one "object|skill" per task stage
  std::vector<std::string> categories;   // objects present in every scene
  std::string instance_category;         // the object whose appearance varies
  int train_per_label = 15;
  int test_per_label = 20;
  FeaturizerConfig featurizer;
};

// MakePasta stages: pot, stove, pitcher, pasta and counter in every scene,
// eight distinct object-skill pairs, 15 training samples per pair.
RetrievalCorpusConfig make_pasta_corpus_config();

struct RetrievalCorpus {
  FeatureMatrix train;
  FeatureMatrix test;
};

// Training scenes vary layout and yaw over their full range with seen
// instances and background objects; the test split is drawn fresh under the
// chosen variation (unseen instances, unseen background objects).
// Variation::none makes the test split a copy of the training split.
RetrievalCorpus make_retrieval_corpus(const RetrievalCorpusConfig& config, Variation variation, std::uint64_t seed);

// Training-distribution scene for a given stage.
SceneDescriptor sample_training_scene(const RetrievalCorpusConfig& config, int stage, std::uint64_t seed);

nlohmann::json to_json(const MemoryStore& store);
MemoryStore memory_store_from_json(const nlohmann::json& j);

}  // namespace noir::memory
