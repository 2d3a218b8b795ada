#include "noir/memory.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "noir/base64.hpp"
#include "noir/error.hpp"
#include "noir/random.hpp"

namespace noir::memory {

namespace {

using MatF = EmbeddingNet::Mat;

// Rows of labels grouped by label, in order of first appearance.
std::vector<std::vector<Eigen::Index>> group_by_label(const std::vector<std::string>& labels,
                                                      std::vector<std::string>* names = nullptr) {
  std::vector<std::string> seen;
  std::vector<std::vector<Eigen::Index>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = std::find(seen.begin(), seen.end(), labels[i]);
    if (it == seen.end()) {
      seen.push_back(labels[i]);
      groups.emplace_back();
      it = seen.end() - 1;
    }
    groups[static_cast<std::size_t>(it - seen.begin())].push_back(static_cast<Eigen::Index>(i));
  }
  if (names) *names = std::move(seen);
  return groups;
}

// Anchor i paired with a random same-label positive and other-label negative.
std::vector<std::array<Eigen::Index, 3>> sample_triplets(const std::vector<std::vector<Eigen::Index>>& groups,
                                                         const std::vector<std::size_t>& group_of,
                                                         const std::vector<Eigen::Index>& anchors, Rng& rng) {
  std::vector<std::array<Eigen::Index, 3>> out;
  out.reserve(anchors.size());
  const auto n = static_cast<Eigen::Index>(group_of.size());
  for (auto a : anchors) {
    const auto& same = groups[group_of[static_cast<std::size_t>(a)]];
    const auto pa = static_cast<std::size_t>(std::find(same.begin(), same.end(), a) - same.begin());
    std::size_t j = std::uniform_int_distribution<std::size_t>(0, same.size() - 2)(rng);
    if (j >= pa) ++j;
    const auto p = same[j];
    const auto n_other = static_cast<std::size_t>(n) - same.size();
    std::uniform_int_distribution<std::size_t> pick_neg(0, n_other - 1);
    std::size_t k = pick_neg(rng);
    Eigen::Index neg = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (group_of[static_cast<std::size_t>(i)] == group_of[static_cast<std::size_t>(a)]) continue;
      if (k-- == 0) {
        neg = i;
        break;
      }
    }
    out.push_back({a, p, neg});
  }
  return out;
}

MatF stack_triplets(const FeatureMatrix& ds, std::span<const std::array<Eigen::Index, 3>> triplets) {
  const auto b = static_cast<Eigen::Index>(triplets.size());
  MatF x(ds.dim(), 3 * b);
  for (Eigen::Index i = 0; i < b; ++i) {
    for (int r = 0; r < 3; ++r) {
      x.col(r * b + i) = ds.data.row(triplets[static_cast<std::size_t>(i)][r]).transpose().cast<float>();
    }
  }
  return x;
}

std::string floats_to_base64(const float* data, std::size_t n) {
  static_assert(sizeof(float) == 4);
  std::vector<std::uint8_t> bytes(n * 4);
  std::memcpy(bytes.data(), data, bytes.size());
  return base64_encode(bytes.data(), bytes.size());
}

std::vector<float> floats_from_base64(const std::string& text, std::size_t expected) {
  const auto bytes = base64_decode(text);
  require(bytes.size() == expected * 4, "weight blob has the wrong size");
  std::vector<float> out(expected);
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

Eigen::VectorXd gaussian_unit(std::uint64_t seed, int dims) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(static_cast<double>(dims)));
  Eigen::VectorXd v(dims);
  for (int i = 0; i < dims; ++i) v[i] = g(rng);
  return v;
}

}  // namespace

ObjectSkill split_label(std::string_view label) {
  const auto bar = label.find('|');
  require(bar != std::string_view::npos, "label must be 'object|skill': '" + std::string(label) + "'");
  return {std::string(label.substr(0, bar)), std::string(label.substr(bar + 1))};
}

std::string join_label(std::string_view object_id, std::string_view skill_id) {
  return std::string(object_id) + "|" + std::string(skill_id);
}

double triplet_loss(const Eigen::VectorXd& a, const Eigen::VectorXd& p, const Eigen::VectorXd& n, double alpha) {
  require(a.size() == p.size() && a.size() == n.size(), "triplet embeddings differ in dimension");
  require(alpha >= 0.0, "margin must be non-negative");
  return std::max((a - p).norm() - (a - n).norm() + alpha, 0.0);
}

std::vector<int> TrainConfig::layer_dims() const {
  std::vector<int> dims{input_dim};
  for (int i = 0; i < hidden_layers; ++i) dims.push_back(hidden_dim);
  dims.push_back(output_dim);
  return dims;
}

Eigen::MatrixXf embed(const EmbeddingNet& net, const Eigen::MatrixXd& rows) {
  return net.forward(rows.transpose().cast<float>());
}

double mean_triplet_loss(const EmbeddingNet& net, const FeatureMatrix& dataset,
                         std::span<const std::array<Eigen::Index, 3>> triplets, double margin) {
  if (triplets.empty()) return 0.0;
  const MatF out = net.forward(stack_triplets(dataset, triplets));
  MatF unused;
  return triplet_batch_loss(out, margin, unused);
}

TrainResult train_embedding(const FeatureMatrix& dataset, const TrainConfig& config) {
  require(static_cast<std::size_t>(dataset.size()) == dataset.labels.size(), "one label per feature row");
  require(dataset.dim() == config.input_dim, "feature dimension does not match the network input");
  require(dataset.data.allFinite(), "scene features must be finite");
  require(config.epochs >= 0 && config.batch_size > 0, "invalid training schedule");
  const auto groups = group_by_label(dataset.labels);
  require(groups.size() >= 2, "triplet training needs at least two labels");
  for (const auto& g : groups) {
    require(g.size() >= 2, "label '" + dataset.labels[static_cast<std::size_t>(g.front())] +
                               "' has a single sample; no positive available");
  }
  std::vector<std::size_t> group_of(static_cast<std::size_t>(dataset.size()));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (auto i : groups[g]) group_of[static_cast<std::size_t>(i)] = g;
  }

  TrainResult result{EmbeddingNet(config.layer_dims(), derive_seed(config.seed, {1})), {}, 0.0, 0.0};
  std::vector<Eigen::Index> all(static_cast<std::size_t>(dataset.size()));
  std::iota(all.begin(), all.end(), 0);

  Rng eval_rng(derive_seed(config.seed, {2}));
  const auto eval_triplets = sample_triplets(groups, group_of, all, eval_rng);
  result.initial_loss = mean_triplet_loss(result.net, dataset, eval_triplets, config.margin);

  Adam<float> adam(config.learning_rate);
  Rng rng(derive_seed(config.seed, {3}));
  EmbeddingNet::Cache cache;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<Eigen::Index> order = all;
    std::shuffle(order.begin(), order.end(), rng);
    const auto triplets = sample_triplets(groups, group_of, order, rng);
    double total = 0.0;
    for (std::size_t start = 0; start < triplets.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const auto count = std::min(static_cast<std::size_t>(config.batch_size), triplets.size() - start);
      const std::span<const std::array<Eigen::Index, 3>> batch(triplets.data() + start, count);
      const MatF out = result.net.forward(stack_triplets(dataset, batch), cache);
      MatF grad;
      total += triplet_batch_loss(out, config.margin, grad) * static_cast<double>(count);
      adam.step(result.net.layers(), result.net.backward(cache, grad));
    }
    result.epoch_loss.push_back(total / static_cast<double>(triplets.size()));
  }
  result.final_loss = mean_triplet_loss(result.net, dataset, eval_triplets, config.margin);
  return result;
}

MemoryStore::MemoryStore(EmbeddingNet net, const FeatureMatrix& train) : net_(std::move(net)) {
  require(static_cast<std::size_t>(train.size()) == train.labels.size(), "one label per feature row");
  if (train.size() == 0) return;
  const Eigen::MatrixXf z = embed(net_, train.data);
  for (Eigen::Index i = 0; i < train.size(); ++i) {
    auto [obj, skill] = split_label(train.labels[static_cast<std::size_t>(i)]);
    records_.push_back({z.col(i), std::move(obj), std::move(skill), "row:" + std::to_string(i)});
  }
  tau_ = self_distance_tau(records_);
}

Retrieval MemoryStore::retrieve(const Eigen::VectorXd& query) const {
  require(query.size() == net_.input_dim(), "query dimension does not match the network input");
  return retrieve_embedding(net_.forward(query.cast<float>()).col(0));
}

Retrieval MemoryStore::retrieve_embedding(const Eigen::VectorXf& embedding) const {
  require(!records_.empty(), "memory store is empty");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < records_.size(); ++i) {
    require(records_[i].embedding.size() == embedding.size(), "embedding dimension mismatch");
    const double d = (records_[i].embedding.cast<double>() - embedding.cast<double>()).norm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  const auto& r = records_[best];
  return {r.object_id, r.skill_id, best_d, best, best_d <= tau_};
}

double MemoryStore::self_distance_tau(std::span<const MemoryRecord> records, double quantile) {
  if (records.size() < 2) return std::numeric_limits<double>::infinity();
  std::vector<double> nn(records.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t j = 0; j < records.size(); ++j) {
      if (i == j) continue;
      nn[i] = std::min(nn[i], (records[i].embedding.cast<double>() - records[j].embedding.cast<double>()).norm());
    }
  }
  std::sort(nn.begin(), nn.end());
  const double pos = quantile * static_cast<double>(nn.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, nn.size() - 1);
  return nn[lo] + (pos - static_cast<double>(lo)) * (nn[hi] - nn[lo]);
}

double evaluate_retrieval(const MemoryStore& store, const FeatureMatrix& test) {
  require(test.size() > 0, "empty test set");
  const Eigen::MatrixXf z = embed(store.net(), test.data);
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < test.size(); ++i) {
    const auto truth = split_label(test.labels[static_cast<std::size_t>(i)]);
    const auto got = store.retrieve_embedding(z.col(i));
    if (got.object_id == truth.object_id && got.skill_id == truth.skill_id) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

double nearest_centroid_accuracy(const FeatureMatrix& train, const FeatureMatrix& test) {
  require(train.size() > 0 && test.size() > 0, "empty split");
  require(train.dim() == test.dim(), "train and test feature dimensions differ");
  std::vector<std::string> names;
  const auto groups = group_by_label(train.labels, &names);
  Eigen::MatrixXd centroids(static_cast<Eigen::Index>(groups.size()), train.dim());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(train.dim());
    for (auto i : groups[g]) c += train.data.row(i);
    centroids.row(static_cast<Eigen::Index>(g)) = c / static_cast<double>(groups[g].size());
  }
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < test.size(); ++i) {
    Eigen::Index best = 0;
    (centroids.rowwise() - test.data.row(i)).rowwise().squaredNorm().minCoeff(&best);
    if (names[static_cast<std::size_t>(best)] == test.labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

SyntheticFeaturizer::SyntheticFeaturizer(FeaturizerConfig config) : config_(config) {
  require(config_.dim > 0 && config_.stage_dims > 0 && config_.nuisance_dims > 0, "featurizer dimensions must be positive");
  const int latent = config_.stage_dims + config_.nuisance_dims;
  Rng rng(derive_seed(config_.seed, {0}));
  std::normal_distribution<double> g(0.0, 1.0);
  projection_.resize(config_.dim, latent);
  for (Eigen::Index i = 0; i < projection_.size(); ++i) projection_.data()[i] = g(rng);
  bias_.resize(config_.dim);
  for (Eigen::Index i = 0; i < bias_.size(); ++i) bias_[i] = config_.bias + 0.5 * g(rng);
}

Eigen::VectorXd SyntheticFeaturizer::latent(const SceneDescriptor& scene) const {
  const int sd = config_.stage_dims, nd = config_.nuisance_dims;
  const auto s = config_.seed;
  auto dir = [&](std::initializer_list<std::uint64_t> tags) { return gaussian_unit(derive_seed(s, tags), nd); };
  // Appearance and background attributes in [-1, 1], fixed per id.
  auto attrs = [&](std::uint64_t kind, std::uint64_t a, std::uint64_t b, int n) {
    Rng rng(derive_seed(s, {kind, a, b}));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = u(rng);
    return v;
  };
  Eigen::VectorXd z = Eigen::VectorXd::Zero(sd + nd);
  z.head(sd) = config_.stage_scale * gaussian_unit(derive_seed(s, {1, static_cast<std::uint64_t>(scene.stage)}), sd);
  auto nuisance = z.tail(nd);
  for (const auto& o : scene.objects) {
    const auto c = fnv1a(o.category);
    nuisance += dir({2, c});
    for (std::uint64_t k = 0; k < 3; ++k) nuisance += config_.position_scale * o.position[static_cast<Eigen::Index>(k)] * dir({3, c, k});
    // Unit vector along yaw; the rest pose (yaw 0) is the reference.
    nuisance += config_.orientation_scale * ((std::cos(o.yaw) - 1.0) * dir({4, c, 0}) + std::sin(o.yaw) * dir({4, c, 1}));
    if (o.instance != 0) {
      const auto a = attrs(5, c, static_cast<std::uint64_t>(o.instance), 3);
      for (std::uint64_t k = 0; k < 3; ++k) nuisance += config_.instance_scale * a[k] * dir({6, c, k});
    }
  }
  for (int item : scene.context_items) {
    const auto a = attrs(7, static_cast<std::uint64_t>(item), 0, 4);
    for (std::uint64_t k = 0; k < 4; ++k) nuisance += config_.context_scale * a[k] * dir({8, k});
  }
  return z;
}

Eigen::VectorXd SyntheticFeaturizer::featurize(const SceneDescriptor& scene, std::uint64_t noise_seed) const {
  const Eigen::VectorXd z = latent(scene);
  Eigen::VectorXd f = (projection_ * z + bias_).cwiseMax(0.0);
  Rng rng(noise_seed);
  std::normal_distribution<double> g(0.0, config_.noise_scale);
  for (Eigen::Index i = 0; i < f.size(); ++i) f[i] += g(rng);
  return f / std::sqrt(static_cast<double>(config_.dim));
}

std::string_view to_string(Variation v) {
  switch (v) {
    case Variation::none: return "none";
    case Variation::position: return "position";
    case Variation::pose: return "pose";
    case Variation::instance: return "instance";
    case Variation::context: return "context";
  }
  return "none";
}

Variation variation_from_string(std::string_view s) {
  for (auto v : {Variation::none, Variation::position, Variation::pose, Variation::instance, Variation::context}) {
    if (to_string(v) == s) return v;
  }
  throw Error("unknown variation '" + std::string(s) + "'");
}

RetrievalCorpusConfig make_pasta_corpus_config() {
  RetrievalCorpusConfig c;
  c.labels = {"pot|Picking",     "stove|Placing",     "pitcher|Picking", "pot|Pouring",
              "counter|Placing", "pasta|Picking", "pot|Placing",     "stove|Pushing"};
  c.categories = {"pot", "stove", "pitcher", "pasta", "counter"};
  c.instance_category = "pasta";
  return c;
}

namespace {

constexpr int kSeenInstances = 3;  // training instances 0..2; unseen test instances start at 5
constexpr int kSeenContext = 10;   // background item pool 0..9; unseen pool starts at 100

// Training scenes span the table and every yaw, with seen instances and
// background objects. Test scenes resample layout and yaw for position and
// pose, swap in unseen instances of the consumable, or add unseen background
// objects together with free yaw.
SceneDescriptor sample_scene(const RetrievalCorpusConfig& config, int stage, Variation v, bool training, Rng& rng) {
  std::uniform_real_distribution<double> pos(-1.0, 1.0);
  std::uniform_real_distribution<double> yaw(-M_PI, M_PI);
  SceneDescriptor s;
  s.stage = stage;
  for (std::size_t i = 0; i < config.categories.size(); ++i) {
    SceneObject o;
    o.category = config.categories[i];
    o.position = Eigen::Vector3d(pos(rng), pos(rng), 0.0);
    o.yaw = yaw(rng);
    if (o.category == config.instance_category) {
      o.instance = (!training && v == Variation::instance) ? std::uniform_int_distribution<int>(5, 24)(rng)
                                                           : std::uniform_int_distribution<int>(0, kSeenInstances - 1)(rng);
    }
    s.objects.push_back(std::move(o));
  }
  const bool new_context = !training && v == Variation::context;
  const int n = std::uniform_int_distribution<int>(new_context ? 2 : 0, new_context ? 5 : 3)(rng);
  for (int k = 0; k < n; ++k) {
    s.context_items.push_back(new_context ? std::uniform_int_distribution<int>(100, 119)(rng)
                                          : std::uniform_int_distribution<int>(0, kSeenContext - 1)(rng));
  }
  return s;
}

}  // namespace

SceneDescriptor sample_training_scene(const RetrievalCorpusConfig& config, int stage, std::uint64_t seed) {
  Rng rng(seed);
  return sample_scene(config, stage, Variation::none, true, rng);
}

RetrievalCorpus make_retrieval_corpus(const RetrievalCorpusConfig& config, Variation variation, std::uint64_t seed) {
  require(config.labels.size() >= 2, "corpus needs at least two labels");
  require(config.train_per_label >= 2 && config.test_per_label >= 1, "too few samples per label");
  const SyntheticFeaturizer fz(config.featurizer);
  const auto n_labels = static_cast<int>(config.labels.size());
  RetrievalCorpus c;

  // The training split does not depend on the variation.
  c.train.data.resize(n_labels * config.train_per_label, config.featurizer.dim);
  Rng train_rng(derive_seed(seed, {10}));
  Eigen::Index row = 0;
  for (int k = 0; k < config.train_per_label; ++k) {
    for (int stage = 0; stage < n_labels; ++stage) {
      const auto scene = sample_scene(config, stage, Variation::none, true, train_rng);
      c.train.data.row(row++) = fz.featurize(scene, train_rng()).transpose();
      c.train.labels.push_back(config.labels[static_cast<std::size_t>(stage)]);
    }
  }
  if (variation == Variation::none) {
    c.test = c.train;
    return c;
  }
  c.test.data.resize(n_labels * config.test_per_label, config.featurizer.dim);
  Rng test_rng(derive_seed(seed, {11, static_cast<std::uint64_t>(variation)}));
  row = 0;
  for (int k = 0; k < config.test_per_label; ++k) {
    for (int stage = 0; stage < n_labels; ++stage) {
      const auto scene = sample_scene(config, stage, variation, false, test_rng);
      c.test.data.row(row++) = fz.featurize(scene, test_rng()).transpose();
      c.test.labels.push_back(config.labels[static_cast<std::size_t>(stage)]);
    }
  }
  return c;
}

nlohmann::json to_json(const MemoryStore& store) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : store.net().layers()) {
    // Row-major out x in.
    const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = l.w;
    layers.push_back({{"w", floats_to_base64(w.data(), static_cast<std::size_t>(w.size()))},
                      {"b", floats_to_base64(l.b.data(), static_cast<std::size_t>(l.b.size()))}});
  }
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : store.records()) {
    records.push_back({{"object", r.object_id},
                       {"skill", r.skill_id},
                       {"provenance", r.provenance},
                       {"embedding", floats_to_base64(r.embedding.data(), static_cast<std::size_t>(r.embedding.size()))}});
  }
  nlohmann::json j{{"format", "noir-memory-v1"}, {"dims", store.net().dims()}, {"layers", layers}, {"records", records}};
  j["tau"] = std::isinf(store.tau()) ? nlohmann::json("inf") : nlohmann::json(store.tau());
  return j;
}

MemoryStore memory_store_from_json(const nlohmann::json& j) {
  require(j.value("format", "") == "noir-memory-v1", "not a skill memory file");
  const auto dims = j.at("dims").get<std::vector<int>>();
  EmbeddingNet net(dims, 0);
  const auto& layers = j.at("layers");
  require(layers.size() == net.layers().size(), "layer count does not match dims");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& layer = net.layers()[l];
    const auto w = floats_from_base64(layers[l].at("w").get<std::string>(), static_cast<std::size_t>(layer.w.size()));
    layer.w = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        w.data(), layer.w.rows(), layer.w.cols());
    const auto b = floats_from_base64(layers[l].at("b").get<std::string>(), static_cast<std::size_t>(layer.b.size()));
    layer.b = Eigen::Map<const Eigen::VectorXf>(b.data(), layer.b.size());
  }
  MemoryStore store(std::move(net), FeatureMatrix{});
  for (const auto& r : j.at("records")) {
    const auto e = floats_from_base64(r.at("embedding").get<std::string>(), static_cast<std::size_t>(dims.back()));
    store.add({Eigen::Map<const Eigen::VectorXf>(e.data(), dims.back()), r.at("object").get<std::string>(),
               r.at("skill").get<std::string>(), r.value("provenance", "")});
  }
  const auto& tau = j.at("tau");
  store.set_tau(tau.is_string() ? std::numeric_limits<double>::infinity() : tau.get<double>());
  return store;
}

}  // namespace noir::memory
