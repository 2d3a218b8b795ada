#include "noir/param.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include <Eigen/Dense>

#include "noir/error.hpp"
#include "noir/random.hpp"

namespace noir::param {

FeatureMap::FeatureMap(int c, int h, int w, int img_w, int img_h)
    : channels(c), height(h), width(w), image_width(img_w), image_height(img_h),
      data(static_cast<std::size_t>(c) * h * w, 0.0f) {}

void FeatureMap::validate() const {
  require(channels > 0, "feature map needs at least one channel");
  require(height >= 3 && width >= 3, "feature map grid must be at least 3x3");
  require(image_width > 0 && image_height > 0, "image geometry must be positive");
  require(data.size() == static_cast<std::size_t>(channels) * height * width, "feature map data size mismatch");
  for (float v : data) require(std::isfinite(v), "feature map entries must be finite");
}

Cell image_to_cell(const ParamPoint& p, const FeatureMap& map) {
  require(p.x >= 0 && p.x < map.image_width && p.y >= 0 && p.y < map.image_height,
          "point outside the image: (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ")");
  const int col = std::min(map.width - 1, static_cast<int>(std::floor(p.x * map.width / map.image_width)));
  const int row = std::min(map.height - 1, static_cast<int>(std::floor(p.y * map.height / map.image_height)));
  return {row, col};
}

ParamPoint cell_to_image(const Cell& c, const FeatureMap& map) {
  require(c.row >= 0 && c.row < map.height && c.col >= 0 && c.col < map.width, "cell outside the grid");
  return {(c.col + 0.5) * map.cell_width(), (c.row + 0.5) * map.cell_height()};
}

namespace {

Cell clamp_interior(Cell c, const FeatureMap& m) {
  return {std::clamp(c.row, 1, m.height - 2), std::clamp(c.col, 1, m.width - 2)};
}

void check_pair(const FeatureMap& train, const FeatureMap& test) {
  require(train.channels == test.channels,
          "channel mismatch: " + std::to_string(train.channels) + " vs " + std::to_string(test.channels));
  require(train.height >= 3 && train.width >= 3 && test.height >= 3 && test.width >= 3,
          "feature map grid must be at least 3x3");
  require(train.data.size() == static_cast<std::size_t>(train.channels) * train.height * train.width &&
              test.data.size() == static_cast<std::size_t>(test.channels) * test.height * test.width,
          "feature map data size mismatch");
}

// Patch values ordered (dr, dc, channel).
std::vector<double> extract_patch(const FeatureMap& m, Cell center) {
  std::vector<double> p;
  p.reserve(static_cast<std::size_t>(9 * m.channels));
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) {
      for (int ch = 0; ch < m.channels; ++ch) p.push_back(m.at(ch, center.row + dr, center.col + dc));
    }
  }
  return p;
}

double norm_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double cosine(double dot, double na, double nb) {
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

Match finish(const FeatureMap& test, Cell best, double sim) { return {best, cell_to_image(best, test), sim}; }

}  // namespace

Match match_point_naive(const FeatureMap& train, const ParamPoint& train_point, const FeatureMap& test) {
  check_pair(train, test);
  const Cell tc = clamp_interior(image_to_cell(train_point, train), train);
  const auto patch = extract_patch(train, tc);
  const double np = norm_of(patch);
  require(np > 0.0, "degenerate all-zero train patch");
  Cell best{1, 1};
  double best_sim = -std::numeric_limits<double>::infinity();
  for (int r = 1; r + 1 < test.height; ++r) {
    for (int c = 1; c + 1 < test.width; ++c) {
      double dot = 0.0, nt = 0.0;
      std::size_t k = 0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          for (int ch = 0; ch < test.channels; ++ch, ++k) {
            const double v = test.at(ch, r + dr, c + dc);
            dot += patch[k] * v;
            nt += v * v;
          }
        }
      }
      const double sim = cosine(dot, np, std::sqrt(nt));
      if (sim > best_sim) {
        best_sim = sim;
        best = {r, c};
      }
    }
  }
  return finish(test, best, best_sim);
}

Match match_point(const FeatureMap& train, const ParamPoint& train_point, const FeatureMap& test) {
  check_pair(train, test);
  const Cell tc = clamp_interior(image_to_cell(train_point, train), train);
  const auto patch = extract_patch(train, tc);
  const double np = norm_of(patch);
  require(np > 0.0, "degenerate all-zero train patch");

  // Channel-last copy so each offset becomes one matrix-vector product.
  const int h = test.height, w = test.width, C = test.channels;
  const Eigen::Index cells = static_cast<Eigen::Index>(h) * w;
  const Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> cm(test.data.data(), C,
                                                                                                 cells);
  const Eigen::MatrixXd cl = cm.cast<double>().transpose();  // cells x C
  const Eigen::VectorXd cell_sq = cl.rowwise().squaredNorm();

  Eigen::VectorXd dot = Eigen::VectorXd::Zero(cells);
  Eigen::VectorXd nt = Eigen::VectorXd::Zero(cells);
  int k = 0;
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc, ++k) {
      const Eigen::Map<const Eigen::VectorXd> pk(patch.data() + static_cast<std::ptrdiff_t>(k) * C, C);
      const Eigen::VectorXd d = cl * pk;
      // Accumulate the neighbor's contribution at each interior center.
      for (int r = 1; r + 1 < h; ++r) {
        const Eigen::Index src = static_cast<Eigen::Index>(r + dr) * w + dc;
        const Eigen::Index dst = static_cast<Eigen::Index>(r) * w;
        dot.segment(dst + 1, w - 2) += d.segment(src + 1, w - 2);
        nt.segment(dst + 1, w - 2) += cell_sq.segment(src + 1, w - 2);
      }
    }
  }
  Cell best{1, 1};
  double best_sim = -std::numeric_limits<double>::infinity();
  for (int r = 1; r + 1 < h; ++r) {
    for (int c = 1; c + 1 < w; ++c) {
      const Eigen::Index i = static_cast<Eigen::Index>(r) * w + c;
      const double sim = cosine(dot[i], np, std::sqrt(nt[i]));
      if (sim > best_sim) {
        best_sim = sim;
        best = {r, c};
      }
    }
  }
  return finish(test, best, best_sim);
}

ParamPoint baseline_random(int image_width, int image_height, std::uint64_t seed) {
  require(image_width > 0 && image_height > 0, "image geometry must be positive");
  Rng rng(seed);
  const int x = std::uniform_int_distribution<int>(0, image_width - 1)(rng);
  const int y = std::uniform_int_distribution<int>(0, image_height - 1)(rng);
  return {static_cast<double>(x), static_cast<double>(y)};
}

Mask mask_union(const std::vector<Mask>& masks) {
  require(!masks.empty(), "no object masks");
  Mask u{masks.front().width, masks.front().height, {}};
  u.on.assign(static_cast<std::size_t>(u.width) * u.height, 0);
  for (const auto& m : masks) {
    require(m.width == u.width && m.height == u.height && m.on.size() == u.on.size(), "mask size mismatch");
    for (std::size_t i = 0; i < u.on.size(); ++i) u.on[i] |= m.on[i] ? 1 : 0;
  }
  return u;
}

ParamPoint baseline_on_objects(const std::vector<Mask>& masks, std::uint64_t seed) {
  const Mask u = mask_union(masks);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < u.on.size(); ++i) {
    if (u.on[i]) idx.push_back(i);
  }
  require(!idx.empty(), "object masks are empty");
  Rng rng(seed);
  const auto i = idx[std::uniform_int_distribution<std::size_t>(0, idx.size() - 1)(rng)];
  return {static_cast<double>(i % static_cast<std::size_t>(u.width)), static_cast<double>(i / static_cast<std::size_t>(u.width))};
}

Match baseline_pixel_similarity(const FeatureMap& train_image, const ParamPoint& train_point,
                                const FeatureMap& test_image) {
  for (const auto* m : {&train_image, &test_image}) {
    require(m->channels == 3 && m->width == m->image_width && m->height == m->image_height,
            "pixel similarity needs 3-channel images at pixel resolution");
  }
  require(train_image.width == test_image.width && train_image.height == test_image.height,
          "train and test images differ in size");
  return match_point(train_image, train_point, test_image);
}

std::string to_string(PairVariation v) {
  switch (v) {
    case PairVariation::identity: return "identity";
    case PairVariation::position: return "position";
    case PairVariation::orientation: return "orientation";
    case PairVariation::instance: return "instance";
    case PairVariation::context: return "context";
    case PairVariation::combined: return "combined";
  }
  return "identity";
}

PairVariation pair_variation_from_string(const std::string& s) {
  for (auto v : {PairVariation::identity, PairVariation::position, PairVariation::orientation, PairVariation::instance,
                 PairVariation::context, PairVariation::combined}) {
    if (to_string(v) == s) return v;
  }
  throw Error("unknown variation '" + s + "'");
}

namespace {

struct Category {
  const char* name;
  double a, b;                  // semi-axes in pixels
  std::array<double, 3> color;  // RGB
  double key_u, key_v;          // keypoint in the object frame
};

// Mug handle, pen grip, bottle neck, medicine bottle cap.
constexpr std::array<Category, 4> kCategories{{
    {"mug", 26, 20, {0.80, 0.20, 0.20}, 0.80, 0.0},
    {"pen", 40, 10, {0.20, 0.30, 0.85}, -0.60, 0.0},
    {"bottle", 34, 15, {0.20, 0.70, 0.30}, 0.80, 0.0},
    {"medicine_bottle", 22, 15, {0.90, 0.70, 0.20}, 0.75, 0.0},
}};

struct PlacedObject {
  int category = 0;
  std::uint64_t key = 0;  // descriptor vocabulary key
  int instance = 0;
  double cx = 0, cy = 0, yaw = 0;
  double a = 0, b = 0;
};

struct Scene {
  int context = 0;
  std::vector<PlacedObject> objects;  // objects[0] is the target
};

constexpr int kPartCodes = 6;

std::array<double, kPartCodes> part_basis(double u, double v) {
  return {u, v, u * v, u * u - v * v, std::cos(M_PI * u), std::sin(M_PI * v)};
}

class Vocabulary {
 public:
  Vocabulary(int channels, std::uint64_t seed) : channels_(channels), seed_(seed) {}

  // Fixed random direction for a tag tuple, N(0, 1) entries.
  const std::vector<float>& get(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
    const auto key = derive_seed(seed_, {a, b, c});
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    Rng rng(key);
    std::normal_distribution<float> g(0.0f, 1.0f);
    std::vector<float> v(static_cast<std::size_t>(channels_));
    for (auto& x : v) x = g(rng);
    return cache_.emplace(key, std::move(v)).first->second;
  }

 private:
  int channels_;
  std::uint64_t seed_;
  std::map<std::uint64_t, std::vector<float>> cache_;
};

// Instance appearance: size and hue vary around the category.
void apply_instance(PlacedObject& o, std::uint64_t seed) {
  if (o.instance == 0) {
    o.a = kCategories[static_cast<std::size_t>(o.category)].a;
    o.b = kCategories[static_cast<std::size_t>(o.category)].b;
    return;
  }
  Rng rng(derive_seed(seed, {71, static_cast<std::uint64_t>(o.category), static_cast<std::uint64_t>(o.instance)}));
  std::uniform_real_distribution<double> s(0.85, 1.15);
  o.a = kCategories[static_cast<std::size_t>(o.category)].a * s(rng);
  o.b = kCategories[static_cast<std::size_t>(o.category)].b * s(rng);
}

std::array<double, 3> instance_color(const PlacedObject& o, std::uint64_t seed) {
  auto c = kCategories[static_cast<std::size_t>(o.category)].color;
  if (o.instance == 0) return c;
  Rng rng(derive_seed(seed, {72, static_cast<std::uint64_t>(o.category), static_cast<std::uint64_t>(o.instance)}));
  std::uniform_real_distribution<double> d(-0.12, 0.12);
  for (auto& x : c) x = std::clamp(x + d(rng), 0.05, 1.0);
  return c;
}

// Object-frame coordinates, unit disk inside the ellipse.
std::pair<double, double> object_frame(const PlacedObject& o, double x, double y) {
  const double dx = x - o.cx, dy = y - o.cy;
  const double cs = std::cos(o.yaw), sn = std::sin(o.yaw);
  return {(cs * dx + sn * dy) / o.a, (-sn * dx + cs * dy) / o.b};
}

ParamPoint from_object_frame(const PlacedObject& o, double u, double v) {
  const double cs = std::cos(o.yaw), sn = std::sin(o.yaw);
  const double lx = u * o.a, ly = v * o.b;
  return {o.cx + cs * lx - sn * ly, o.cy + sn * lx + cs * ly};
}

bool place(PlacedObject& o, const std::vector<PlacedObject>& others, const ParamCorpusConfig& cfg, Rng& rng) {
  const double r = std::max(o.a, o.b) + 4.0;
  std::uniform_real_distribution<double> ux(r, cfg.image_width - r), uy(r, cfg.image_height - r);
  for (int attempt = 0; attempt < 200; ++attempt) {
    o.cx = ux(rng);
    o.cy = uy(rng);
    bool ok = true;
    for (const auto& p : others) {
      if (&p == &o) continue;
      if (std::hypot(o.cx - p.cx, o.cy - p.cy) < r + std::max(p.a, p.b) + 4.0) ok = false;
    }
    if (ok) return true;
  }
  return false;
}

Scene random_scene(const ParamCorpusConfig& cfg, int target_category, std::uint64_t seed, Rng& rng) {
  Scene s;
  s.context = std::uniform_int_distribution<int>(0, 999)(rng);
  std::uniform_real_distribution<double> yaw(-M_PI, M_PI);
  std::vector<int> cats{target_category};
  for (int k = 0; k < cfg.distractors; ++k) {
    int c = 0;
    do c = std::uniform_int_distribution<int>(0, static_cast<int>(kCategories.size()) - 1)(rng);
    while (std::find(cats.begin(), cats.end(), c) != cats.end());
    cats.push_back(c);
  }
  for (int c : cats) {
    PlacedObject o;
    o.category = c;
    o.key = static_cast<std::uint64_t>(c);
    apply_instance(o, seed);
    o.yaw = yaw(rng);
    place(o, s.objects, cfg, rng);
    s.objects.push_back(o);
  }
  return s;
}

void render(const Scene& s, const ParamCorpusConfig& cfg, std::uint64_t seed, std::uint64_t noise_seed, Vocabulary& vocab,
            FeatureMap& map, FeatureMap* image, std::vector<Mask>* masks) {
  const int C = cfg.channels;
  map = FeatureMap(C, cfg.grid_height, cfg.grid_width, cfg.image_width, cfg.image_height);
  Rng noise(noise_seed);
  std::normal_distribution<float> fn(0.0f, static_cast<float>(cfg.feature_noise));
  std::normal_distribution<float> pn(0.0f, static_cast<float>(cfg.pixel_noise));

  // Background: a few broad bumps whose directions and centers depend on the context.
  struct Bump {
    double x, y, s;
    const std::vector<float>* dir;
    std::array<double, 3> tint;
  };
  std::vector<Bump> bumps;
  Rng ctx(derive_seed(seed, {80, static_cast<std::uint64_t>(s.context)}));
  std::uniform_real_distribution<double> bx(0, cfg.image_width), by(0, cfg.image_height), bs(40, 90), bt(-0.1, 0.1);
  const std::array<double, 3> table{0.55 + bt(ctx), 0.50 + bt(ctx), 0.42 + bt(ctx)};
  for (int j = 0; j < 6; ++j) {
    Bump b{bx(ctx), by(ctx), bs(ctx), &vocab.get(81, static_cast<std::uint64_t>(s.context), static_cast<std::uint64_t>(j)),
           {bt(ctx), bt(ctx), bt(ctx)}};
    bumps.push_back(b);
  }

  auto object_weight = [](double u, double v) {
    const double rho = std::sqrt(u * u + v * v);
    return std::clamp((1.0 - rho) / 0.15, 0.0, 1.0);
  };

  std::vector<double> f(static_cast<std::size_t>(C));
  for (int r = 0; r < cfg.grid_height; ++r) {
    for (int c = 0; c < cfg.grid_width; ++c) {
      const double x = (c + 0.5) * map.cell_width(), y = (r + 0.5) * map.cell_height();
      std::fill(f.begin(), f.end(), 0.0);
      for (const auto& b : bumps) {
        const double g = cfg.background_scale * std::exp(-((x - b.x) * (x - b.x) + (y - b.y) * (y - b.y)) / (2 * b.s * b.s));
        for (int ch = 0; ch < C; ++ch) f[static_cast<std::size_t>(ch)] += g * (*b.dir)[static_cast<std::size_t>(ch)];
      }
      for (const auto& o : s.objects) {
        const auto [u, v] = object_frame(o, x, y);
        const double w = object_weight(u, v);
        if (w <= 0.0) continue;
        const auto cat = o.key;
        const auto& sig = vocab.get(90, cat);
        const auto& inst = vocab.get(91, cat, static_cast<std::uint64_t>(o.instance));
        const auto basis = part_basis(u, v);
        for (int ch = 0; ch < C; ++ch) {
          const auto i = static_cast<std::size_t>(ch);
          double obj = sig[i] + (o.instance == 0 ? 0.0 : cfg.instance_scale * inst[i]);
          for (int k = 0; k < kPartCodes; ++k) obj += cfg.part_scale * basis[k] * vocab.get(92, cat, static_cast<std::uint64_t>(k))[i];
          f[i] = (1.0 - w) * f[i] + w * obj;
        }
      }
      for (int ch = 0; ch < C; ++ch) map.at(ch, r, c) = static_cast<float>(f[static_cast<std::size_t>(ch)]) + fn(noise);
    }
  }

  if (!image) return;
  *image = FeatureMap(3, cfg.image_height, cfg.image_width, cfg.image_width, cfg.image_height);
  if (masks) {
    masks->clear();
    for (std::size_t k = 0; k < s.objects.size(); ++k) {
      masks->push_back({cfg.image_width, cfg.image_height, std::vector<std::uint8_t>(
                                                               static_cast<std::size_t>(cfg.image_width) * cfg.image_height, 0)});
    }
  }
  std::vector<std::array<double, 3>> colors;
  for (const auto& o : s.objects) colors.push_back(instance_color(o, seed));
  for (int y = 0; y < cfg.image_height; ++y) {
    for (int x = 0; x < cfg.image_width; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      std::array<double, 3> rgb = table;
      for (const auto& b : bumps) {
        const double g = std::exp(-((px - b.x) * (px - b.x) + (py - b.y) * (py - b.y)) / (2 * b.s * b.s));
        for (int k = 0; k < 3; ++k) rgb[static_cast<std::size_t>(k)] += g * b.tint[static_cast<std::size_t>(k)];
      }
      for (std::size_t k = 0; k < s.objects.size(); ++k) {
        const auto [u, v] = object_frame(s.objects[k], px, py);
        const double w = object_weight(u, v);
        if (u * u + v * v <= 1.0 && masks) (*masks)[k].on[static_cast<std::size_t>(y) * cfg.image_width + x] = 1;
        if (w <= 0.0) continue;
        const double shade = 0.85 + 0.15 * u;  // lighting from one side
        for (std::size_t ch = 0; ch < 3; ++ch) rgb[ch] = (1.0 - w) * rgb[ch] + w * shade * colors[k][ch];
      }
      for (int ch = 0; ch < 3; ++ch) image->at(ch, y, x) = static_cast<float>(rgb[static_cast<std::size_t>(ch)]) + pn(noise);
    }
  }
}

}  // namespace

FeatureMap render_layout(const ParamCorpusConfig& config, const SceneLayout& layout, std::uint64_t seed,
                         std::uint64_t noise_seed) {
  Vocabulary vocab(config.channels, seed);
  Scene s;
  s.context = layout.context;
  for (const auto& item : layout.items) {
    require(item.a > 0 && item.b > 0, "layout items need positive semi-axes");
    PlacedObject o;
    o.key = fnv1a(item.category);
    o.instance = item.instance;
    o.cx = item.x;
    o.cy = item.y;
    o.yaw = item.yaw;
    o.a = item.a;
    o.b = item.b;
    s.objects.push_back(o);
  }
  FeatureMap map;
  render(s, config, seed, noise_seed, vocab, map, nullptr, nullptr);
  return map;
}

ParamPair make_identity_pair(const ParamCorpusConfig& config, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {1}));
  Vocabulary vocab(config.channels, seed);
  const Scene s = random_scene(config, 0, seed, rng);
  ParamPair p;
  p.variation = PairVariation::identity;
  p.category = kCategories[0].name;
  render(s, config, seed, derive_seed(seed, {2}), vocab, p.train_map, &p.train_image, &p.test_masks);
  p.test_map = p.train_map;
  p.test_image = p.train_image;
  const auto& t = s.objects.front();
  const auto key = from_object_frame(t, kCategories[0].key_u, kCategories[0].key_v);
  Cell cell = image_to_cell({std::clamp(key.x, 0.0, config.image_width - 1.0), std::clamp(key.y, 0.0, config.image_height - 1.0)},
                            p.train_map);
  cell = {std::clamp(cell.row, 1, config.grid_height - 2), std::clamp(cell.col, 1, config.grid_width - 2)};
  p.train_point = cell_to_image(cell, p.train_map);
  p.truth = p.train_point;
  return p;
}

ParamPair make_param_pair(const ParamCorpusConfig& config, int index, std::uint64_t seed) {
  static constexpr std::array<PairVariation, 5> kCycle{PairVariation::position, PairVariation::orientation,
                                                       PairVariation::instance, PairVariation::context,
                                                       PairVariation::combined};
  const auto pair_seed = derive_seed(seed, {static_cast<std::uint64_t>(index)});
  Rng rng(derive_seed(pair_seed, {1}));
  Vocabulary vocab(config.channels, seed);
  const int target = index / static_cast<int>(kCycle.size()) % static_cast<int>(kCategories.size());
  ParamPair p;
  p.variation = kCycle[static_cast<std::size_t>(index) % kCycle.size()];
  p.category = kCategories[static_cast<std::size_t>(target)].name;

  Scene train = random_scene(config, target, seed, rng);
  train.objects.front().instance = std::uniform_int_distribution<int>(0, 4)(rng);
  apply_instance(train.objects.front(), seed);
  Scene test = train;
  auto& obj = test.objects.front();
  std::uniform_real_distribution<double> yaw(-M_PI, M_PI);
  const bool move = p.variation != PairVariation::orientation;
  const bool spin = p.variation != PairVariation::position;
  const bool new_instance = p.variation == PairVariation::instance || p.variation == PairVariation::combined;
  const bool new_context = p.variation == PairVariation::context || p.variation == PairVariation::combined;
  if (new_context) {
    Scene fresh = random_scene(config, target, seed, rng);
    fresh.objects.front() = obj;
    test = fresh;
  }
  auto& t = test.objects.front();
  if (new_instance) {
    int inst = t.instance;
    while (inst == t.instance) inst = std::uniform_int_distribution<int>(0, 4)(rng);
    t.instance = inst;
    apply_instance(t, seed);
  }
  if (spin) t.yaw = yaw(rng);
  if (move) {
    for (auto& o : test.objects) place(o, test.objects, config, rng);
  }

  render(train, config, seed, derive_seed(pair_seed, {2}), vocab, p.train_map, &p.train_image, nullptr);
  render(test, config, seed, derive_seed(pair_seed, {3}), vocab, p.test_map, &p.test_image, &p.test_masks);

  // Snap the keypoint to a cell center, then carry that exact point into the
  // test scene through the object frame.
  const auto& cat = kCategories[static_cast<std::size_t>(target)];
  const auto& tr = train.objects.front();
  const auto key = from_object_frame(tr, cat.key_u, cat.key_v);
  Cell cell = image_to_cell({std::clamp(key.x, 0.0, config.image_width - 1.0), std::clamp(key.y, 0.0, config.image_height - 1.0)},
                            p.train_map);
  cell = {std::clamp(cell.row, 1, config.grid_height - 2), std::clamp(cell.col, 1, config.grid_width - 2)};
  p.train_point = cell_to_image(cell, p.train_map);
  const auto [u, v] = object_frame(tr, p.train_point.x, p.train_point.y);
  const auto gt = from_object_frame(t, u, v);
  p.truth = {std::clamp(gt.x, 0.0, config.image_width - 1e-6), std::clamp(gt.y, 0.0, config.image_height - 1e-6)};
  return p;
}

void MatchingAccumulator::add_prediction(int pair, const std::string& variation, const std::string& method,
                                         const ParamPoint& predicted, const ParamPoint& truth, double cell_w,
                                         double cell_h) {
  const double dx = predicted.x - truth.x, dy = predicted.y - truth.y;
  samples_.push_back({method, variation, std::hypot(dx, dy), dx * dx + dy * dy,
                      (dx / cell_w) * (dx / cell_w) + (dy / cell_h) * (dy / cell_h)});
  rows_.push_back({pair, variation, method, predicted, truth});
}

void MatchingAccumulator::add(int pair, const ParamPair& p, std::uint64_t seed) {
  const auto var = to_string(p.variation);
  const double cw = p.test_map.cell_width(), ch = p.test_map.cell_height();
  add_prediction(pair, var, "match_point", match_point(p.train_map, p.train_point, p.test_map).point, p.truth, cw, ch);
  add_prediction(pair, var, "pixel_similarity",
                 baseline_pixel_similarity(p.train_image, p.train_point, p.test_image).point, p.truth, cw, ch);
  add_prediction(pair, var, "on_objects", baseline_on_objects(p.test_masks, derive_seed(seed, {5, static_cast<std::uint64_t>(pair)})),
                 p.truth, cw, ch);
  add_prediction(pair, var, "random",
                 baseline_random(p.test_map.image_width, p.test_map.image_height,
                                 derive_seed(seed, {6, static_cast<std::uint64_t>(pair)})),
                 p.truth, cw, ch);
}

MatchingReport MatchingAccumulator::finish() const {
  MatchingReport report;
  report.predictions = rows_;
  std::vector<std::string> methods, variations{"all"};
  for (const auto& s : samples_) {
    if (std::find(methods.begin(), methods.end(), s.method) == methods.end()) methods.push_back(s.method);
    if (std::find(variations.begin(), variations.end(), s.variation) == variations.end()) variations.push_back(s.variation);
  }
  for (const auto& m : methods) {
    for (const auto& v : variations) {
      ErrorStats st;
      double sum = 0, sum2 = 0, sq = 0, cells = 0;
      for (const auto& s : samples_) {
        if (s.method != m || (v != "all" && s.variation != v)) continue;
        ++st.n;
        sum += s.px;
        sum2 += s.px * s.px;
        sq += s.sq_px;
        cells += s.sq_cells;
      }
      if (st.n == 0) continue;
      st.mean_px = sum / st.n;
      st.std_px = st.n > 1 ? std::sqrt(std::max(0.0, (sum2 - st.n * st.mean_px * st.mean_px) / (st.n - 1))) : 0.0;
      st.mean_sq_px = sq / st.n;
      st.mse_cells = cells / st.n;
      report.summary.push_back({m, v, st});
    }
  }
  return report;
}

const ErrorStats& MatchingReport::pooled(const std::string& method) const {
  for (const auto& r : summary) {
    if (r.method == method && r.variation == "all") return r.stats;
  }
  throw Error("no results for method '" + method + "'");
}

MatchingReport evaluate_matching(const ParamCorpusConfig& config, std::uint64_t seed) {
  MatchingAccumulator acc;
  for (int i = 0; i < config.pairs; ++i) acc.add(i, make_param_pair(config, i, seed), seed);
  return acc.finish();
}

double random_baseline_expected_sq(const ParamPoint& target, int image_width, int image_height) {
  // Per axis: Var(U) + (E[U] - t)^2 for U uniform on {0, ..., n-1}.
  auto axis = [](double t, int n) {
    const double mean = (n - 1) / 2.0;
    return (static_cast<double>(n) * n - 1.0) / 12.0 + (mean - t) * (mean - t);
  };
  return axis(target.x, image_width) + axis(target.y, image_height);
}

}  // namespace noir::param
