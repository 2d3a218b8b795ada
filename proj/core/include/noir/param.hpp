#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace noir::param {

// C x H x W grid of descriptors, channel-major, tied to the image it was
// computed from. A raw RGB image is the special case C = 3 with the grid at
// pixel resolution.
struct FeatureMap {
  int channels = 0;
  int height = 0;  // H_f
  int width = 0;   // W_f
  int image_width = 360;
  int image_height = 240;
  std::vector<float> data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w, int img_w, int img_h);

  float& at(int c, int r, int col) { return data[(static_cast<std::size_t>(c) * height + r) * width + col]; }
  float at(int c, int r, int col) const { return data[(static_cast<std::size_t>(c) * height + r) * width + col]; }

  double cell_width() const { return static_cast<double>(image_width) / width; }
  double cell_height() const { return static_cast<double>(image_height) / height; }

  void validate() const;
};

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

struct ParamPoint {
  double x = 0.0;
  double y = 0.0;
};

// Proportional image <-> grid mapping. image_to_cell floors; cell_to_image
// returns the cell center.
Cell image_to_cell(const ParamPoint& p, const FeatureMap& map);
ParamPoint cell_to_image(const Cell& c, const FeatureMap& map);

struct Match {
  Cell cell;
  ParamPoint point;
  double similarity = 0.0;
};

// 3x3xC patch around the train point, compared by cosine similarity against
// every interior cell of the test map. Train cells on the border are clamped
// inward; ties go to the first cell in row-major order.
Match match_point(const FeatureMap& train, const ParamPoint& train_point, const FeatureMap& test);

// Same search as match_point, written as the direct scan over the
// channel-major layout. Reference for the optimized search.
Match match_point_naive(const FeatureMap& train, const ParamPoint& train_point, const FeatureMap& test);

// Uniform integer pixel.
ParamPoint baseline_random(int image_width, int image_height, std::uint64_t seed);

// Binary object masks at pixel resolution.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> on;  // row-major

  bool at(int x, int y) const { return on[static_cast<std::size_t>(y) * width + x] != 0; }
};

Mask mask_union(const std::vector<Mask>& masks);

// Uniform over the pixels covered by at least one mask.
ParamPoint baseline_on_objects(const std::vector<Mask>& masks, std::uint64_t seed);

// match_point over raw 3 x H x W images at pixel resolution.
Match baseline_pixel_similarity(const FeatureMap& train_image, const ParamPoint& train_point,
                                const FeatureMap& test_image);

// Synthetic correspondence corpus: tabletop scenes with elliptical objects.
// Each object's descriptors combine a category signature, an instance
// perturbation and smooth codes of the object-frame coordinates; the
// background is a smooth field that depends on the context id.
enum class PairVariation { identity, position, orientation, instance, context, combined };
std::string to_string(PairVariation v);
PairVariation pair_variation_from_string(const std::string& s);

struct ParamCorpusConfig {
  int channels = 64;
  int grid_height = 75;
  int grid_width = 100;
  int image_width = 360;
  int image_height = 240;
  int pairs = 200;
  int distractors = 2;
  double part_scale = 1.0;
  double instance_scale = 0.4;
  double background_scale = 0.6;
  double feature_noise = 0.05;
  double pixel_noise = 0.03;
};

// Feature map of an arbitrary layout of elliptical objects drawn in order
// (later items cover earlier ones). Descriptors depend on the category name,
// the instance id and the object-frame coordinates.
struct LayoutItem {
  std::string category;
  double x = 0.0, y = 0.0;  // center in image pixels
  double yaw = 0.0;
  double a = 10.0, b = 10.0;  // semi-axes
  int instance = 0;
};

struct SceneLayout {
  int context = 0;
  std::vector<LayoutItem> items;
};

FeatureMap render_layout(const ParamCorpusConfig& config, const SceneLayout& layout, std::uint64_t seed,
                         std::uint64_t noise_seed);

struct ParamPair {
  PairVariation variation = PairVariation::identity;
  FeatureMap train_map;
  FeatureMap test_map;
  FeatureMap train_image;  // 3 x H_img x W_img
  FeatureMap test_image;
  std::vector<Mask> test_masks;
  ParamPoint train_point;  // snapped to a train cell center
  ParamPoint truth;        // the same object point in the test scene
  std::string category;
};

// The variations cycle position, orientation, instance, context, combined
// over the pair index.
ParamPair make_param_pair(const ParamCorpusConfig& config, int index, std::uint64_t seed);

// Identity pair: test scene equal to the train scene.
ParamPair make_identity_pair(const ParamCorpusConfig& config, std::uint64_t seed);

struct ErrorStats {
  int n = 0;
  double mean_px = 0.0;      // mean Euclidean pixel error
  double std_px = 0.0;
  double mean_sq_px = 0.0;   // mean squared pixel error
  double mse_cells = 0.0;    // mean squared error in grid-cell units
};

struct MethodReport {
  std::string method;
  std::string variation;  // "all" for the pooled row
  ErrorStats stats;
};

struct PredictionRow {
  int pair = 0;
  std::string variation;
  std::string method;
  ParamPoint predicted;
  ParamPoint truth;
};

struct MatchingReport {
  std::vector<PredictionRow> predictions;
  std::vector<MethodReport> summary;

  const ErrorStats& pooled(const std::string& method) const;
};

// Errors of match_point, pixel similarity, on-objects and random sampling.
// Pixel errors are measured in the test image; cell units use the test grid.
class MatchingAccumulator {
 public:
  void add(int pair, const ParamPair& p, std::uint64_t seed);
  void add_prediction(int pair, const std::string& variation, const std::string& method, const ParamPoint& predicted,
                      const ParamPoint& truth, double cell_w, double cell_h);
  MatchingReport finish() const;

 private:
  struct Sample {
    std::string method, variation;
    double px, sq_px, sq_cells;
  };
  std::vector<Sample> samples_;
  std::vector<PredictionRow> rows_;
};

MatchingReport evaluate_matching(const ParamCorpusConfig& config, std::uint64_t seed);

// Expected squared distance between a fixed point and a uniform integer pixel.
double random_baseline_expected_sq(const ParamPoint& target, int image_width, int image_height);

}  // namespace noir::param
