#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "noir/loop.hpp"

namespace noir::bench {

// Tasks x signal levels x option sets, each cell run over the same seeds.
struct SuiteConfig {
  std::vector<std::string> tasks{"MakePasta", "SetTable"};
  std::vector<loop::SignalProfile> levels{loop::SignalProfile{}};
  std::vector<loop::EpisodeOptions> options{loop::EpisodeOptions{}};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  loop::LoopConfig loop;
  memory::TrainConfig memory_train;
  std::uint64_t calibration_seed = 1;
  int threads = 1;
};

// Missing keys keep the values in `base`. Levels accept "inf" for the SSVEP SNR.
SuiteConfig suite_from_json(const nlohmann::json& j, SuiteConfig base = {});

struct Metric {
  std::string name;
  double mean = 0.0;
  double ci95 = 0.0;  // half-width, normal approximation over seeds
};

struct CellResult {
  std::string task;
  std::string level;
  loop::EpisodeOptions options;
  int n = 0;
  std::vector<Metric> metrics;

  const Metric& metric(const std::string& name) const;
};

struct BenchReport {
  std::vector<CellResult> cells;
  std::string csv() const;
  nlohmann::json to_json() const;
};

// Names of the per-episode metrics, in report order.
const std::vector<std::string>& metric_names();
std::vector<double> episode_metrics(const loop::RunReport& r);

Metric summarize(const std::string& name, const std::vector<double>& values);

BenchReport run_benchmark(const SuiteConfig& suite);

}  // namespace noir::bench
