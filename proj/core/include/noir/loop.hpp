#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "noir/emg.hpp"
#include "noir/memory.hpp"
#include "noir/mi.hpp"
#include "noir/param.hpp"
#include "noir/sim.hpp"
#include "noir/ssvep.hpp"
#include "noir/synth.hpp"

namespace noir::loop {

// Signal quality for one run. The clean profile has noise-free SSVEP,
// strongly modulated motor imagery and well separated clench variances.
struct SignalProfile {
  std::string name = "clean";
  double ssvep_snr_db = std::numeric_limits<double>::infinity();
  double mi_modulation_db = 20.0;
  double rest_var = 1.0;
  double clench_var = 100.0;
};

struct LoopConfig {
  // One flicker frequency per on-screen choice, in the task's selectable
  // order. No frequency is a harmonic of another.
  std::vector<double> stimulus_frequencies{6.0, 6.67, 7.5, 8.57, 10.0, 11.0};
  double ssvep_window_s = 10.0;
  double mi_window_s = 5.0;
  double clench_window_s = 0.5;
  double cursor_step_px = 10.0;
  double cursor_tolerance_px = 6.0;  // per axis; at least half a step
  int calibration_blocks = 4;
  int calibration_trials_per_block = 5;
  int clench_calibration_windows = 10;
  int max_stage_retries = 3;  // failed skill calls tolerated per plan step before a reset
  int max_attempts = 5;
  int max_decodes = 1500;     // budget over all channels per episode
};

// Calibrated decoders for one signal profile. Skill selection has one
// k-class pipeline per option count k = 2..4; the 2-class one doubles as
// the cursor decoder.
struct DecoderSuite {
  SignalProfile profile;
  synth::SynthContext context;
  synth::SsvepStimulus stimulus;
  synth::MiProfile mi_profile;
  synth::ClenchProfile clench;
  std::vector<ssvep::SsvepDecoder> ssvep;  // exactly one
  std::map<int, mi::MiPipeline> skill;
  emg::EmgCalibration emg;

  const ssvep::SsvepDecoder& ssvep_decoder() const { return ssvep.front(); }
  const mi::MiPipeline& cursor() const { return skill.at(2); }
};

DecoderSuite calibrate_decoders(const SignalProfile& profile, const LoopConfig& config, std::uint64_t seed);

// Trained skill memory for one task: the store plus the featurizer that
// maps world states to scene features.
struct SkillMemory {
  std::string task;
  memory::RetrievalCorpusConfig corpus;
  memory::MemoryStore store;
};

// Corpus whose stage labels are the task's plan steps, object|skill.
memory::RetrievalCorpusConfig corpus_config_for(const sim::LoadedTask& task);

SkillMemory train_skill_memory(const sim::LoadedTask& task, const memory::TrainConfig& train, std::uint64_t seed);

memory::SceneDescriptor scene_of(const sim::WorldState& state, int stage);

// Reference executions for parameter prediction: the feature map seen at
// each positioned plan step and the point the skill was applied at.
struct ParamDemo {
  param::FeatureMap map;
  param::ParamPoint point;
};

struct ParamMemory {
  std::string task;
  param::ParamCorpusConfig render;
  std::uint64_t seed = 0;
  std::map<std::size_t, ParamDemo> demos;  // by plan index
};

// Records demonstrations by replaying the plan on a jittered fixture.
ParamMemory build_param_memory(const sim::LoadedTask& task, std::uint64_t seed,
                               param::ParamCorpusConfig render = {});

// Top-down feature map of a world state; objects drawn by height.
param::FeatureMap render_state(const sim::WorldState& state, const param::ParamCorpusConfig& render,
                               std::uint64_t seed, std::uint64_t noise_seed);

struct EpisodeOptions {
  bool memory = false;
  bool param_learning = false;
  double user_error_rate = 0.0;  // per stage, probability of a wrong intent
};

struct StageCount {
  int total = 0;
  int correct = 0;
  double accuracy() const { return total == 0 ? 1.0 : static_cast<double>(correct) / total; }
};

struct RunReport {
  std::string task;
  std::uint64_t seed = 0;
  bool success = false;
  std::string failure;
  int attempts = 0;
  int skills_executed = 0;
  int confirmed_executions = 0;
  int skill_failures = 0;
  int ssvep_decodes = 0;
  int mi_skill_decodes = 0;
  int mi_cursor_decodes = 0;
  int clench_confirms = 0;
  int clench_rejects = 0;
  int memory_suggestions = 0;
  int memory_skips = 0;  // accepted suggestions: object and skill decodes skipped
  double cursor_distance_px = 0.0;
  double decode_time_s = 0.0;
  StageCount ssvep, mi_skill, mi_cursor, clench;

  int selection_decodes() const { return ssvep_decodes + mi_skill_decodes; }
  nlohmann::json to_json() const;
};

struct Episode {
  RunReport report;
  std::vector<nlohmann::json> events;  // JSON-lines event log
};

struct Resources {
  const SkillMemory* memory = nullptr;
  const ParamMemory* params = nullptr;
};

Episode run_episode(const sim::LoadedTask& task, const DecoderSuite& decoders, const LoopConfig& config,
                    const EpisodeOptions& options, const Resources& resources, std::uint64_t seed);

// Invariant check over an event log: every applied skill follows an execute
// confirm, no rejected selection is applied, and the report counts agree
// with the log. Returns the violations found.
std::vector<std::string> check_event_log(const std::vector<nlohmann::json>& events, const RunReport& report);

std::string to_json_lines(const std::vector<nlohmann::json>& events);

}  // namespace noir::loop
