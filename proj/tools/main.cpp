// noir: command-line front end for the simulated brain-signal robot loop.
//
// Exit codes: 0 success, 1 task failure, 2 invariant violation, 3 usage or
// input error.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "noir/bench.hpp"
#include "noir/config.hpp"
#include "noir/emg.hpp"
#include "noir/error.hpp"
#include "noir/io.hpp"
#include "noir/loop.hpp"
#include "noir/memory.hpp"
#include "noir/mi.hpp"
#include "noir/param.hpp"
#include "noir/random.hpp"
#include "noir/sim.hpp"
#include "noir/ssvep.hpp"
#include "noir/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace noir;

namespace {

constexpr int kTaskFailed = 1;
constexpr int kInvariant = 2;

// Settings shared by every subcommand, optionally overridden by --config.
struct Settings {
  std::uint64_t seed = 0;
  std::string config_path;
  json config = json::object();

  synth::SynthContext context;
  synth::SsvepStimulus stimulus;
  synth::MiProfile mi;
  synth::ClenchProfile clench;
  loop::LoopConfig loop;
  loop::SignalProfile signal;

  void load() {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      require(static_cast<bool>(in), "cannot open config '" + config_path + "'");
      config = json::parse(in);
    }
    const auto section = [&](const char* key) { return config.contains(key) ? config.at(key) : json::object(); };
    if (config.contains("montage")) context.montage = config::montage_from_json(config.at("montage"));
    context.fs = config.value("fs", context.fs);
    stimulus = config::ssvep_stimulus_from_json(section("ssvep"), stimulus);
    mi = config::mi_profile_from_json(section("mi"), mi);
    clench = config::clench_profile_from_json(section("clench"), clench);
    const auto l = section("loop");
    if (l.contains("stimulus_frequencies")) loop.stimulus_frequencies = l.at("stimulus_frequencies").get<std::vector<double>>();
    loop.cursor_step_px = l.value("cursor_step_px", loop.cursor_step_px);
    loop.cursor_tolerance_px = l.value("cursor_tolerance_px", loop.cursor_tolerance_px);
    loop.max_stage_retries = l.value("max_stage_retries", loop.max_stage_retries);
    loop.max_attempts = l.value("max_attempts", loop.max_attempts);
    loop.max_decodes = l.value("max_decodes", loop.max_decodes);
    const auto s = section("signal");
    signal.name = s.value("name", signal.name);
    if (s.contains("ssvep_snr_db")) {
      const auto& v = s.at("ssvep_snr_db");
      signal.ssvep_snr_db = v.is_string() ? std::numeric_limits<double>::infinity() : v.get<double>();
    }
    signal.mi_modulation_db = s.value("mi_modulation_db", signal.mi_modulation_db);
    signal.rest_var = s.value("rest_var", signal.rest_var);
    signal.clench_var = s.value("clench_var", signal.clench_var);
  }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot write '" + path + "'");
  out << text;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open '" + path + "'");
  return json::parse(in);
}

int mi_class_index(const synth::MiProfile& p, const std::string& name) {
  const auto c = synth::mi_class_from_string(name);
  for (std::size_t i = 0; i < p.classes.size(); ++i)
    if (p.classes[i] == c) return static_cast<int>(i);
  throw Error("class '" + name + "' is not in the MI profile");
}

// ---- synth ----

struct SynthArgs {
  std::string kind;
  int target = 0;
  std::string mi_class = "LeftHand";
  bool clench = false;
  std::optional<double> snr_db;
  std::string out;
  int blocks = 4;
  int trials = 5;
};

int cmd_synth(const Settings& s, const SynthArgs& a) {
  auto stim = s.stimulus;
  if (a.snr_db) stim.snr_db = *a.snr_db;
  if (a.kind == "ssvep") {
    io::save_epoch(a.out, synth::gen_ssvep(s.context, stim, a.target, s.seed));
  } else if (a.kind == "mi") {
    io::save_epoch(a.out, synth::gen_mi(s.context, s.mi, mi_class_index(s.mi, a.mi_class), s.seed));
  } else if (a.kind == "clench") {
    io::save_epoch(a.out, synth::gen_clench_window(s.context, s.clench, a.clench, s.seed));
  } else if (a.kind == "mi-session") {
    fs::create_directories(a.out);
    const auto session = synth::gen_calibration_session(s.context, s.mi, s.seed, a.blocks, a.trials);
    for (std::size_t i = 0; i < session.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "trial_%03zu.epc", i);
      io::save_epoch(fs::path(a.out) / name, session[i]);
    }
  } else {
    throw Error("unknown synth kind '" + a.kind + "'");
  }
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

// ---- calibrate ----

struct CalibrateArgs {
  std::string kind;
  std::vector<std::string> in;
  std::vector<std::string> rest, clench;
  std::string out;
  int folds = 4;
};

std::vector<signal::Epoch> load_all(const std::vector<std::string>& paths) {
  std::vector<signal::Epoch> out;
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(p))
        if (e.path().extension() == ".epc") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) out.push_back(io::load_epoch(f));
    } else {
      out.push_back(io::load_epoch(p));
    }
  }
  return out;
}

int cmd_calibrate(const Settings& s, const CalibrateArgs& a) {
  json out;
  if (a.kind == "mi") {
    // No inputs: calibrate on a synthetic session from the configured profile.
    const auto epochs = a.in.empty() ? synth::gen_calibration_session(s.context, s.mi, s.seed) : load_all(a.in);
    mi::MiPreprocessor pre;
    pre.montage = s.context.montage;
    pre.filter = signal::FilterSpec::band_pass(s.mi.band[0], s.mi.band[1], 4, true);
    std::vector<signal::Epoch> processed;
    for (const auto& e : epochs) processed.push_back(pre.apply(e));
    const auto cv = mi::cross_validate(processed, a.folds);
    out = mi::to_json(mi::fit_mi_pipeline(epochs, pre));
    std::cout << "cross-validated accuracy " << cv.accuracy << " over " << epochs.size() << " trials\n";
  } else if (a.kind == "emg") {
    const auto c = emg::calibrate_emg(load_all(a.rest), load_all(a.clench));
    out = config::to_json(c);
    std::cout << "threshold " << c.threshold << (c.overlap ? " (rest and clench overlap)" : "") << "\n";
  } else {
    throw Error("unknown calibrate kind '" + a.kind + "'");
  }
  write_text(a.out, out.dump(2) + "\n");
  return 0;
}

// ---- decode ----

struct DecodeArgs {
  std::string kind;
  std::string in;
  std::string model;
};

int cmd_decode(const Settings& s, const DecodeArgs& a) {
  const auto epoch = io::load_epoch(a.in);
  json out{{"input", a.in}};
  if (a.kind == "ssvep") {
    const ssvep::SsvepDecoder d(s.stimulus.frequencies, s.context.montage);
    const auto r = d.decode(epoch);
    out["frequency"] = r.best_frequency();
    out["index"] = r.best_index();
    json scores = json::array();
    for (const auto& sc : r.scores) scores.push_back({{"frequency", sc.frequency}, {"rho", sc.rho}});
    out["scores"] = scores;
  } else if (a.kind == "mi") {
    const auto p = mi::mi_pipeline_from_json(read_json(a.model));
    json ranked = json::array();
    for (const auto& r : p.rank(epoch)) ranked.push_back({{"label", r.label}, {"log_posterior", r.log_posterior}});
    out["label"] = ranked.front()["label"];
    out["ranking"] = ranked;
  } else if (a.kind == "emg") {
    const auto c = config::emg_calibration_from_json(read_json(a.model));
    out["clench"] = emg::detect_clench(c, epoch);
    out["median_variance"] = emg::median_channel_variance(epoch);
    out["threshold"] = c.threshold;
  } else {
    throw Error("unknown decode kind '" + a.kind + "'");
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

// ---- skill memory ----

struct TrainMemoryArgs {
  std::string features;
  std::string task = "MakePasta";
  std::string out;
  std::string loss_csv;
  std::string export_features;
  int epochs = 100;
  int hidden = 1024;
};

int cmd_train_memory(const Settings& s, const TrainMemoryArgs& a) {
  memory::FeatureMatrix train;
  if (!a.features.empty()) {
    train = io::load_feature_matrix(a.features);
  } else {
    const auto task = sim::load_task(a.task);
    train = memory::make_retrieval_corpus(loop::corpus_config_for(task), memory::Variation::none, s.seed).train;
  }
  if (!a.export_features.empty()) io::save_feature_matrix(a.export_features, train);
  memory::TrainConfig cfg;
  cfg.input_dim = static_cast<int>(train.dim());
  cfg.epochs = a.epochs;
  cfg.hidden_dim = a.hidden;
  cfg.output_dim = a.hidden;
  cfg.seed = s.seed;
  auto result = memory::train_embedding(train, cfg);
  std::cout << "triplet loss " << result.initial_loss << " -> " << result.final_loss << " on held-out triplets\n";
  if (!a.loss_csv.empty()) {
    std::string csv = "epoch,loss\n";
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) csv += std::to_string(e + 1) + "," + std::to_string(result.epoch_loss[e]) + "\n";
    write_text(a.loss_csv, csv);
  }
  const memory::MemoryStore store(std::move(result.net), train);
  std::cout << "stored " << store.records().size() << " records, tau " << store.tau() << "\n";
  write_text(a.out, memory::to_json(store).dump() + "\n");
  return 0;
}

struct RetrieveArgs {
  std::string store;
  std::string features;
  std::string task = "MakePasta";
  std::string variation = "pose";
  std::string out;
};

int cmd_retrieve(const Settings& s, const RetrieveArgs& a) {
  const auto store = memory::memory_store_from_json(read_json(a.store));
  memory::FeatureMatrix test, train;
  if (!a.features.empty()) {
    test = io::load_feature_matrix(a.features);
  } else {
    const auto corpus = memory::make_retrieval_corpus(loop::corpus_config_for(sim::load_task(a.task)),
                                                      memory::variation_from_string(a.variation), s.seed);
    test = corpus.test;
    train = corpus.train;
  }
  std::string csv = "row,label,object,skill,distance,confident\n";
  int correct = 0;
  for (Eigen::Index i = 0; i < test.size(); ++i) {
    const auto r = store.retrieve(test.data.row(i).transpose());
    const auto& label = test.labels[static_cast<std::size_t>(i)];
    if (memory::join_label(r.object_id, r.skill_id) == label) ++correct;
    csv += std::to_string(i) + "," + label + "," + r.object_id + "," + r.skill_id + "," + std::to_string(r.distance) + "," +
           (r.confident ? "1" : "0") + "\n";
  }
  const double acc = test.size() ? static_cast<double>(correct) / static_cast<double>(test.size()) : 0.0;
  std::cout << "retrieval accuracy " << acc << " over " << test.size() << " queries\n";
  if (train.size() > 0)
    std::cout << "nearest-centroid baseline " << memory::nearest_centroid_accuracy(train, test) << "\n";
  if (!a.out.empty()) write_text(a.out, csv);
  return 0;
}

// ---- parameter matching ----

struct MatchArgs {
  std::string train, test;
  double x = -1, y = -1;
  bool eval = false;
  int pairs = 200;
  std::string out;
  std::string summary;
};

int cmd_match(const Settings& s, const MatchArgs& a) {
  if (a.eval) {
    param::ParamCorpusConfig cfg;
    cfg.pairs = a.pairs;
    const auto report = param::evaluate_matching(cfg, s.seed);
    std::string sum = "method,variation,n,mean_px,std_px,mean_sq_px,mse_cells\n";
    for (const auto& m : report.summary) {
      sum += m.method + "," + m.variation + "," + std::to_string(m.stats.n) + "," + std::to_string(m.stats.mean_px) + "," +
             std::to_string(m.stats.std_px) + "," + std::to_string(m.stats.mean_sq_px) + "," +
             std::to_string(m.stats.mse_cells) + "\n";
    }
    std::cout << sum;
    if (!a.summary.empty()) write_text(a.summary, sum);
    if (!a.out.empty()) {
      std::string csv = "pair,variation,method,pred_x,pred_y,truth_x,truth_y\n";
      for (const auto& r : report.predictions) {
        csv += std::to_string(r.pair) + "," + r.variation + "," + r.method + "," + std::to_string(r.predicted.x) + "," +
               std::to_string(r.predicted.y) + "," + std::to_string(r.truth.x) + "," + std::to_string(r.truth.y) + "\n";
      }
      write_text(a.out, csv);
    }
    return 0;
  }
  require(!a.train.empty() && !a.test.empty(), "match-param needs --train and --test maps, or --eval");
  const auto train = io::load_feature_map(a.train);
  const auto test = io::load_feature_map(a.test);
  const auto m = param::match_point(train, {a.x, a.y}, test);
  std::cout << json{{"x", m.point.x}, {"y", m.point.y}, {"row", m.cell.row}, {"col", m.cell.col}, {"similarity", m.similarity}}.dump(2)
            << "\n";
  return 0;
}

// ---- closed loop ----

struct RunTaskArgs {
  std::string task = "MakePasta";
  bool list = false;
  bool memory = false;
  bool param_learning = false;
  double user_error = 0.0;
  std::string events;
  std::string report;
  int memory_epochs = 100;
};

int cmd_run_task(const Settings& s, const RunTaskArgs& a) {
  if (a.list) {
    for (const auto& n : sim::task_names()) {
      const auto t = sim::load_task(n);
      std::cout << n << " (" << sim::to_string(t.spec.robot) << ", horizon " << t.spec.horizon << "): " << t.spec.description << "\n";
    }
    return 0;
  }
  const auto task = sim::load_task(a.task);
  const auto decoders = loop::calibrate_decoders(s.signal, s.loop, derive_seed(s.seed, {1}));
  std::optional<loop::SkillMemory> mem;
  std::optional<loop::ParamMemory> params;
  loop::Resources res;
  if (a.memory) {
    memory::TrainConfig tc;
    tc.epochs = a.memory_epochs;
    mem = loop::train_skill_memory(task, tc, derive_seed(s.seed, {2}));
    res.memory = &*mem;
  }
  if (a.param_learning) {
    params = loop::build_param_memory(task, derive_seed(s.seed, {3}));
    res.params = &*params;
  }
  loop::EpisodeOptions opt{a.memory, a.param_learning, a.user_error};
  const auto ep = loop::run_episode(task, decoders, s.loop, opt, res, s.seed);
  if (!a.events.empty()) write_text(a.events, loop::to_json_lines(ep.events));
  const auto report = ep.report.to_json();
  if (!a.report.empty()) write_text(a.report, report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  const auto violations = loop::check_event_log(ep.events, ep.report);
  for (const auto& v : violations) std::cerr << "invariant violated: " << v << "\n";
  if (!violations.empty()) return kInvariant;
  return ep.report.success ? 0 : kTaskFailed;
}

struct BenchArgs {
  std::string suite;
  std::vector<std::uint64_t> seeds;
  std::string csv;
  std::string json_out;
  int threads = 0;
};

int cmd_bench(const Settings& s, const BenchArgs& a) {
  bench::SuiteConfig base;
  base.loop = s.loop;
  base.calibration_seed = s.seed;
  auto suite = a.suite.empty() ? base : bench::suite_from_json(read_json(a.suite), base);
  if (!a.seeds.empty()) suite.seeds = a.seeds;
  if (a.threads > 0) suite.threads = a.threads;
  const auto report = bench::run_benchmark(suite);
  const auto csv = report.csv();
  if (!a.csv.empty()) write_text(a.csv, csv);
  if (!a.json_out.empty()) write_text(a.json_out, report.to_json().dump(2) + "\n");
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"noir: simulated noninvasive brain-signal control of robot skills"};
  app.require_subcommand(1);
  Settings settings;
  app.add_option("--seed", settings.seed, "Seed for every random stream")->capture_default_str();
  app.add_option("--config", settings.config_path, "JSON configuration (montage, ssvep, mi, clench, loop, signal)")
      ->check(CLI::ExistingFile);
  app.fallthrough();
  int rc = 0;

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic epoch (EPC1 file) or MI calibration session");
  synth->add_option("kind", sa.kind, "ssvep | mi | clench | mi-session")->required();
  synth->add_option("--target", sa.target, "SSVEP stimulus index");
  synth->add_option("--class", sa.mi_class, "MI class (LeftHand, RightHand, Legs, Rest)");
  synth->add_flag("--clench", sa.clench, "Clench window instead of rest");
  synth->add_option("--snr", sa.snr_db, "SSVEP SNR in dB (overrides config)");
  synth->add_option("--blocks", sa.blocks, "Session blocks");
  synth->add_option("--trials", sa.trials, "Trials per class per block");
  synth->add_option("-o,--out", sa.out, "Output file (directory for mi-session)")->required();
  synth->callback([&] { rc = cmd_synth(settings, sa); });

  CalibrateArgs ca;
  auto* calibrate = app.add_subcommand("calibrate", "Fit the MI pipeline or the EMG threshold from epochs");
  calibrate->add_option("kind", ca.kind, "mi | emg")->required();
  calibrate->add_option("--in", ca.in, "Labeled MI epochs, files or directories (default: synthetic session)");
  calibrate->add_option("--rest", ca.rest, "EMG rest windows");
  calibrate->add_option("--clench", ca.clench, "EMG clench windows");
  calibrate->add_option("--folds", ca.folds, "Cross-validation folds")->capture_default_str();
  calibrate->add_option("-o,--out", ca.out, "Model JSON")->required();
  calibrate->callback([&] { rc = cmd_calibrate(settings, ca); });

  DecodeArgs da;
  auto* decode = app.add_subcommand("decode", "Decode one epoch");
  decode->add_option("kind", da.kind, "ssvep | mi | emg")->required();
  decode->add_option("--in", da.in, "Epoch file")->required()->check(CLI::ExistingFile);
  decode->add_option("--model", da.model, "Model JSON (mi, emg)");
  decode->callback([&] { rc = cmd_decode(settings, da); });

  TrainMemoryArgs ta;
  auto* train = app.add_subcommand("train-memory", "Train the triplet embedding and write a memory store");
  train->add_option("--features", ta.features, "FMX1 training features (default: synthetic corpus of --task)");
  train->add_option("--task", ta.task, "Task whose plan labels the synthetic corpus")->capture_default_str();
  train->add_option("--epochs", ta.epochs)->capture_default_str();
  train->add_option("--hidden", ta.hidden, "Hidden and output width")->capture_default_str();
  train->add_option("--loss-csv", ta.loss_csv, "Per-epoch training loss");
  train->add_option("--export-features", ta.export_features, "Write the training features as FMX1");
  train->add_option("-o,--out", ta.out, "Memory store JSON")->required();
  train->callback([&] { rc = cmd_train_memory(settings, ta); });

  RetrieveArgs ra;
  auto* retrieve = app.add_subcommand("retrieve", "Query a memory store");
  retrieve->add_option("--store", ra.store, "Memory store JSON")->required()->check(CLI::ExistingFile);
  retrieve->add_option("--features", ra.features, "FMX1 queries (default: synthetic test split)");
  retrieve->add_option("--task", ra.task)->capture_default_str();
  retrieve->add_option("--variation", ra.variation, "none | position | pose | instance | context")->capture_default_str();
  retrieve->add_option("-o,--out", ra.out, "Per-query CSV");
  retrieve->callback([&] { rc = cmd_retrieve(settings, ra); });

  MatchArgs ma;
  auto* match = app.add_subcommand("match-param", "Transfer a point between feature maps, or evaluate on the corpus");
  match->add_option("--train", ma.train, "Train FMAP file");
  match->add_option("--test", ma.test, "Test FMAP file");
  match->add_option("--x", ma.x, "Train point x (image pixels)");
  match->add_option("--y", ma.y, "Train point y (image pixels)");
  match->add_flag("--eval", ma.eval, "Evaluate all methods on the synthetic pair corpus");
  match->add_option("--pairs", ma.pairs)->capture_default_str();
  match->add_option("-o,--out", ma.out, "Per-prediction CSV (--eval)");
  match->add_option("--summary", ma.summary, "Summary CSV (--eval)");
  match->callback([&] { rc = cmd_match(settings, ma); });

  RunTaskArgs rt;
  auto* run = app.add_subcommand("run-task", "Run one closed-loop episode");
  run->add_option("--task", rt.task)->capture_default_str();
  run->add_flag("--list", rt.list, "List the built-in tasks");
  run->add_flag("--memory", rt.memory, "Use skill memory suggestions");
  run->add_flag("--param-learning", rt.param_learning, "Start the cursor at the matched parameter");
  run->add_option("--user-error", rt.user_error, "Per-stage probability of a wrong intent")->capture_default_str();
  run->add_option("--memory-epochs", rt.memory_epochs)->capture_default_str();
  run->add_option("--events", rt.events, "JSON-lines event log");
  run->add_option("--report", rt.report, "Run report JSON");
  run->callback([&] { rc = cmd_run_task(settings, rt); });

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Run a benchmark suite over seeds");
  bench->add_option("--suite", ba.suite, "Suite JSON (tasks, levels, options, seeds)");
  bench->add_option("--seeds", ba.seeds, "Seed list (overrides the suite)");
  bench->add_option("--threads", ba.threads, "Worker threads per cell");
  bench->add_option("--csv", ba.csv, "CSV report");
  bench->add_option("--json", ba.json_out, "JSON report");
  bench->callback([&] { rc = cmd_bench(settings, ba); });

  app.parse_complete_callback([&] { settings.load(); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return rc;
}
