#include "noir/bench.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <thread>

#include "noir/error.hpp"
#include "noir/random.hpp"

namespace noir::bench {

using nlohmann::json;

namespace {

double number_or_inf(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    throw Error("expected a number or \"inf\", got '" + s + "'");
  }
  return j.get<double>();
}

std::string fixed(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string options_name(const loop::EpisodeOptions& o) {
  std::string s = std::string("memory=") + (o.memory ? "on" : "off") + ";param=" + (o.param_learning ? "on" : "off");
  if (o.user_error_rate > 0) s += ";user_error=" + fixed(o.user_error_rate);
  return s;
}

}  // namespace

SuiteConfig suite_from_json(const json& j, SuiteConfig base) {
  SuiteConfig s = std::move(base);
  if (j.contains("tasks")) s.tasks = j.at("tasks").get<std::vector<std::string>>();
  if (j.contains("seeds")) s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("levels")) {
    s.levels.clear();
    for (const auto& l : j.at("levels")) {
      loop::SignalProfile p;
      p.name = l.value("name", "level" + std::to_string(s.levels.size()));
      if (l.contains("ssvep_snr_db")) p.ssvep_snr_db = number_or_inf(l.at("ssvep_snr_db"));
      p.mi_modulation_db = l.value("mi_modulation_db", p.mi_modulation_db);
      p.rest_var = l.value("rest_var", p.rest_var);
      p.clench_var = l.value("clench_var", p.clench_var);
      s.levels.push_back(p);
    }
  }
  if (j.contains("options")) {
    s.options.clear();
    for (const auto& o : j.at("options")) {
      loop::EpisodeOptions e;
      e.memory = o.value("memory", false);
      e.param_learning = o.value("param_learning", false);
      e.user_error_rate = o.value("user_error_rate", 0.0);
      s.options.push_back(e);
    }
  }
  s.memory_train.epochs = j.value("memory_epochs", s.memory_train.epochs);
  s.calibration_seed = j.value("calibration_seed", s.calibration_seed);
  s.threads = j.value("threads", s.threads);
  s.loop.max_attempts = j.value("max_attempts", s.loop.max_attempts);
  s.loop.max_decodes = j.value("max_decodes", s.loop.max_decodes);
  require(!s.tasks.empty() && !s.levels.empty() && !s.options.empty() && !s.seeds.empty(),
          "benchmark suite needs tasks, levels, options and seeds");
  require(s.threads >= 1, "threads must be positive");
  return s;
}

const Metric& CellResult::metric(const std::string& name) const {
  for (const auto& m : metrics)
    if (m.name == name) return m;
  throw Error("unknown metric '" + name + "'");
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{
      "success",          "attempts",         "skills_executed",   "ssvep_decodes",  "mi_skill_decodes",
      "mi_cursor_decodes", "selection_decodes", "clench_rejects",   "memory_skips",   "cursor_distance_px",
      "decode_time_s",    "acc_ssvep",        "acc_mi_skill",      "acc_mi_cursor",  "acc_clench"};
  return names;
}

std::vector<double> episode_metrics(const loop::RunReport& r) {
  return {r.success ? 1.0 : 0.0,
          static_cast<double>(r.attempts),
          static_cast<double>(r.skills_executed),
          static_cast<double>(r.ssvep_decodes),
          static_cast<double>(r.mi_skill_decodes),
          static_cast<double>(r.mi_cursor_decodes),
          static_cast<double>(r.selection_decodes()),
          static_cast<double>(r.clench_rejects),
          static_cast<double>(r.memory_skips),
          r.cursor_distance_px,
          r.decode_time_s,
          r.ssvep.accuracy(),
          r.mi_skill.accuracy(),
          r.mi_cursor.accuracy(),
          r.clench.accuracy()};
}

Metric summarize(const std::string& name, const std::vector<double>& values) {
  Metric m{name, 0.0, 0.0};
  if (values.empty()) return m;
  const auto n = static_cast<double>(values.size());
  for (double v : values) m.mean += v;
  m.mean /= n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.ci95 = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return m;
}

BenchReport run_benchmark(const SuiteConfig& suite) {
  std::map<std::string, sim::LoadedTask> tasks;
  for (const auto& name : suite.tasks) tasks.emplace(name, sim::load_task(name));

  bool need_memory = false, need_params = false;
  for (const auto& o : suite.options) {
    need_memory = need_memory || o.memory;
    need_params = need_params || o.param_learning;
  }
  std::map<std::string, std::unique_ptr<loop::SkillMemory>> memories;
  std::map<std::string, loop::ParamMemory> params;
  for (const auto& [name, task] : tasks) {
    const auto tag = fnv1a(name);
    if (need_memory)
      memories[name] = std::make_unique<loop::SkillMemory>(
          loop::train_skill_memory(task, suite.memory_train, derive_seed(suite.calibration_seed, {10, tag})));
    if (need_params) params[name] = loop::build_param_memory(task, derive_seed(suite.calibration_seed, {11, tag}));
  }

  BenchReport report;
  for (std::size_t li = 0; li < suite.levels.size(); ++li) {
    const auto decoders = loop::calibrate_decoders(suite.levels[li], suite.loop, derive_seed(suite.calibration_seed, {li}));
    for (const auto& name : suite.tasks) {
      const auto& task = tasks.at(name);
      for (const auto& opt : suite.options) {
        loop::Resources res;
        if (opt.memory) res.memory = memories.at(name).get();
        if (opt.param_learning) res.params = &params.at(name);
        // Episodes are independent; each writes its own slot so the result
        // does not depend on scheduling.
        std::vector<std::vector<double>> rows(suite.seeds.size());
        auto work = [&](std::size_t first) {
          for (std::size_t i = first; i < suite.seeds.size(); i += static_cast<std::size_t>(suite.threads)) {
            const auto ep = loop::run_episode(task, decoders, suite.loop, opt, res, suite.seeds[i]);
            rows[i] = episode_metrics(ep.report);
          }
        };
        if (suite.threads == 1) {
          work(0);
        } else {
          std::vector<std::thread> pool;
          for (int t = 0; t < suite.threads; ++t) pool.emplace_back(work, static_cast<std::size_t>(t));
          for (auto& t : pool) t.join();
        }
        CellResult cell{name, suite.levels[li].name, opt, static_cast<int>(rows.size()), {}};
        const auto& names = metric_names();
        for (std::size_t m = 0; m < names.size(); ++m) {
          std::vector<double> col;
          for (const auto& r : rows) col.push_back(r[m]);
          cell.metrics.push_back(summarize(names[m], col));
        }
        report.cells.push_back(std::move(cell));
      }
    }
  }
  return report;
}

std::string BenchReport::csv() const {
  std::string out = "task,level,options,n";
  for (const auto& n : metric_names()) out += "," + n + "_mean," + n + "_ci95";
  out += "\n";
  for (const auto& c : cells) {
    out += c.task + "," + c.level + "," + options_name(c.options) + "," + std::to_string(c.n);
    for (const auto& m : c.metrics) out += "," + fixed(m.mean) + "," + fixed(m.ci95);
    out += "\n";
  }
  return out;
}

json BenchReport::to_json() const {
  json cells_json = json::array();
  for (const auto& c : cells) {
    json metrics = json::object();
    for (const auto& m : c.metrics) metrics[m.name] = {{"mean", m.mean}, {"ci95", m.ci95}};
    cells_json.push_back({{"task", c.task},
                          {"level", c.level},
                          {"memory", c.options.memory},
                          {"param_learning", c.options.param_learning},
                          {"user_error_rate", c.options.user_error_rate},
                          {"n", c.n},
                          {"metrics", metrics}});
  }
  return {{"format", "noir-bench-v1"}, {"cells", cells_json}};
}

}  // namespace noir::bench
