#include "noir/loop.hpp"

#include <algorithm>
#include <cmath>

#include "noir/error.hpp"
#include "noir/random.hpp"

namespace noir::loop {

using nlohmann::json;

namespace {

synth::MiProfile first_classes(synth::MiProfile p, int k) {
  p.classes.resize(static_cast<std::size_t>(k));
  return p;
}

json point_json(double x, double y) { return json::array({x, y}); }

}  // namespace

DecoderSuite calibrate_decoders(const SignalProfile& profile, const LoopConfig& config, std::uint64_t seed) {
  require(config.cursor_tolerance_px * 2.0 >= config.cursor_step_px,
          "cursor tolerance must be at least half a cursor step");
  DecoderSuite d;
  d.profile = profile;
  d.stimulus.frequencies = config.stimulus_frequencies;
  d.stimulus.duration_s = config.ssvep_window_s;
  d.stimulus.snr_db = profile.ssvep_snr_db;
  d.stimulus.validate(d.context.fs);
  d.ssvep.emplace_back(config.stimulus_frequencies, d.context.montage);

  d.mi_profile.epoch_s = config.mi_window_s;
  d.mi_profile.modulation_db = profile.mi_modulation_db;
  for (int k = 2; k <= 4; ++k) {
    const auto p = first_classes(d.mi_profile, k);
    const auto session = synth::gen_calibration_session(d.context, p, derive_seed(seed, {1, static_cast<std::uint64_t>(k)}),
                                                        config.calibration_blocks, config.calibration_trials_per_block);
    d.skill.emplace(k, mi::fit_mi_pipeline(session));
  }

  d.clench.window_s = config.clench_window_s;
  d.clench.rest_var = profile.rest_var;
  d.clench.clench_var = profile.clench_var;
  std::vector<signal::Epoch> rest, clench;
  for (int i = 0; i < config.clench_calibration_windows; ++i) {
    const auto n = static_cast<std::uint64_t>(i);
    rest.push_back(synth::gen_clench_window(d.context, d.clench, false, derive_seed(seed, {2, 0, n})));
    clench.push_back(synth::gen_clench_window(d.context, d.clench, true, derive_seed(seed, {2, 1, n})));
  }
  d.emg = emg::calibrate_emg(rest, clench);
  return d;
}

memory::RetrievalCorpusConfig corpus_config_for(const sim::LoadedTask& task) {
  memory::RetrievalCorpusConfig c;
  for (const auto& step : task.spec.plan) {
    const auto& opt = task.spec.options_for(step.object).at(static_cast<std::size_t>(step.option));
    c.labels.push_back(memory::join_label(step.object, sim::to_string(opt.skill)));
  }
  for (const auto& [id, o] : task.initial.objects) c.categories.push_back(o.category);
  // The last object the plan picks up stands in for the consumable whose
  // appearance varies between scenes.
  for (const auto& step : task.spec.plan) {
    const auto& opt = task.spec.options_for(step.object).at(static_cast<std::size_t>(step.option));
    if (opt.skill == sim::Skill::Picking && task.initial.contains(step.object))
      c.instance_category = task.initial.object(step.object).category;
  }
  return c;
}

SkillMemory train_skill_memory(const sim::LoadedTask& task, const memory::TrainConfig& train, std::uint64_t seed) {
  SkillMemory m;
  m.task = task.spec.name;
  m.corpus = corpus_config_for(task);
  const auto corpus = memory::make_retrieval_corpus(m.corpus, memory::Variation::none, seed);
  auto cfg = train;
  cfg.seed = seed;
  auto result = memory::train_embedding(corpus.train, cfg);
  m.store = memory::MemoryStore(std::move(result.net), corpus.train);
  return m;
}

memory::SceneDescriptor scene_of(const sim::WorldState& state, int stage) {
  memory::SceneDescriptor s;
  s.stage = stage;
  const double hw = state.config.table_width / 2.0, hh = state.config.table_height / 2.0;
  for (const auto& [id, o] : state.objects) {
    memory::SceneObject so;
    so.category = o.category;
    so.position = Eigen::Vector3d((o.position.x() - hw) / hw, (o.position.y() - hh) / hh, o.position.z() / 100.0);
    s.objects.push_back(so);
  }
  return s;
}

param::FeatureMap render_state(const sim::WorldState& state, const param::ParamCorpusConfig& render, std::uint64_t seed,
                               std::uint64_t noise_seed) {
  std::vector<const sim::ObjectState*> visible;
  for (const auto& [id, o] : state.objects) {
    if (state.held == id || o.is("fallen")) continue;
    visible.push_back(&o);
  }
  std::stable_sort(visible.begin(), visible.end(),
                   [](const auto* a, const auto* b) { return a->position.z() < b->position.z(); });
  param::SceneLayout layout;
  for (const auto* o : visible) {
    param::LayoutItem item;
    item.category = o->category;
    item.x = o->position.x();
    item.y = o->position.y();
    item.a = item.b = o->radius;
    layout.items.push_back(item);
  }
  return param::render_layout(render, layout, seed, noise_seed);
}

ParamMemory build_param_memory(const sim::LoadedTask& task, std::uint64_t seed, param::ParamCorpusConfig render) {
  ParamMemory m;
  m.task = task.spec.name;
  m.render = render;
  m.seed = seed;
  auto state = sim::jittered_initial(task, derive_seed(seed, {1}));
  for (std::size_t i = 0; i < task.spec.plan.size(); ++i) {
    const auto call = sim::plan_call(task.spec, state, task.spec.plan[i]);
    if (call.position) {
      m.demos[i] = {render_state(state, render, seed, derive_seed(seed, {2, i})),
                    {call.position->x(), call.position->y()}};
    }
    auto out = sim::apply_skill(state, call);
    require(out.ok, "demonstration failed: " + out.reason);
    state = std::move(out.state);
  }
  return m;
}

json RunReport::to_json() const {
  auto stage = [](const StageCount& c) { return json{{"total", c.total}, {"correct", c.correct}, {"accuracy", c.accuracy()}}; };
  return {{"task", task},
          {"seed", seed},
          {"success", success},
          {"failure", failure},
          {"attempts", attempts},
          {"skills_executed", skills_executed},
          {"confirmed_executions", confirmed_executions},
          {"skill_failures", skill_failures},
          {"ssvep_decodes", ssvep_decodes},
          {"mi_skill_decodes", mi_skill_decodes},
          {"mi_cursor_decodes", mi_cursor_decodes},
          {"clench_confirms", clench_confirms},
          {"clench_rejects", clench_rejects},
          {"memory_suggestions", memory_suggestions},
          {"memory_skips", memory_skips},
          {"cursor_distance_px", cursor_distance_px},
          {"decode_time_s", decode_time_s},
          {"accuracy", {{"ssvep", stage(ssvep)}, {"mi_skill", stage(mi_skill)}, {"mi_cursor", stage(mi_cursor)},
                        {"clench", stage(clench)}}}};
}

namespace {

struct Intent {
  std::string object;
  int option = 0;
  sim::SkillCall call;
};

class Runner {
 public:
  Runner(const sim::LoadedTask& task, const DecoderSuite& d, const LoopConfig& cfg, const EpisodeOptions& opt,
         const Resources& res, std::uint64_t seed)
      : task_(task), spec_(task.spec), d_(d), cfg_(cfg), opt_(opt), res_(res), seed_(seed),
        user_(derive_seed(seed, {0x05e7})) {
    const auto n = spec_.selectable.size();
    require(n <= cfg_.stimulus_frequencies.size(), spec_.name + " has more choices than stimulus frequencies");
    stimulus_ = d_.stimulus;
    stimulus_.frequencies.assign(cfg_.stimulus_frequencies.begin(), cfg_.stimulus_frequencies.begin() + static_cast<std::ptrdiff_t>(n));
    ssvep_.emplace_back(stimulus_.frequencies, d_.context.montage);
    if (res_.memory && res_.memory->task != spec_.name) res_.memory = nullptr;
    if (res_.params && res_.params->task != spec_.name) res_.params = nullptr;
    if (res_.memory) featurizer_.emplace(res_.memory->corpus.featurizer);
  }

  Episode run() {
    rep_.task = spec_.name;
    rep_.seed = seed_;
    rep_.attempts = 1;
    initial_ = sim::jittered_initial(task_, seed_);
    state_ = initial_;
    log({{"event", "episode_start"}, {"task", spec_.name}, {"seed", seed_}});
    log({{"event", "attempt_start"}, {"attempt", rep_.attempts}});
    try {
      loop();
    } catch (const Budget&) {
      rep_.success = false;
      rep_.failure = "decode budget exhausted";
    }
    log({{"event", "episode_end"}, {"success", rep_.success}, {"failure", rep_.failure}, {"attempts", rep_.attempts}});
    return {rep_, std::move(events_)};
  }

 private:
  struct Budget {};

  void loop() {
    std::size_t step = 0;
    int stage_failures = 0;
    while (!sim::eval_goal(state_, spec_.goal)) {
      if (step >= spec_.plan.size()) {
        // Plan exhausted without the goal: only possible after a harmless
        // detour left the world off-plan.
        if (!reset("plan exhausted")) return;
        step = 0;
        continue;
      }
      const Intent intent = make_intent(step);
      const auto pending = select(step, intent);
      if (!pending) continue;  // rejected at the execute confirm; redo the stage
      ++rep_.skills_executed;
      ++rep_.confirmed_executions;
      auto out = sim::apply_skill(state_, *pending);
      log({{"event", "apply"}, {"step", step}, {"call", pending->to_json()}, {"ok", out.ok}, {"reason", out.reason}});
      if (!out.ok) {
        ++rep_.skill_failures;
        if (++stage_failures > cfg_.max_stage_retries) {
          if (!reset("repeated skill failures")) return;
          step = 0;
          stage_failures = 0;
        }
        continue;
      }
      state_ = std::move(out.state);
      stage_failures = 0;
      if (sim::eval_goal(state_, spec_.goal)) break;
      if (sim::replay_plan(spec_, state_, step + 1).ok) {
        ++step;
      } else if (!sim::replay_plan(spec_, state_, step).ok) {
        if (!reset("unrecoverable state")) return;
        step = 0;
      }
    }
    rep_.success = true;
  }

  bool reset(const std::string& why) {
    log({{"event", "reset"}, {"reason", why}});
    if (rep_.attempts >= cfg_.max_attempts) {
      rep_.failure = "attempts exhausted: " + why;
      return false;
    }
    ++rep_.attempts;
    state_ = initial_;
    log({{"event", "attempt_start"}, {"attempt", rep_.attempts}});
    return true;
  }

  Intent intent_for(const std::string& object, int option, std::size_t step) const {
    Intent it{object, option, {}};
    if (step < spec_.plan.size() && spec_.plan[step].object == object && spec_.plan[step].option == option) {
      it.call = sim::plan_call(spec_, state_, spec_.plan[step]);
    } else {
      sim::PlanStep ad_hoc;
      ad_hoc.object = object;
      ad_hoc.option = option;
      if (state_.contains(object)) ad_hoc.anchor = object;
      it.call = sim::plan_call(spec_, state_, ad_hoc);
    }
    return it;
  }

  Intent make_intent(std::size_t step) {
    const auto& p = spec_.plan[step];
    if (opt_.user_error_rate > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(user_) < opt_.user_error_rate) {
      std::vector<std::pair<std::string, int>> wrong;
      for (const auto& id : spec_.selectable) {
        const auto& opts = spec_.options_for(id);
        for (int k = 0; k < static_cast<int>(opts.size()); ++k)
          if (id != p.object || k != p.option) wrong.emplace_back(id, k);
      }
      if (!wrong.empty()) {
        const auto& w = wrong[std::uniform_int_distribution<std::size_t>(0, wrong.size() - 1)(user_)];
        log({{"event", "user_error"}, {"step", step}, {"object", w.first}, {"option", w.second}});
        return intent_for(w.first, w.second, step);
      }
    }
    return intent_for(p.object, p.option, step);
  }

  // Runs the what/how/where stages; returns the confirmed call, or nothing
  // when the user rejects at the final confirm.
  std::optional<sim::SkillCall> select(std::size_t step, const Intent& intent) {
    std::string object;
    int option = -1;
    if (auto s = suggestion(step, intent)) {
      object = s->first;
      option = s->second;
    } else {
      object = choose_object(intent);
      option = choose_option(object, intent);
    }
    // The user aims for their intent when the selection matches it, else for
    // the selected skill at the selected object.
    const bool on_intent = object == intent.object && option == intent.option;
    const Intent aim = on_intent ? intent : intent_for(object, option, step);
    sim::SkillCall call = aim.call;
    const auto& planned = spec_.plan[step];
    const bool on_plan = on_intent && object == planned.object && option == planned.option;
    if (call.position) call.position = steer(step, object, on_plan, *aim.call.position);
    const bool agree = on_intent && (!call.position || within_tolerance(*call.position, *intent.call.position));
    if (!clench(agree, "execute")) return std::nullopt;
    return call;
  }

  std::optional<std::pair<std::string, int>> suggestion(std::size_t step, const Intent& intent) {
    if (!opt_.memory || !res_.memory) return std::nullopt;
    const auto q = featurizer_->featurize(scene_of(state_, static_cast<int>(step)), next_seed());
    const auto r = res_.memory->store.retrieve(q);
    ++rep_.memory_suggestions;
    std::optional<std::pair<std::string, int>> s;
    if (r.confident && std::find(spec_.selectable.begin(), spec_.selectable.end(), r.object_id) != spec_.selectable.end()) {
      const auto& opts = spec_.options_for(r.object_id);
      for (int k = 0; k < static_cast<int>(opts.size()); ++k) {
        if (sim::to_string(opts[static_cast<std::size_t>(k)].skill) == r.skill_id) {
          s = std::make_pair(r.object_id, k);
          break;
        }
      }
    }
    log({{"event", "memory_suggest"}, {"step", step}, {"object", r.object_id}, {"skill", r.skill_id},
         {"distance", r.distance}, {"confident", r.confident}, {"usable", s.has_value()}});
    if (!s) return std::nullopt;
    const bool agree = s->first == intent.object && s->second == intent.option;
    if (!clench(agree, "memory")) return std::nullopt;
    ++rep_.memory_skips;
    return s;
  }

  std::string choose_object(const Intent& intent) {
    const auto& sel = spec_.selectable;
    const auto target =
        static_cast<int>(std::find(sel.begin(), sel.end(), intent.object) - sel.begin());
    for (;;) {
      budget();
      const auto epoch = synth::gen_ssvep(d_.context, stimulus_, target, next_seed());
      const auto decoded = static_cast<int>(ssvep_.front().decode(epoch).best_index());
      ++rep_.ssvep_decodes;
      count(rep_.ssvep, decoded == target);
      rep_.decode_time_s += cfg_.ssvep_window_s;
      log({{"event", "decode"}, {"channel", "ssvep"}, {"intended", sel[static_cast<std::size_t>(target)]},
           {"decoded", sel[static_cast<std::size_t>(decoded)]}, {"window_s", cfg_.ssvep_window_s}});
      if (clench(decoded == target, "object")) return sel[static_cast<std::size_t>(decoded)];
    }
  }

  int choose_option(const std::string& object, const Intent& intent) {
    const int k = static_cast<int>(spec_.options_for(object).size());
    if (k == 1) return 0;
    const int target = object == intent.object ? intent.option : 0;
    const auto profile = first_classes(d_.mi_profile, k);
    const auto& pipeline = d_.skill.at(k);
    for (;;) {
      budget();
      const auto epoch = synth::gen_mi(d_.context, profile, target, next_seed());
      const auto label = pipeline.rank(epoch).front().label;
      int decoded = 0;
      while (std::string(synth::to_string(profile.classes[static_cast<std::size_t>(decoded)])) != label) ++decoded;
      ++rep_.mi_skill_decodes;
      count(rep_.mi_skill, decoded == target);
      rep_.decode_time_s += cfg_.mi_window_s;
      const auto& opts = spec_.options_for(object);
      log({{"event", "decode"}, {"channel", "mi_skill"}, {"intended", opts[static_cast<std::size_t>(target)].label()},
           {"decoded", opts[static_cast<std::size_t>(decoded)].label()}, {"window_s", cfg_.mi_window_s}});
      if (clench(decoded == target, "skill")) return decoded;
    }
  }

  bool within_tolerance(const sim::Vec3& p, const sim::Vec3& target) const {
    return std::abs(p.x() - target.x()) <= cfg_.cursor_tolerance_px && std::abs(p.y() - target.y()) <= cfg_.cursor_tolerance_px;
  }

  // Cursor control: one binary decode per step along x, then along y.
  sim::Vec3 steer(std::size_t step, const std::string& object, bool on_plan, const sim::Vec3& target) {
    sim::Vec3 cur = state_.contains(object) ? state_.object(object).position : target;
    std::string source = "object";
    if (opt_.param_learning && res_.params && on_plan && res_.params->demos.count(step)) {
      const auto& demo = res_.params->demos.at(step);
      const auto map = render_state(state_, res_.params->render, res_.params->seed, next_seed());
      const auto m = param::match_point(demo.map, demo.point, map);
      cur.x() = m.point.x;
      cur.y() = m.point.y;
      source = "param_match";
    }
    log({{"event", "cursor_start"}, {"step", step}, {"source", source}, {"point", point_json(cur.x(), cur.y())},
         {"target", point_json(target.x(), target.y())}});
    const auto& cursor = d_.cursor();
    const auto profile = first_classes(d_.mi_profile, 2);
    for (int a = 0; a < 2; ++a) {
      while (std::abs(target[a] - cur[a]) > cfg_.cursor_tolerance_px) {
        budget();
        const int want = target[a] > cur[a] ? +1 : -1;
        const auto raw = synth::gen_mi(d_.context, profile, want < 0 ? 0 : 1, next_seed());
        const int got = mi::cursor_step(cursor.decoder, cursor.preprocess.apply(raw), a == 0 ? mi::Axis::x : mi::Axis::y);
        ++rep_.mi_cursor_decodes;
        count(rep_.mi_cursor, got == want);
        rep_.decode_time_s += cfg_.mi_window_s;
        cur[a] += got * cfg_.cursor_step_px;
        rep_.cursor_distance_px += cfg_.cursor_step_px;
        log({{"event", "decode"}, {"channel", "mi_cursor"}, {"axis", a == 0 ? "x" : "y"}, {"intended", want},
             {"decoded", got}, {"window_s", cfg_.mi_window_s}});
      }
    }
    return {cur.x(), cur.y(), target.z()};
  }

  bool clench(bool confirm, const char* stage) {
    budget();
    const auto window = synth::gen_clench_window(d_.context, d_.clench, confirm, next_seed());
    const bool detected = emg::detect_clench(d_.emg, window);
    count(rep_.clench, detected == confirm);
    rep_.decode_time_s += cfg_.clench_window_s;
    log({{"event", "decode"}, {"channel", "clench"}, {"intended", confirm ? "clench" : "rest"},
         {"decoded", detected ? "clench" : "rest"}, {"window_s", cfg_.clench_window_s}});
    if (detected) {
      ++rep_.clench_confirms;
    } else {
      ++rep_.clench_rejects;
    }
    log({{"event", detected ? "confirm" : "reject"}, {"stage", stage}});
    return detected;
  }

  void budget() const {
    const int used = rep_.ssvep.total + rep_.mi_skill.total + rep_.mi_cursor.total + rep_.clench.total;
    if (used >= cfg_.max_decodes) throw Budget{};
  }

  static void count(StageCount& c, bool correct) {
    ++c.total;
    if (correct) ++c.correct;
  }

  std::uint64_t next_seed() { return derive_seed(seed_, {0x51, ++counter_}); }

  void log(json e) {
    e["seq"] = events_.size();
    events_.push_back(std::move(e));
  }

  const sim::LoadedTask& task_;
  const sim::TaskSpec& spec_;
  const DecoderSuite& d_;
  const LoopConfig& cfg_;
  EpisodeOptions opt_;
  Resources res_;
  std::uint64_t seed_;
  Rng user_;
  std::uint64_t counter_ = 0;
  synth::SsvepStimulus stimulus_;
  std::vector<ssvep::SsvepDecoder> ssvep_;
  std::optional<memory::SyntheticFeaturizer> featurizer_;
  sim::WorldState initial_, state_;
  RunReport rep_;
  std::vector<json> events_;
};

}  // namespace

Episode run_episode(const sim::LoadedTask& task, const DecoderSuite& decoders, const LoopConfig& config,
                    const EpisodeOptions& options, const Resources& resources, std::uint64_t seed) {
  return Runner(task, decoders, config, options, resources, seed).run();
}

std::vector<std::string> check_event_log(const std::vector<json>& events, const RunReport& report) {
  std::vector<std::string> bad;
  bool armed = false;
  int applies = 0, confirms = 0, rejects = 0;
  std::map<std::string, StageCount> decodes;
  for (const auto& e : events) {
    const auto kind = e.at("event").get<std::string>();
    if (kind == "confirm" || kind == "reject") {
      const bool execute = e.at("stage") == "execute";
      (kind == "confirm" ? confirms : rejects)++;
      if (execute) armed = kind == "confirm";
    } else if (kind == "apply") {
      ++applies;
      if (!armed) bad.push_back("skill applied without a confirm (event " + std::to_string(e.at("seq").get<int>()) + ")");
      armed = false;
    } else if (kind == "decode") {
      auto& c = decodes[e.at("channel").get<std::string>()];
      ++c.total;
      if (e.at("intended") == e.at("decoded")) ++c.correct;
    }
  }
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) bad.push_back(what);
  };
  expect(applies == report.skills_executed, "applied skills differ from the report");
  expect(report.skills_executed == report.confirmed_executions, "skills executed differ from confirmed selections");
  expect(confirms == report.clench_confirms && rejects == report.clench_rejects, "confirm counts differ from the report");
  expect(report.attempts >= 1, "attempts below one");
  const std::pair<const char*, const StageCount*> stages[] = {
      {"ssvep", &report.ssvep}, {"mi_skill", &report.mi_skill}, {"mi_cursor", &report.mi_cursor}, {"clench", &report.clench}};
  for (const auto& [name, c] : stages) {
    const auto& seen = decodes[name];
    expect(seen.total == c->total && seen.correct == c->correct, std::string(name) + " decode counts differ from the log");
  }
  expect(report.ssvep_decodes == report.ssvep.total, "ssvep decode count mismatch");
  expect(report.mi_skill_decodes == report.mi_skill.total, "skill decode count mismatch");
  expect(report.mi_cursor_decodes == report.mi_cursor.total, "cursor decode count mismatch");
  return bad;
}

std::string to_json_lines(const std::vector<json>& events) {
  std::string out;
  for (const auto& e : events) out += e.dump() + "\n";
  return out;
}

}  // namespace noir::loop
