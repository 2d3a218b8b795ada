#include <algorithm>
#include <cmath>

#include "noir/error.hpp"
#include "noir/random.hpp"
#include "noir/sim.hpp"

namespace noir::sim {

namespace detail {
const std::vector<std::pair<std::string_view, std::string_view>>& embedded_tasks();
}

namespace {

using nlohmann::json;

Vec3 vec3(const json& j, const std::string& what) {
  require(j.is_array() && j.size() == 3, what + " must be a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Relation relation_from_string(const std::string& s) {
  if (s == "none") return Relation::none;
  if (s == "ontop") return Relation::ontop;
  if (s == "inside") return Relation::inside;
  throw Error("unknown relation '" + s + "'");
}

SkillOption option_from_json(const json& j) {
  SkillOption o;
  o.skill = skill_from_string(j.at("skill").get<std::string>());
  o.orientation = j.value("orientation", -1);
  o.axis = j.value("axis", -1);
  o.direction = j.value("direction", -1);
  return o;
}

// Every step resolves to a well-formed call for the robot.
void check_option(Robot robot, const SkillOption& o, const std::string& object) {
  const auto& sig = signature(robot, o.skill);
  auto in_range = [&](int v, int n, const char* what) {
    require(n == 0 ? v == -1 : (v >= 0 && v < n),
            "option " + o.label() + " of " + object + " has an invalid " + what);
  };
  in_range(o.orientation, sig.orientations, "orientation");
  in_range(o.axis, sig.axes, "axis");
  in_range(o.direction, sig.directions, "direction");
}

}  // namespace

std::string SkillOption::label() const {
  std::string s(to_string(skill));
  if (orientation >= 0) s += "/o" + std::to_string(orientation);
  if (axis >= 0) s += "/a" + std::to_string(axis);
  if (direction >= 0) s += "/d" + std::to_string(direction);
  return s;
}

const std::vector<SkillOption>& TaskSpec::options_for(const std::string& object) const {
  const auto it = options.find(object);
  require(it != options.end(), "no skill options for '" + object + "'");
  return it->second;
}

const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, text] : detail::embedded_tasks()) n.emplace_back(name);
    return n;
  }();
  return names;
}

LoadedTask load_task(const std::string& name) {
  for (const auto& [n, text] : detail::embedded_tasks()) {
    if (n == name) return parse_task(json::parse(text));
  }
  throw Error("unknown task '" + name + "'");
}

LoadedTask parse_task(const json& j) {
  LoadedTask t;
  TaskSpec& spec = t.spec;
  spec.name = j.at("name").get<std::string>();
  spec.robot = robot_from_string(j.value("robot", std::string("arm")));
  spec.description = j.value("description", std::string());
  spec.horizon = j.at("horizon").get<int>();
  spec.jitter = j.value("jitter", 0.0);
  require(spec.jitter >= 0.0, "jitter must be non-negative");

  WorldState& w = t.initial;
  w.robot = spec.robot;
  if (j.contains("locations")) {
    for (const auto& [name, pos] : j.at("locations").items()) w.locations[name] = vec3(pos, "location " + name);
  }
  w.robot_base = j.value("robot_base", std::string());
  for (const auto& o : j.at("objects")) {
    ObjectState s;
    s.id = o.at("id").get<std::string>();
    require(!w.contains(s.id), "duplicate object '" + s.id + "'");
    require(!w.locations.count(s.id) && s.id != "robot", "object id '" + s.id + "' is reserved");
    s.category = o.value("category", s.id);
    s.position = vec3(o.at("position"), "position of " + s.id);
    s.radius = o.value("radius", 10.0);
    s.orientation = o.value("orientation", 0);
    s.relation = relation_from_string(o.value("relation", std::string("none")));
    s.parent = o.value("parent", std::string());
    s.location = o.value("location", std::string());
    for (const auto& p : o.value("properties", json::array())) s.properties.insert(p.get<std::string>());
    for (const auto& a : o.value("attributes", json::array())) s.attributes.insert(a.get<std::string>());
    if (!s.location.empty()) require(w.locations.count(s.location), "unknown location '" + s.location + "'");
    w.objects.emplace(s.id, std::move(s));
  }
  w.validate();

  spec.init_text = j.value("init", std::string());
  spec.goal_text = j.at("goal").get<std::string>();
  spec.init = parse_formula(spec.init_text);
  spec.goal = parse_formula(spec.goal_text);
  check_references(w, spec.init);
  check_references(w, spec.goal);
  require(eval_goal(w, spec.init), spec.name + ": initial conditions do not hold in the fixture");

  for (const auto& s : j.at("selectable")) spec.selectable.push_back(s.get<std::string>());
  for (const auto& id : spec.selectable)
    require(w.contains(id) || w.locations.count(id), "selectable '" + id + "' is neither an object nor a location");
  for (const auto& [id, list] : j.at("options").items()) {
    require(std::find(spec.selectable.begin(), spec.selectable.end(), id) != spec.selectable.end(),
            "options given for unselectable '" + id + "'");
    auto& opts = spec.options[id];
    for (const auto& o : list) {
      opts.push_back(option_from_json(o));
      check_option(spec.robot, opts.back(), id);
    }
    require(!opts.empty() && opts.size() <= 4, "each object needs between one and four skill options");
  }
  for (const auto& s : j.at("plan")) {
    PlanStep p;
    p.object = s.at("object").get<std::string>();
    p.option = s.at("option").get<int>();
    p.anchor = s.value("anchor", std::string());
    if (s.contains("offset")) p.offset = vec3(s.at("offset"), "plan offset");
    p.location = s.value("location", std::string());
    const auto& opts = spec.options_for(p.object);
    require(p.option >= 0 && p.option < static_cast<int>(opts.size()), "plan option out of range for " + p.object);
    if (!p.anchor.empty()) require(w.contains(p.anchor), "unknown plan anchor '" + p.anchor + "'");
    spec.plan.push_back(std::move(p));
  }
  require(static_cast<int>(spec.plan.size()) == spec.horizon,
          spec.name + ": plan length " + std::to_string(spec.plan.size()) + " differs from the horizon " +
              std::to_string(spec.horizon));
  return t;
}

WorldState jittered_initial(const LoadedTask& task, std::uint64_t seed) {
  WorldState w = task.initial;
  const double j = task.spec.jitter;
  if (j <= 0.0 || w.robot != Robot::arm) return w;
  Rng rng(derive_seed(seed, {fnv1a(task.spec.name)}));
  std::uniform_real_distribution<double> u(-j, j);
  const auto& cfg = w.config;
  for (const auto& [id, base] : task.initial.objects) {
    if (base.relation != Relation::none) continue;
    const double dx = u(rng), dy = u(rng);
    const double x = std::clamp(base.position.x() + dx, 0.0, cfg.table_width);
    const double y = std::clamp(base.position.y() + dy, 0.0, cfg.table_height);
    const Vec3 delta(x - base.position.x(), y - base.position.y(), 0.0);
    // Carry whatever rests on or in the object.
    for (auto& [oid, o] : w.objects) {
      std::string cur = oid;
      bool moves = cur == id;
      while (!moves) {
        const auto& c = task.initial.objects.at(cur);
        if (c.relation == Relation::none) break;
        cur = c.parent;
        moves = cur == id;
      }
      if (moves) o.position += delta;
    }
  }
  return w;
}

SkillCall plan_call(const TaskSpec& spec, const WorldState& state, const PlanStep& step) {
  const auto& opt = spec.options_for(step.object).at(static_cast<std::size_t>(step.option));
  const auto& sig = signature(spec.robot, opt.skill);
  SkillCall c;
  c.skill = opt.skill;
  c.orientation = opt.orientation;
  c.axis = opt.axis;
  c.direction = opt.direction;
  if (sig.position) c.position = (step.anchor.empty() ? Vec3::Zero() : state.object(step.anchor).position) + step.offset;
  if (sig.id) c.id = step.location.empty() ? step.object : step.location;
  return c;
}

SkillOutcome replay_plan(const TaskSpec& spec, const WorldState& state, std::size_t start) {
  SkillOutcome out{true, state, {}, FailureKind::none, std::nullopt};
  for (std::size_t i = start; i < spec.plan.size(); ++i) {
    auto next = apply_skill(out.state, plan_call(spec, out.state, spec.plan[i]));
    if (!next.ok) {
      next.reason = "step " + std::to_string(i + 1) + ": " + next.reason;
      return next;
    }
    out = std::move(next);
  }
  if (!eval_goal(out.state, spec.goal)) {
    out.ok = false;
    out.failure = FailureKind::precondition;
    out.reason = "plan ends without reaching the goal";
  }
  return out;
}

}  // namespace noir::sim
