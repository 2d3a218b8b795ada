#include "noir/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "noir/error.hpp"

namespace noir::sim {

namespace {

constexpr std::array<std::string_view, 11> kSkillNames{"Reaching", "Picking", "Placing",    "Pushing",
                                                       "Wiping",   "Drawing", "Pouring",    "Pulling",
                                                       "Grating",  "Navigating", "Dropping"};

std::vector<SkillSignature> build_table() {
  using S = Skill;
  std::vector<SkillSignature> t;
  auto arm = [&](S s, int orientations = 0, int axes = 0, int directions = 0) {
    t.push_back({s, Robot::arm, true, orientations, axes, directions, false});
  };
  arm(S::Reaching);
  arm(S::Picking, 4);
  arm(S::Placing, 3);
  arm(S::Pushing, 0, 3);
  arm(S::Wiping);
  arm(S::Drawing);
  arm(S::Pouring, 3);
  arm(S::Pulling, 2, 0, 2);
  arm(S::Grating);
  for (S s : {S::Navigating, S::Picking, S::Placing, S::Pouring, S::Dropping})
    t.push_back({s, Robot::mobile, false, 0, 0, 0, true});
  return t;
}

SkillOutcome fail(const WorldState& s, FailureKind kind, std::string reason,
                  std::optional<std::string> target = std::nullopt) {
  return {false, s, std::move(reason), kind, std::move(target)};
}

SkillOutcome done(WorldState s, std::optional<std::string> target) {
  return {true, std::move(s), {}, FailureKind::none, std::move(target)};
}

bool finite(const Vec3& v) { return v.allFinite(); }

// True when `id` sits (transitively) on or in `ancestor`.
bool descends_from(const WorldState& s, const std::string& id, const std::string& ancestor) {
  std::string cur = id;
  for (std::size_t guard = 0; guard <= s.objects.size(); ++guard) {
    const auto& o = s.object(cur);
    if (o.relation == Relation::none) return false;
    if (o.parent == ancestor) return true;
    cur = o.parent;
  }
  return false;
}

// Moves an object and everything resting on or in it.
void translate(WorldState& s, const std::string& id, const Vec3& delta) {
  for (auto& [oid, o] : s.objects) {
    if (oid == id || descends_from(s, oid, id)) o.position += delta;
  }
}

bool in_container_closed(const WorldState& s, const ObjectState& o) {
  if (o.relation != Relation::inside) return false;
  const auto& c = s.object(o.parent);
  return c.has("openable") && !c.is("open");
}

bool reachable(const WorldState& s, const Vec3& p) { return (p - s.config.arm_base).norm() <= s.config.reach_radius; }

bool on_table(const SimConfig& c, const Vec3& p) {
  return p.x() >= 0 && p.x() <= c.table_width && p.y() >= 0 && p.y() <= c.table_height;
}

double edge_distance(const SimConfig& c, const Vec3& p) {
  return std::min({p.x(), c.table_width - p.x(), p.y(), c.table_height - p.y()});
}

const ObjectState* held_object(const WorldState& s) { return s.held ? &s.object(*s.held) : nullptr; }

std::optional<SkillOutcome> check_call(const WorldState& s, const SkillCall& call) {
  const auto& table = skill_table();
  const auto it = std::find_if(table.begin(), table.end(),
                               [&](const SkillSignature& g) { return g.robot == s.robot && g.skill == call.skill; });
  if (it == table.end()) return fail(s, FailureKind::invalid_call, std::string(to_string(call.skill)) + " is not available");
  auto categorical = [&](int value, int count, const char* what) -> std::optional<SkillOutcome> {
    if (count == 0 && value != -1) return fail(s, FailureKind::invalid_call, std::string("unexpected ") + what + " parameter");
    if (count > 0 && (value < 0 || value >= count))
      return fail(s, FailureKind::invalid_call, std::string(what) + " must be in [0, " + std::to_string(count) + ")");
    return std::nullopt;
  };
  if (it->position != call.position.has_value())
    return fail(s, FailureKind::invalid_call, it->position ? "missing position parameter" : "unexpected position parameter");
  if (call.position && !finite(*call.position)) return fail(s, FailureKind::invalid_call, "position is not finite");
  if (auto f = categorical(call.orientation, it->orientations, "orientation")) return f;
  if (auto f = categorical(call.axis, it->axes, "axis")) return f;
  if (auto f = categorical(call.direction, it->directions, "direction")) return f;
  if (it->id == call.id.empty()) return fail(s, FailureKind::invalid_call, it->id ? "missing id parameter" : "unexpected id parameter");
  return std::nullopt;
}

// ---- arm ----

SkillOutcome arm_pick(const WorldState& s, const SkillCall& c) {
  if (s.held) return fail(s, FailureKind::precondition, "gripper not empty");
  const auto target = snap_target(s, *c.position);
  if (!target) return fail(s, FailureKind::no_target, "nothing to pick there");
  const auto& o = s.object(*target);
  if (!o.has("movable")) return fail(s, FailureKind::precondition, *target + " cannot be picked", target);
  if (o.is("fallen")) return fail(s, FailureKind::precondition, *target + " fell off the table", target);
  if (!reachable(s, o.position)) return fail(s, FailureKind::precondition, *target + " is out of reach", target);
  if (in_container_closed(s, o)) return fail(s, FailureKind::precondition, "container is closed", target);
  const bool side = c.orientation >= 2;
  if (o.has("flat") && !(side && o.is("graspable_from_side")))
    return fail(s, FailureKind::precondition, *target + " is too flat to grasp", target);
  WorldState n = s;
  auto& h = n.object(*target);
  h.relation = Relation::none;
  h.parent.clear();
  h.orientation = c.orientation;
  n.held = *target;
  n.gripper = h.position;
  return done(std::move(n), target);
}

SkillOutcome arm_place(const WorldState& s, const SkillCall& c) {
  if (!s.held) return fail(s, FailureKind::precondition, "not holding");
  const Vec3 p = *c.position;
  if (!reachable(s, p)) return fail(s, FailureKind::precondition, "placement is out of reach");
  const std::string held = *s.held;
  WorldState n = s;
  Vec3 dest(p.x(), p.y(), 0.0);
  Relation rel = Relation::none;
  std::string parent;
  if (const auto t = snap_target(s, p)) {
    const auto& o = s.object(*t);
    if (o.has("container")) {
      if (o.has("openable") && !o.is("open")) return fail(s, FailureKind::precondition, *t + " is closed", t);
      rel = Relation::inside;
      dest = Vec3(o.position.x(), o.position.y(), o.position.z() + 10.0);
    } else if (o.has("surface")) {
      rel = Relation::ontop;
      dest.z() = o.position.z() + 10.0;
    } else {
      return fail(s, FailureKind::precondition, "cannot place onto " + *t, t);
    }
    parent = *t;
  } else {
    // No object near the point: land on the highest surface under it, else the table.
    const ObjectState* best = nullptr;
    for (const auto& [id, o] : s.objects) {
      if (id == held || descends_from(s, id, held) || !o.has("surface") || o.is("fallen")) continue;
      if (std::hypot(p.x() - o.position.x(), p.y() - o.position.y()) > o.radius) continue;
      if (!best || o.position.z() > best->position.z()) best = &o;
    }
    if (best) {
      rel = Relation::ontop;
      parent = best->id;
      dest.z() = best->position.z() + 10.0;
    } else if (!on_table(s.config, p)) {
      return fail(s, FailureKind::precondition, "placement is outside the table");
    }
  }
  translate(n, held, dest - s.object(held).position);
  auto& h = n.object(held);
  h.relation = rel;
  h.parent = parent;
  h.orientation = c.orientation;
  n.held.reset();
  n.gripper = p;
  return done(std::move(n), parent.empty() ? std::nullopt : std::optional<std::string>(parent));
}

SkillOutcome arm_push(const WorldState& s, const SkillCall& c) {
  const auto target = snap_target(s, *c.position);
  if (!target) return fail(s, FailureKind::no_target, "nothing to push there");
  const auto& o = s.object(*target);
  if (!reachable(s, o.position)) return fail(s, FailureKind::precondition, *target + " is out of reach", target);
  WorldState n = s;
  auto& t = n.object(*target);
  if (c.axis == 2) {
    const auto* h = held_object(s);
    if (h && h->has("cutter") && o.has("sliceable")) {
      t.attributes.insert("sliced");
    } else if (o.has("toggleable")) {
      if (!t.attributes.erase("toggled_on")) t.attributes.insert("toggled_on");
    } else {
      return fail(s, FailureKind::precondition, "pressing " + *target + " has no effect", target);
    }
    return done(std::move(n), target);
  }
  if (!o.has("movable") || o.is("fallen") || o.relation != Relation::none)
    return fail(s, FailureKind::precondition, "only objects resting on the table can be pushed", target);
  Vec3 delta = Vec3::Zero();
  delta[c.axis] = s.config.push_distance;
  translate(n, *target, delta);
  auto& moved = n.object(*target);
  if (!on_table(s.config, moved.position)) {
    moved.attributes.insert("fallen");
    moved.attributes.erase("graspable_from_side");
    translate(n, *target, Vec3(0.0, 0.0, -50.0 - moved.position.z()));
  } else if (moved.has("flat") && edge_distance(s.config, moved.position) < s.config.edge_threshold) {
    moved.attributes.insert("graspable_from_side");
  }
  return done(std::move(n), target);
}

// Tool skills: the held object must carry `tool`, the target `affordance`.
template <typename Effect>
SkillOutcome arm_tool(const WorldState& s, const SkillCall& c, std::string_view tool, std::string_view affordance,
                      Effect effect) {
  const auto* h = held_object(s);
  if (!h || !h->has(tool)) return fail(s, FailureKind::precondition, "not holding a " + std::string(tool));
  const auto target = snap_target(s, *c.position);
  if (!target) return fail(s, FailureKind::no_target, "no target there");
  if (!reachable(s, s.object(*target).position))
    return fail(s, FailureKind::precondition, *target + " is out of reach", target);
  if (!s.object(*target).has(affordance))
    return fail(s, FailureKind::precondition, std::string(to_string(c.skill)) + " has no effect on " + *target, target);
  WorldState n = s;
  effect(n.object(*s.held), n.object(*target));
  n.gripper = *c.position;
  return done(std::move(n), target);
}

SkillOutcome arm_pull(const WorldState& s, const SkillCall& c) {
  if (s.held) return fail(s, FailureKind::precondition, "gripper not empty");
  const auto target = snap_target(s, *c.position);
  if (!target) return fail(s, FailureKind::no_target, "nothing to pull there");
  if (!s.object(*target).has("openable"))
    return fail(s, FailureKind::precondition, *target + " cannot be opened", target);
  WorldState n = s;
  auto& t = n.object(*target);
  if (c.direction == 0) {
    t.attributes.insert("open");
  } else {
    t.attributes.erase("open");
  }
  return done(std::move(n), target);
}

// ---- mobile ----

SkillOutcome mobile_target(const WorldState& s, const std::string& id, const ObjectState*& out) {
  if (!s.contains(id)) return fail(s, FailureKind::no_target, "unknown object '" + id + "'");
  out = &s.object(id);
  if (out->location != s.robot_base && s.held != id)
    return fail(s, FailureKind::precondition, id + " is not at " + s.robot_base, id);
  return done(s, id);
}

SkillOutcome mobile(const WorldState& s, const SkillCall& c) {
  if (c.skill == Skill::Navigating) {
    if (!s.locations.count(c.id)) return fail(s, FailureKind::precondition, "unknown location '" + c.id + "'");
    WorldState n = s;
    n.robot_base = c.id;
    n.gripper = s.locations.at(c.id);
    return done(std::move(n), std::nullopt);
  }
  const ObjectState* o = nullptr;
  if (auto r = mobile_target(s, c.id, o); !r.ok) return r;
  const std::optional<std::string> target = c.id;
  WorldState n = s;
  if (c.skill == Skill::Picking) {
    if (s.held) return fail(s, FailureKind::precondition, "gripper not empty", target);
    if (!o->has("movable")) return fail(s, FailureKind::precondition, c.id + " cannot be picked", target);
    if (in_container_closed(s, *o)) return fail(s, FailureKind::precondition, "container is closed", target);
    auto& h = n.object(c.id);
    h.relation = Relation::none;
    h.parent.clear();
    h.location.clear();
    n.held = c.id;
    return done(std::move(n), target);
  }
  if (!s.held) return fail(s, FailureKind::precondition, "not holding", target);
  if (*s.held == c.id) return fail(s, FailureKind::precondition, "target is the held object", target);
  const auto& h = s.object(*s.held);
  if (c.skill == Skill::Pouring) {
    if (!h.has("pour_source") || !h.is("filled"))
      return fail(s, FailureKind::precondition, "not holding a filled container", target);
    if (!o->has("fillable")) return fail(s, FailureKind::precondition, c.id + " cannot be filled", target);
    n.object(*s.held).attributes.erase("filled");
    n.object(c.id).attributes.insert("filled");
    return done(std::move(n), target);
  }
  Relation rel = Relation::none;
  if (c.skill == Skill::Dropping) {
    if (!o->has("bin")) return fail(s, FailureKind::precondition, c.id + " is not a bin", target);
    rel = Relation::inside;
  } else if (o->has("container")) {
    if (o->has("openable") && !o->is("open")) return fail(s, FailureKind::precondition, c.id + " is closed", target);
    rel = Relation::inside;
  } else if (o->has("surface")) {
    rel = Relation::ontop;
  } else {
    return fail(s, FailureKind::precondition, "cannot place onto " + c.id, target);
  }
  const std::string held = *s.held;
  translate(n, held, o->position + Vec3(0.0, 0.0, 10.0) - h.position);
  auto& p = n.object(held);
  p.relation = rel;
  p.parent = c.id;
  p.location = s.robot_base;
  n.held.reset();
  return done(std::move(n), target);
}

}  // namespace

std::string_view to_string(Robot r) { return r == Robot::arm ? "arm" : "mobile"; }

Robot robot_from_string(std::string_view s) {
  if (s == "arm") return Robot::arm;
  if (s == "mobile") return Robot::mobile;
  throw Error("unknown robot '" + std::string(s) + "'");
}

std::string_view to_string(Skill s) { return kSkillNames[static_cast<std::size_t>(s)]; }

Skill skill_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kSkillNames.size(); ++i)
    if (kSkillNames[i] == s) return static_cast<Skill>(i);
  throw Error("unknown skill '" + std::string(s) + "'");
}

const std::vector<SkillSignature>& skill_table() {
  static const std::vector<SkillSignature> table = build_table();
  return table;
}

const SkillSignature& signature(Robot robot, Skill skill) {
  for (const auto& g : skill_table())
    if (g.robot == robot && g.skill == skill) return g;
  throw Error(std::string(to_string(skill)) + " is not a " + std::string(to_string(robot)) + " skill");
}

const ObjectState& WorldState::object(const std::string& id) const {
  const auto it = objects.find(id);
  require(it != objects.end(), "unknown object '" + id + "'");
  return it->second;
}

ObjectState& WorldState::object(const std::string& id) {
  const auto it = objects.find(id);
  require(it != objects.end(), "unknown object '" + id + "'");
  return it->second;
}

void WorldState::validate() const {
  require(gripper.allFinite(), "gripper position is not finite");
  for (const auto& [id, o] : objects) {
    require(o.id == id, "object key '" + id + "' does not match its id");
    require(o.position.allFinite(), "position of " + id + " is not finite");
    if (o.relation != Relation::none) {
      require(!o.parent.empty() && objects.count(o.parent), id + " rests on an unknown object");
      require(o.parent != id, id + " rests on itself");
    }
    // Following parents must terminate; a cycle revisits an id.
    std::string cur = id;
    for (std::size_t steps = 0;; ++steps) {
      require(steps <= objects.size(), "relation cycle through " + id);
      const auto& c = objects.at(cur);
      if (c.relation == Relation::none) break;
      cur = c.parent;
    }
  }
  if (held) {
    require(objects.count(*held), "held object '" + *held + "' does not exist");
    require(objects.at(*held).relation == Relation::none, "held object " + *held + " still rests on a surface");
  }
  if (robot == Robot::mobile) require(locations.count(robot_base), "robot base '" + robot_base + "' is not a location");
}

bool WorldState::operator==(const WorldState& o) const {
  if (robot != o.robot || held != o.held || gripper != o.gripper || robot_base != o.robot_base ||
      locations != o.locations || objects.size() != o.objects.size())
    return false;
  for (const auto& [id, a] : objects) {
    const auto it = o.objects.find(id);
    if (it == o.objects.end()) return false;
    const auto& b = it->second;
    if (a.category != b.category || a.position != b.position || a.orientation != b.orientation ||
        a.radius != b.radius || a.relation != b.relation || a.parent != b.parent || a.location != b.location ||
        a.properties != b.properties || a.attributes != b.attributes)
      return false;
  }
  return true;
}

nlohmann::json SkillCall::to_json() const {
  nlohmann::json j{{"skill", std::string(to_string(skill))}};
  if (position) j["position"] = {position->x(), position->y(), position->z()};
  if (orientation >= 0) j["orientation"] = orientation;
  if (axis >= 0) j["axis"] = axis;
  if (direction >= 0) j["direction"] = direction;
  if (!id.empty()) j["id"] = id;
  return j;
}

std::optional<std::string> snap_target(const WorldState& state, const Vec3& point) {
  std::optional<std::string> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& [id, o] : state.objects) {
    if (state.held && (id == *state.held || descends_from(state, id, *state.held))) continue;
    const double d = (o.position - point).norm();
    if (d <= state.config.capture_radius && d < best_d) {
      best_d = d;
      best = id;
    }
  }
  return best;
}

SkillOutcome apply_skill(const WorldState& state, const SkillCall& call) {
  if (auto bad = check_call(state, call)) return *bad;
  if (state.robot == Robot::mobile) return mobile(state, call);
  switch (call.skill) {
    case Skill::Reaching: {
      if (!reachable(state, *call.position)) return fail(state, FailureKind::precondition, "point is out of reach");
      WorldState n = state;
      n.gripper = *call.position;
      return done(std::move(n), std::nullopt);
    }
    case Skill::Picking:
      return arm_pick(state, call);
    case Skill::Placing:
      return arm_place(state, call);
    case Skill::Pushing:
      return arm_push(state, call);
    case Skill::Wiping:
      return arm_tool(state, call, "wiper", "stainable", [](ObjectState&, ObjectState& t) {
        t.attributes.erase("stained");
        t.attributes.insert("clean");
      });
    case Skill::Drawing:
      return arm_tool(state, call, "marker", "drawable", [](ObjectState&, ObjectState& t) { t.attributes.insert("drawn"); });
    case Skill::Grating:
      return arm_tool(state, call, "gratable", "container", [](ObjectState& h, ObjectState& t) {
        h.attributes.insert("grated");
        t.attributes.insert("filled");
      });
    case Skill::Pouring: {
      const auto* h = held_object(state);
      if (!h || !h->has("pour_source") || !h->is("filled"))
        return fail(state, FailureKind::precondition, "not holding a filled container");
      return arm_tool(state, call, "pour_source", "fillable", [](ObjectState& src, ObjectState& t) {
        src.attributes.erase("filled");
        t.attributes.insert("filled");
      });
    }
    case Skill::Pulling:
      return arm_pull(state, call);
    default:
      break;
  }
  return fail(state, FailureKind::invalid_call, "unsupported skill");
}

}  // namespace noir::sim
