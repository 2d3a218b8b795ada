#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "noir/bddl.hpp"

namespace noir::sim {

using Vec3 = Eigen::Vector3d;

enum class Robot { arm, mobile };
std::string_view to_string(Robot r);
Robot robot_from_string(std::string_view s);

enum class Skill { Reaching, Picking, Placing, Pushing, Wiping, Drawing, Pouring, Pulling, Grating, Navigating, Dropping };
std::string_view to_string(Skill s);
Skill skill_from_string(std::string_view s);

// One row of the skill table: which parameters the call carries and how
// many choices each categorical parameter has (0 = not a parameter).
struct SkillSignature {
  Skill skill;
  Robot robot;
  bool position = false;
  int orientations = 0;
  int axes = 0;
  int directions = 0;
  bool id = false;
};

const SkillSignature& signature(Robot robot, Skill skill);
const std::vector<SkillSignature>& skill_table();

struct SimConfig {
  double capture_radius = 20.0;   // r_cap: position parameters snap to objects this close
  double reach_radius = 420.0;    // arm reach from its base
  double push_distance = 60.0;
  double edge_threshold = 50.0;   // pushed within this of the table edge: graspable from the side
  double nextto_radius = 70.0;
  double table_width = 360.0;
  double table_height = 240.0;
  Vec3 arm_base{180.0, -60.0, 0.0};
};

enum class Relation { none, ontop, inside };

// Static affordances live in `properties` (movable, surface, container,
// openable, fillable, pour_source, sliceable, cutter, wiper, stainable,
// toggleable, flat, drawable, marker, gratable, bin). Mutable state lives in
// `attributes` (open, sliced, clean, filled, toggled_on, stained,
// graspable_from_side, fallen, drawn, grated).
struct ObjectState {
  std::string id;
  std::string category;
  Vec3 position = Vec3::Zero();
  int orientation = 0;
  double radius = 10.0;  // planar footprint; surfaces accept placements inside it
  Relation relation = Relation::none;
  std::string parent;
  std::string location;  // mobile worlds: named place the object is at
  std::set<std::string> properties;
  std::set<std::string> attributes;

  bool has(std::string_view p) const { return properties.count(std::string(p)) > 0; }
  bool is(std::string_view a) const { return attributes.count(std::string(a)) > 0; }
};

struct WorldState {
  Robot robot = Robot::arm;
  std::map<std::string, ObjectState> objects;
  std::optional<std::string> held;
  Vec3 gripper = Vec3(180.0, 120.0, 80.0);
  std::string robot_base;
  std::map<std::string, Vec3> locations;
  SimConfig config;

  const ObjectState& object(const std::string& id) const;
  ObjectState& object(const std::string& id);
  bool contains(const std::string& id) const { return objects.count(id) > 0; }

  // Held object has no relation; relations point at existing objects and
  // are acyclic; positions finite.
  void validate() const;

  bool operator==(const WorldState& o) const;
};

struct SkillCall {
  Skill skill = Skill::Reaching;
  std::optional<Vec3> position;
  int orientation = -1;
  int axis = -1;       // Pushing: 0 +x, 1 +y, 2 press down
  int direction = -1;  // Pulling: 0 toward the robot (open), 1 away (close)
  std::string id;      // mobile skills: location or object id

  nlohmann::json to_json() const;
};

// Failure kinds the caller may need to tell apart.
enum class FailureKind { none, precondition, no_target, invalid_call };

struct SkillOutcome {
  bool ok = false;
  WorldState state;
  std::string reason;
  FailureKind failure = FailureKind::none;
  std::optional<std::string> target;  // object the call acted on
};

// Deterministic transition. Failures return the input state unchanged.
SkillOutcome apply_skill(const WorldState& state, const SkillCall& call);

// Object a position parameter snaps to: the nearest non-held object within
// the capture radius, ties to the lexicographically first id.
std::optional<std::string> snap_target(const WorldState& state, const Vec3& point);

// ---- tasks ----

// A skill option is one MI-selectable way to act on an object: the skill
// plus its categorical parameters.
struct SkillOption {
  Skill skill = Skill::Picking;
  int orientation = -1;
  int axis = -1;
  int direction = -1;
  std::string label() const;
};

struct PlanStep {
  std::string object;   // selected object (SSVEP target)
  int option = 0;       // index into the object's skill options
  std::string anchor;   // object whose position anchors the parameter
  Vec3 offset = Vec3::Zero();
  std::string location;  // mobile skills with a location parameter
};

struct TaskSpec {
  std::string name;
  Robot robot = Robot::arm;
  std::string description;
  std::vector<std::string> selectable;                        // SSVEP choices, on-screen order
  std::map<std::string, std::vector<SkillOption>> options;    // per selectable object
  std::string init_text, goal_text;
  Formula init, goal;
  std::vector<PlanStep> plan;
  int horizon = 0;
  double jitter = 0.0;  // per-episode object position jitter (px)

  const std::vector<SkillOption>& options_for(const std::string& object) const;
};

struct LoadedTask {
  TaskSpec spec;
  WorldState initial;
};

const std::vector<std::string>& task_names();
LoadedTask load_task(const std::string& name);
LoadedTask parse_task(const nlohmann::json& j);

// Initial state with object positions jittered by the task's jitter; the
// relations and attributes are unchanged.
WorldState jittered_initial(const LoadedTask& task, std::uint64_t seed);

// The concrete call a plan step denotes in `state`.
SkillCall plan_call(const TaskSpec& spec, const WorldState& state, const PlanStep& step);

// Replays the plan from `start` (index into plan). Returns the final state
// or the failure.
SkillOutcome replay_plan(const TaskSpec& spec, const WorldState& state, std::size_t start = 0);

}  // namespace noir::sim
