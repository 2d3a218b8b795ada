#include <doctest.h>

#include <deque>
#include <map>
#include <set>
#include <sstream>

#include "noir/bddl.hpp"
#include "noir/error.hpp"
#include "noir/sim.hpp"

using namespace noir;
using namespace noir::sim;

namespace {

WorldState small_world() {
  WorldState w;
  auto add = [&](std::string id, std::string cat, Vec3 p, std::set<std::string> props, double radius = 10.0) {
    ObjectState o;
    o.id = id;
    o.category = std::move(cat);
    o.position = p;
    o.radius = radius;
    o.properties = std::move(props);
    w.objects[id] = o;
  };
  add("cup", "cup", {100, 100, 0}, {"movable"});
  add("mug", "cup", {200, 100, 0}, {"movable"});
  add("plate", "plate", {150, 180, 0}, {"surface"}, 30);
  add("box", "box", {300, 60, 0}, {"container", "openable"}, 20);
  return w;
}

SkillCall at(Skill s, Vec3 p, int orientation = -1, int axis = -1) {
  SkillCall c;
  c.skill = s;
  c.position = p;
  c.orientation = orientation;
  c.axis = axis;
  return c;
}

// Canonical text of everything that can change, for visited sets.
std::string key(const WorldState& w) {
  std::ostringstream k;
  k.precision(6);
  k << (w.held ? *w.held : "-") << ';';
  for (const auto& [id, o] : w.objects) {
    k << id << ':' << std::fixed << o.position.x() << ',' << o.position.y() << ',' << o.position.z() << ','
      << static_cast<int>(o.relation) << o.parent << ',';
    for (const auto& a : o.attributes) k << a << ' ';
    k << ';';
  }
  return k.str();
}

struct SearchResult {
  bool reachable = false;
  bool every_goal_side_graspable = true;
  int goal_states = 0;
};

// Breadth-first search over (object, option) choices applied at the
// object's current position.
SearchResult search(const LoadedTask& task, int depth, bool allow_book_push) {
  SearchResult out;
  std::set<std::string> seen{key(task.initial)};
  std::deque<std::pair<WorldState, int>> queue{{task.initial, 0}};
  while (!queue.empty()) {
    auto [state, d] = queue.front();
    queue.pop_front();
    if (eval_goal(state, task.spec.goal)) {
      out.reachable = true;
      ++out.goal_states;
      out.every_goal_side_graspable = out.every_goal_side_graspable && state.object("book").is("graspable_from_side");
      continue;
    }
    if (d == depth) continue;
    for (const auto& obj : task.spec.selectable) {
      const auto& opts = task.spec.options_for(obj);
      for (std::size_t i = 0; i < opts.size(); ++i) {
        if (!allow_book_push && obj == "book" && opts[i].skill == Skill::Pushing) continue;
        PlanStep step{obj, static_cast<int>(i), obj, Vec3::Zero(), ""};
        auto next = apply_skill(state, plan_call(task.spec, state, step));
        if (next.ok && seen.insert(key(next.state)).second) queue.emplace_back(std::move(next.state), d + 1);
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("formulas parse and evaluate with first-order semantics") {
  auto w = small_world();
  CHECK(eval_goal(w, parse_formula("")));
  CHECK(eval_goal(w, parse_formula("(and)")));
  CHECK_FALSE(eval_goal(w, parse_formula("(or)")));
  CHECK(eval_goal(w, parse_formula("(forall (?x - cup) (not (ontop ?x plate)))")));
  CHECK_FALSE(eval_goal(w, parse_formula("(exists (?x - cup) (ontop ?x plate))")));
  CHECK_FALSE(eval_goal(w, parse_formula("(exists (?x - spoon) (not (open ?x)))")));
  CHECK(eval_goal(w, parse_formula("(forall (?x - spoon) (open ?x))")));
  CHECK(eval_goal(w, parse_formula("(forall (?x - object) (not (sliced ?x)))")));
  w.object("cup").relation = Relation::ontop;
  w.object("cup").parent = "plate";
  CHECK(eval_goal(w, parse_formula("(exists (?x - cup) (ontop ?x plate)) ; trailing comment")));
  CHECK_FALSE(eval_goal(w, parse_formula("(forall (?x - cup) (ontop ?x plate))")));
  CHECK(eval_goal(w, parse_formula("(nextto cup plate)")) == ((w.object("cup").position - w.object("plate").position).head<2>().norm() <= w.config.nextto_radius));
}

TEST_CASE("malformed formulas report what is wrong") {
  CHECK_THROWS_WITH_AS(parse_formula("(floating cup)"), doctest::Contains("unknown predicate"), Error);
  CHECK_THROWS_WITH_AS(parse_formula("(ontop cup)"), doctest::Contains("takes 2"), Error);
  CHECK_THROWS_WITH_AS(parse_formula("(and (open box)"), doctest::Contains("unbalanced"), Error);
  CHECK_THROWS_WITH_AS(parse_formula("(open box) (open box)"), doctest::Contains("trailing"), Error);
  CHECK_THROWS_AS(parse_formula("(not (open box) (open box))"), Error);
  const auto w = small_world();
  CHECK_THROWS_WITH_AS(check_references(w, parse_formula("(open lid)")), doctest::Contains("unknown object"), Error);
  CHECK_THROWS_WITH_AS(eval_goal(w, parse_formula("(open ?y)")), doctest::Contains("unbound"), Error);
  CHECK(parse_formula(to_string(parse_formula("(and (open box) (not (clean cup)))"))).children.size() == 2);
}

TEST_CASE("pick and place move objects and track relations") {
  auto w = small_world();
  auto r = apply_skill(w, at(Skill::Picking, {102, 99, 0}, 0));
  REQUIRE(r.ok);
  CHECK(r.state.held == std::optional<std::string>("cup"));
  CHECK(r.target == std::optional<std::string>("cup"));
  r = apply_skill(r.state, at(Skill::Placing, {150, 180, 0}, 0));
  REQUIRE(r.ok);
  const auto& cup = r.state.object("cup");
  CHECK(cup.relation == Relation::ontop);
  CHECK(cup.parent == "plate");
  CHECK_FALSE(r.state.held.has_value());
  CHECK_NOTHROW(r.state.validate());
  CHECK(eval_goal(r.state, parse_formula("(ontop cup plate)")));
}

TEST_CASE("failed skills leave the state untouched") {
  const auto w = small_world();
  const std::vector<SkillCall> bad{
      at(Skill::Placing, {150, 180, 0}, 0),  // nothing held
      at(Skill::Picking, {150, 180, 0}, 0),  // plate is not movable
      at(Skill::Picking, {10, 10, 0}, 0),    // nothing there
      at(Skill::Picking, {100, 100, 0}, 9),  // orientation out of range
      at(Skill::Wiping, {200, 100, 0}),      // no wiper held
      at(Skill::Navigating, {0, 0, 0}),      // not an arm skill
  };
  for (const auto& c : bad) {
    const auto r = apply_skill(w, c);
    CHECK_FALSE(r.ok);
    CHECK_FALSE(r.reason.empty());
    CHECK(r.state == w);
  }
  CHECK(apply_skill(w, bad[3]).failure == FailureKind::invalid_call);
  CHECK(apply_skill(w, bad[2]).failure == FailureKind::no_target);
}

TEST_CASE("skill application is deterministic") {
  const auto w = small_world();
  const auto call = at(Skill::Pushing, {100, 100, 0}, -1, 0);
  const auto a = apply_skill(w, call), b = apply_skill(w, call);
  REQUIRE(a.ok);
  CHECK(a.state == b.state);
  CHECK(a.state.object("cup").position.x() == doctest::Approx(100 + w.config.push_distance));
}

TEST_CASE("snapping prefers the nearest object and breaks ties by id") {
  auto w = small_world();
  CHECK(snap_target(w, {104, 100, 0}) == std::optional<std::string>("cup"));
  CHECK_FALSE(snap_target(w, {150, 30, 0}).has_value());
  w.object("mug").position = {110, 100, 0};
  CHECK(snap_target(w, {105, 100, 0}) == std::optional<std::string>("cup"));
}

TEST_CASE("closed containers refuse placements until pulled open") {
  auto w = small_world();
  auto r = apply_skill(w, at(Skill::Picking, {100, 100, 0}, 0));
  REQUIRE(r.ok);
  CHECK_FALSE(apply_skill(r.state, at(Skill::Placing, {300, 60, 0}, 0)).ok);
  r = apply_skill(r.state, at(Skill::Placing, {200, 150, 0}, 0));  // put it down on the table
  REQUIRE(r.ok);
  SkillCall pull = at(Skill::Pulling, {300, 60, 0}, 0);
  pull.direction = 0;
  r = apply_skill(r.state, pull);
  REQUIRE(r.ok);
  CHECK(r.state.object("box").is("open"));
  r = apply_skill(r.state, at(Skill::Picking, {200, 150, 0}, 0));
  REQUIRE(r.ok);
  r = apply_skill(r.state, at(Skill::Placing, {300, 60, 0}, 0));
  REQUIRE(r.ok);
  CHECK(eval_goal(r.state, parse_formula("(inside cup box)")));
}

TEST_CASE("every built-in task replays its plan to the goal") {
  CHECK(task_names().size() == 6);
  for (const auto& name : task_names()) {
    CAPTURE(name);
    const auto t = load_task(name);
    CHECK(static_cast<int>(t.spec.plan.size()) == t.spec.horizon);
    CHECK(eval_goal(t.initial, t.spec.init));
    CHECK_FALSE(eval_goal(t.initial, t.spec.goal));
    const auto r = replay_plan(t.spec, t.initial);
    CHECK_MESSAGE(r.ok, r.reason);
    for (std::uint64_t s = 0; s < 20; ++s) CHECK(replay_plan(t.spec, jittered_initial(t, s)).ok);
  }
  CHECK_THROWS_WITH_AS(load_task("Juggle"), doctest::Contains("unknown task"), Error);
}

TEST_CASE("jitter keeps relations and moves children with their parents") {
  const auto t = load_task("CutBanana");
  const auto a = jittered_initial(t, 1);
  CHECK(a == jittered_initial(t, 1));
  const auto& board = a.object("cutting_board");
  const auto& banana = a.object("banana");
  CHECK(banana.parent == "cutting_board");
  CHECK((banana.position - board.position).isApprox(t.initial.object("banana").position - t.initial.object("cutting_board").position));
}

TEST_CASE("task files are validated") {
  auto j = nlohmann::json::parse(R"js({"name": "T", "robot": "arm", "horizon": 1,
    "objects": [{"id": "a", "category": "a", "position": [10, 10, 0], "properties": ["movable"]}],
    "init": "(and)", "goal": "(not (open a))", "selectable": ["a"],
    "options": {"a": [{"skill": "Picking", "orientation": 0}]},
    "plan": [{"object": "a", "option": 0, "anchor": "a"}]})js");
  CHECK_NOTHROW(parse_task(j));
  auto bad = j;
  bad["horizon"] = 2;
  CHECK_THROWS_AS(parse_task(bad), Error);
  bad = j;
  bad["goal"] = "(open b)";
  CHECK_THROWS_AS(parse_task(bad), Error);
  bad = j;
  bad["options"]["a"][0]["orientation"] = 7;
  CHECK_THROWS_AS(parse_task(bad), Error);
  bad = j;
  bad["init"] = "(open a)";
  CHECK_THROWS_AS(parse_task(bad), Error);
}

TEST_CASE("the shelved book is only reachable by pushing it to the table edge") {
  const auto t = load_task("CleanBook");
  const auto with_push = search(t, 8, true);
  CHECK(with_push.reachable);
  CHECK(with_push.every_goal_side_graspable);
  CHECK_FALSE(search(t, 8, false).reachable);
}

TEST_CASE("mobile skills act at the robot's location") {
  const auto t = load_task("TrashDisposal");
  SkillCall pick;
  pick.skill = Skill::Picking;
  pick.id = "can";
  CHECK_FALSE(apply_skill(t.initial, pick).ok);
  SkillCall nav;
  nav.skill = Skill::Navigating;
  nav.id = "kitchen";
  auto r = apply_skill(t.initial, nav);
  REQUIRE(r.ok);
  CHECK(r.state.robot_base == "kitchen");
  CHECK(apply_skill(r.state, pick).ok);
  nav.id = "attic";
  CHECK_FALSE(apply_skill(t.initial, nav).ok);
}
