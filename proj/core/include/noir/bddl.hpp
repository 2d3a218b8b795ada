#pragma once

#include <memory>
#include <string>
#include <vector>

namespace noir::sim {

struct WorldState;

// BDDL-lite: s-expression formulas over ground predicates.
//   (and f...) (or f...) (not f)
//   (forall (?x - category) f) (exists (?x - category) f)
//   (ontop a b) (inside a b) (nextto a b) (at a location)
//   (open a) (sliced a) (clean a) (filled a) (toggled_on a)
// Quantifiers range over rostered objects of the category; the category
// "object" matches every object.
struct Formula {
  enum class Kind { conjunction, disjunction, negation, forall, exists, atom };
  Kind kind = Kind::conjunction;
  std::string predicate;              // atom
  std::vector<std::string> args;      // atom arguments; variables start with '?'
  std::string variable, category;     // quantifiers
  std::vector<Formula> children;
};

Formula parse_formula(const std::string& text);
std::string to_string(const Formula& f);

bool eval_goal(const WorldState& state, const Formula& goal);

// Ground atoms whose object arguments must exist, for roster validation.
void check_references(const WorldState& state, const Formula& f);

const std::vector<std::string>& known_predicates();

}  // namespace noir::sim
