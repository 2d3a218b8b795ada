#include "noir/bddl.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "noir/error.hpp"
#include "noir/sim.hpp"

namespace noir::sim {

namespace {

struct Sexp {
  std::string atom;
  std::vector<Sexp> items;
  bool is_list = false;
};

class Reader {
 public:
  explicit Reader(const std::string& text) : s_(text) {}

  Sexp read() {
    skip();
    require(pos_ < s_.size(), "unexpected end of formula");
    if (s_[pos_] == '(') {
      ++pos_;
      Sexp list;
      list.is_list = true;
      for (;;) {
        skip();
        require(pos_ < s_.size(), "unbalanced parentheses in formula");
        if (s_[pos_] == ')') {
          ++pos_;
          return list;
        }
        list.items.push_back(read());
      }
    }
    require(s_[pos_] != ')', "unexpected ')' in formula");
    const auto start = pos_;
    while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_])) && s_[pos_] != '(' &&
           s_[pos_] != ')')
      ++pos_;
    Sexp a;
    a.atom = s_.substr(start, pos_ - start);
    return a;
  }

  bool done() {
    skip();
    return pos_ >= s_.size();
  }

 private:
  void skip() {
    while (pos_ < s_.size()) {
      if (std::isspace(static_cast<unsigned char>(s_[pos_]))) {
        ++pos_;
      } else if (s_[pos_] == ';') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

int arity(const std::string& p) {
  static const std::map<std::string, int> table{{"ontop", 2}, {"inside", 2}, {"nextto", 2}, {"at", 2},
                                                {"open", 1},  {"sliced", 1}, {"clean", 1},  {"filled", 1},
                                                {"toggled_on", 1}};
  const auto it = table.find(p);
  require(it != table.end(), "unknown predicate '" + p + "'");
  return it->second;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

Formula convert(const Sexp& e) {
  require(e.is_list && !e.items.empty() && !e.items.front().is_list, "formula must be a non-empty list");
  const std::string head = lower(e.items.front().atom);
  Formula f;
  if (head == "and" || head == "or") {
    f.kind = head == "and" ? Formula::Kind::conjunction : Formula::Kind::disjunction;
    for (std::size_t i = 1; i < e.items.size(); ++i) f.children.push_back(convert(e.items[i]));
    return f;
  }
  if (head == "not") {
    require(e.items.size() == 2, "not takes exactly one formula");
    f.kind = Formula::Kind::negation;
    f.children.push_back(convert(e.items[1]));
    return f;
  }
  if (head == "forall" || head == "exists") {
    require(e.items.size() == 3 && e.items[1].is_list && e.items[1].items.size() == 3,
            head + " expects (" + head + " (?x - category) formula)");
    const auto& decl = e.items[1].items;
    require(!decl[0].is_list && decl[0].atom.size() > 1 && decl[0].atom[0] == '?', "quantified variable must start with '?'");
    require(!decl[1].is_list && decl[1].atom == "-", "expected '-' in variable declaration");
    require(!decl[2].is_list, "category must be a name");
    f.kind = head == "forall" ? Formula::Kind::forall : Formula::Kind::exists;
    f.variable = decl[0].atom;
    f.category = decl[2].atom;
    f.children.push_back(convert(e.items[2]));
    return f;
  }
  f.kind = Formula::Kind::atom;
  f.predicate = head;
  const int n = arity(head);
  require(static_cast<int>(e.items.size()) - 1 == n,
          "predicate '" + head + "' takes " + std::to_string(n) + " argument(s)");
  for (std::size_t i = 1; i < e.items.size(); ++i) {
    require(!e.items[i].is_list, "predicate arguments must be names");
    f.args.push_back(e.items[i].atom);
  }
  return f;
}

using Bindings = std::map<std::string, std::string>;

const std::string& resolve(const std::string& arg, const Bindings& b) {
  if (!arg.empty() && arg[0] == '?') {
    const auto it = b.find(arg);
    require(it != b.end(), "unbound variable '" + arg + "'");
    return it->second;
  }
  return arg;
}

const ObjectState& lookup(const WorldState& s, const std::string& id) {
  const auto it = s.objects.find(id);
  require(it != s.objects.end(), "unknown object '" + id + "'");
  return it->second;
}

bool eval_atom(const WorldState& s, const Formula& f, const Bindings& b) {
  const auto& p = f.predicate;
  const auto& a0 = resolve(f.args[0], b);
  if (p == "at") {
    const auto& loc = resolve(f.args[1], b);
    if (a0 == "robot") return s.robot_base == loc;
    return lookup(s, a0).location == loc && s.held != a0;
  }
  const auto& o = lookup(s, a0);
  if (f.args.size() == 1) return o.is(p);
  const auto& a1 = resolve(f.args[1], b);
  const auto& other = lookup(s, a1);
  if (p == "ontop") return o.relation == Relation::ontop && o.parent == other.id;
  if (p == "inside") return o.relation == Relation::inside && o.parent == other.id;
  // nextto: both resting, planar distance within the configured radius.
  if (a0 == a1 || s.held == a0 || s.held == a1) return false;
  const double d = std::hypot(o.position.x() - other.position.x(), o.position.y() - other.position.y());
  return d <= s.config.nextto_radius;
}

bool eval(const WorldState& s, const Formula& f, Bindings& b) {
  switch (f.kind) {
    case Formula::Kind::conjunction:
      return std::all_of(f.children.begin(), f.children.end(), [&](const Formula& c) { return eval(s, c, b); });
    case Formula::Kind::disjunction:
      return std::any_of(f.children.begin(), f.children.end(), [&](const Formula& c) { return eval(s, c, b); });
    case Formula::Kind::negation:
      return !eval(s, f.children.front(), b);
    case Formula::Kind::forall:
    case Formula::Kind::exists: {
      const bool universal = f.kind == Formula::Kind::forall;
      const auto saved = b.find(f.variable) != b.end() ? std::optional<std::string>(b[f.variable]) : std::nullopt;
      bool result = universal;
      for (const auto& [id, obj] : s.objects) {
        if (f.category != "object" && obj.category != f.category) continue;
        b[f.variable] = id;
        const bool v = eval(s, f.children.front(), b);
        if (universal && !v) {
          result = false;
          break;
        }
        if (!universal && v) {
          result = true;
          break;
        }
      }
      if (saved) {
        b[f.variable] = *saved;
      } else {
        b.erase(f.variable);
      }
      return result;
    }
    case Formula::Kind::atom:
      return eval_atom(s, f, b);
  }
  return false;
}

void check(const WorldState& s, const Formula& f, std::vector<std::string>& bound) {
  switch (f.kind) {
    case Formula::Kind::forall:
    case Formula::Kind::exists:
      bound.push_back(f.variable);
      check(s, f.children.front(), bound);
      bound.pop_back();
      return;
    case Formula::Kind::atom:
      for (std::size_t i = 0; i < f.args.size(); ++i) {
        const auto& a = f.args[i];
        if (!a.empty() && a[0] == '?') {
          require(std::find(bound.begin(), bound.end(), a) != bound.end(), "unbound variable '" + a + "'");
          continue;
        }
        if (f.predicate == "at") {
          if (i == 0 && a == "robot") continue;
          if (i == 1) {
            require(s.locations.count(a) > 0, "unknown location '" + a + "'");
            continue;
          }
        }
        require(s.contains(a), "unknown object '" + a + "'");
      }
      return;
    default:
      for (const auto& c : f.children) check(s, c, bound);
  }
}

}  // namespace

const std::vector<std::string>& known_predicates() {
  static const std::vector<std::string> p{"ontop", "inside", "nextto", "at", "open",
                                          "sliced", "clean", "filled", "toggled_on"};
  return p;
}

Formula parse_formula(const std::string& text) {
  Reader r(text);
  if (r.done()) return Formula{};  // empty text: empty conjunction
  const Sexp e = r.read();
  require(r.done(), "trailing text after formula");
  return convert(e);
}

std::string to_string(const Formula& f) {
  std::string out = "(";
  switch (f.kind) {
    case Formula::Kind::conjunction: out += "and"; break;
    case Formula::Kind::disjunction: out += "or"; break;
    case Formula::Kind::negation: out += "not"; break;
    case Formula::Kind::forall: out += "forall (" + f.variable + " - " + f.category + ")"; break;
    case Formula::Kind::exists: out += "exists (" + f.variable + " - " + f.category + ")"; break;
    case Formula::Kind::atom:
      out += f.predicate;
      for (const auto& a : f.args) out += " " + a;
      return out + ")";
  }
  for (const auto& c : f.children) out += " " + to_string(c);
  return out + ")";
}

bool eval_goal(const WorldState& state, const Formula& goal) {
  Bindings b;
  return eval(state, goal, b);
}

void check_references(const WorldState& state, const Formula& f) {
  std::vector<std::string> bound;
  check(state, f, bound);
}

}  // namespace noir::sim
