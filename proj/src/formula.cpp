#include "fuzzyseg/formula.hpp"

#include <json.hpp>

#include "fuzzyseg/error.hpp"

namespace fuzzyseg {

using nlohmann::ordered_json;

std::string_view op_name(Op op) {
  switch (op) {
    case Op::And: return "and";
    case Op::Or: return "or";
    case Op::Not: return "not";
    case Op::Implies: return "implies";
    case Op::ClassAtom: return "class_atom";
    case Op::EqAtom: return "eq_atom";
  }
  return "?";
}

Formula Formula::class_atom(int i, int j, int target_class) {
  if (target_class < 0) throw InputError("class atom needs a non-negative class, got " + std::to_string(target_class));
  Formula f;
  f.op_ = Op::ClassAtom;
  f.a_ = {i, j};
  f.cls_ = target_class;
  return f;
}

Formula Formula::eq_atom(Pixel a, Pixel b) {
  if (a == b) {
    throw InputError("equality atom endpoints must differ, both are (" + std::to_string(a.i) + ", " +
                     std::to_string(a.j) + ")");
  }
  Formula f;
  f.op_ = Op::EqAtom;
  f.a_ = a;
  f.b_ = b;
  return f;
}

Formula Formula::negation(Formula child) {
  Formula f;
  f.op_ = Op::Not;
  f.children_.push_back(std::move(child));
  return f;
}

Formula Formula::conjunction(std::vector<Formula> children, std::string label) {
  Formula f;
  f.op_ = Op::And;
  f.children_ = std::move(children);
  f.label_ = std::move(label);
  return f;
}

Formula Formula::disjunction(std::vector<Formula> children, std::string label) {
  if (children.empty()) throw InputError("disjunction needs at least one child");
  Formula f;
  f.op_ = Op::Or;
  f.children_ = std::move(children);
  f.label_ = std::move(label);
  return f;
}

Formula Formula::implication(Formula premise, Formula conclusion) {
  Formula f;
  f.op_ = Op::Implies;
  f.children_.reserve(2);
  f.children_.push_back(std::move(premise));
  f.children_.push_back(std::move(conclusion));
  return f;
}

std::size_t Formula::node_count() const {
  std::size_t n = 1;
  for (const auto& c : children_) n += c.node_count();
  return n;
}

namespace {

void visit_units(const Formula& f, const std::function<void(const std::string&, const Formula&)>& visit) {
  if (!f.label().empty()) {
    visit(f.label(), f);
  } else if (f.op() == Op::And) {
    for (const auto& c : f.children()) visit_units(c, visit);
  } else {
    visit(std::string(kUnlabeled), f);
  }
}

void check_pixel(Pixel p, const GridShape& shape) {
  if (!shape.contains(p.i, p.j)) {
    throw InputError("atom pixel (" + std::to_string(p.i) + ", " + std::to_string(p.j) + ") outside " +
                     std::to_string(shape.height) + "x" + std::to_string(shape.width) + " grid");
  }
}

ordered_json to_json_value(const Formula& f) {
  ordered_json j;
  j["op"] = op_name(f.op());
  j["label"] = f.label();
  if (f.op() == Op::ClassAtom) {
    j["i"] = f.pixel().i;
    j["j"] = f.pixel().j;
    j["c"] = f.target_class();
  } else if (f.op() == Op::EqAtom) {
    j["i"] = f.pixel().i;
    j["j"] = f.pixel().j;
    j["i2"] = f.other_pixel().i;
    j["j2"] = f.other_pixel().j;
  } else {
    auto& children = j["children"] = ordered_json::array();
    for (const auto& c : f.children()) children.push_back(to_json_value(c));
  }
  return j;
}

Formula from_json_value(const ordered_json& j, const std::string& where) {
  try {
    const auto op = j.at("op").get<std::string>();
    const auto label = j.contains("label") ? j.at("label").get<std::string>() : std::string{};
    if (op == "class_atom") {
      return Formula::class_atom(j.at("i").get<int>(), j.at("j").get<int>(), j.at("c").get<int>()).set_label(label);
    }
    if (op == "eq_atom") {
      return Formula::eq_atom({j.at("i").get<int>(), j.at("j").get<int>()}, {j.at("i2").get<int>(), j.at("j2").get<int>()})
          .set_label(label);
    }
    std::vector<Formula> children;
    const auto& arr = j.at("children");
    for (std::size_t k = 0; k < arr.size(); ++k) {
      children.push_back(from_json_value(arr[k], where + ".children[" + std::to_string(k) + "]"));
    }
    if (op == "and") return Formula::conjunction(std::move(children), label);
    if (op == "or") return Formula::disjunction(std::move(children), label);
    if (op == "not") {
      if (children.size() != 1) throw InputError(where + ": 'not' takes exactly one child");
      return Formula::negation(std::move(children[0])).set_label(label);
    }
    if (op == "implies") {
      if (children.size() != 2) throw InputError(where + ": 'implies' takes exactly two children");
      return Formula::implication(std::move(children[0]), std::move(children[1])).set_label(label);
    }
    throw InputError(where + ": unknown op '" + op + "'");
  } catch (const nlohmann::json::exception& e) {
    throw InputError(where + ": " + e.what());
  } catch (const InputError& e) {
    const std::string msg = e.what();
    if (msg.rfind(where, 0) == 0 || msg.rfind("$", 0) == 0) throw;
    throw InputError(where + ": " + msg);
  }
}

}  // namespace

void for_each_unit(const Formula& formula, const std::function<void(const std::string&, const Formula&)>& visit) {
  visit_units(formula, visit);
}

void check_bounds(const Formula& f, const GridShape& shape) {
  switch (f.op()) {
    case Op::ClassAtom:
      check_pixel(f.pixel(), shape);
      if (f.target_class() >= shape.classes) {
        throw InputError("class atom names class " + std::to_string(f.target_class()) + " but the grid has " +
                         std::to_string(shape.classes) + " classes");
      }
      return;
    case Op::EqAtom:
      check_pixel(f.pixel(), shape);
      check_pixel(f.other_pixel(), shape);
      return;
    default:
      for (const auto& c : f.children()) check_bounds(c, shape);
  }
}

std::string formula_to_json(const Formula& formula) { return to_json_value(formula).dump(); }

Formula formula_from_json(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("formula JSON does not parse: ") + e.what());
  }
  return from_json_value(j, "$");
}

}  // namespace fuzzyseg
