#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fuzzyseg/grid.hpp"

namespace fuzzyseg {

struct Pixel {
  int i = 0;
  int j = 0;

  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

enum class Op : std::uint8_t { And, Or, Not, Implies, ClassAtom, EqAtom };

std::string_view op_name(Op op);

/// Propositional formula over pixel atoms.
///
/// Atoms are either `Y[i,j] = c` (class atoms) or `Y[i1,j1] = Y[i2,j2]`
/// (equality atoms). Composite nodes carry an optional constraint-family
/// label; unlabeled nodes belong to the nearest labeled ancestor. An empty
/// conjunction is the constant true; an empty disjunction cannot be built.
class Formula {
 public:
  /// The constant true (empty conjunction).
  Formula() = default;

  static Formula class_atom(int i, int j, int target_class);
  static Formula eq_atom(Pixel a, Pixel b);
  static Formula negation(Formula child);
  static Formula conjunction(std::vector<Formula> children, std::string label = {});
  static Formula disjunction(std::vector<Formula> children, std::string label = {});
  static Formula implication(Formula premise, Formula conclusion);

  Op op() const { return op_; }
  bool is_atom() const { return op_ == Op::ClassAtom || op_ == Op::EqAtom; }
  const std::string& label() const { return label_; }
  Formula& set_label(std::string label) {
    label_ = std::move(label);
    return *this;
  }

  std::span<const Formula> children() const { return children_; }

  /// First pixel of an atom.
  Pixel pixel() const { return a_; }
  /// Second pixel of an equality atom.
  Pixel other_pixel() const { return b_; }
  /// Target class of a class atom.
  int target_class() const { return cls_; }

  /// Total number of nodes in the tree.
  std::size_t node_count() const;

  friend bool operator==(const Formula&, const Formula&) = default;

 private:
  Op op_ = Op::And;
  std::string label_;
  std::vector<Formula> children_;
  Pixel a_{};
  Pixel b_{};
  int cls_ = 0;
};

/// Label given to top-level pieces of a formula that carry no family label.
inline constexpr std::string_view kUnlabeled = "formula";

/// Visits the labeled constraint units of a formula: descends through
/// unlabeled conjunctions starting at the root and reports every other node
/// with its label (or kUnlabeled).
void for_each_unit(const Formula& formula, const std::function<void(const std::string&, const Formula&)>& visit);

/// Throws InputError if any atom lies outside the grid or names a class
/// >= shape.classes.
void check_bounds(const Formula& formula, const GridShape& shape);

/// JSON form: {"op":..., "label":..., "children":[...], "i":..,"j":..,"c":..,"i2":..,"j2":..}.
/// Atom fields appear only on atoms, "children" only on composite nodes.
std::string formula_to_json(const Formula& formula);
Formula formula_from_json(std::string_view text);

}  // namespace fuzzyseg
