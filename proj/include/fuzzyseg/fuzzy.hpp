#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fuzzyseg/formula.hpp"
#include "fuzzyseg/grid.hpp"

namespace fuzzyseg {

struct EvalResult {
  double log_prob = 0.0;
  /// Summed log-probability of every constraint unit sharing a label.
  std::map<std::string, double> per_label_log_prob;
};

/// Multiplier per constraint label; labels not present weigh 1.
using LossWeights = std::map<std::string, double>;

struct LossAndGrad {
  double loss = 0.0;
  std::map<std::string, double> per_constraint;
  GradField grad;
};

/// A formula lowered to a flat post-order program for repeated evaluation on
/// one grid shape. Implications are rewritten as (not A) or B and identical
/// equality atoms share one slot. Immutable after construction; every
/// evaluation method is const and may run concurrently.
///
/// Semantics (product t-norm, log-space):
///   Y=c        -> log p(c)
///   Y1=Y2      -> log sum_c p1(c) p2(c)
///   not A      -> log(1 - e^A)
///   and        -> sum of children
///   or         -> log(1 - prod(1 - e^child))
/// Any log taken of a probability is floored at log(1e-12); floored terms
/// contribute no gradient.
class CompiledFormula {
 public:
  CompiledFormula(const Formula& formula, GridShape shape);

  const GridShape& shape() const { return shape_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t eq_slot_count() const { return eq_slots_.size(); }
  /// Distinct constraint labels, in first-appearance order.
  const std::vector<std::string>& labels() const { return labels_; }

  /// Fuzzy log-probability under a probability field.
  EvalResult evaluate(const ProbField& probs) const;
  /// Fuzzy log-probability under softmax(logits); class atoms use the exact
  /// log-softmax rather than a floored log of the probability.
  EvalResult evaluate(const LogitField& logits) const;

  /// Semantic loss and its gradient with respect to the logits. Without
  /// weights the loss is -log p(formula); with weights it is the weighted sum
  /// of per-constraint losses.
  LossAndGrad loss_and_grad(const LogitField& logits, const LossWeights* weights = nullptr) const;

  /// Reusable scratch buffers for the hot path.
  struct Workspace {
    std::vector<double> log_probs;
    std::vector<double> probs;
    std::vector<double> node_values;
    std::vector<double> edge_values;
    std::vector<double> eq_sums;
    std::vector<double> node_adjoints;
    std::vector<double> eq_adjoints;
    std::vector<double> log_prob_adjoints;
  };

  /// Allocation-free variant of loss_and_grad: `grad` must already have the
  /// logits' shape; `per_constraint` is overwritten.
  double loss_and_grad(const LogitField& logits, const LossWeights* weights, Workspace& ws, GradField& grad,
                       std::map<std::string, double>& per_constraint) const;

 private:
  enum class Kind : std::uint8_t { ClassAtom, EqAtom, And, Or, Not };
  struct Node {
    Kind kind;
    std::uint32_t a;  // class atom: table offset; eq atom: slot; not: child; and/or: first edge
    std::uint32_t b;  // and/or: one past the last edge
  };
  struct EqSlot {
    std::uint32_t p;
    std::uint32_t q;
  };
  struct Unit {
    std::uint32_t node;
    std::uint32_t label;
  };

  std::uint32_t compile(const Formula& f, bool on_spine);
  std::uint32_t label_id(const std::string& label);
  void forward(Workspace& ws) const;
  void backward(Workspace& ws, const std::vector<double>& unit_seeds, double root_seed) const;
  EvalResult collect(const Workspace& ws) const;

  GridShape shape_;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> edges_;
  std::vector<EqSlot> eq_slots_;
  std::vector<Unit> units_;
  std::vector<std::string> labels_;
  std::unordered_map<std::uint64_t, std::uint32_t> eq_index_;  // only used while compiling
};

/// Fuzzy log p(formula | probs) under product t-norm semantics.
EvalResult eval_fuzzy(const Formula& formula, const ProbField& probs);

struct SemanticLoss {
  double loss = 0.0;
  std::map<std::string, double> per_constraint;
};

/// -log p_fuzzy(formula | softmax(logits)), plus the loss of each labeled constraint.
SemanticLoss semantic_loss(const Formula& formula, const LogitField& logits);

/// Exact gradient of semantic_loss with respect to every logit.
GradField grad_semantic_loss(const Formula& formula, const LogitField& logits);

/// Standard propositional satisfaction of the formula by a label map.
bool eval_discrete(const Formula& formula, const LabelGrid& labels);

/// eval_discrete without the bounds check, for callers that evaluate the same
/// formula many times after checking it once.
bool eval_discrete_unchecked(const Formula& formula, const LabelGrid& labels);

/// Satisfaction of each labeled constraint (a label is satisfied when all of
/// its units are).
std::map<std::string, bool> eval_discrete_by_label(const Formula& formula, const LabelGrid& labels);

/// -log((alpha - beta) p_fuzzy(formula) + beta). Requires 0 <= beta < alpha <= 1.
double calibrated_loss(const Formula& formula, const LogitField& logits, double alpha, double beta);

struct Calibration {
  double alpha = 1.0;
  double beta = 0.0;
};

/// Sum over constraint labels of the calibrated loss of that label's
/// probability; labels without an entry use (alpha, beta) = (1, 0).
double calibrated_loss(const Formula& formula, const LogitField& logits, const std::map<std::string, Calibration>& calibration);

struct AlphaBetaEstimate {
  std::optional<double> alpha;  ///< unavailable when no sample satisfied the formula
  std::optional<double> beta;   ///< unavailable when every sample satisfied it
  double alpha_stderr = 0.0;
  double beta_stderr = 0.0;
  std::size_t satisfied_samples = 0;
  std::size_t violated_samples = 0;
};

/// Monte-Carlo estimate of alpha = p(y* | formula true) and beta =
/// p(y* | formula false): label maps are sampled from each model field,
/// split by whether they satisfy the formula, and checked for exact agreement
/// with the matching ground truth. Counts are pooled across images.
AlphaBetaEstimate estimate_alpha_beta(const Formula& formula, std::span<const LabelGrid> gt_maps,
                                      std::span<const ProbField> model_fields, std::size_t samples_per_image = 10000,
                                      std::uint64_t seed = 0);

struct LossReport {
  double total_loss = 0.0;
  std::map<std::string, double> per_constraint;
  std::map<std::string, bool> satisfied;
};

/// Losses of softmax(logits) plus discrete satisfaction of its argmax mask.
LossReport make_loss_report(const Formula& formula, const LogitField& logits);
std::string loss_report_json(const LossReport& report);

}  // namespace fuzzyseg
