#include "fuzzyseg/fuzzy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <unordered_map>

#include <json.hpp>

#include "fuzzyseg/error.hpp"

namespace fuzzyseg {

namespace {

const double kLogFloor = std::log(kProbFloor);

// log(1 - e^x) without argument checks; x >= 0 maps to -inf.
inline double log1mexp_raw(double x) {
  if (x >= 0.0) return kNegInf;
  if (x > -std::numbers::ln2) return std::log(-std::expm1(x));
  return std::log1p(-std::exp(x));
}

inline double logaddexp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

bool discrete(const Formula& f, const LabelGrid& y) {
  switch (f.op()) {
    case Op::ClassAtom: return y(f.pixel().i, f.pixel().j) == f.target_class();
    case Op::EqAtom: return y(f.pixel().i, f.pixel().j) == y(f.other_pixel().i, f.other_pixel().j);
    case Op::Not: return !discrete(f.children()[0], y);
    case Op::And:
      for (const auto& c : f.children()) {
        if (!discrete(c, y)) return false;
      }
      return true;
    case Op::Or:
      for (const auto& c : f.children()) {
        if (discrete(c, y)) return true;
      }
      return false;
    case Op::Implies: return !discrete(f.children()[0], y) || discrete(f.children()[1], y);
  }
  return false;
}

void check_pixels(const Formula& f, const LabelGrid& y) {
  // Class indices are not bounded here: a label map only knows its own values.
  check_bounds(f, GridShape{y.height(), y.width(), std::numeric_limits<int>::max()});
}

}  // namespace

CompiledFormula::CompiledFormula(const Formula& formula, GridShape shape) : shape_(shape) {
  validate_shape(shape_, 1);
  if (shape_.size() > std::numeric_limits<std::uint32_t>::max()) throw InputError("grid too large to compile");
  compile(formula, true);
  eq_index_.clear();
}

std::uint32_t CompiledFormula::label_id(const std::string& label) {
  const auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it != labels_.end()) return static_cast<std::uint32_t>(it - labels_.begin());
  labels_.push_back(label);
  return static_cast<std::uint32_t>(labels_.size() - 1);
}

std::uint32_t CompiledFormula::compile(const Formula& f, bool on_spine) {
  std::optional<std::uint32_t> unit_label;
  bool child_spine = false;
  if (on_spine) {
    if (!f.label().empty()) {
      unit_label = label_id(f.label());
    } else if (f.op() == Op::And) {
      child_spine = true;
    } else {
      unit_label = label_id(std::string(kUnlabeled));
    }
  }

  Node node{Kind::And, 0, 0};
  switch (f.op()) {
    case Op::ClassAtom: {
      const auto p = f.pixel();
      if (!shape_.contains(p.i, p.j) || f.target_class() >= shape_.classes) check_bounds(f, shape_);
      node = {Kind::ClassAtom,
              static_cast<std::uint32_t>(shape_.pixel_index(p.i, p.j) * static_cast<std::size_t>(shape_.classes) +
                                         static_cast<std::size_t>(f.target_class())),
              0};
      break;
    }
    case Op::EqAtom: {
      check_bounds(f, shape_);
      auto p = static_cast<std::uint32_t>(shape_.pixel_index(f.pixel().i, f.pixel().j));
      auto q = static_cast<std::uint32_t>(shape_.pixel_index(f.other_pixel().i, f.other_pixel().j));
      if (p > q) std::swap(p, q);
      const std::uint64_t key = (static_cast<std::uint64_t>(p) << 32) | q;
      auto it = eq_index_.find(key);
      std::uint32_t slot;
      if (it == eq_index_.end()) {
        slot = static_cast<std::uint32_t>(eq_slots_.size());
        eq_slots_.push_back({p, q});
        eq_index_.emplace(key, slot);
      } else {
        slot = it->second;
      }
      node = {Kind::EqAtom, slot, 0};
      break;
    }
    case Op::Not: {
      const auto child = compile(f.children()[0], false);
      node = {Kind::Not, child, 0};
      break;
    }
    case Op::And:
    case Op::Or: {
      std::vector<std::uint32_t> ids;
      ids.reserve(f.children().size());
      for (const auto& c : f.children()) ids.push_back(compile(c, child_spine));
      const auto first = static_cast<std::uint32_t>(edges_.size());
      edges_.insert(edges_.end(), ids.begin(), ids.end());
      node = {f.op() == Op::And ? Kind::And : Kind::Or, first, static_cast<std::uint32_t>(edges_.size())};
      break;
    }
    case Op::Implies: {
      const auto premise = compile(f.children()[0], false);
      nodes_.push_back({Kind::Not, premise, 0});
      const auto negated = static_cast<std::uint32_t>(nodes_.size() - 1);
      const auto conclusion = compile(f.children()[1], false);
      const auto first = static_cast<std::uint32_t>(edges_.size());
      edges_.push_back(negated);
      edges_.push_back(conclusion);
      node = {Kind::Or, first, static_cast<std::uint32_t>(edges_.size())};
      break;
    }
  }
  nodes_.push_back(node);
  const auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
  if (unit_label) units_.push_back({id, *unit_label});
  return id;
}

void CompiledFormula::forward(Workspace& ws) const {
  const auto c = static_cast<std::size_t>(shape_.classes);
  ws.eq_sums.resize(eq_slots_.size());
  for (std::size_t k = 0; k < eq_slots_.size(); ++k) {
    const double* pp = ws.probs.data() + eq_slots_[k].p * c;
    const double* pq = ws.probs.data() + eq_slots_[k].q * c;
    double s = 0.0;
    for (std::size_t x = 0; x < c; ++x) s += pp[x] * pq[x];
    ws.eq_sums[k] = s;
  }

  ws.node_values.resize(nodes_.size());
  ws.edge_values.resize(edges_.size());
  double* val = ws.node_values.data();
  for (std::size_t n = 0; n < nodes_.size(); ++n) {
    const Node& node = nodes_[n];
    switch (node.kind) {
      case Kind::ClassAtom: val[n] = ws.log_probs[node.a]; break;
      case Kind::EqAtom: val[n] = std::min(std::log(std::max(ws.eq_sums[node.a], kProbFloor)), 0.0); break;
      case Kind::And: {
        double s = 0.0;
        for (std::uint32_t e = node.a; e < node.b; ++e) s += val[edges_[e]];
        val[n] = s;
        break;
      }
      case Kind::Not: val[n] = std::max(log1mexp_raw(val[node.a]), kLogFloor); break;
      case Kind::Or: {
        double s = 0.0;
        for (std::uint32_t e = node.a; e < node.b; ++e) {
          const double m = log1mexp_raw(val[edges_[e]]);
          ws.edge_values[e] = m;
          s += std::max(m, kLogFloor);
        }
        val[n] = std::max(log1mexp_raw(s), kLogFloor);
        break;
      }
    }
  }
}

void CompiledFormula::backward(Workspace& ws, const std::vector<double>& unit_seeds, double root_seed) const {
  const auto c = static_cast<std::size_t>(shape_.classes);
  ws.node_adjoints.assign(nodes_.size(), 0.0);
  ws.eq_adjoints.assign(eq_slots_.size(), 0.0);
  ws.log_prob_adjoints.assign(ws.log_probs.size(), 0.0);
  double* adj = ws.node_adjoints.data();
  const double* val = ws.node_values.data();
  if (!nodes_.empty()) adj[nodes_.size() - 1] += root_seed;
  for (std::size_t u = 0; u < units_.size(); ++u) adj[units_[u].node] += unit_seeds[u];

  for (std::size_t n = nodes_.size(); n-- > 0;) {
    const double a = adj[n];
    if (a == 0.0) continue;
    const Node& node = nodes_[n];
    switch (node.kind) {
      case Kind::ClassAtom: ws.log_prob_adjoints[node.a] += a; break;
      case Kind::EqAtom: ws.eq_adjoints[node.a] += a; break;
      case Kind::And:
        for (std::uint32_t e = node.a; e < node.b; ++e) adj[edges_[e]] += a;
        break;
      case Kind::Not: {
        const double child = val[node.a];
        const double raw = log1mexp_raw(child);
        if (raw >= kLogFloor) adj[node.a] -= a * std::exp(child - raw);
        break;
      }
      case Kind::Or: {
        double s = 0.0;
        for (std::uint32_t e = node.a; e < node.b; ++e) s += std::max(ws.edge_values[e], kLogFloor);
        const double raw = log1mexp_raw(s);
        if (raw < kLogFloor) break;
        const double ds = -a * std::exp(s - raw);
        for (std::uint32_t e = node.a; e < node.b; ++e) {
          const double m = ws.edge_values[e];
          if (m >= kLogFloor) adj[edges_[e]] -= ds * std::exp(val[edges_[e]] - m);
        }
        break;
      }
    }
  }

  for (std::size_t k = 0; k < eq_slots_.size(); ++k) {
    const double a = ws.eq_adjoints[k];
    const double s = ws.eq_sums[k];
    if (a == 0.0 || s < kProbFloor) continue;
    const std::size_t op = eq_slots_[k].p * c;
    const std::size_t oq = eq_slots_[k].q * c;
    const double scale = a / s;
    for (std::size_t x = 0; x < c; ++x) {
      const double t = scale * ws.probs[op + x] * ws.probs[oq + x];
      ws.log_prob_adjoints[op + x] += t;
      ws.log_prob_adjoints[oq + x] += t;
    }
  }
}

EvalResult CompiledFormula::collect(const Workspace& ws) const {
  EvalResult r;
  r.log_prob = ws.node_values.back();
  for (const auto& u : units_) r.per_label_log_prob[labels_[u.label]] += ws.node_values[u.node];
  return r;
}

EvalResult CompiledFormula::evaluate(const ProbField& probs) const {
  if (probs.shape() != shape_) throw InputError("probability field shape does not match the compiled formula");
  Workspace ws;
  ws.probs.assign(probs.values().begin(), probs.values().end());
  ws.log_probs.resize(ws.probs.size());
  for (std::size_t k = 0; k < ws.probs.size(); ++k) ws.log_probs[k] = clamp_log(ws.probs[k]);
  forward(ws);
  return collect(ws);
}

EvalResult CompiledFormula::evaluate(const LogitField& logits) const {
  if (logits.shape() != shape_) throw InputError("logit field shape does not match the compiled formula");
  check_finite(logits);
  Workspace ws;
  ws.log_probs.resize(shape_.size());
  log_softmax_field(logits, ws.log_probs);
  ws.probs.resize(shape_.size());
  for (std::size_t k = 0; k < ws.probs.size(); ++k) ws.probs[k] = std::exp(ws.log_probs[k]);
  forward(ws);
  return collect(ws);
}

double CompiledFormula::loss_and_grad(const LogitField& logits, const LossWeights* weights, Workspace& ws,
                                      GradField& grad, std::map<std::string, double>& per_constraint) const {
  if (logits.shape() != shape_) throw InputError("logit field shape does not match the compiled formula");
  if (grad.shape() != shape_) grad = GradField(shape_);
  ws.log_probs.resize(shape_.size());
  log_softmax_field(logits, ws.log_probs);
  ws.probs.resize(shape_.size());
  for (std::size_t k = 0; k < ws.probs.size(); ++k) ws.probs[k] = std::exp(ws.log_probs[k]);
  forward(ws);

  per_constraint.clear();
  for (const auto& u : units_) per_constraint[labels_[u.label]] -= ws.node_values[u.node];

  double loss = 0.0;
  std::vector<double> seeds(units_.size(), 0.0);
  double root_seed = 0.0;
  if (weights == nullptr) {
    loss = -ws.node_values.back();
    root_seed = 1.0;
  } else {
    std::vector<double> label_weight(labels_.size(), 1.0);
    for (std::size_t l = 0; l < labels_.size(); ++l) {
      if (auto it = weights->find(labels_[l]); it != weights->end()) label_weight[l] = it->second;
    }
    for (std::size_t u = 0; u < units_.size(); ++u) {
      seeds[u] = label_weight[units_[u].label];
    }
    for (std::size_t l = 0; l < labels_.size(); ++l) loss += label_weight[l] * per_constraint[labels_[l]];
  }
  backward(ws, seeds, root_seed);

  // Loss is -log p, so the softmax chain rule is applied to the negated adjoint.
  const auto c = static_cast<std::size_t>(shape_.classes);
  auto g = grad.values();
  for (std::size_t p = 0; p < shape_.pixels(); ++p) {
    double total = 0.0;
    for (std::size_t x = 0; x < c; ++x) total += ws.log_prob_adjoints[p * c + x];
    for (std::size_t x = 0; x < c; ++x) {
      g[p * c + x] = -(ws.log_prob_adjoints[p * c + x] - ws.probs[p * c + x] * total);
    }
  }
  return loss;
}

LossAndGrad CompiledFormula::loss_and_grad(const LogitField& logits, const LossWeights* weights) const {
  check_finite(logits);
  LossAndGrad out;
  out.grad = GradField(shape_);
  Workspace ws;
  out.loss = loss_and_grad(logits, weights, ws, out.grad, out.per_constraint);
  return out;
}

EvalResult eval_fuzzy(const Formula& formula, const ProbField& probs) {
  return CompiledFormula(formula, probs.shape()).evaluate(probs);
}

SemanticLoss semantic_loss(const Formula& formula, const LogitField& logits) {
  const auto r = CompiledFormula(formula, logits.shape()).evaluate(logits);
  SemanticLoss out;
  out.loss = -r.log_prob;
  for (const auto& [label, lp] : r.per_label_log_prob) out.per_constraint[label] = -lp;
  return out;
}

GradField grad_semantic_loss(const Formula& formula, const LogitField& logits) {
  return CompiledFormula(formula, logits.shape()).loss_and_grad(logits).grad;
}

bool eval_discrete(const Formula& formula, const LabelGrid& labels) {
  check_pixels(formula, labels);
  return discrete(formula, labels);
}

bool eval_discrete_unchecked(const Formula& formula, const LabelGrid& labels) { return discrete(formula, labels); }

std::map<std::string, bool> eval_discrete_by_label(const Formula& formula, const LabelGrid& labels) {
  check_pixels(formula, labels);
  std::map<std::string, bool> out;
  for_each_unit(formula, [&](const std::string& label, const Formula& unit) {
    auto [it, inserted] = out.try_emplace(label, true);
    it->second = it->second && discrete(unit, labels);
  });
  return out;
}

namespace {

void check_alpha_beta(double alpha, double beta) {
  if (!(beta >= 0.0 && beta < alpha && alpha <= 1.0)) {
    throw InputError("calibration requires 0 <= beta < alpha <= 1, got alpha=" + std::to_string(alpha) +
                     ", beta=" + std::to_string(beta));
  }
}

double calibrated_term(double log_prob, double alpha, double beta) {
  const double lb = beta > 0.0 ? std::log(beta) : kNegInf;
  return -logaddexp(std::log(alpha - beta) + log_prob, lb);
}

}  // namespace

double calibrated_loss(const Formula& formula, const LogitField& logits, double alpha, double beta) {
  check_alpha_beta(alpha, beta);
  const auto r = CompiledFormula(formula, logits.shape()).evaluate(logits);
  return calibrated_term(r.log_prob, alpha, beta);
}

double calibrated_loss(const Formula& formula, const LogitField& logits,
                       const std::map<std::string, Calibration>& calibration) {
  for (const auto& [label, cal] : calibration) check_alpha_beta(cal.alpha, cal.beta);
  const auto r = CompiledFormula(formula, logits.shape()).evaluate(logits);
  double total = 0.0;
  for (const auto& [label, lp] : r.per_label_log_prob) {
    const auto it = calibration.find(label);
    const Calibration cal = it == calibration.end() ? Calibration{} : it->second;
    total += calibrated_term(lp, cal.alpha, cal.beta);
  }
  return total;
}

AlphaBetaEstimate estimate_alpha_beta(const Formula& formula, std::span<const LabelGrid> gt_maps,
                                      std::span<const ProbField> model_fields, std::size_t samples_per_image,
                                      std::uint64_t seed) {
  if (gt_maps.empty() || gt_maps.size() != model_fields.size()) {
    throw InputError("alpha/beta estimation needs equally many (non-zero) ground truths and model fields");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t hits_sat = 0;
  std::size_t hits_unsat = 0;
  AlphaBetaEstimate est;
  for (std::size_t n = 0; n < gt_maps.size(); ++n) {
    const auto& gt = gt_maps[n];
    const auto& field = model_fields[n];
    if (gt.height() != field.height() || gt.width() != field.width()) {
      throw InputError("ground truth " + std::to_string(n) + " does not match its model field's size");
    }
    check_pixels(formula, gt);
    LabelGrid sample(gt.height(), gt.width());
    auto y = sample.labels();
    for (std::size_t s = 0; s < samples_per_image; ++s) {
      for (std::size_t p = 0; p < y.size(); ++p) {
        const auto probs = field.pixel(p);
        double u = unit(rng);
        int c = 0;
        while (c + 1 < field.classes() && u >= probs[static_cast<std::size_t>(c)]) {
          u -= probs[static_cast<std::size_t>(c)];
          ++c;
        }
        y[p] = c;
      }
      const bool sat = discrete(formula, sample);
      const bool agrees = sample == gt;
      if (sat) {
        ++est.satisfied_samples;
        hits_sat += agrees;
      } else {
        ++est.violated_samples;
        hits_unsat += agrees;
      }
    }
  }
  auto proportion = [](std::size_t hits, std::size_t n, double& se) -> std::optional<double> {
    if (n == 0) return std::nullopt;
    const double f = static_cast<double>(hits) / static_cast<double>(n);
    se = std::sqrt(f * (1.0 - f) / static_cast<double>(n));
    return f;
  };
  est.alpha = proportion(hits_sat, est.satisfied_samples, est.alpha_stderr);
  est.beta = proportion(hits_unsat, est.violated_samples, est.beta_stderr);
  return est;
}

LossReport make_loss_report(const Formula& formula, const LogitField& logits) {
  const auto loss = semantic_loss(formula, logits);
  LossReport report;
  report.total_loss = loss.loss;
  report.per_constraint = loss.per_constraint;
  report.satisfied = eval_discrete_by_label(formula, argmax_labels(logits));
  return report;
}

std::string loss_report_json(const LossReport& report) {
  nlohmann::ordered_json j;
  j["total_loss"] = report.total_loss;
  j["per_constraint"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.per_constraint) j["per_constraint"][k] = v;
  j["satisfied"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.satisfied) j["satisfied"][k] = v;
  return j.dump();
}

}  // namespace fuzzyseg
