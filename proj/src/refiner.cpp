#include "fuzzyseg/refiner.hpp"

#include <cmath>
#include <exception>
#include <fstream>

#include <json.hpp>

#include "fuzzyseg/error.hpp"

namespace fuzzyseg {

void validate_refine_config(const RefineConfig& cfg) {
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) throw InputError("learning_rate must be positive");
  if (cfg.steps < 1) throw InputError("steps must be at least 1");
  if (cfg.log_every < 1) throw InputError("log_every must be at least 1");
  if (!(cfg.adam_beta1 >= 0.0 && cfg.adam_beta1 < 1.0)) throw InputError("adam_beta1 must be in [0, 1)");
  if (!(cfg.adam_beta2 >= 0.0 && cfg.adam_beta2 < 1.0)) throw InputError("adam_beta2 must be in [0, 1)");
  if (!(cfg.adam_eps > 0.0)) throw InputError("adam_eps must be positive");
  for (const auto& [label, w] : cfg.constraint_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InputError("weight for constraint '" + label + "' must be finite and >= 0");
  }
}

RefineResult refine(const LogitField& init, const Formula& formula, const RefineConfig& cfg) {
  validate_refine_config(cfg);
  check_finite(init);
  check_bounds(formula, init.shape());
  const CompiledFormula compiled(formula, init.shape());

  RefineResult result{init, {}};
  auto& theta = result.logits;
  const auto n = theta.values().size();
  std::vector<double> m(n, 0.0);
  std::vector<double> v(n, 0.0);
  GradField grad(init.shape());
  CompiledFormula::Workspace ws;
  std::map<std::string, double> per_constraint;
  double beta1_pow = 1.0;
  double beta2_pow = 1.0;

  for (int step = 0;; ++step) {
    const double loss = compiled.loss_and_grad(theta, &cfg.constraint_weights, ws, grad, per_constraint);
    if (!std::isfinite(loss)) {
      throw Error("non-finite loss at step " + std::to_string(step) + " (loss = " + std::to_string(loss) + ")");
    }
    if (step % cfg.log_every == 0 || step == cfg.steps) {
      TraceRecord rec;
      rec.step = step;
      rec.loss = loss;
      rec.per_constraint = per_constraint;
      rec.satisfaction = eval_discrete_by_label(formula, extract_mask(theta));
      result.trace.records.push_back(std::move(rec));
    }
    if (step == cfg.steps) break;

    beta1_pow *= cfg.adam_beta1;
    beta2_pow *= cfg.adam_beta2;
    const double c1 = 1.0 - beta1_pow;
    const double c2 = 1.0 - beta2_pow;
    auto t = theta.values();
    const auto g = grad.values();
    for (std::size_t k = 0; k < n; ++k) {
      m[k] = cfg.adam_beta1 * m[k] + (1.0 - cfg.adam_beta1) * g[k];
      v[k] = cfg.adam_beta2 * v[k] + (1.0 - cfg.adam_beta2) * g[k] * g[k];
      t[k] -= cfg.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.adam_eps);
    }
  }
  return result;
}

LabelGrid extract_mask(const LogitField& logits) { return argmax_labels(logits); }

LogitField init_from_prob(const ProbField& probs, double floor) {
  if (!(floor > 0.0 && floor <= 0.1)) throw InputError("init floor must be in (0, 0.1]");
  LogitField out(probs.shape());
  const auto src = probs.values();
  auto dst = out.values();
  for (std::size_t k = 0; k < src.size(); ++k) dst[k] = std::log(std::max(src[k], floor));
  return out;
}

std::string trace_to_jsonl(const RefineTrace& trace) {
  std::string out;
  for (const auto& rec : trace.records) {
    nlohmann::ordered_json j;
    j["step"] = rec.step;
    j["loss"] = rec.loss;
    j["per_constraint"] = rec.per_constraint;
    j["satisfaction"] = rec.satisfaction;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_trace(const std::filesystem::path& path, const RefineTrace& trace) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << trace_to_jsonl(trace);
  if (!os) throw Error("failed writing " + path.string());
}

std::vector<RefineResult> refine_batch(std::span<const RefineJob> jobs, const RefineConfig& config) {
  std::vector<RefineResult> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  const auto count = static_cast<long>(jobs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long k = 0; k < count; ++k) {
    const auto idx = static_cast<std::size_t>(k);
    try {
      results[idx] = refine(*jobs[idx].init, *jobs[idx].formula, config);
    } catch (...) {
      errors[idx] = std::current_exception();
    }
  }
  // Report the first failure in job order, independent of scheduling.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

namespace serial {

std::vector<RefineResult> refine_batch(std::span<const RefineJob> jobs, const RefineConfig& config) {
  std::vector<RefineResult> results;
  results.reserve(jobs.size());
  for (const auto& job : jobs) results.push_back(refine(*job.init, *job.formula, config));
  return results;
}

}  // namespace serial

}  // namespace fuzzyseg
