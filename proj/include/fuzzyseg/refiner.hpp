#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fuzzyseg/formula.hpp"
#include "fuzzyseg/fuzzy.hpp"
#include "fuzzyseg/grid.hpp"

namespace fuzzyseg {

struct RefineConfig {
  double learning_rate = 1e-4;
  int steps = 100;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Weight per constraint label; missing labels weigh 1.
  LossWeights constraint_weights;
  /// Trace checkpoint interval. Step 0 and the final step are always logged.
  int log_every = 10;
  /// Refinement is deterministic; the seed is carried for run bookkeeping.
  std::uint64_t seed = 0;
};

/// Throws InputError for lr <= 0, steps < 1, log_every < 1, negative weights,
/// or Adam constants outside their ranges.
void validate_refine_config(const RefineConfig& config);

struct TraceRecord {
  int step = 0;
  double loss = 0.0;
  std::map<std::string, double> per_constraint;
  /// Discrete satisfaction of each constraint by the argmax mask at this step.
  std::map<std::string, bool> satisfaction;
};

struct RefineTrace {
  std::vector<TraceRecord> records;
};

struct RefineResult {
  LogitField logits;
  RefineTrace trace;
};

/// Minimizes the weighted semantic loss of `formula` over the logits with Adam.
/// Record `step` n holds the loss of the field after n updates.
RefineResult refine(const LogitField& init, const Formula& formula, const RefineConfig& config);

/// Per-pixel argmax; ties go to the lowest class index.
LabelGrid extract_mask(const LogitField& logits);

/// logits = log(max(p, floor)). Requires floor in (0, 0.1].
LogitField init_from_prob(const ProbField& probs, double floor);

/// One JSON object per record: {"step","loss","per_constraint","satisfaction"}.
std::string trace_to_jsonl(const RefineTrace& trace);
void write_trace(const std::filesystem::path& path, const RefineTrace& trace);

struct RefineJob {
  const LogitField* init = nullptr;
  const Formula* formula = nullptr;
};

/// Refines independent images; OpenMP-parallel over jobs, results in job order.
std::vector<RefineResult> refine_batch(std::span<const RefineJob> jobs, const RefineConfig& config);

namespace serial {

/// Single-threaded reference for refine_batch.
std::vector<RefineResult> refine_batch(std::span<const RefineJob> jobs, const RefineConfig& config);

}  // namespace serial

}  // namespace fuzzyseg
