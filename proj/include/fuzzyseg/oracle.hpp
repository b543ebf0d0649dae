#pragma once

#include <cstdint>
#include <optional>

#include "fuzzyseg/error.hpp"
#include "fuzzyseg/formula.hpp"
#include "fuzzyseg/grid.hpp"

namespace fuzzyseg {

struct OracleBudget {
  /// Cap on the number of label maps (C^(H*W)) the oracle may enumerate.
  std::uint64_t max_states = 2'000'000;
};

class BudgetExceeded : public Error {
 public:
  BudgetExceeded(std::uint64_t required, std::uint64_t allowed);
  /// C^(H*W), saturated at UINT64_MAX.
  std::uint64_t required_states() const { return required_; }

 private:
  std::uint64_t required_;
};

/// Exact p(formula) = sum over every label map y of [y satisfies formula] *
/// prod p(i, j, y_ij), by brute-force enumeration. The state range is split
/// into a fixed number of chunks (OpenMP-parallel) whose sums are combined by
/// pairwise reduction, so the result does not depend on the thread count.
double exact_prob(const Formula& formula, const ProbField& probs, const OracleBudget& budget = {});

struct ExactAlphaBeta {
  std::optional<double> alpha;  ///< unavailable when p(formula) = 0
  std::optional<double> beta;   ///< unavailable when p(formula) = 1
  double formula_prob = 0.0;
  double gt_prob = 0.0;
};

/// alpha = p(gt | formula true), beta = p(gt | formula false) under the
/// independent per-pixel distribution `probs`.
ExactAlphaBeta exact_alpha_beta(const Formula& formula, const LabelGrid& gt, const ProbField& probs,
                                const OracleBudget& budget = {});

namespace serial {

/// Single-threaded reference for exact_prob (same chunking, same result bits).
double exact_prob(const Formula& formula, const ProbField& probs, const OracleBudget& budget = {});

}  // namespace serial

}  // namespace fuzzyseg
