#include "fuzzyseg/oracle.hpp"

#include <array>
#include <limits>
#include <string>
#include <vector>

#include "fuzzyseg/fuzzy.hpp"

namespace fuzzyseg {

namespace {

constexpr std::uint64_t kChunks = 64;

std::uint64_t state_count(const GridShape& shape) {
  std::uint64_t n = 1;
  for (std::size_t p = 0; p < shape.pixels(); ++p) {
    if (n > std::numeric_limits<std::uint64_t>::max() / static_cast<std::uint64_t>(shape.classes)) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    n *= static_cast<std::uint64_t>(shape.classes);
  }
  return n;
}

struct Mass {
  double satisfied = 0.0;
  double violated = 0.0;
};

// Enumerates states [begin, end) of the odometer whose last pixel varies fastest.
Mass enumerate_range(const Formula& formula, const ProbField& probs, std::uint64_t begin, std::uint64_t end) {
  const auto& shape = probs.shape();
  const auto n = shape.pixels();
  const auto c = static_cast<std::uint64_t>(shape.classes);
  LabelGrid y(shape.height, shape.width);
  auto digits = y.labels();
  std::uint64_t rest = begin;
  for (std::size_t p = n; p-- > 0;) {
    digits[p] = static_cast<int>(rest % c);
    rest /= c;
  }
  Mass m;
  for (std::uint64_t s = begin; s < end; ++s) {
    double w = 1.0;
    for (std::size_t p = 0; p < n && w != 0.0; ++p) w *= probs.pixel(p)[static_cast<std::size_t>(digits[p])];
    if (w != 0.0) {
      if (eval_discrete_unchecked(formula, y)) {
        m.satisfied += w;
      } else {
        m.violated += w;
      }
    }
    for (std::size_t p = n; p-- > 0;) {
      if (++digits[p] < static_cast<int>(c)) break;
      digits[p] = 0;
    }
  }
  return m;
}

Mass pairwise_sum(const std::vector<Mass>& parts, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return parts[lo];
  const std::size_t mid = lo + (hi - lo) / 2;
  const Mass a = pairwise_sum(parts, lo, mid);
  const Mass b = pairwise_sum(parts, mid, hi);
  return {a.satisfied + b.satisfied, a.violated + b.violated};
}

std::uint64_t prepare(const Formula& formula, const ProbField& probs, const OracleBudget& budget) {
  check_bounds(formula, probs.shape());
  const auto states = state_count(probs.shape());
  if (states > budget.max_states) throw BudgetExceeded(states, budget.max_states);
  return states;
}

std::uint64_t chunk_start(std::uint64_t states, std::uint64_t k) {
  // states <= budget, so the product cannot overflow for realistic budgets.
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(states) * k) / kChunks);
}

Mass enumerate_parallel(const Formula& formula, const ProbField& probs, std::uint64_t states) {
  std::vector<Mass> parts(kChunks);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(kChunks); ++k) {
    const auto uk = static_cast<std::uint64_t>(k);
    parts[uk] = enumerate_range(formula, probs, chunk_start(states, uk), chunk_start(states, uk + 1));
  }
  return pairwise_sum(parts, 0, parts.size());
}

}  // namespace

BudgetExceeded::BudgetExceeded(std::uint64_t required, std::uint64_t allowed)
    : Error("exact enumeration needs " +
            (required == std::numeric_limits<std::uint64_t>::max() ? std::string("more than 2^64")
                                                                   : std::to_string(required)) +
            " states, budget is " + std::to_string(allowed)),
      required_(required) {}

double exact_prob(const Formula& formula, const ProbField& probs, const OracleBudget& budget) {
  const auto states = prepare(formula, probs, budget);
  return enumerate_parallel(formula, probs, states).satisfied;
}

ExactAlphaBeta exact_alpha_beta(const Formula& formula, const LabelGrid& gt, const ProbField& probs,
                                const OracleBudget& budget) {
  if (gt.height() != probs.height() || gt.width() != probs.width()) {
    throw InputError("ground truth and probability field differ in size");
  }
  const auto states = prepare(formula, probs, budget);
  const Mass m = enumerate_parallel(formula, probs, states);

  ExactAlphaBeta r;
  r.formula_prob = m.satisfied;
  r.gt_prob = 1.0;
  for (std::size_t p = 0; p < gt.pixels(); ++p) {
    const int c = gt.labels()[p];
    if (c < 0 || c >= probs.classes()) throw InputError("ground truth label out of range");
    r.gt_prob *= probs.pixel(p)[static_cast<std::size_t>(c)];
  }
  const bool gt_sat = eval_discrete_unchecked(formula, gt);
  if (m.satisfied > 0.0) r.alpha = gt_sat ? r.gt_prob / m.satisfied : 0.0;
  if (m.violated > 0.0) r.beta = gt_sat ? 0.0 : r.gt_prob / m.violated;
  return r;
}

namespace serial {

double exact_prob(const Formula& formula, const ProbField& probs, const OracleBudget& budget) {
  const auto states = prepare(formula, probs, budget);
  std::vector<Mass> parts(kChunks);
  for (std::uint64_t k = 0; k < kChunks; ++k) {
    parts[k] = enumerate_range(formula, probs, chunk_start(states, k), chunk_start(states, k + 1));
  }
  return pairwise_sum(parts, 0, parts.size()).satisfied;
}

}  // namespace serial

}  // namespace fuzzyseg
