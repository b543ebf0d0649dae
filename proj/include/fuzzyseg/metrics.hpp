#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fuzzyseg/grid.hpp"

namespace fuzzyseg {

/// Per-class pixel counters. Mergeable: adding images in any order and
/// merging partial accumulators gives the same totals.
class ConfusionAccumulator {
 public:
  ConfusionAccumulator() = default;
  explicit ConfusionAccumulator(int classes);

  int classes() const { return static_cast<int>(intersection_.size()); }
  /// Throws InputError on a size mismatch or a label outside [0, classes).
  void add(const LabelGrid& pred, const LabelGrid& gt);
  void merge(const ConfusionAccumulator& other);

  std::uint64_t intersection(int c) const { return intersection_.at(static_cast<std::size_t>(c)); }
  std::uint64_t pred_area(int c) const { return pred_area_.at(static_cast<std::size_t>(c)); }
  std::uint64_t gt_area(int c) const { return gt_area_.at(static_cast<std::size_t>(c)); }
  std::uint64_t union_area(int c) const { return pred_area(c) + gt_area(c) - intersection(c); }

  /// Empty when the class is absent from both prediction and ground truth.
  std::optional<double> iou(int c) const;
  std::optional<double> dice(int c) const;

 private:
  std::vector<std::uint64_t> intersection_;
  std::vector<std::uint64_t> pred_area_;
  std::vector<std::uint64_t> gt_area_;
};

std::optional<double> iou(const LabelGrid& pred, const LabelGrid& gt, int c);
std::optional<double> dice(const LabelGrid& pred, const LabelGrid& gt, int c);

struct Scores {
  std::vector<std::optional<double>> iou;
  std::vector<std::optional<double>> dice;
  /// Unweighted means over classes with a defined score; NaN when none is defined.
  double mean_iou = 0.0;
  double mean_dice = 0.0;
};

Scores scores_of(const ConfusionAccumulator& acc);
/// Sums the counters of every accumulator, then scores the total.
Scores mean_over_dataset(std::span<const ConfusionAccumulator> accumulators);

/// `class,iou,dice` rows (undefined scores left blank), then a `mean` row.
std::string scores_csv(const Scores& scores, const std::vector<std::string>& class_names = {});
std::string scores_json(const Scores& scores, const std::vector<std::string>& class_names = {});

}  // namespace fuzzyseg
