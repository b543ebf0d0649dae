#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fuzzyseg/annotations.hpp"
#include "fuzzyseg/constraints.hpp"
#include "fuzzyseg/image_io.hpp"
#include "fuzzyseg/metrics.hpp"
#include "fuzzyseg/refiner.hpp"

namespace fuzzyseg {

/// One image of a refinement dataset: the starting field, weak labels, and
/// (for scoring) the ground truth.
struct Sample {
  std::string name;
  Image image;
  LabelGrid gt;
  LogitField init;
  AnnotationSet annotations;
  std::optional<SuperpixelMap> superpixels;
};

struct SynthConfig {
  int count = 100;
  int height = 64;
  int width = 64;
  /// Probability that a pixel of the noisy starting mask takes a random other class.
  double flip_prob = 0.3;
  /// Probability the starting field puts on the noisy label; the rest is shared equally.
  double confidence = 0.6;
  /// Standard deviation of the Gaussian noise added to the rendered image.
  double image_noise = 0.02;
  int points_per_class = 3;
  std::uint64_t seed = 0;
};

/// Three-class scenes: background (0), a rectangle (1), and an axis-aligned
/// ellipse (2) with integer center and radii, drawn on top. The ellipse
/// matches the one inscribed in its tight box, so the corner prior holds on
/// the ground truth. Weak labels are derived boxes plus sampled points
/// (promoted to scribbles); superpixels come from SLIC on the image.
std::vector<Sample> make_synthetic_dataset(const SynthConfig& config);

/// The ellipse/rectangle ground truth alone, for callers that need just masks.
LabelGrid synthetic_scene(int height, int width, std::uint64_t seed);

/// Builds every sample's conjoined formula from its annotations.
std::vector<Formula> build_dataset_formulas(std::span<const Sample> samples, const ConstraintOptions& options);

struct DatasetRun {
  std::vector<LabelGrid> initial_masks;
  std::vector<LabelGrid> final_masks;
  ConfusionAccumulator initial;
  ConfusionAccumulator final;
  /// Fraction of images whose mask satisfies each constraint label.
  std::map<std::string, double> initial_satisfaction;
  std::map<std::string, double> final_satisfaction;
};

/// Refines every sample (in parallel) under its constraints and scores the
/// starting and refined masks against ground truth.
DatasetRun refine_dataset(std::span<const Sample> samples, const ConstraintOptions& options, const RefineConfig& config);

struct AblationSpec {
  std::vector<Family> full_set;
  std::optional<Family> leave_out;
  std::vector<int> corner_classes;
};

struct AblationRow {
  std::optional<Family> left_out;
  double mean_iou = 0.0;
  /// mean_iou minus the full-set mean_iou.
  double delta = 0.0;
};

/// Full-set row, followed by the leave-out row when one is given.
std::vector<AblationRow> run_ablation(const AblationSpec& spec, std::span<const Sample> dataset, const RefineConfig& config);

/// Full-set row, followed by one row per family of the full set.
std::vector<AblationRow> run_leave_one_out(const AblationSpec& spec, std::span<const Sample> dataset,
                                           const RefineConfig& config);

/// `constraints,mIoU,dmIoU`; the full set is "all", others "all \ <family>".
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace fuzzyseg
