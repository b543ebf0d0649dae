#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fuzzyseg/constraints.hpp"
#include "fuzzyseg/grid.hpp"

namespace fuzzyseg {

struct PointLabel {
  int i = 0;
  int j = 0;
  int target_class = 0;

  friend bool operator==(const PointLabel&, const PointLabel&) = default;
};

/// Weak annotations for one image. Class indices refer to `class_names`.
struct AnnotationSet {
  std::vector<std::string> class_names;
  int background_class = 0;
  std::vector<BoundingBox> boxes;
  std::vector<Scribble> scribbles;
  std::vector<PointLabel> points;
  /// Grid size the annotations were made for; 0 when the file does not say.
  int height = 0;
  int width = 0;
};

/// Reads a palette: either a JSON array of class names or an object with a
/// "classes" array.
std::vector<std::string> load_palette(const std::filesystem::path& path);

/// Parses and validates annotation JSON. Class names are resolved through
/// `palette` when given, otherwise through the file's own "classes" list.
/// When height/width are positive every coordinate must fall inside that grid.
/// Errors name the offending field, e.g. "boxes[0].i1".
AnnotationSet parse_annotations(std::string_view json_text, std::string_view source, int height = 0, int width = 0,
                                const std::vector<std::string>* palette = nullptr);
AnnotationSet load_annotations(const std::filesystem::path& path, int height = 0, int width = 0,
                               const std::vector<std::string>* palette = nullptr);

std::string annotations_to_json(const AnnotationSet& set);
void save_annotations(const std::filesystem::path& path, const AnnotationSet& set);

/// One tight box per non-background class present in `gt`, spanning the
/// class's extreme rows and columns; ordered by class index.
std::vector<BoundingBox> derive_boxes_from_gt(const LabelGrid& gt, int background_class = 0);

/// Up to k distinct pixels per class present in `gt` (background included),
/// drawn without replacement; classes with <= k pixels contribute all of them.
std::vector<PointLabel> sample_points_from_gt(const LabelGrid& gt, int k, std::uint64_t seed);

struct JitterSpec {
  double target_overlap = 0.75;
  std::uint64_t rng_seed = 0;
};

struct JitterResult {
  BoundingBox box;
  double overlap = 1.0;
  /// False when no draw met the tolerance and the tight box was returned.
  bool reached = true;
};

/// Fraction of the pixels of box.target_class in `gt` that fall inside the box.
double box_overlap(const BoundingBox& box, const LabelGrid& gt);

/// Randomly translates and rescales `box` until box_overlap is within 0.02 of
/// spec.target_overlap (at most 10,000 draws, deterministic per seed).
JitterResult jitter_box(const BoundingBox& box, const LabelGrid& gt, const JitterSpec& spec);

/// Single-pixel scribbles, one per point.
std::vector<Scribble> promote_points(std::span<const PointLabel> points);

struct ConstraintOptions {
  std::vector<Family> families;
  /// Classes whose boxes get the corner prior; empty means every box class.
  std::vector<int> corner_classes;
};

/// Builds one labeled formula per requested family from the annotations.
/// Families with nothing to constrain come back as labeled empty conjunctions.
/// Borders needs `superpixels`; full supervision cannot be built from weak labels.
std::vector<Formula> build_constraint_families(const AnnotationSet& set, const GridShape& shape,
                                               const SuperpixelMap* superpixels, const ConstraintOptions& options);

}  // namespace fuzzyseg
