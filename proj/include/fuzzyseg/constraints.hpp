#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fuzzyseg/formula.hpp"
#include "fuzzyseg/grid.hpp"

namespace fuzzyseg {

/// Constraint families; each builder labels its root with family_name().
enum class Family { FullSupervision, Scribbles, BboxShallow, Bbox, Background, Neighborhood, Fill, Borders, Corners };

std::string_view family_name(Family family);
std::optional<Family> parse_family(std::string_view name);
const std::vector<Family>& all_families();

/// Inclusive pixel bounds [i1..i2] x [j1..j2] plus the class the box encloses.
struct BoundingBox {
  int i1 = 0;
  int j1 = 0;
  int i2 = 0;
  int j2 = 0;
  int target_class = 0;

  int rows() const { return i2 - i1 + 1; }
  int cols() const { return j2 - j1 + 1; }
  long area() const { return static_cast<long>(rows()) * cols(); }
  bool contains(int i, int j) const { return i >= i1 && i <= i2 && j >= j1 && j <= j2; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Throws InputError unless the box is ordered, inside the grid, and names a valid class.
void validate_box(const BoundingBox& box, const GridShape& shape);

struct Scribble {
  std::vector<Pixel> pixels;
  int target_class = 0;
};

/// Per-pixel superpixel index S[i,j]. Every index in [0, K) must occur.
class SuperpixelMap {
 public:
  SuperpixelMap() = default;
  SuperpixelMap(int height, int width, std::vector<int> labels);

  int height() const { return height_; }
  int width() const { return width_; }
  int count() const { return count_; }
  int operator()(int i, int j) const { return labels_[static_cast<std::size_t>(i) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(j)]; }
  std::span<const int> labels() const { return labels_; }

  friend bool operator==(const SuperpixelMap&, const SuperpixelMap&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int count_ = 0;
  std::vector<int> labels_;
};

/// Axis-aligned ellipse inscribed in a box: center at the box midpoint, radii
/// half the distance between the extreme pixel rows/columns.
struct EllipseRegion {
  double cy = 0.0;
  double cx = 0.0;
  double ry = 0.0;
  double rx = 0.0;
  BoundingBox box;

  /// Throws InputError when the box is a single pixel tall or wide.
  static EllipseRegion inscribed(const BoundingBox& box);

  double level(int i, int j) const {
    const double dy = (i - cy) / ry;
    const double dx = (j - cx) / rx;
    return dy * dy + dx * dx;
  }
  /// True for box pixels strictly outside the ellipse (the corner set).
  bool in_corner(int i, int j) const { return box.contains(i, j) && level(i, j) > 1.0; }
};

/// In-bounds Moore (8-connected) neighbors, in row-major offset order.
std::vector<Pixel> moore_neighbors(Pixel p, int height, int width);

Formula build_full_supervision(const LabelGrid& gt, int classes);
Formula build_scribble(const Scribble& scribble, const GridShape& shape);
Formula build_bbox_shallow(const BoundingBox& box, const GridShape& shape);
Formula build_bbox_tight(const BoundingBox& box, const GridShape& shape);
Formula build_background(std::span<const BoundingBox> boxes, int background_class, const GridShape& shape);
Formula build_neighborhood(int height, int width);
Formula build_fill(int height, int width);
Formula build_borders(const SuperpixelMap& superpixels);
Formula build_corners(const BoundingBox& box, const GridShape& shape);

/// Unlabeled conjunction of the given constraints; each keeps its own label.
Formula conjoin(std::vector<Formula> constraints);

}  // namespace fuzzyseg
