#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <string>
#include <vector>

#include "fuzzyseg/error.hpp"

namespace fuzzyseg {

/// Probability floor applied before taking the log of a probability.
inline constexpr double kProbFloor = 1e-12;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct GridShape {
  int height = 0;
  int width = 0;
  int classes = 0;

  std::size_t pixels() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
  std::size_t size() const { return pixels() * static_cast<std::size_t>(classes); }
  bool contains(int i, int j) const { return i >= 0 && j >= 0 && i < height && j < width; }
  std::size_t pixel_index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(width) + static_cast<std::size_t>(j);
  }

  friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// Throws InputError unless height, width >= 1 and classes >= min_classes.
void validate_shape(const GridShape& shape, int min_classes = 2);

/// Dense H x W x C real grid, row-major with the class index innermost.
template <class Tag>
class DenseField {
 public:
  DenseField() = default;
  explicit DenseField(GridShape shape, double fill = 0.0) : shape_(shape), values_(shape.size(), fill) {}
  DenseField(GridShape shape, std::vector<double> values) : shape_(shape), values_(std::move(values)) {
    if (values_.size() != shape_.size()) {
      throw InputError("field data has " + std::to_string(values_.size()) + " entries, expected " +
                       std::to_string(shape_.size()));
    }
  }

  const GridShape& shape() const { return shape_; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  int classes() const { return shape_.classes; }

  double operator()(int i, int j, int c) const { return values_[offset(i, j) + static_cast<std::size_t>(c)]; }
  double& operator()(int i, int j, int c) { return values_[offset(i, j) + static_cast<std::size_t>(c)]; }

  std::span<const double> pixel(std::size_t p) const {
    return {values_.data() + p * static_cast<std::size_t>(shape_.classes), static_cast<std::size_t>(shape_.classes)};
  }
  std::span<double> pixel(std::size_t p) {
    return {values_.data() + p * static_cast<std::size_t>(shape_.classes), static_cast<std::size_t>(shape_.classes)};
  }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  friend bool operator==(const DenseField&, const DenseField&) = default;

 private:
  std::size_t offset(int i, int j) const { return shape_.pixel_index(i, j) * static_cast<std::size_t>(shape_.classes); }

  GridShape shape_;
  std::vector<double> values_;
};

struct LogitTag;
struct GradTag;

/// Unnormalized class scores; the parameters that refinement optimizes.
using LogitField = DenseField<LogitTag>;
/// d(loss)/d(logit), same layout as LogitField.
using GradField = DenseField<GradTag>;

/// Per-pixel categorical distributions. Construction validates that every
/// entry is in [0, 1] and that each pixel sums to 1 within 1e-9.
class ProbField {
 public:
  ProbField() = default;
  ProbField(GridShape shape, std::vector<double> values);

  const GridShape& shape() const { return shape_; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  int classes() const { return shape_.classes; }

  double operator()(int i, int j, int c) const {
    return values_[shape_.pixel_index(i, j) * static_cast<std::size_t>(shape_.classes) + static_cast<std::size_t>(c)];
  }
  std::span<const double> pixel(std::size_t p) const {
    return {values_.data() + p * static_cast<std::size_t>(shape_.classes), static_cast<std::size_t>(shape_.classes)};
  }
  std::span<const double> values() const { return values_; }

  friend bool operator==(const ProbField&, const ProbField&) = default;

 private:
  GridShape shape_;
  std::vector<double> values_;
};

/// H x W grid of class indices.
class LabelGrid {
 public:
  LabelGrid() = default;
  LabelGrid(int height, int width, int fill = 0);
  LabelGrid(int height, int width, std::vector<int> labels);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t pixels() const { return labels_.size(); }
  bool contains(int i, int j) const { return i >= 0 && j >= 0 && i < height_ && j < width_; }

  int operator()(int i, int j) const { return labels_[static_cast<std::size_t>(i) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(j)]; }
  int& operator()(int i, int j) { return labels_[static_cast<std::size_t>(i) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(j)]; }
  std::span<const int> labels() const { return labels_; }
  std::span<int> labels() { return labels_; }

  /// Largest label + 1 (0 for an empty grid).
  int max_label_plus_one() const;

  friend bool operator==(const LabelGrid&, const LabelGrid&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<int> labels_;
};

/// Throws InputError naming the first pixel holding a NaN or infinite logit.
void check_finite(const LogitField& logits);

/// Per-pixel softmax. OpenMP-parallel over pixels.
ProbField softmax_field(const LogitField& logits);

/// Per-pixel log-softmax written into `out` (size H*W*C). Entries are finite
/// for finite logits.
void log_softmax_field(const LogitField& logits, std::span<double> out);

/// log(1 - exp(x)) for x <= 0, switching between the expm1 and log1p forms at
/// -ln 2. log1mexp(0) = -inf; throws for x > 0 or NaN.
double log1mexp(double x);

/// log(max(p, eps)).
double clamp_log(double p, double eps = kProbFloor);

/// Uniform distribution over classes at every pixel.
ProbField uniform_field(GridShape shape);

/// One-hot field (optionally smoothed: target gets `confidence`, the rest
/// share the remainder equally).
ProbField one_hot_field(const LabelGrid& labels, int classes, double confidence = 1.0);

/// Per-pixel argmax; ties go to the lowest class index.
LabelGrid argmax_labels(const LogitField& logits);
LabelGrid argmax_labels(const ProbField& probs);

namespace serial {

/// Single-threaded reference for softmax_field.
ProbField softmax_field(const LogitField& logits);

}  // namespace serial

}  // namespace fuzzyseg
