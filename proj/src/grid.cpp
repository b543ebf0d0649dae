#include "fuzzyseg/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace fuzzyseg {

namespace {

std::string pixel_name(const GridShape& shape, std::size_t p) {
  const auto w = static_cast<std::size_t>(shape.width);
  return "(" + std::to_string(p / w) + ", " + std::to_string(p % w) + ")";
}

// Writes the normalized distribution of one pixel.
inline void softmax_pixel(std::span<const double> z, std::span<double> out) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    out[c] = std::exp(z[c] - m);
    sum += out[c];
  }
  for (auto& v : out) v /= sum;
}

}  // namespace

void validate_shape(const GridShape& shape, int min_classes) {
  if (shape.height < 1 || shape.width < 1) {
    throw InputError("grid must be at least 1x1, got " + std::to_string(shape.height) + "x" +
                     std::to_string(shape.width));
  }
  if (shape.classes < min_classes) {
    throw InputError("grid needs at least " + std::to_string(min_classes) + " classes, got " +
                     std::to_string(shape.classes));
  }
}

ProbField::ProbField(GridShape shape, std::vector<double> values) : shape_(shape), values_(std::move(values)) {
  if (values_.size() != shape_.size()) {
    throw InputError("probability field has " + std::to_string(values_.size()) + " entries, expected " +
                     std::to_string(shape_.size()));
  }
  for (std::size_t p = 0; p < shape_.pixels(); ++p) {
    double sum = 0.0;
    for (double v : pixel(p)) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw InputError("probability outside [0, 1] at pixel " + pixel_name(shape_, p));
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw InputError("probabilities at pixel " + pixel_name(shape_, p) + " sum to " + std::to_string(sum));
    }
  }
}

LabelGrid::LabelGrid(int height, int width, int fill)
    : height_(height), width_(width), labels_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill) {}

LabelGrid::LabelGrid(int height, int width, std::vector<int> labels)
    : height_(height), width_(width), labels_(std::move(labels)) {
  if (labels_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw InputError("label grid has " + std::to_string(labels_.size()) + " entries, expected " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
}

int LabelGrid::max_label_plus_one() const {
  int m = -1;
  for (int v : labels_) m = std::max(m, v);
  return m + 1;
}

void check_finite(const LogitField& logits) {
  const auto values = logits.values();
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(values[k])) {
      const auto p = k / static_cast<std::size_t>(logits.classes());
      throw InputError("non-finite logit at pixel " + pixel_name(logits.shape(), p) + ", class " +
                       std::to_string(k % static_cast<std::size_t>(logits.classes())));
    }
  }
}

ProbField softmax_field(const LogitField& logits) {
  check_finite(logits);
  const auto& shape = logits.shape();
  std::vector<double> out(shape.size());
  const auto n = static_cast<std::ptrdiff_t>(shape.pixels());
  const auto c = static_cast<std::size_t>(shape.classes);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < n; ++p) {
    softmax_pixel(logits.pixel(static_cast<std::size_t>(p)), std::span<double>(out.data() + static_cast<std::size_t>(p) * c, c));
  }
  return ProbField(shape, std::move(out));
}

void log_softmax_field(const LogitField& logits, std::span<double> out) {
  const auto& shape = logits.shape();
  const auto c = static_cast<std::size_t>(shape.classes);
  for (std::size_t p = 0; p < shape.pixels(); ++p) {
    const auto z = logits.pixel(p);
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - m);
    const double lse = m + std::log(sum);
    for (std::size_t k = 0; k < c; ++k) out[p * c + k] = z[k] - lse;
  }
}

double log1mexp(double x) {
  if (std::isnan(x) || x > 0.0) {
    throw InputError("log1mexp requires x <= 0, got " + std::to_string(x));
  }
  if (x == 0.0) return kNegInf;
  if (x > -std::numbers::ln2) return std::log(-std::expm1(x));
  return std::log1p(-std::exp(x));
}

double clamp_log(double p, double eps) { return std::log(std::max(p, eps)); }

ProbField uniform_field(GridShape shape) {
  validate_shape(shape);
  return ProbField(shape, std::vector<double>(shape.size(), 1.0 / shape.classes));
}

ProbField one_hot_field(const LabelGrid& labels, int classes, double confidence) {
  const GridShape shape{labels.height(), labels.width(), classes};
  validate_shape(shape);
  const double rest = (1.0 - confidence) / (classes - 1);
  std::vector<double> values(shape.size(), rest);
  const auto all = labels.labels();
  for (std::size_t p = 0; p < all.size(); ++p) {
    if (all[p] < 0 || all[p] >= classes) {
      throw InputError("label " + std::to_string(all[p]) + " out of range at pixel " + pixel_name(shape, p));
    }
    values[p * static_cast<std::size_t>(classes) + static_cast<std::size_t>(all[p])] = confidence;
  }
  return ProbField(shape, std::move(values));
}

namespace {

template <class F>
LabelGrid argmax_impl(const F& field) {
  LabelGrid out(field.height(), field.width());
  auto labels = out.labels();
  for (std::size_t p = 0; p < field.shape().pixels(); ++p) {
    const auto v = field.pixel(p);
    // max_element returns the first maximum, so ties go to the lowest class.
    labels[p] = static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
  }
  return out;
}

}  // namespace

LabelGrid argmax_labels(const LogitField& logits) { return argmax_impl(logits); }
LabelGrid argmax_labels(const ProbField& probs) { return argmax_impl(probs); }

namespace serial {

ProbField softmax_field(const LogitField& logits) {
  check_finite(logits);
  const auto& shape = logits.shape();
  std::vector<double> out(shape.size());
  const auto c = static_cast<std::size_t>(shape.classes);
  for (std::size_t p = 0; p < shape.pixels(); ++p) {
    softmax_pixel(logits.pixel(p), std::span<double>(out.data() + p * c, c));
  }
  return ProbField(shape, std::move(out));
}

}  // namespace serial

}  // namespace fuzzyseg
