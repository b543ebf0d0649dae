#pragma once

#include <cstdint>
#include <filesystem>

#include "fuzzyseg/constraints.hpp"
#include "fuzzyseg/image_io.hpp"

namespace fuzzyseg {

struct SlicConfig {
  /// Desired superpixel count; the seed grid may hold slightly more.
  int k = 200;
  /// Spatial weight; colors are compared on a 0-100 scale.
  double compactness = 10.0;
  int max_iters = 10;
  /// Recorded for run configs. Seeding is grid-based, so it does not change the result.
  std::uint64_t seed = 0;
};

/// Defaults for an image of the given size: k = 200 per 64x64 pixels of area.
SlicConfig default_slic_config(int height, int width);

/// SLIC: k-means over (color, lambda * position) with lambda = compactness /
/// grid step, seeds on a regular grid nudged to the lowest local gradient,
/// then a connectivity pass that keeps each label's largest 4-connected
/// component and merges the rest into the largest adjacent superpixel.
/// The assignment step is OpenMP-parallel over pixels.
SuperpixelMap slic(const Image& image, const SlicConfig& config);

/// Renumbers arbitrary non-negative labels to [0, K) in order of first appearance.
SuperpixelMap relabel_contiguous(int height, int width, std::vector<int> labels);

/// Reads a superpixel map stored as a one-channel PFT of exact integers and
/// renumbers it to [0, K).
SuperpixelMap load_superpixels(const std::filesystem::path& path, int height, int width);
void save_superpixels(const std::filesystem::path& path, const SuperpixelMap& map);

/// True when every superpixel is a single 4-connected region.
bool superpixels_connected(const SuperpixelMap& map);

/// Fraction of ground-truth boundary pixels with a superpixel boundary pixel
/// within `tolerance` (Chebyshev distance). Boundary pixels have a 4-neighbor
/// with a different label. Returns 1 when gt has no boundary.
double boundary_recall(const SuperpixelMap& map, const LabelGrid& gt, int tolerance = 1);

namespace serial {

/// Reference SLIC with the classic center-major assignment loop.
SuperpixelMap slic(const Image& image, const SlicConfig& config);

}  // namespace serial

}  // namespace fuzzyseg
