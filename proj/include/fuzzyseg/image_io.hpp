#pragma once

#include <filesystem>
#include <vector>

#include "fuzzyseg/grid.hpp"

namespace fuzzyseg {

/// Pixel grid with `channels` values in [0, 1] per pixel, row-major, channel innermost.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  double at(int i, int j, int ch) const {
    return data[(static_cast<std::size_t>(i) * static_cast<std::size_t>(width) + static_cast<std::size_t>(j)) *
                    static_cast<std::size_t>(channels) +
                static_cast<std::size_t>(ch)];
  }
};

/// Reads binary PGM (P5, one channel) or PPM (P6, three channels), 8-bit.
Image read_image(const std::filesystem::path& path);
/// Writes P5 for one channel, P6 for three; values are rounded to 8 bits.
void write_image(const std::filesystem::path& path, const Image& image);

/// Mask stored as 8-bit P5 PGM whose pixel value is the class index.
LabelGrid read_label_pgm(const std::filesystem::path& path);
void write_label_pgm(const std::filesystem::path& path, const LabelGrid& labels);

}  // namespace fuzzyseg
