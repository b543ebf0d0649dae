#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "fuzzyseg/grid.hpp"

namespace fuzzyseg {

/// Raw contents of a Pixel Field Tensor file: a one-line JSON header
/// `{"h":H,"w":W,"c":C,"dtype":"f32"}` followed by H*W*C little-endian
/// float32 values, row-major with the channel innermost.
struct PftTensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;
};

PftTensor read_pft(const std::filesystem::path& path);
void write_pft(const std::filesystem::path& path, int height, int width, int channels, std::span<const double> values);

LogitField read_logit_field(const std::filesystem::path& path);
void write_logit_field(const std::filesystem::path& path, const LogitField& logits);

/// Reads a probability field. Pixels whose float32 sums are within 1e-5 of 1
/// are renormalized in double precision; anything further off is rejected.
ProbField read_prob_field(const std::filesystem::path& path);
void write_prob_field(const std::filesystem::path& path, const ProbField& probs);

}  // namespace fuzzyseg
