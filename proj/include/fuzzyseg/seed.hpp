#pragma once

#include <cstdint>
#include <optional>

namespace fuzzyseg {

/// Counter-based seed splitter: a pure function of (root, stream, index), so
/// adding a consumer on one stream never shifts the seeds of another.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t index);

/// Named streams handed out by derive_seed.
enum class SeedStream : std::uint64_t { Synthesis = 1, Points = 2, Jitter = 3, Noise = 4, Estimate = 5 };

inline std::uint64_t derive_seed(std::uint64_t root, SeedStream stream, std::uint64_t index) {
  return derive_seed(root, static_cast<std::uint64_t>(stream), index);
}

/// Value of FUZZYSEG_SEED, if set. Throws InputError when it is not an unsigned integer.
std::optional<std::uint64_t> seed_from_env();

}  // namespace fuzzyseg
