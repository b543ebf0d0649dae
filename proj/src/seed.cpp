#include "fuzzyseg/seed.hpp"

#include <charconv>
#include <cstdlib>
#include <string>
#include <string_view>

#include "fuzzyseg/error.hpp"

namespace fuzzyseg {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(root) ^ stream) ^ index);
}

std::optional<std::uint64_t> seed_from_env() {
  const char* raw = std::getenv("FUZZYSEG_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  const std::string_view text(raw);
  std::uint64_t value = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw InputError("FUZZYSEG_SEED must be an unsigned integer, got '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace fuzzyseg
