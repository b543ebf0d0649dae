#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fuzzyseg/annotations.hpp"
#include "fuzzyseg/refiner.hpp"
#include "fuzzyseg/superpixels.hpp"

namespace fuzzyseg::cli {

using Json = nlohmann::json;

/// Reads a JSON config file; an empty path gives an empty object.
Json load_config(const std::filesystem::path& path);

/// Applies one `dotted.key=value` override. The value is parsed as JSON when
/// possible and taken as a string otherwise.
void apply_override(Json& config, const std::string& assignment);

/// Sets a dotted key, creating intermediate objects.
void set_path(Json& config, const std::string& dotted, Json value);

/// Looks up a dotted key; null when absent.
const Json* find_path(const Json& config, const std::string& dotted);

template <class T>
T get_or(const Json& config, const std::string& dotted, T fallback) {
  const Json* v = find_path(config, dotted);
  if (v == nullptr || v->is_null()) return fallback;
  try {
    return v->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InputError("config key '" + dotted + "' has the wrong type: " + v->dump());
  }
}

std::string get_string(const Json& config, const std::string& dotted, const std::string& fallback = "");

/// Seed from the config's "seed", else FUZZYSEG_SEED, else 0.
std::uint64_t resolve_seed(const Json& config);

RefineConfig refine_config_from(const Json& config);
SlicConfig slic_config_from(const Json& config, int height, int width);
ConstraintOptions constraint_options_from(const Json& config);

/// Throws InputError naming the path when it does not exist.
void require_file(const std::filesystem::path& path, const std::string& what);

}  // namespace fuzzyseg::cli
