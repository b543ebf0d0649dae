#include "run_config.hpp"

#include <fstream>
#include <sstream>

#include "fuzzyseg/error.hpp"
#include "fuzzyseg/seed.hpp"

namespace fuzzyseg::cli {

namespace {

std::vector<std::string> split_dots(const std::string& dotted) {
  std::vector<std::string> parts;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw InputError("malformed config key '" + dotted + "'");
    parts.push_back(part);
  }
  if (parts.empty()) throw InputError("empty config key");
  return parts;
}

}  // namespace

Json load_config(const std::filesystem::path& path) {
  if (path.empty()) return Json::object();
  require_file(path, "config file");
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string() + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw InputError(path.string() + ": config must be a JSON object");
  return j;
}

void set_path(Json& config, const std::string& dotted, Json value) {
  Json* node = &config;
  const auto parts = split_dots(dotted);
  for (std::size_t k = 0; k + 1 < parts.size(); ++k) {
    if (!node->is_object()) throw InputError("config key '" + dotted + "' descends into a non-object");
    node = &(*node)[parts[k]];
    if (node->is_null()) *node = Json::object();
  }
  if (!node->is_object()) throw InputError("config key '" + dotted + "' descends into a non-object");
  (*node)[parts.back()] = std::move(value);
}

void apply_override(Json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw InputError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  set_path(config, key, std::move(value));
}

const Json* find_path(const Json& config, const std::string& dotted) {
  const Json* node = &config;
  for (const auto& part : split_dots(dotted)) {
    if (!node->is_object()) return nullptr;
    const auto it = node->find(part);
    if (it == node->end()) return nullptr;
    node = &*it;
  }
  return node;
}

std::string get_string(const Json& config, const std::string& dotted, const std::string& fallback) {
  return get_or<std::string>(config, dotted, fallback);
}

std::uint64_t resolve_seed(const Json& config) {
  if (const Json* v = find_path(config, "seed"); v != nullptr && !v->is_null()) {
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
      throw InputError("config key 'seed' must be a non-negative integer");
    }
    return v->get<std::uint64_t>();
  }
  return seed_from_env().value_or(0);
}

RefineConfig refine_config_from(const Json& config) {
  RefineConfig r;
  r.learning_rate = get_or(config, "refine.learning_rate", r.learning_rate);
  r.steps = get_or(config, "refine.steps", r.steps);
  r.adam_beta1 = get_or(config, "refine.adam_beta1", r.adam_beta1);
  r.adam_beta2 = get_or(config, "refine.adam_beta2", r.adam_beta2);
  r.adam_eps = get_or(config, "refine.adam_eps", r.adam_eps);
  r.log_every = get_or(config, "refine.log_every", r.log_every);
  if (const Json* w = find_path(config, "refine.weights"); w != nullptr && !w->is_null()) {
    if (!w->is_object()) throw InputError("config key 'refine.weights' must map constraint names to numbers");
    for (const auto& [label, value] : w->items()) {
      if (!value.is_number()) throw InputError("config key 'refine.weights." + label + "' must be a number");
      r.constraint_weights[label] = value.get<double>();
    }
  }
  r.seed = resolve_seed(config);
  validate_refine_config(r);
  return r;
}

SlicConfig slic_config_from(const Json& config, int height, int width) {
  SlicConfig s = default_slic_config(height, width);
  s.k = get_or(config, "slic.k", s.k);
  s.compactness = get_or(config, "slic.compactness", s.compactness);
  s.max_iters = get_or(config, "slic.max_iters", s.max_iters);
  s.seed = resolve_seed(config);
  return s;
}

ConstraintOptions constraint_options_from(const Json& config) {
  ConstraintOptions opts;
  const Json* list = find_path(config, "constraints");
  if (list == nullptr || list->is_null()) {
    opts.families = {Family::Scribbles, Family::Bbox, Family::Background, Family::Neighborhood, Family::Fill};
  } else {
    if (!list->is_array()) throw InputError("config key 'constraints' must be a list of family names");
    for (const auto& v : *list) {
      if (!v.is_string()) throw InputError("config key 'constraints' must hold strings");
      const auto f = parse_family(v.get<std::string>());
      if (!f) throw InputError("unknown constraint family '" + v.get<std::string>() + "'");
      if (*f == Family::FullSupervision) throw InputError("constraint family 'fs' needs ground truth, not weak labels");
      opts.families.push_back(*f);
    }
    if (opts.families.empty()) throw InputError("config key 'constraints' is empty");
  }
  opts.corner_classes = get_or(config, "corner_classes", std::vector<int>{});
  return opts;
}

void require_file(const std::filesystem::path& path, const std::string& what) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) throw InputError(what + " not found: " + path.string());
}

}  // namespace fuzzyseg::cli
