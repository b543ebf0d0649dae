#include "fuzzyseg/c_api.h"

#include <algorithm>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include "fuzzyseg/annotations.hpp"
#include "fuzzyseg/fuzzy.hpp"

struct fuzzyseg_engine {
  fuzzyseg::CompiledFormula compiled;
};

namespace {

thread_local std::string last_error;

void set_error(const char* what) { last_error = what; }

std::vector<fuzzyseg::Family> families_of(uint32_t flags) {
  using fuzzyseg::Family;
  constexpr std::pair<uint32_t, Family> table[] = {
      {FUZZYSEG_SCRIBBLES, Family::Scribbles},       {FUZZYSEG_BBOX_SHALLOW, Family::BboxShallow},
      {FUZZYSEG_BBOX, Family::Bbox},                 {FUZZYSEG_BACKGROUND, Family::Background},
      {FUZZYSEG_NEIGHBORHOOD, Family::Neighborhood}, {FUZZYSEG_FILL, Family::Fill},
      {FUZZYSEG_BORDERS, Family::Borders},           {FUZZYSEG_CORNERS, Family::Corners},
  };
  uint32_t known = 0;
  std::vector<Family> out;
  for (const auto& [bit, family] : table) {
    known |= bit;
    if (flags & bit) out.push_back(family);
  }
  if (flags & ~known) throw fuzzyseg::InputError("unknown constraint flag bits " + std::to_string(flags & ~known));
  return out;
}

}  // namespace

extern "C" {

fuzzyseg_engine* fuzzyseg_compile(const char* annotation_json, int height, int width, int classes, uint32_t flags,
                                  const int32_t* superpixels) {
  try {
    if (annotation_json == nullptr) throw fuzzyseg::InputError("annotation JSON is null");
    const fuzzyseg::GridShape shape{height, width, classes};
    fuzzyseg::validate_shape(shape);
    const auto set = fuzzyseg::parse_annotations(annotation_json, "<annotations>", height, width);
    std::optional<fuzzyseg::SuperpixelMap> sp;
    if (superpixels != nullptr) {
      sp.emplace(height, width, std::vector<int>(superpixels, superpixels + shape.pixels()));
    }
    const fuzzyseg::ConstraintOptions options{families_of(flags), {}};
    const auto formula =
        fuzzyseg::conjoin(fuzzyseg::build_constraint_families(set, shape, sp ? &*sp : nullptr, options));
    return new fuzzyseg_engine{fuzzyseg::CompiledFormula(formula, shape)};
  } catch (const std::exception& e) {
    set_error(e.what());
  } catch (...) {
    set_error("unknown error");
  }
  return nullptr;
}

size_t fuzzyseg_engine_size(const fuzzyseg_engine* engine) {
  return engine == nullptr ? 0 : engine->compiled.shape().size();
}

int fuzzyseg_loss_and_grad(const fuzzyseg_engine* engine, const double* logits, size_t n, double* loss, double* grad) {
  try {
    if (engine == nullptr) throw fuzzyseg::InputError("engine is null");
    if (loss == nullptr) throw fuzzyseg::InputError("loss output is null");
    const auto& shape = engine->compiled.shape();
    if (n != shape.size()) {
      throw fuzzyseg::InputError("logits buffer has " + std::to_string(n) + " values, expected " +
                                 std::to_string(shape.size()));
    }
    if (logits == nullptr) throw fuzzyseg::InputError("logits buffer is null");
    const fuzzyseg::LogitField field(shape, std::vector<double>(logits, logits + n));
    fuzzyseg::check_finite(field);
    const auto result = engine->compiled.loss_and_grad(field);
    *loss = result.loss;
    if (grad != nullptr) {
      const auto g = result.grad.values();
      std::copy(g.begin(), g.end(), grad);
    }
    return 0;
  } catch (const std::exception& e) {
    set_error(e.what());
  } catch (...) {
    set_error("unknown error");
  }
  return 1;
}

void fuzzyseg_release(fuzzyseg_engine* engine) { delete engine; }

const char* fuzzyseg_last_error(void) { return last_error.c_str(); }

}  // extern "C"
