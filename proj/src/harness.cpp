#include "fuzzyseg/harness.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "fuzzyseg/error.hpp"
#include "fuzzyseg/fuzzy.hpp"
#include "fuzzyseg/seed.hpp"
#include "fuzzyseg/superpixels.hpp"

namespace fuzzyseg {

namespace {

constexpr int kSynthClasses = 3;
constexpr double kColors[kSynthClasses][3] = {{0.25, 0.30, 0.35}, {0.75, 0.35, 0.25}, {0.35, 0.75, 0.55}};

LabelGrid render_scene(int h, int w, std::mt19937_64& rng) {
  if (h < 24 || w < 24) throw InputError("synthetic scenes need at least 24x24 pixels");
  LabelGrid gt(h, w, 0);
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  const int rh = uniform(h / 5, h / 2);
  const int rw = uniform(w / 5, w / 2);
  const int ri = uniform(0, h - rh);
  const int rj = uniform(0, w - rw);
  for (int i = ri; i < ri + rh; ++i) {
    for (int j = rj; j < rj + rw; ++j) gt(i, j) = 1;
  }

  const int ry = uniform(std::max(2, h / 16), std::max(3, h / 6));
  const int rx = uniform(std::max(2, w / 16), std::max(3, w / 6));
  const int cy = uniform(ry, h - 1 - ry);
  const int cx = uniform(rx, w - 1 - rx);
  for (int i = cy - ry; i <= cy + ry; ++i) {
    for (int j = cx - rx; j <= cx + rx; ++j) {
      const double dy = static_cast<double>(i - cy) / ry;
      const double dx = static_cast<double>(j - cx) / rx;
      if (dy * dy + dx * dx <= 1.0) gt(i, j) = 2;
    }
  }
  return gt;
}

Image render_image(const LabelGrid& gt, double noise, std::mt19937_64& rng) {
  Image img{gt.height(), gt.width(), 3, {}};
  img.data.resize(gt.pixels() * 3);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (std::size_t p = 0; p < gt.pixels(); ++p) {
    const int c = gt.labels()[p];
    for (int ch = 0; ch < 3; ++ch) {
      img.data[p * 3 + static_cast<std::size_t>(ch)] = std::clamp(kColors[c][ch] + noise * n01(rng), 0.0, 1.0);
    }
  }
  return img;
}

LabelGrid flip_labels(const LabelGrid& gt, int classes, double flip_prob, std::mt19937_64& rng) {
  LabelGrid noisy = gt;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<int> other(1, classes - 1);
  for (auto& l : noisy.labels()) {
    if (u01(rng) < flip_prob) l = (l + other(rng)) % classes;
  }
  return noisy;
}

std::string row_name(const std::optional<Family>& left_out) {
  return left_out ? "all \\ " + std::string(family_name(*left_out)) : std::string("all");
}

}  // namespace

LabelGrid synthetic_scene(int height, int width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return render_scene(height, width, rng);
}

std::vector<Sample> make_synthetic_dataset(const SynthConfig& cfg) {
  if (cfg.count < 1) throw InputError("synthetic dataset needs count >= 1");
  if (!(cfg.flip_prob >= 0.0 && cfg.flip_prob <= 1.0)) throw InputError("flip_prob must be in [0, 1]");
  if (!(cfg.confidence > 1.0 / kSynthClasses && cfg.confidence < 1.0)) {
    throw InputError("confidence must be in (1/3, 1)");
  }
  std::vector<Sample> samples(static_cast<std::size_t>(cfg.count));
  for (int k = 0; k < cfg.count; ++k) {
    auto& s = samples[static_cast<std::size_t>(k)];
    const auto idx = static_cast<std::uint64_t>(k);
    s.name = "synth_" + std::to_string(k);
    s.gt = synthetic_scene(cfg.height, cfg.width, derive_seed(cfg.seed, SeedStream::Synthesis, idx));

    std::mt19937_64 noise_rng(derive_seed(cfg.seed, SeedStream::Noise, idx));
    s.image = render_image(s.gt, cfg.image_noise, noise_rng);
    const LabelGrid noisy = flip_labels(s.gt, kSynthClasses, cfg.flip_prob, noise_rng);
    s.init = init_from_prob(one_hot_field(noisy, kSynthClasses, cfg.confidence), 1e-6);

    s.annotations.class_names = {"background", "rectangle", "ellipse"};
    s.annotations.background_class = 0;
    s.annotations.height = cfg.height;
    s.annotations.width = cfg.width;
    s.annotations.boxes = derive_boxes_from_gt(s.gt, 0);
    s.annotations.points = sample_points_from_gt(s.gt, cfg.points_per_class, derive_seed(cfg.seed, SeedStream::Points, idx));
    s.annotations.scribbles = promote_points(s.annotations.points);

    s.superpixels = slic(s.image, default_slic_config(cfg.height, cfg.width));
  }
  return samples;
}

std::vector<Formula> build_dataset_formulas(std::span<const Sample> samples, const ConstraintOptions& options) {
  std::vector<Formula> formulas;
  formulas.reserve(samples.size());
  for (const auto& s : samples) {
    const auto* sp = s.superpixels ? &*s.superpixels : nullptr;
    formulas.push_back(conjoin(build_constraint_families(s.annotations, s.init.shape(), sp, options)));
  }
  return formulas;
}

DatasetRun refine_dataset(std::span<const Sample> samples, const ConstraintOptions& options, const RefineConfig& config) {
  if (samples.empty()) throw InputError("dataset is empty");
  const auto formulas = build_dataset_formulas(samples, options);
  std::vector<RefineJob> jobs;
  for (std::size_t k = 0; k < samples.size(); ++k) jobs.push_back({&samples[k].init, &formulas[k]});
  const auto results = refine_batch(jobs, config);

  const int classes = samples.front().init.classes();
  DatasetRun run{{}, {}, ConfusionAccumulator(classes), ConfusionAccumulator(classes), {}, {}};
  for (std::size_t k = 0; k < samples.size(); ++k) {
    run.initial_masks.push_back(extract_mask(samples[k].init));
    run.final_masks.push_back(extract_mask(results[k].logits));
    run.initial.add(run.initial_masks.back(), samples[k].gt);
    run.final.add(run.final_masks.back(), samples[k].gt);
    for (const auto& [label, ok] : eval_discrete_by_label(formulas[k], run.initial_masks.back())) {
      run.initial_satisfaction[label] += ok ? 1.0 : 0.0;
    }
    for (const auto& [label, ok] : eval_discrete_by_label(formulas[k], run.final_masks.back())) {
      run.final_satisfaction[label] += ok ? 1.0 : 0.0;
    }
  }
  const auto n = static_cast<double>(samples.size());
  for (auto& [label, v] : run.initial_satisfaction) v /= n;
  for (auto& [label, v] : run.final_satisfaction) v /= n;
  return run;
}

namespace {

void check_spec(const AblationSpec& spec, std::span<const Sample> dataset) {
  if (dataset.empty()) throw InputError("dataset is empty");
  if (spec.full_set.empty()) throw InputError("ablation needs a non-empty constraint set");
  if (spec.leave_out &&
      std::find(spec.full_set.begin(), spec.full_set.end(), *spec.leave_out) == spec.full_set.end()) {
    throw InputError("left-out family '" + std::string(family_name(*spec.leave_out)) + "' is not in the full set");
  }
}

double score_without(const AblationSpec& spec, std::optional<Family> left_out, std::span<const Sample> dataset,
                     const RefineConfig& config) {
  std::vector<Family> families;
  for (const auto f : spec.full_set) {
    if (!left_out || f != *left_out) families.push_back(f);
  }
  const ConstraintOptions options{families, spec.corner_classes};
  return scores_of(refine_dataset(dataset, options, config).final).mean_iou;
}

}  // namespace

std::vector<AblationRow> run_ablation(const AblationSpec& spec, std::span<const Sample> dataset, const RefineConfig& config) {
  check_spec(spec, dataset);
  const double base = score_without(spec, std::nullopt, dataset, config);
  std::vector<AblationRow> rows{{std::nullopt, base, 0.0}};
  if (spec.leave_out) {
    const double m = score_without(spec, spec.leave_out, dataset, config);
    rows.push_back({spec.leave_out, m, m - base});
  }
  return rows;
}

std::vector<AblationRow> run_leave_one_out(const AblationSpec& spec, std::span<const Sample> dataset,
                                           const RefineConfig& config) {
  check_spec(spec, dataset);
  const double base = score_without(spec, std::nullopt, dataset, config);
  std::vector<AblationRow> rows{{std::nullopt, base, 0.0}};
  for (const auto f : spec.full_set) {
    const double m = score_without(spec, f, dataset, config);
    rows.push_back({f, m, m - base});
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "constraints,mIoU,dmIoU\n";
  for (const auto& r : rows) os << row_name(r.left_out) << ',' << r.mean_iou << ',' << r.delta << '\n';
  return os.str();
}

}  // namespace fuzzyseg
