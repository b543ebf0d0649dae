#include "cli.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "fuzzyseg/annotations.hpp"
#include "fuzzyseg/error.hpp"
#include "fuzzyseg/fuzzy.hpp"
#include "fuzzyseg/harness.hpp"
#include "fuzzyseg/image_io.hpp"
#include "fuzzyseg/metrics.hpp"
#include "fuzzyseg/oracle.hpp"
#include "fuzzyseg/pft.hpp"
#include "fuzzyseg/refiner.hpp"
#include "fuzzyseg/seed.hpp"
#include "fuzzyseg/superpixels.hpp"
#include "run_config.hpp"

namespace fuzzyseg::cli {

namespace fs = std::filesystem;

namespace {

// Options shared by every command: config file, overrides, seed and jobs.
struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "JSON config file");
  cmd->add_option("--set", c.overrides, "Override a config key, e.g. --set refine.steps=200")->type_name("KEY=VALUE");
  cmd->add_option("--seed", c.seed, "Root seed (falls back to the config, then FUZZYSEG_SEED)");
  cmd->add_option("-j,--jobs", c.jobs, "Worker threads (default: logical cores)")->check(CLI::PositiveNumber);
}

// Loads the config, applies --set, then records the base directory that
// relative paths inside the file resolve against.
struct Loaded {
  Json config;
  fs::path base;
};

Loaded load(const Common& c) {
  Loaded l{load_config(c.config_path), c.config_path.empty() ? fs::current_path() : fs::absolute(c.config_path).parent_path()};
  for (const auto& o : c.overrides) apply_override(l.config, o);
  if (c.seed) l.config["seed"] = *c.seed;
  if (c.jobs) omp_set_num_threads(*c.jobs);
  return l;
}

// Flags are absolute so they beat the file without being re-rooted.
void set_flag_path(Json& config, const std::string& key, const std::string& value) {
  if (!value.empty()) set_path(config, key, fs::absolute(value).string());
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

// Item keys fall back to the top level so single-image configs need no "items".
std::string item_string(const Json& item, const Json& top, const std::string& key) {
  const std::string v = get_string(item, key);
  return v.empty() && &item != &top ? get_string(top, key) : v;
}

std::vector<Json> items_of(const Json& config) {
  const Json* items = find_path(config, "items");
  if (items == nullptr || items->is_null()) return {config};
  if (!items->is_array() || items->empty()) throw InputError("config key 'items' must be a non-empty list");
  return std::vector<Json>(items->begin(), items->end());
}

Json family_list(const std::string& text) {
  Json list = Json::array();
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) list.push_back(part);
  }
  return list;
}

bool needs_superpixels(const ConstraintOptions& opts) {
  return std::find(opts.families.begin(), opts.families.end(), Family::Borders) != opts.families.end();
}

std::string index_name(const std::string& prefix, std::size_t k) { return prefix + "[" + std::to_string(k) + "]"; }

// One image's inputs, resolved from an item of the config.
Sample load_sample(const Json& item, const Json& top, const fs::path& base, const ConstraintOptions& opts,
                   const std::vector<std::string>* palette, bool need_gt, const std::string& name) {
  Sample s;
  s.name = name;
  const std::string probs = item_string(item, top, "probs");
  const std::string logits = item_string(item, top, "logits");
  if (probs.empty() == logits.empty()) throw InputError(name + ": give exactly one of 'probs' or 'logits'");
  if (!probs.empty()) {
    const auto path = resolve(base, probs);
    require_file(path, "probability field");
    s.init = init_from_prob(read_prob_field(path), get_or(top, "init_floor", 1e-6));
  } else {
    const auto path = resolve(base, logits);
    require_file(path, "logit field");
    s.init = read_logit_field(path);
    check_finite(s.init);
  }
  const auto shape = s.init.shape();

  const std::string ann = item_string(item, top, "annotations");
  if (ann.empty()) throw InputError(name + ": missing 'annotations'");
  const auto ann_path = resolve(base, ann);
  require_file(ann_path, "annotation file");
  s.annotations = load_annotations(ann_path, shape.height, shape.width, palette);

  const std::string image = item_string(item, top, "image");
  if (!image.empty()) {
    const auto path = resolve(base, image);
    require_file(path, "image");
    s.image = read_image(path);
    if (s.image.height != shape.height || s.image.width != shape.width) {
      throw InputError(path.string() + ": image size does not match the field");
    }
  }
  if (needs_superpixels(opts)) {
    const std::string sp = item_string(item, top, "superpixels");
    if (!sp.empty()) {
      const auto path = resolve(base, sp);
      require_file(path, "superpixel map");
      s.superpixels = load_superpixels(path, shape.height, shape.width);
    } else if (!image.empty()) {
      s.superpixels = slic(s.image, slic_config_from(top, shape.height, shape.width));
    } else {
      throw InputError(name + ": the borders constraint needs 'superpixels' or 'image'");
    }
  }
  if (need_gt) {
    const std::string gt = item_string(item, top, "gt");
    if (gt.empty()) throw InputError(name + ": missing 'gt'");
    const auto path = resolve(base, gt);
    require_file(path, "ground-truth mask");
    s.gt = read_label_pgm(path);
    if (s.gt.height() != shape.height || s.gt.width() != shape.width) {
      throw InputError(path.string() + ": mask size does not match the field");
    }
  }
  return s;
}

std::optional<std::vector<std::string>> load_palette_from(const Json& config, const fs::path& base) {
  const std::string p = get_string(config, "palette");
  if (p.empty()) return std::nullopt;
  const auto path = resolve(base, p);
  require_file(path, "palette");
  return load_palette(path);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw Error("failed writing " + path.string());
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

// ---------------------------------------------------------------- refine

struct RefineFlags {
  Common common;
  std::string probs, logits, image, annotations, palette, superpixels, out_mask, trace, out_logits, constraints;
  std::optional<int> steps;
  std::optional<double> lr;
};

int cmd_refine(const RefineFlags& f) {
  auto [config, base] = load(f.common);
  set_flag_path(config, "probs", f.probs);
  set_flag_path(config, "logits", f.logits);
  set_flag_path(config, "image", f.image);
  set_flag_path(config, "annotations", f.annotations);
  set_flag_path(config, "palette", f.palette);
  set_flag_path(config, "superpixels", f.superpixels);
  set_flag_path(config, "out_mask", f.out_mask);
  set_flag_path(config, "trace", f.trace);
  set_flag_path(config, "out_logits", f.out_logits);
  if (!f.constraints.empty()) config["constraints"] = family_list(f.constraints);
  if (f.steps) set_path(config, "refine.steps", *f.steps);
  if (f.lr) set_path(config, "refine.learning_rate", *f.lr);

  const auto opts = constraint_options_from(config);
  const auto rcfg = refine_config_from(config);
  const auto palette = load_palette_from(config, base);
  const auto items = items_of(config);

  std::vector<Sample> samples;
  std::vector<Formula> formulas;
  for (std::size_t k = 0; k < items.size(); ++k) {
    const std::string name = items.size() == 1 ? "input" : index_name("items", k);
    if (item_string(items[k], config, "out_mask").empty()) throw InputError(name + ": missing 'out_mask'");
    samples.push_back(load_sample(items[k], config, base, opts, palette ? &*palette : nullptr, false, name));
    const auto& s = samples.back();
    formulas.push_back(conjoin(build_constraint_families(s.annotations, s.init.shape(), s.superpixels ? &*s.superpixels : nullptr, opts)));
  }
  std::vector<RefineJob> jobs;
  for (std::size_t k = 0; k < samples.size(); ++k) jobs.push_back({&samples[k].init, &formulas[k]});
  const auto results = refine_batch(jobs, rcfg);

  for (std::size_t k = 0; k < items.size(); ++k) {
    const auto& r = results[k];
    const auto mask_path = resolve(base, item_string(items[k], config, "out_mask"));
    ensure_parent(mask_path);
    write_label_pgm(mask_path, extract_mask(r.logits));
    if (const auto t = item_string(items[k], config, "trace"); !t.empty()) {
      const auto path = resolve(base, t);
      ensure_parent(path);
      write_trace(path, r.trace);
    }
    if (const auto o = item_string(items[k], config, "out_logits"); !o.empty()) {
      const auto path = resolve(base, o);
      ensure_parent(path);
      write_logit_field(path, r.logits);
    }
    const auto& first = r.trace.records.front();
    const auto& last = r.trace.records.back();
    std::printf("%s: loss %.6g -> %.6g after %d steps, mask %s\n", samples[k].name.c_str(), first.loss, last.loss,
                last.step, mask_path.string().c_str());
  }
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateFlags {
  Common common;
  std::vector<std::string> pred, gt;
  std::optional<int> classes;
  std::string palette, csv, json;
};

int cmd_evaluate(const EvaluateFlags& f) {
  auto [config, base] = load(f.common);
  auto paths = [&](const std::vector<std::string>& flag, const std::string& key) {
    std::vector<fs::path> out;
    if (!flag.empty()) {
      for (const auto& p : flag) out.push_back(fs::absolute(p));
    } else {
      for (const auto& p : get_or(config, key, std::vector<std::string>{})) out.push_back(resolve(base, p));
    }
    return out;
  };
  const auto preds = paths(f.pred, "pred");
  const auto gts = paths(f.gt, "gt");
  if (preds.empty()) throw InputError("no predicted masks given (--pred or config 'pred')");
  if (preds.size() != gts.size()) {
    throw InputError("got " + std::to_string(preds.size()) + " predicted masks but " + std::to_string(gts.size()) +
                     " ground-truth masks");
  }
  set_flag_path(config, "palette", f.palette);
  if (f.classes) config["classes"] = *f.classes;
  const auto palette = load_palette_from(config, base);

  std::vector<std::pair<LabelGrid, LabelGrid>> pairs;
  int classes = get_or(config, "classes", 0);
  for (std::size_t k = 0; k < preds.size(); ++k) {
    require_file(preds[k], "predicted mask");
    require_file(gts[k], "ground-truth mask");
    pairs.emplace_back(read_label_pgm(preds[k]), read_label_pgm(gts[k]));
    if (!f.classes && find_path(config, "classes") == nullptr) {
      classes = std::max({classes, pairs.back().first.max_label_plus_one(), pairs.back().second.max_label_plus_one()});
    }
  }
  if (palette && find_path(config, "classes") == nullptr) classes = std::max(classes, static_cast<int>(palette->size()));
  if (classes < 1) throw InputError("class count must be positive");

  std::vector<ConfusionAccumulator> accs(pairs.size(), ConfusionAccumulator(classes));
  const auto n = static_cast<long>(pairs.size());
  std::vector<std::string> errors(pairs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long k = 0; k < n; ++k) {
    const auto idx = static_cast<std::size_t>(k);
    try {
      accs[idx].add(pairs[idx].first, pairs[idx].second);
    } catch (const std::exception& e) {
      errors[idx] = preds[idx].string() + ": " + e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw InputError(e);
  }
  const auto scores = mean_over_dataset(accs);
  const auto names = palette ? *palette : std::vector<std::string>{};
  const std::string csv_out = f.csv.empty() ? get_string(config, "csv") : fs::absolute(f.csv).string();
  const std::string json_out = f.json.empty() ? get_string(config, "json") : fs::absolute(f.json).string();
  if (csv_out.empty()) {
    std::cout << scores_csv(scores, names);
  } else {
    write_text(resolve(base, csv_out), scores_csv(scores, names));
  }
  if (!json_out.empty()) write_text(resolve(base, json_out), scores_json(scores, names));
  return 0;
}

// ---------------------------------------------------------------- ablate

struct AblateFlags {
  Common common;
  std::string constraints, leave_out, out;
  std::optional<int> synthetic;
  std::optional<int> steps;
  std::optional<double> lr;
};

int cmd_ablate(const AblateFlags& f) {
  auto [config, base] = load(f.common);
  if (!f.constraints.empty()) config["constraints"] = family_list(f.constraints);
  if (!f.leave_out.empty()) config["leave_out"] = f.leave_out;
  if (f.synthetic) set_path(config, "synthetic.count", *f.synthetic);
  if (f.steps) set_path(config, "refine.steps", *f.steps);
  if (f.lr) set_path(config, "refine.learning_rate", *f.lr);
  if (!find_path(config, "constraints")) {
    config["constraints"] = {"scribbles", "bbox", "background", "neighborhood", "fill", "borders"};
  }

  const auto opts = constraint_options_from(config);
  const auto rcfg = refine_config_from(config);
  AblationSpec spec{opts.families, std::nullopt, opts.corner_classes};
  const std::string leave = get_string(config, "leave_out", "each");

  std::vector<Sample> dataset;
  if (find_path(config, "synthetic.count")) {
    SynthConfig sc;
    sc.count = get_or(config, "synthetic.count", sc.count);
    sc.height = get_or(config, "synthetic.height", sc.height);
    sc.width = get_or(config, "synthetic.width", sc.width);
    sc.flip_prob = get_or(config, "synthetic.flip_prob", sc.flip_prob);
    sc.confidence = get_or(config, "synthetic.confidence", sc.confidence);
    sc.seed = resolve_seed(config);
    dataset = make_synthetic_dataset(sc);
  } else {
    const auto palette = load_palette_from(config, base);
    const auto items = items_of(config);
    for (std::size_t k = 0; k < items.size(); ++k) {
      dataset.push_back(load_sample(items[k], config, base, opts, palette ? &*palette : nullptr, true, index_name("items", k)));
    }
  }

  std::vector<AblationRow> rows;
  if (leave == "each") {
    rows = run_leave_one_out(spec, dataset, rcfg);
  } else if (leave == "none") {
    rows = run_ablation(spec, dataset, rcfg);
  } else {
    const auto fam = parse_family(leave);
    if (!fam) throw InputError("unknown constraint family '" + leave + "' for leave_out");
    spec.leave_out = *fam;
    rows = run_ablation(spec, dataset, rcfg);
  }
  const std::string out = f.out.empty() ? get_string(config, "out") : fs::absolute(f.out).string();
  if (out.empty()) {
    std::cout << ablation_csv(rows);
  } else {
    write_text(resolve(base, out), ablation_csv(rows));
  }
  return 0;
}

// ---------------------------------------------------------------- gen-weak

struct GenWeakFlags {
  Common common;
  std::vector<std::string> gt, out;
  std::string palette;
  std::optional<int> points;
  std::optional<double> jitter;
  std::optional<int> background;
  bool no_scribbles = false;
};

int cmd_gen_weak(const GenWeakFlags& f) {
  auto [config, base] = load(f.common);
  auto paths = [&](const std::vector<std::string>& flag, const std::string& key) {
    std::vector<fs::path> v;
    if (!flag.empty()) {
      for (const auto& p : flag) v.push_back(fs::absolute(p));
    } else {
      for (const auto& p : get_or(config, key, std::vector<std::string>{})) v.push_back(resolve(base, p));
    }
    return v;
  };
  const auto gts = paths(f.gt, "gt");
  const auto outs = paths(f.out, "out");
  if (gts.empty()) throw InputError("no ground-truth masks given (--gt or config 'gt')");
  if (gts.size() != outs.size()) {
    throw InputError("got " + std::to_string(gts.size()) + " masks but " + std::to_string(outs.size()) + " output paths");
  }
  set_flag_path(config, "palette", f.palette);
  if (f.points) config["points"] = *f.points;
  if (f.jitter) config["jitter"] = *f.jitter;
  if (f.background) config["background"] = *f.background;
  if (f.no_scribbles) config["scribbles"] = false;

  const int k_points = get_or(config, "points", 3);
  if (k_points < 0) throw InputError("points must be >= 0");
  const int background = get_or(config, "background", 0);
  // Negative means no jitter.
  const double jitter = get_or(config, "jitter", -1.0);
  if (jitter >= 0.0 && !(jitter > 0.0 && jitter <= 1.0)) throw InputError("jitter overlap must be in (0, 1]");
  const bool scribbles = get_or(config, "scribbles", true);
  const auto palette = load_palette_from(config, base);
  const std::uint64_t seed = resolve_seed(config);

  for (std::size_t k = 0; k < gts.size(); ++k) {
    require_file(gts[k], "ground-truth mask");
    const LabelGrid gt = read_label_pgm(gts[k]);
    AnnotationSet set;
    const int classes = std::max({gt.max_label_plus_one(), background + 1, palette ? static_cast<int>(palette->size()) : 0});
    if (palette) {
      if (static_cast<int>(palette->size()) < classes) throw InputError(gts[k].string() + ": mask uses classes beyond the palette");
      set.class_names = *palette;
    } else {
      for (int c = 0; c < classes; ++c) set.class_names.push_back("class" + std::to_string(c));
    }
    set.background_class = background;
    set.height = gt.height();
    set.width = gt.width();
    set.boxes = derive_boxes_from_gt(gt, background);
    if (jitter > 0.0) {
      for (std::size_t b = 0; b < set.boxes.size(); ++b) {
        JitterSpec js{jitter, derive_seed(seed, SeedStream::Jitter, k * 4096 + b)};
        set.boxes[b] = jitter_box(set.boxes[b], gt, js).box;
      }
    }
    set.points = sample_points_from_gt(gt, k_points, derive_seed(seed, SeedStream::Points, k));
    if (scribbles) set.scribbles = promote_points(set.points);
    ensure_parent(outs[k]);
    save_annotations(outs[k], set);
    std::printf("%s: %zu boxes, %zu points -> %s\n", gts[k].string().c_str(), set.boxes.size(), set.points.size(),
                outs[k].string().c_str());
  }
  return 0;
}

// ---------------------------------------------------------------- oracle-check

struct OracleFlags {
  Common common;
  std::optional<int> instances;
  std::string families, json;
};

struct OracleRow {
  Family family;
  int index;
  GridShape shape;
  double fuzzy;
  double exact;
};

ProbField random_field(const GridShape& shape, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 2.0);
  LogitField logits(shape);
  for (auto& v : logits.values()) v = n(rng);
  return softmax_field(logits);
}

BoundingBox random_box(const GridShape& shape, int min_side, std::mt19937_64& rng) {
  auto u = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  BoundingBox b;
  b.i1 = u(0, shape.height - min_side);
  b.i2 = u(b.i1 + min_side - 1, shape.height - 1);
  b.j1 = u(0, shape.width - min_side);
  b.j2 = u(b.j1 + min_side - 1, shape.width - 1);
  b.target_class = u(1, shape.classes - 1);
  return b;
}

Formula random_instance(Family fam, const GridShape& shape, std::mt19937_64& rng) {
  auto u = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  switch (fam) {
    case Family::FullSupervision: {
      LabelGrid gt(shape.height, shape.width);
      for (auto& l : gt.labels()) l = u(0, shape.classes - 1);
      return build_full_supervision(gt, shape.classes);
    }
    case Family::Scribbles: {
      Scribble s;
      s.target_class = u(0, shape.classes - 1);
      for (int i = 0; i < shape.height; ++i) {
        for (int j = 0; j < shape.width; ++j) {
          if (u(0, 1) == 1) s.pixels.push_back({i, j});
        }
      }
      if (s.pixels.empty()) s.pixels.push_back({u(0, shape.height - 1), u(0, shape.width - 1)});
      return build_scribble(s, shape);
    }
    case Family::BboxShallow:
      return build_bbox_shallow(random_box(shape, 1, rng), shape);
    case Family::Bbox:
      return build_bbox_tight(random_box(shape, 1, rng), shape);
    case Family::Background: {
      std::vector<BoundingBox> boxes{random_box(shape, 1, rng)};
      return build_background(boxes, 0, shape);
    }
    case Family::Neighborhood:
      return build_neighborhood(shape.height, shape.width);
    case Family::Fill:
      return build_fill(shape.height, shape.width);
    case Family::Borders: {
      std::vector<int> labels(shape.pixels());
      for (auto& l : labels) l = u(0, 1);
      return build_borders(relabel_contiguous(shape.height, shape.width, std::move(labels)));
    }
    case Family::Corners:
      return build_corners(random_box(shape, 2, rng), shape);
  }
  throw Error("unhandled family");
}

bool independent_atoms(Family f) {
  return f == Family::FullSupervision || f == Family::Scribbles || f == Family::BboxShallow || f == Family::Background ||
         f == Family::Corners;
}

int cmd_oracle_check(const OracleFlags& f) {
  auto [config, base] = load(f.common);
  if (f.instances) config["instances"] = *f.instances;
  if (!f.families.empty()) config["families"] = family_list(f.families);
  set_flag_path(config, "json", f.json);

  const int count = get_or(config, "instances", 20);
  if (count < 1) throw InputError("instances must be >= 1");
  const int max_size = get_or(config, "max_size", 3);
  const int max_classes = get_or(config, "max_classes", 3);
  if (max_size < 2 || max_size > 3) throw InputError("max_size must be 2 or 3");
  if (max_classes < 2 || max_classes > 3) throw InputError("max_classes must be 2 or 3");
  std::vector<Family> families;
  if (const Json* list = find_path(config, "families"); list != nullptr && !list->is_null()) {
    for (const auto& v : *list) {
      const auto fam = parse_family(v.get<std::string>());
      if (!fam) throw InputError("unknown constraint family '" + v.get<std::string>() + "'");
      families.push_back(*fam);
    }
  } else {
    families = all_families();
  }
  const std::uint64_t seed = resolve_seed(config);

  std::vector<OracleRow> rows;
  for (std::size_t fi = 0; fi < families.size(); ++fi) {
    const Family fam = families[fi];
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(fam) + 100, 0));
    for (int k = 0; k < count; ++k) {
      auto u = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
      const int min_side = fam == Family::Corners ? 2 : 1;
      GridShape shape{u(min_side, max_size), u(min_side, max_size), u(2, max_classes)};
      if (fam == Family::Neighborhood && shape.pixels() == 1) shape.width = 2;
      const Formula phi = random_instance(fam, shape, rng);
      const ProbField probs = random_field(shape, rng);
      const double fuzzy = eval_fuzzy(phi, probs).log_prob;
      const double exact = std::log(exact_prob(phi, probs));
      rows.push_back({fam, k, shape, fuzzy, exact});
    }
  }

  bool ok = true;
  std::printf("%-14s %5s %5s %14s %14s %12s\n", "family", "index", "shape", "fuzzy", "exact", "gap");
  for (const auto& r : rows) {
    std::printf("%-14s %5d %dx%dx%d %14.9f %14.9f %12.3e\n", std::string(family_name(r.family)).c_str(), r.index,
                r.shape.height, r.shape.width, r.shape.classes, r.fuzzy, r.exact, std::abs(r.fuzzy - r.exact));
  }
  std::printf("\n%-14s %12s %s\n", "family", "max gap", "check");
  for (const Family fam : families) {
    double worst = 0.0;
    for (const auto& r : rows) {
      if (r.family != fam) continue;
      const double gap = std::isinf(r.exact) && std::isinf(r.fuzzy) ? 0.0 : std::abs(r.fuzzy - r.exact);
      worst = std::max(worst, gap);
    }
    const bool exact_family = independent_atoms(fam);
    const bool pass = !exact_family || worst < 1e-9;
    ok = ok && pass;
    std::printf("%-14s %12.3e %s\n", std::string(family_name(fam)).c_str(), worst,
                exact_family ? (pass ? "exact: ok" : "exact: FAILED") : "approximate");
  }
  if (const std::string out = get_string(config, "json"); !out.empty()) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      j.push_back({{"family", family_name(r.family)},
                   {"index", r.index},
                   {"h", r.shape.height},
                   {"w", r.shape.width},
                   {"c", r.shape.classes},
                   {"fuzzy", r.fuzzy},
                   {"exact", r.exact}});
    }
    write_text(resolve(base, out), j.dump(2) + "\n");
  }
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------- synth

struct SynthFlags {
  Common common;
  std::string out_dir;
  std::optional<int> count, size;
};

int cmd_synth(const SynthFlags& f) {
  auto [config, base] = load(f.common);
  if (f.count) set_path(config, "synthetic.count", *f.count);
  if (f.size) {
    set_path(config, "synthetic.height", *f.size);
    set_path(config, "synthetic.width", *f.size);
  }
  const std::string dir_text = f.out_dir.empty() ? get_string(config, "out_dir") : f.out_dir;
  if (dir_text.empty()) throw InputError("missing output directory (--out-dir)");
  const fs::path dir = fs::absolute(dir_text);

  SynthConfig sc;
  sc.count = get_or(config, "synthetic.count", 4);
  sc.height = get_or(config, "synthetic.height", sc.height);
  sc.width = get_or(config, "synthetic.width", sc.width);
  sc.flip_prob = get_or(config, "synthetic.flip_prob", sc.flip_prob);
  sc.confidence = get_or(config, "synthetic.confidence", sc.confidence);
  sc.seed = resolve_seed(config);
  const auto samples = make_synthetic_dataset(sc);

  fs::create_directories(dir);
  write_text(dir / "palette.json", nlohmann::json(samples.front().annotations.class_names).dump() + "\n");
  nlohmann::ordered_json items = nlohmann::ordered_json::array();
  for (const auto& s : samples) {
    write_image(dir / (s.name + ".ppm"), s.image);
    write_label_pgm(dir / (s.name + "_gt.pgm"), s.gt);
    write_prob_field(dir / (s.name + "_probs.pft"), softmax_field(s.init));
    save_annotations(dir / (s.name + ".json"), s.annotations);
    save_superpixels(dir / (s.name + "_sp.pft"), *s.superpixels);
    items.push_back({{"image", s.name + ".ppm"},
                     {"probs", s.name + "_probs.pft"},
                     {"annotations", s.name + ".json"},
                     {"superpixels", s.name + "_sp.pft"},
                     {"gt", s.name + "_gt.pgm"},
                     {"out_mask", "out/" + s.name + "_mask.pgm"},
                     {"trace", "out/" + s.name + "_trace.jsonl"}});
  }
  nlohmann::ordered_json run;
  run["constraints"] = {"scribbles", "bbox", "background", "neighborhood", "fill", "borders"};
  run["refine"] = {{"learning_rate", 0.05}, {"steps", 150}, {"log_every", 10}};
  run["seed"] = sc.seed;
  run["items"] = std::move(items);
  write_text(dir / "config.json", run.dump(2) + "\n");
  std::printf("wrote %d samples and config.json to %s\n", sc.count, dir.string().c_str());
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Fuzzy-logic constraint refinement for weakly supervised segmentation", "fuzzyseg"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "fuzzyseg 0.1.0");

  RefineFlags rf;
  auto* refine = app.add_subcommand("refine", "Refine a probability or logit field under weak-label constraints");
  add_common(refine, rf.common);
  refine->add_option("--probs", rf.probs, "Starting probability field (PFT)");
  refine->add_option("--logits", rf.logits, "Starting logit field (PFT)");
  refine->add_option("--image", rf.image, "Image (PGM/PPM) used for SLIC superpixels");
  refine->add_option("--annotations", rf.annotations, "Annotation JSON");
  refine->add_option("--palette", rf.palette, "Class-name palette JSON");
  refine->add_option("--superpixels", rf.superpixels, "Superpixel map (PFT, one channel)");
  refine->add_option("--out-mask", rf.out_mask, "Refined mask (PGM)");
  refine->add_option("--trace", rf.trace, "Trace output (JSON lines)");
  refine->add_option("--out-logits", rf.out_logits, "Refined logit field (PFT)");
  refine->add_option("--constraints", rf.constraints, "Comma-separated constraint families");
  refine->add_option("--steps", rf.steps, "Optimizer steps");
  refine->add_option("--lr", rf.lr, "Learning rate");

  EvaluateFlags ef;
  auto* evaluate = app.add_subcommand("evaluate", "Score predicted masks against ground truth (IoU, Dice)");
  add_common(evaluate, ef.common);
  evaluate->add_option("--pred", ef.pred, "Predicted masks (PGM)");
  evaluate->add_option("--gt", ef.gt, "Ground-truth masks (PGM), same order as --pred");
  evaluate->add_option("--classes", ef.classes, "Class count (default: largest label + 1)");
  evaluate->add_option("--palette", ef.palette, "Class-name palette JSON");
  evaluate->add_option("--csv", ef.csv, "Write class,iou,dice CSV here instead of stdout");
  evaluate->add_option("--json", ef.json, "Also write a JSON summary");

  AblateFlags af;
  auto* ablate = app.add_subcommand("ablate", "Leave-one-out constraint ablation");
  add_common(ablate, af.common);
  ablate->add_option("--constraints", af.constraints, "Comma-separated full constraint set");
  ablate->add_option("--leave-out", af.leave_out, "Family to remove, 'each' (default) or 'none'");
  ablate->add_option("--synthetic", af.synthetic, "Use N generated images instead of config items");
  ablate->add_option("--steps", af.steps, "Optimizer steps");
  ablate->add_option("--lr", af.lr, "Learning rate");
  ablate->add_option("-o,--out", af.out, "Write the CSV table here instead of stdout");

  GenWeakFlags gf;
  auto* gen = app.add_subcommand("gen-weak", "Derive weak annotations (boxes, points) from ground-truth masks");
  add_common(gen, gf.common);
  gen->add_option("--gt", gf.gt, "Ground-truth masks (PGM)");
  gen->add_option("-o,--out", gf.out, "Annotation JSON outputs, one per mask");
  gen->add_option("--palette", gf.palette, "Class-name palette JSON");
  gen->add_option("--points", gf.points, "Points sampled per class (default 3)");
  gen->add_option("--jitter", gf.jitter, "Jitter boxes to this target overlap, e.g. 0.75");
  gen->add_option("--background", gf.background, "Background class index (default 0)");
  gen->add_flag("--no-scribbles", gf.no_scribbles, "Do not promote points to scribbles");

  OracleFlags of;
  auto* oracle = app.add_subcommand("oracle-check", "Compare fuzzy and exact probabilities on small grids");
  add_common(oracle, of.common);
  oracle->add_option("--instances", of.instances, "Random instances per family (default 20)");
  oracle->add_option("--families", of.families, "Comma-separated families (default: all)");
  oracle->add_option("--json", of.json, "Write every instance as JSON");

  SynthFlags sf;
  auto* synth = app.add_subcommand("synth", "Write a synthetic demo dataset and a matching refine config");
  add_common(synth, sf.common);
  synth->add_option("-o,--out-dir", sf.out_dir, "Output directory");
  synth->add_option("--count", sf.count, "Number of images (default 4)");
  synth->add_option("--size", sf.size, "Image side length (default 64)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (const auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front()) {
      std::cerr << "run 'fuzzyseg " << sub->get_name() << " --help' for usage\n";
    } else {
      std::cerr << "run 'fuzzyseg --help' for usage\n";
    }
    return kExitConfig;
  }

  try {
    if (refine->parsed()) return cmd_refine(rf);
    if (evaluate->parsed()) return cmd_evaluate(ef);
    if (ablate->parsed()) return cmd_ablate(af);
    if (gen->parsed()) return cmd_gen_weak(gf);
    if (oracle->parsed()) return cmd_oracle_check(of);
    if (synth->parsed()) return cmd_synth(sf);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace fuzzyseg::cli
