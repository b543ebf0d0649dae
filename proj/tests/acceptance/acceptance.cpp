// Acceptance gate: one PASS/FAIL line per primary criterion, followed by the
// optional binding-parity check. Exit status is nonzero when any primary
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fcntl.h>
#include <unistd.h>

#include "cli.hpp"
#include "fuzzyseg/annotations.hpp"
#include "fuzzyseg/c_api.h"
#include "fuzzyseg/constraints.hpp"
#include "fuzzyseg/fuzzy.hpp"
#include "fuzzyseg/harness.hpp"
#include "fuzzyseg/metrics.hpp"
#include "fuzzyseg/oracle.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace fuzzyseg;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and sizes.
constexpr double kCrossEntropyTol = 1e-9;
constexpr double kExactnessTol = 1e-9;
constexpr double kKnownGapTol = 1e-12;
constexpr double kFinalGapTol = 1e-3;
constexpr double kMonotoneSlack = 1e-12;
constexpr double kGradRelTol = 1e-4;
constexpr double kFdStep = 1e-5;
constexpr double kMinMiouGain = 0.10;
constexpr double kCalibrationTol = 1e-12;
constexpr double kSigmas = 3.0;
constexpr double kParityTol = 1e-12;

constexpr int kHarnessImages = 100;
constexpr int kHarnessSteps = 150;
constexpr double kHarnessLearningRate = 0.05;
constexpr int kSmallObjectClass = 2;

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Norm-wise relative error ||a - b|| / max(||b||, 1e-8).
double rel_error(std::span<const double> a, const std::vector<double>& b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) {
    num += (a[k] - b[k]) * (a[k] - b[k]);
    den += b[k] * b[k];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-8);
}

Outcome cross_entropy_equivalence() {
  std::mt19937_64 rng(101);
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int n = 0; n < 500; ++n) {
    const GridShape s{oracle::uniform_int(rng, 1, 16), oracle::uniform_int(rng, 1, 16), oracle::uniform_int(rng, 2, 5)};
    const LabelGrid gt(s.height, s.width, oracle::random_labels(s, rng));
    const auto x = oracle::random_logits(s.size(), rng, 3.0);
    const auto p = oracle::softmax(s, x);
    double ce = 0.0;
    for (int i = 0; i < s.height; ++i) {
      for (int j = 0; j < s.width; ++j) ce -= std::log(oracle::prob_at(s, p, i, j, gt(i, j)));
    }
    worst = std::max(worst, std::abs(semantic_loss(build_full_supervision(gt, s.classes), LogitField(s, x)).loss - ce));
  }
  const double t = seconds_since(t0);
  return {worst < kCrossEntropyTol && t < 10.0, fmt("max |loss - CE| = %.3g, %.2f s", worst, t)};
}

Outcome independent_atom_exactness() {
  std::mt19937_64 rng(102);
  const Family fams[] = {Family::FullSupervision, Family::Scribbles, Family::Background, Family::BboxShallow};
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int n = 0; n < 200; ++n) {
    const GridShape s{oracle::uniform_int(rng, 1, 3), oracle::uniform_int(rng, 1, 3), oracle::uniform_int(rng, 2, 3)};
    const auto f = oracle::random_family_instance(fams[n % 4], s, rng);
    const auto p = oracle::random_probs(s, rng);
    worst = std::max(worst, std::abs(eval_fuzzy(f, p).log_prob - std::log(exact_prob(f, p))));
  }
  const double t = seconds_since(t0);
  return {worst < kExactnessTol && t < 30.0, fmt("max |fuzzy - log exact| = %.3g, %.2f s", worst, t)};
}

Outcome known_gap() {
  const GridShape s{2, 2, 2};
  const auto f = build_bbox_tight({0, 0, 1, 1, 1}, s);
  const auto p = uniform_field(s);
  const double fuzzy = std::exp(eval_fuzzy(f, p).log_prob);
  const double exact = exact_prob(f, p);
  const bool ok = std::abs(fuzzy - 0.31640625) < kKnownGapTol && std::abs(exact - 0.4375) < kKnownGapTol;
  return {ok, fmt("fuzzy = %.17g, exact = %.17g", fuzzy, exact)};
}

// A uniformly chosen model of f on grid s, or empty when f has none.
std::vector<int> random_model(const Formula& f, const GridShape& s, std::mt19937_64& rng) {
  std::vector<double> uniform(s.size(), 1.0);
  std::vector<int> chosen;
  long seen = 0;
  oracle::for_each_map(s, uniform, [&](const std::vector<int>& y, double) {
    if (!oracle::satisfies(f, s.width, y)) return;
    ++seen;
    if (std::uniform_int_distribution<long>(1, seen)(rng) == 1) chosen = y;
  });
  return chosen;
}

// Sharpens a uniform field toward a model y* of the formula: logit 1/T on
// y*[q], 0 elsewhere. Every violation is reported per family together with the
// temperature step where the gap grew.
Outcome confidence_limit() {
  std::mt19937_64 rng(104);
  const double temps[] = {1.0, 0.5, 0.2, 0.1, 0.05};
  const GridShape s{3, 3, 2};
  std::ostringstream os;
  int violations = 0;
  int late_violations = 0;
  double worst_final = 0.0;
  for (const Family fam : all_families()) {
    int fam_violations = 0;
    for (int n = 0; n < 50; ++n) {
      const auto f = oracle::random_family_instance(fam, s, rng);
      const auto target = random_model(f, s, rng);
      if (target.empty()) continue;
      double prev = INFINITY;
      for (const double t : temps) {
        std::vector<double> x(s.size(), 0.0);
        for (std::size_t q = 0; q < s.pixels(); ++q) x[q * 2 + static_cast<std::size_t>(target[q])] = 1.0 / t;
        const ProbField p(s, oracle::softmax(s, x));
        const double gap = std::abs(std::exp(eval_fuzzy(f, p).log_prob) - exact_prob(f, p));
        if (gap > prev + kMonotoneSlack) {
          ++fam_violations;
          late_violations += t < 0.5;
        }
        prev = gap;
      }
      worst_final = std::max(worst_final, prev);
    }
    violations += fam_violations;
    if (fam_violations > 0) os << family_name(fam) << ' ' << fam_violations << "/50, ";
  }
  os << fmt("%d increases after T = 0.5; max final gap = %.3g", late_violations, worst_final);
  return {violations == 0 && worst_final < kFinalGapTol,
          (violations == 0 ? std::string("gap nonincreasing for every family; ") : "gap grew for ") + os.str()};
}

Outcome gradient_check() {
  std::mt19937_64 rng(105);
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int n = 0; n < 200; ++n) {
    const GridShape s{oracle::uniform_int(rng, 2, 4), oracle::uniform_int(rng, 2, 4), oracle::uniform_int(rng, 2, 4)};
    const Family fam = all_families()[static_cast<std::size_t>(n) % all_families().size()];
    const auto f = oracle::random_family_instance(fam, s, rng);
    const auto x = oracle::random_logits(s.size(), rng, 1.5);
    const auto g = grad_semantic_loss(f, LogitField(s, x));
    const auto fd = oracle::finite_difference(
        [&](const std::vector<double>& v) { return semantic_loss(f, LogitField(s, v)).loss; }, x, kFdStep);
    worst = std::max(worst, rel_error(g.values(), fd));
  }
  const double t = seconds_since(t0);
  return {worst < kGradRelTol && t < 60.0, fmt("max relative error = %.3g, %.2f s", worst, t)};
}

Outcome entailments() {
  long checked = 0;
  long failures = 0;
  for (int h = 1; h <= 3; ++h) {
    for (int w = 1; w <= 3; ++w) {
      const GridShape s{h, w, 2};
      std::vector<std::vector<int>> maps;
      oracle::for_each_map(s, std::vector<double>(s.size(), 1.0), [&](const std::vector<int>& y, double) { maps.push_back(y); });
      for (int i1 = 0; i1 < h; ++i1) {
        for (int i2 = i1; i2 < h; ++i2) {
          for (int j1 = 0; j1 < w; ++j1) {
            for (int j2 = j1; j2 < w; ++j2) {
              for (int c = 0; c < 2; ++c) {
                const BoundingBox b{i1, j1, i2, j2, c};
                const auto tight = build_bbox_tight(b, s);
                const auto shallow = build_bbox_shallow(b, s);
                for (const auto& y : maps) {
                  ++checked;
                  failures += oracle::satisfies(tight, w, y) && !oracle::satisfies(shallow, w, y);
                }
              }
            }
          }
        }
      }
      if (h * w < 2) continue;
      const auto nb = build_neighborhood(h, w);
      const auto fill = build_fill(h, w);
      for (const auto& y : maps) {
        ++checked;
        failures += oracle::satisfies(nb, w, y) && !oracle::satisfies(fill, w, y);
      }
    }
  }
  std::mt19937_64 rng(106);
  int fuzzy_failures = 0;
  for (int n = 0; n < 500; ++n) {
    const GridShape s{oracle::uniform_int(rng, 1, 5), oracle::uniform_int(rng, 1, 5), oracle::uniform_int(rng, 2, 4)};
    const auto b = oracle::random_box(s, rng);
    const auto p = oracle::random_probs(s, rng);
    fuzzy_failures += eval_fuzzy(build_bbox_tight(b, s), p).log_prob > eval_fuzzy(build_bbox_shallow(b, s), p).log_prob;
  }
  return {failures == 0 && fuzzy_failures == 0,
          fmt("%ld discrete checks, %ld counterexamples; %d fuzzy violations in 500", checked, failures, fuzzy_failures)};
}

std::vector<Family> full_constraint_set() {
  return {Family::Scribbles, Family::Bbox, Family::Background, Family::Neighborhood, Family::Fill, Family::Borders};
}

RefineConfig harness_refine_config() {
  RefineConfig cfg;
  cfg.learning_rate = kHarnessLearningRate;
  cfg.steps = kHarnessSteps;
  return cfg;
}

struct HarnessResults {
  std::vector<Sample> samples;
  DatasetRun full;
  DatasetRun without_scribbles;
  DatasetRun with_corners;
  double seconds = 0.0;
};

HarnessResults run_harness() {
  const auto t0 = Clock::now();
  HarnessResults r;
  SynthConfig sc;
  sc.count = kHarnessImages;
  sc.seed = 7;
  r.samples = make_synthetic_dataset(sc);
  const auto cfg = harness_refine_config();
  const auto full = full_constraint_set();
  r.full = refine_dataset(r.samples, {full, {}}, cfg);
  std::vector<Family> reduced;
  std::copy_if(full.begin(), full.end(), std::back_inserter(reduced), [](Family f) { return f != Family::Scribbles; });
  r.without_scribbles = refine_dataset(r.samples, {reduced, {}}, cfg);
  auto with_corners = full;
  with_corners.push_back(Family::Corners);
  r.with_corners = refine_dataset(r.samples, {with_corners, {kSmallObjectClass}}, cfg);
  r.seconds = seconds_since(t0);
  return r;
}

Outcome refinement_harness(const HarnessResults& h) {
  std::ostringstream os;
  bool ok = true;
  for (const Family fam : full_constraint_set()) {
    const std::string label(family_name(fam));
    const double before = h.full.initial_satisfaction.at(label);
    const double after = h.full.final_satisfaction.at(label);
    ok = ok && after > before;
    os << label << ' ' << before << "->" << after << "; ";
  }
  const double m0 = scores_of(h.full.initial).mean_iou;
  const double m1 = scores_of(h.full.final).mean_iou;
  const double m_drop = scores_of(h.without_scribbles.final).mean_iou;
  ok = ok && m1 - m0 >= kMinMiouGain && m_drop < m1 && h.seconds < 900.0;
  os << fmt("mIoU %.4f->%.4f; without scribbles %.6f vs %.6f; %.0f s (all harness runs)", m0, m1, m_drop, m1, h.seconds);
  return {ok, os.str()};
}

Outcome corner_prior(const HarnessResults& h) {
  int satisfied = 0;
  for (const auto& s : h.samples) {
    for (const auto& b : s.annotations.boxes) {
      if (b.target_class == kSmallObjectClass) satisfied += eval_discrete(build_corners(b, s.init.shape()), s.gt);
    }
  }
  const auto iou_of = [](const ConfusionAccumulator& acc) { return acc.iou(kSmallObjectClass).value_or(0.0); };
  const double base = iou_of(h.full.final);
  const double corners = iou_of(h.with_corners.final);
  int lowered = 0;
  for (std::size_t k = 0; k < h.samples.size(); ++k) {
    const auto a = iou(h.full.final_masks[k], h.samples[k].gt, kSmallObjectClass).value_or(0.0);
    const auto b = iou(h.with_corners.final_masks[k], h.samples[k].gt, kSmallObjectClass).value_or(0.0);
    lowered += b < a;
  }
  const bool ok = satisfied == static_cast<int>(h.samples.size()) && corners >= base;
  return {ok, fmt("gt satisfies corners on %d/%zu; class-%d IoU %.4f -> %.4f with corners (%d images lower individually)",
                  satisfied, h.samples.size(), kSmallObjectClass, base, corners, lowered)};
}

Outcome calibration() {
  bool ok = true;
  std::mt19937_64 rng(109);
  double worst_perfect = 0.0;
  for (int n = 0; n < 20; ++n) {
    const GridShape s{2, 2, oracle::uniform_int(rng, 2, 3)};
    const LabelGrid gt(2, 2, oracle::random_labels(s, rng));
    const auto r = exact_alpha_beta(build_full_supervision(gt, s.classes), gt, oracle::random_probs(s, rng));
    if (!r.alpha || !r.beta) return {false, "perfect constraint left alpha or beta undefined"};
    worst_perfect = std::max({worst_perfect, std::abs(*r.alpha - 1.0), std::abs(*r.beta)});
  }
  ok = ok && worst_perfect < kCalibrationTol;

  int outside = 0;
  int compared = 0;
  for (int n = 0; n < 20; ++n) {
    const GridShape s{2, 2, 2};
    const Family fam = all_families()[static_cast<std::size_t>(n) % all_families().size()];
    const auto f = oracle::random_family_instance(fam, s, rng);
    const LabelGrid gt(2, 2, oracle::random_labels(s, rng));
    const auto p = oracle::random_probs(s, rng, 1.0);
    const auto exact = exact_alpha_beta(f, gt, p);
    const std::vector<LabelGrid> gts{gt};
    const std::vector<ProbField> fields{p};
    const auto est = estimate_alpha_beta(f, gts, fields, 10000, 1000 + static_cast<std::uint64_t>(n));
    auto check = [&](const std::optional<double>& e, const std::optional<double>& x, std::size_t count) {
      if (!x || count == 0) return;
      ++compared;
      if (!e) {
        ++outside;
        return;
      }
      const double sigma = std::sqrt(*x * (1.0 - *x) / static_cast<double>(count));
      outside += std::abs(*e - *x) > kSigmas * sigma + 1e-12;
    };
    check(est.alpha, exact.alpha, est.satisfied_samples);
    check(est.beta, exact.beta, est.violated_samples);
  }
  ok = ok && outside == 0;

  double worst_cal = 0.0;
  for (int n = 0; n < 20; ++n) {
    const GridShape s{3, 3, 3};
    const Family fam = all_families()[static_cast<std::size_t>(n) % all_families().size()];
    const auto f = oracle::random_family_instance(fam, s, rng);
    const LogitField x(s, oracle::random_logits(s.size(), rng));
    worst_cal = std::max(worst_cal, std::abs(calibrated_loss(f, x, 1.0, 0.0) - semantic_loss(f, x).loss));
  }
  ok = ok && worst_cal < kCalibrationTol;
  return {ok, fmt("perfect max dev %.3g; %d/%d estimates outside 3 sigma; calibrated vs semantic %.3g", worst_perfect,
                  outside, compared, worst_cal)};
}

// Runs the command-line tool in process with its stdout discarded.
int run_tool(std::vector<std::string> args) {
  args.insert(args.begin(), "fuzzyseg");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  std::fflush(stdout);
  const int saved = ::dup(STDOUT_FILENO);
  const int null_fd = ::open("/dev/null", O_WRONLY);
  ::dup2(null_fd, STDOUT_FILENO);
  ::close(null_fd);
  const int rc = cli::run_cli(static_cast<int>(args.size()), argv.data());
  std::fflush(stdout);
  ::dup2(saved, STDOUT_FILENO);
  ::close(saved);
  return rc;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome determinism() {
  testing_support::TempDir dir;
  if (run_tool({"synth", "-o", dir.path().string(), "--count", "3", "--size", "32", "--seed", "5"}) != 0) {
    return {false, "synth failed"};
  }
  const std::string config = (dir / "config.json").string();
  std::vector<std::string> first;
  std::vector<std::string> names;
  for (int k = 0; k < 3; ++k) {
    names.push_back("out/synth_" + std::to_string(k) + "_mask.pgm");
    names.push_back("out/synth_" + std::to_string(k) + "_trace.jsonl");
  }
  for (int round = 0; round < 2; ++round) {
    if (run_tool({"refine", "-c", config, "--seed", "5", "--set", "refine.steps=40"}) != 0) return {false, "refine failed"};
    std::vector<std::string> now;
    for (const auto& n : names) now.push_back(slurp(dir / n));
    if (round == 0) {
      first = now;
    } else if (now != first) {
      return {false, "rerun produced different bytes"};
    }
  }
  for (const auto& f : first) {
    if (f.empty()) return {false, "an output file is empty"};
  }
  return {true, fmt("%zu mask/trace files byte-identical across reruns", names.size())};
}

Outcome binding_parity() {
  std::mt19937_64 rng(111);
  double worst = 0.0;
  for (int n = 0; n < 50; ++n) {
    const GridShape s{oracle::uniform_int(rng, 2, 6), oracle::uniform_int(rng, 2, 6), 3};
    const LabelGrid gt(s.height, s.width, oracle::random_labels(s, rng));
    AnnotationSet set;
    set.class_names = {"background", "rectangle", "ellipse"};
    set.boxes = derive_boxes_from_gt(gt);
    set.points = sample_points_from_gt(gt, 2, static_cast<std::uint64_t>(n));
    const auto json = annotations_to_json(set);
    const uint32_t flags = FUZZYSEG_SCRIBBLES | FUZZYSEG_BBOX | FUZZYSEG_BACKGROUND | FUZZYSEG_NEIGHBORHOOD | FUZZYSEG_FILL;
    fuzzyseg_engine* engine = fuzzyseg_compile(json.c_str(), s.height, s.width, 3, flags, nullptr);
    if (engine == nullptr) return {false, std::string("compile failed: ") + fuzzyseg_last_error()};
    const auto formula = conjoin(build_constraint_families(
        set, s, nullptr, {{Family::Scribbles, Family::Bbox, Family::Background, Family::Neighborhood, Family::Fill}, {}}));
    const auto x = oracle::random_logits(s.size(), rng);
    double loss = 0.0;
    std::vector<double> grad(s.size());
    const int rc = fuzzyseg_loss_and_grad(engine, x.data(), x.size(), &loss, grad.data());
    fuzzyseg_release(engine);
    if (rc != 0) return {false, fuzzyseg_last_error()};
    const LogitField field(s, x);
    worst = std::max(worst, std::abs(loss - semantic_loss(formula, field).loss));
    const auto g = grad_semantic_loss(formula, field);
    for (std::size_t k = 0; k < grad.size(); ++k) worst = std::max(worst, std::abs(grad[k] - g.values()[k]));
  }
  return {worst < kParityTol, fmt("max deviation %.3g over 50 instances", worst)};
}

}  // namespace

// Optional arguments select criteria by number; the default runs all of them.
int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int k = 1; k < argc; ++k) selected.push_back(std::atoi(argv[k]));
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  std::optional<HarnessResults> harness;
  auto harness_results = [&]() -> const HarnessResults& {
    if (!harness) harness = run_harness();
    return *harness;
  };
  const std::vector<Criterion> criteria{
      {1, "cross-entropy equivalence", cross_entropy_equivalence},
      {2, "exactness on independent atoms", independent_atom_exactness},
      {3, "known tight-box gap", known_gap},
      {4, "confidence-limit convergence", confidence_limit},
      {5, "gradient correctness", gradient_check},
      {6, "entailments", entailments},
      {7, "synthetic refinement harness", [&] { return refinement_harness(harness_results()); }},
      {8, "corner prior", [&] { return corner_prior(harness_results()); }},
      {9, "alpha/beta calibration", calibration},
      {10, "determinism", determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  if (failed == 0 && (selected.empty() || std::find(selected.begin(), selected.end(), 11) != selected.end())) {
    Outcome o;
    try {
      o = binding_parity();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s secondary 11 (binding parity): %s\n", o.pass ? "PASS" : "FAIL", o.detail.c_str());
  } else {
    std::printf("SKIP secondary 11 (binding parity): primary criteria failed\n");
  }
  return failed == 0 ? 0 : 1;
}
