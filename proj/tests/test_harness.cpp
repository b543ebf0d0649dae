#include <gtest/gtest.h>

#include <cmath>

#include "fuzzyseg/fuzzy.hpp"
#include "fuzzyseg/harness.hpp"
#include "fuzzyseg/seed.hpp"

using namespace fuzzyseg;

namespace {

SynthConfig small_config() {
  SynthConfig c;
  c.count = 3;
  c.height = 24;
  c.width = 24;
  c.seed = 11;
  return c;
}

RefineConfig quick_refine() {
  RefineConfig c;
  c.learning_rate = 0.05;
  c.steps = 20;
  return c;
}

}  // namespace

TEST(Synthetic, DeterministicPerSeed) {
  const auto a = make_synthetic_dataset(small_config());
  const auto b = make_synthetic_dataset(small_config());
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].gt, b[k].gt);
    EXPECT_EQ(a[k].init, b[k].init);
    EXPECT_EQ(a[k].image.data, b[k].image.data);
    EXPECT_EQ(a[k].superpixels, b[k].superpixels);
  }
  auto other = small_config();
  other.seed = 12;
  EXPECT_NE(make_synthetic_dataset(other)[0].gt, a[0].gt);
}

TEST(Synthetic, GroundTruthSatisfiesWeakLabels) {
  const auto data = make_synthetic_dataset(small_config());
  const ConstraintOptions opts{{Family::Scribbles, Family::BboxShallow, Family::Bbox, Family::Background, Family::Corners},
                               {2}};
  const auto formulas = build_dataset_formulas(data, opts);
  for (std::size_t k = 0; k < data.size(); ++k) {
    EXPECT_TRUE(eval_discrete(formulas[k], data[k].gt)) << data[k].name;
    EXPECT_EQ(data[k].annotations.class_names, (std::vector<std::string>{"background", "rectangle", "ellipse"}));
  }
}

TEST(Synthetic, NoisyStartDiffersFromTruth) {
  const auto data = make_synthetic_dataset(small_config());
  for (const auto& s : data) {
    const auto mask = extract_mask(s.init);
    std::size_t differ = 0;
    for (std::size_t p = 0; p < mask.pixels(); ++p) differ += mask.labels()[p] != s.gt.labels()[p];
    const double frac = static_cast<double>(differ) / static_cast<double>(mask.pixels());
    EXPECT_GT(frac, 0.15);
    EXPECT_LT(frac, 0.45);
  }
}

TEST(Synthetic, SceneMatchesDataset) {
  EXPECT_EQ(synthetic_scene(24, 24, derive_seed(11, SeedStream::Synthesis, 0)), make_synthetic_dataset(small_config())[0].gt);
}

TEST(RefineDataset, ImprovesSmallDataset) {
  const auto data = make_synthetic_dataset(small_config());
  const ConstraintOptions opts{{Family::Scribbles, Family::Bbox, Family::Background, Family::Neighborhood}, {}};
  auto cfg = quick_refine();
  cfg.steps = 60;
  const auto run = refine_dataset(data, opts, cfg);
  EXPECT_GT(scores_of(run.final).mean_iou, scores_of(run.initial).mean_iou);
  EXPECT_EQ(run.final_masks.size(), data.size());
  EXPECT_EQ(run.final_satisfaction.size(), 4u);
}

TEST(Ablation, RowsAndCsv) {
  const auto data = make_synthetic_dataset(small_config());
  const AblationSpec spec{{Family::Scribbles, Family::Neighborhood}, Family::Scribbles, {}};
  const auto rows = run_ablation(spec, data, quick_refine());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].delta, 0.0);
  EXPECT_NEAR(rows[1].delta, rows[1].mean_iou - rows[0].mean_iou, 1e-15);
  const auto csv = ablation_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "constraints,mIoU,dmIoU");
  EXPECT_NE(csv.find("all \\ scribbles,"), std::string::npos);
}

TEST(Ablation, VacuousRemovalChangesNothing) {
  // Corners restricted to a class with no boxes builds an empty formula on every image.
  const auto data = make_synthetic_dataset(small_config());
  const AblationSpec spec{{Family::Neighborhood, Family::Corners}, Family::Corners, {7}};
  const auto rows = run_ablation(spec, data, quick_refine());
  EXPECT_EQ(rows[1].mean_iou, rows[0].mean_iou);
}

TEST(Ablation, LeaveOneOutCoversEveryFamily) {
  const auto data = make_synthetic_dataset(small_config());
  const AblationSpec spec{{Family::Scribbles, Family::Background}, std::nullopt, {}};
  const auto rows = run_leave_one_out(spec, data, quick_refine());
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1].left_out, Family::Scribbles);
  EXPECT_EQ(rows[2].left_out, Family::Background);
}

TEST(Ablation, RejectsUnknownLeaveOut) {
  const auto data = make_synthetic_dataset(small_config());
  EXPECT_THROW(run_ablation({{Family::Scribbles}, Family::Fill, {}}, data, quick_refine()), InputError);
  EXPECT_THROW(run_ablation({{}, std::nullopt, {}}, data, quick_refine()), InputError);
}

TEST(Seeds, DerivedStreamsAreIndependent) {
  EXPECT_EQ(derive_seed(5, SeedStream::Points, 3), derive_seed(5, SeedStream::Points, 3));
  EXPECT_NE(derive_seed(5, SeedStream::Points, 3), derive_seed(5, SeedStream::Jitter, 3));
  EXPECT_NE(derive_seed(5, SeedStream::Points, 3), derive_seed(5, SeedStream::Points, 4));
  EXPECT_NE(derive_seed(5, SeedStream::Points, 3), derive_seed(6, SeedStream::Points, 3));
}
