#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "fuzzyseg/metrics.hpp"
#include "support/oracles.hpp"

using namespace fuzzyseg;

TEST(Metrics, HandExample) {
  const LabelGrid pred(1, 4, std::vector<int>{1, 1, 0, 0});
  const LabelGrid gt(1, 4, std::vector<int>{0, 1, 1, 0});
  EXPECT_NEAR(*iou(pred, gt, 1), 1.0 / 3, 1e-15);
  EXPECT_NEAR(*dice(pred, gt, 1), 0.5, 1e-15);
}

TEST(Metrics, AbsentClassIsUndefined) {
  const LabelGrid a(2, 2, 0);
  EXPECT_FALSE(iou(a, a, 1).has_value());
  EXPECT_FALSE(dice(a, a, 1).has_value());
  const auto s = scores_of([&] {
    ConfusionAccumulator acc(2);
    acc.add(a, a);
    return acc;
  }());
  EXPECT_DOUBLE_EQ(s.mean_iou, 1.0);
  EXPECT_TRUE(std::isnan(scores_of(ConfusionAccumulator(2)).mean_iou));
}

TEST(Metrics, RejectsMismatch) {
  ConfusionAccumulator acc(2);
  EXPECT_THROW(acc.add(LabelGrid(2, 2, 0), LabelGrid(2, 3, 0)), InputError);
  EXPECT_THROW(acc.add(LabelGrid(1, 1, 2), LabelGrid(1, 1, 0)), InputError);
}

TEST(Metrics, DiceIouIdentityProperty) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const GridShape s{oracle::uniform_int(rng, 1, 6), oracle::uniform_int(rng, 1, 6), 3};
    const LabelGrid pred(s.height, s.width, oracle::random_labels(s, rng));
    const LabelGrid gt(s.height, s.width, oracle::random_labels(s, rng));
    for (int c = 0; c < 3; ++c) {
      const auto i = iou(pred, gt, c);
      const auto d = dice(pred, gt, c);
      ASSERT_EQ(i.has_value(), d.has_value());
      if (i) {
        ASSERT_NEAR(*d, 2 * *i / (1 + *i), 1e-12);
        ASSERT_LE(*i, *d + 1e-15);
        ASSERT_NEAR(*iou(gt, pred, c), *i, 1e-15);
      }
    }
  }
}

TEST(Metrics, AccumulationOrderAndMergeProperty) {
  std::mt19937_64 rng(2);
  const GridShape s{4, 5, 3};
  std::vector<std::pair<LabelGrid, LabelGrid>> pairs;
  for (int k = 0; k < 6; ++k) {
    pairs.emplace_back(LabelGrid(4, 5, oracle::random_labels(s, rng)), LabelGrid(4, 5, oracle::random_labels(s, rng)));
  }
  ConfusionAccumulator forward(3);
  ConfusionAccumulator backward(3);
  ConfusionAccumulator half_a(3);
  ConfusionAccumulator half_b(3);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    forward.add(pairs[k].first, pairs[k].second);
    backward.add(pairs[pairs.size() - 1 - k].first, pairs[pairs.size() - 1 - k].second);
    (k % 2 ? half_a : half_b).add(pairs[k].first, pairs[k].second);
  }
  half_a.merge(half_b);
  for (int c = 0; c < 3; ++c) {
    EXPECT_EQ(forward.intersection(c), backward.intersection(c));
    EXPECT_EQ(forward.union_area(c), half_a.union_area(c));
    EXPECT_EQ(*forward.iou(c), *half_a.iou(c));
  }
}

TEST(Metrics, DoublingCountsKeepsScores) {
  std::mt19937_64 rng(3);
  const GridShape s{5, 5, 3};
  const LabelGrid pred(5, 5, oracle::random_labels(s, rng));
  const LabelGrid gt(5, 5, oracle::random_labels(s, rng));
  ConfusionAccumulator once(3);
  once.add(pred, gt);
  ConfusionAccumulator twice = once;
  twice.merge(once);
  for (int c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(*once.iou(c), *twice.iou(c));
}

TEST(Metrics, LabelPermutationSymmetry) {
  std::mt19937_64 rng(4);
  const GridShape s{6, 6, 3};
  const std::vector<int> perm{2, 0, 1};
  auto p = oracle::random_labels(s, rng);
  auto g = oracle::random_labels(s, rng);
  std::vector<int> pp(p.size());
  std::vector<int> gp(g.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    pp[k] = perm[static_cast<std::size_t>(p[k])];
    gp[k] = perm[static_cast<std::size_t>(g[k])];
  }
  for (int c = 0; c < 3; ++c) {
    EXPECT_EQ(iou(LabelGrid(6, 6, p), LabelGrid(6, 6, g), c),
              iou(LabelGrid(6, 6, pp), LabelGrid(6, 6, gp), perm[static_cast<std::size_t>(c)]));
  }
}

TEST(Metrics, DatasetMeanPoolsCounters) {
  ConfusionAccumulator a(2);
  a.add(LabelGrid(1, 2, std::vector<int>{1, 1}), LabelGrid(1, 2, std::vector<int>{1, 0}));
  ConfusionAccumulator b(2);
  b.add(LabelGrid(1, 2, std::vector<int>{1, 1}), LabelGrid(1, 2, std::vector<int>{1, 1}));
  const std::vector<ConfusionAccumulator> accs{a, b};
  const auto s = mean_over_dataset(accs);
  EXPECT_NEAR(*s.iou[1], 3.0 / 4, 1e-15);
  EXPECT_NEAR(*s.iou[0], 0.0, 1e-15);
}

TEST(Metrics, CsvAndJson) {
  ConfusionAccumulator acc(3);
  acc.add(LabelGrid(1, 2, std::vector<int>{0, 1}), LabelGrid(1, 2, std::vector<int>{0, 1}));
  const auto s = scores_of(acc);
  EXPECT_EQ(scores_csv(s, {"bg", "a", "b"}), "class,iou,dice\nbg,1,1\na,1,1\nb,,\nmean,1,1\n");
  const auto j = nlohmann::json::parse(scores_json(s, {"bg", "a", "b"}));
  EXPECT_DOUBLE_EQ(j["mIoU"].get<double>(), 1.0);
  EXPECT_TRUE(j.contains("classes"));
}
