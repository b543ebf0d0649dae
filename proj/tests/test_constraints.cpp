#include <gtest/gtest.h>

#include <random>
#include <set>

#include "fuzzyseg/constraints.hpp"
#include "fuzzyseg/fuzzy.hpp"
#include "support/oracles.hpp"

using namespace fuzzyseg;

namespace {

// Every label map of a 2-class grid, as row-major vectors.
std::vector<std::vector<int>> all_maps(const GridShape& s) {
  std::vector<std::vector<int>> maps;
  std::vector<double> uniform(s.size(), 1.0);
  oracle::for_each_map(s, uniform, [&](const std::vector<int>& y, double) { maps.push_back(y); });
  return maps;
}

}  // namespace

TEST(FullSupervision, SinglePixel) {
  const auto f = build_full_supervision(LabelGrid(1, 1, std::vector<int>{1}), 2);
  ASSERT_EQ(f.op(), Op::And);
  ASSERT_EQ(f.children().size(), 1u);
  EXPECT_EQ(f.children()[0], Formula::class_atom(0, 0, 1));
  EXPECT_EQ(f.label(), "fs");
}

TEST(FullSupervision, OneAtomPerPixel) {
  const auto f = build_full_supervision(LabelGrid(2, 2, std::vector<int>{0, 1, 1, 0}), 2);
  ASSERT_EQ(f.children().size(), 4u);
  for (const auto& c : f.children()) EXPECT_EQ(c.op(), Op::ClassAtom);
}

TEST(FullSupervision, UniqueModelOnThreeByThree) {
  std::mt19937_64 rng(1);
  const GridShape s{3, 3, 3};
  const auto f = build_full_supervision(LabelGrid(3, 3, oracle::random_labels(s, rng)), 3);
  EXPECT_EQ(oracle::count_models(f, s), 1);
}

TEST(FullSupervision, RejectsClassOutOfRange) {
  EXPECT_THROW(build_full_supervision(LabelGrid(1, 2, std::vector<int>{0, 2}), 2), InputError);
}

TEST(Scribble, SinglePixel) {
  const auto f = build_scribble({{{0, 0}}, 1}, {2, 2, 2});
  ASSERT_EQ(f.children().size(), 1u);
  EXPECT_EQ(f.children()[0], Formula::class_atom(0, 0, 1));
}

TEST(Scribble, DiagonalCountsFourModels) {
  const auto f = build_scribble({{{0, 0}, {1, 1}}, 0}, {2, 2, 2});
  EXPECT_EQ(oracle::count_models(f, {2, 2, 2}), 4);
}

TEST(Scribble, FullCoverageMatchesFullSupervision) {
  const GridShape s{2, 3, 2};
  Scribble sc{{}, 1};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) sc.pixels.push_back({i, j});
  }
  const auto a = build_scribble(sc, s);
  const auto b = build_full_supervision(LabelGrid(2, 3, 1), 2);
  for (const auto& y : all_maps(s)) EXPECT_EQ(oracle::satisfies(a, 3, y), oracle::satisfies(b, 3, y));
}

TEST(Scribble, RejectsEmptyAndOutOfBounds) {
  EXPECT_THROW(build_scribble({{}, 0}, {2, 2, 2}), InputError);
  EXPECT_THROW(build_scribble({{{2, 0}}, 0}, {2, 2, 2}), InputError);
}

TEST(BboxShallow, SinglePixelIsAtom) {
  const auto f = build_bbox_shallow({1, 1, 1, 1, 1}, {3, 3, 2});
  ASSERT_EQ(f.op(), Op::Or);
  ASSERT_EQ(f.children().size(), 1u);
  EXPECT_EQ(f.children()[0], Formula::class_atom(1, 1, 1));
}

TEST(BboxShallow, TwoByTwoCounts) {
  EXPECT_EQ(oracle::count_models(build_bbox_shallow({0, 0, 1, 1, 1}, {2, 2, 2}), {2, 2, 2}), 15);
}

TEST(BboxTight, TwoByTwoCounts) {
  EXPECT_EQ(oracle::count_models(build_bbox_tight({0, 0, 1, 1, 1}, {2, 2, 2}), {2, 2, 2}), 7);
}

TEST(BboxTight, SinglePixelMatchesShallow) {
  const GridShape s{2, 2, 2};
  const BoundingBox b{1, 0, 1, 0, 1};
  const auto tight = build_bbox_tight(b, s);
  const auto shallow = build_bbox_shallow(b, s);
  for (const auto& y : all_maps(s)) EXPECT_EQ(oracle::satisfies(tight, 2, y), oracle::satisfies(shallow, 2, y));
}

TEST(BboxTight, EntailsShallowExhaustively) {
  for (int h = 1; h <= 3; ++h) {
    for (int w = 1; w <= 3; ++w) {
      const GridShape s{h, w, 2};
      const auto maps = all_maps(s);
      for (int i1 = 0; i1 < h; ++i1) {
        for (int i2 = i1; i2 < h; ++i2) {
          for (int j1 = 0; j1 < w; ++j1) {
            for (int j2 = j1; j2 < w; ++j2) {
              const BoundingBox b{i1, j1, i2, j2, 1};
              const auto tight = build_bbox_tight(b, s);
              const auto shallow = build_bbox_shallow(b, s);
              for (const auto& y : maps) {
                if (oracle::satisfies(tight, w, y)) { ASSERT_TRUE(oracle::satisfies(shallow, w, y)); }
              }
            }
          }
        }
      }
    }
  }
}

TEST(Background, NoBoxesCoversAllPixels) {
  const auto f = build_background({}, 0, {2, 2, 2});
  ASSERT_EQ(f.children().size(), 4u);
  for (const auto& c : f.children()) EXPECT_EQ(c.target_class(), 0);
}

TEST(Background, WholeGridBoxIsTrue) {
  const std::vector<BoundingBox> boxes{{0, 0, 1, 1, 1}};
  const auto f = build_background(boxes, 0, {2, 2, 2});
  EXPECT_TRUE(f.children().empty());
  EXPECT_EQ(eval_fuzzy(f, uniform_field({2, 2, 2})).log_prob, 0.0);
}

TEST(Background, ExcludesBoxPixels) {
  const std::vector<BoundingBox> boxes{{0, 0, 1, 1, 1}};
  const auto f = build_background(boxes, 0, {3, 3, 2});
  std::set<Pixel> covered;
  for (const auto& c : f.children()) covered.insert(c.pixel());
  const std::set<Pixel> expected{{0, 2}, {1, 2}, {2, 0}, {2, 1}, {2, 2}};
  EXPECT_EQ(covered, expected);
}

TEST(Background, ExcludesUnionOfBoxes) {
  const std::vector<BoundingBox> boxes{{0, 0, 0, 1, 1}, {1, 1, 1, 1, 2}};
  const auto f = build_background(boxes, 0, {2, 2, 3});
  ASSERT_EQ(f.children().size(), 1u);
  EXPECT_EQ(f.children()[0].pixel(), (Pixel{1, 0}));
}

TEST(Neighborhood, OneByTwoStructure) {
  const auto f = build_neighborhood(1, 2);
  const auto expected = Formula::conjunction({Formula::disjunction({Formula::eq_atom({0, 0}, {0, 1})}),
                                              Formula::disjunction({Formula::eq_atom({0, 1}, {0, 0})})},
                                             "neighborhood");
  EXPECT_EQ(f, expected);
}

TEST(Neighborhood, TwoByTwoCountsEight) {
  EXPECT_EQ(oracle::count_models(build_neighborhood(2, 2), {2, 2, 2}), 8);
}

TEST(Neighborhood, ConstantMapSatisfies) {
  for (int h = 1; h <= 4; ++h) {
    for (int w = 2; w <= 4; ++w) {
      EXPECT_TRUE(eval_discrete(build_neighborhood(h, w), LabelGrid(h, w, 1)));
    }
  }
}

TEST(Neighborhood, RejectsSinglePixel) { EXPECT_THROW(build_neighborhood(1, 1), InputError); }

TEST(Fill, ConstantMapSatisfies) { EXPECT_TRUE(eval_discrete(build_fill(4, 3), LabelGrid(4, 3, 2))); }

TEST(Fill, IsolatedCenterViolates) {
  LabelGrid y(3, 3, 0);
  y(1, 1) = 1;
  EXPECT_FALSE(eval_discrete(build_fill(3, 3), y));
}

TEST(Fill, NeighborhoodEntailsFillExhaustively) {
  for (const auto& [h, w] : std::vector<std::pair<int, int>>{{1, 2}, {2, 2}, {2, 3}, {3, 2}, {1, 3}}) {
    const GridShape s{h, w, 2};
    const auto nb = build_neighborhood(h, w);
    const auto fill = build_fill(h, w);
    for (const auto& y : all_maps(s)) {
      if (oracle::satisfies(nb, w, y)) { ASSERT_TRUE(oracle::satisfies(fill, w, y)) << h << "x" << w; }
    }
  }
}

TEST(Fill, UsesUnorderedDistinctPairs) {
  const auto f = build_fill(3, 3);
  // Center clause: 8 neighbors -> 28 premise pairs, 8 consequents.
  const auto& center = f.children()[4];
  ASSERT_EQ(center.op(), Op::Implies);
  EXPECT_EQ(center.children()[0].children().size(), 28u);
  EXPECT_EQ(center.children()[1].children().size(), 8u);
}

TEST(Borders, AllSingletonSuperpixelsGiveTrue) {
  const auto f = build_borders(SuperpixelMap(2, 2, {0, 1, 2, 3}));
  EXPECT_TRUE(f.children().empty());
}

TEST(Borders, OneSuperpixelOnOneByTwo) {
  const auto f = build_borders(SuperpixelMap(1, 2, {0, 0}));
  ASSERT_EQ(f.children().size(), 1u);
  EXPECT_EQ(f.children()[0], Formula::eq_atom({0, 0}, {0, 1}));
}

TEST(Borders, LeftRightColumns) {
  const auto f = build_borders(SuperpixelMap(2, 2, {0, 1, 0, 1}));
  ASSERT_EQ(f.children().size(), 2u);
  EXPECT_EQ(f.children()[0], Formula::eq_atom({0, 0}, {1, 0}));
  EXPECT_EQ(f.children()[1], Formula::eq_atom({0, 1}, {1, 1}));
}

TEST(Borders, EachIntraPairOnceProperty) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const int h = oracle::uniform_int(rng, 1, 6);
    const int w = oracle::uniform_int(rng, 2, 6);
    std::vector<int> labels(static_cast<std::size_t>(h * w));
    for (auto& l : labels) l = oracle::uniform_int(rng, 0, 2);
    std::vector<int> used(3, -1);
    int next = 0;
    for (auto& l : labels) {
      if (used[l] < 0) used[l] = next++;
      l = used[l];
    }
    const SuperpixelMap sp(h, w, labels);
    std::set<std::pair<Pixel, Pixel>> seen;
    for (const auto& eq : build_borders(sp).children()) {
      const Pixel a = eq.pixel();
      const Pixel b = eq.other_pixel();
      const auto key = a < b ? std::pair{a, b} : std::pair{b, a};
      ASSERT_TRUE(seen.insert(key).second) << "duplicate pair";
      ASSERT_EQ(sp(eq.pixel().i, eq.pixel().j), sp(eq.other_pixel().i, eq.other_pixel().j));
    }
    std::size_t expected = 0;
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        for (const auto& nb : moore_neighbors({i, j}, h, w)) expected += sp(i, j) == sp(nb.i, nb.j);
      }
    }
    EXPECT_EQ(seen.size() * 2, expected);
  }
}

TEST(Corners, LiteralCornersOfTenByTen) {
  const BoundingBox b{0, 0, 9, 9, 1};
  const auto e = EllipseRegion::inscribed(b);
  EXPECT_DOUBLE_EQ(e.level(0, 0), 2.0);
  for (const auto& p : std::vector<Pixel>{{0, 0}, {0, 9}, {9, 0}, {9, 9}}) EXPECT_TRUE(e.in_corner(p.i, p.j));
  const auto f = build_corners(b, {10, 10, 2});
  std::set<Pixel> lits;
  for (const auto& n : f.children()) {
    ASSERT_EQ(n.op(), Op::Not);
    lits.insert(n.children()[0].pixel());
  }
  EXPECT_TRUE(lits.count({0, 0}) && lits.count({9, 9}));
}

TEST(Corners, CenterNeverInCornerSet) {
  for (int n = 2; n <= 12; ++n) {
    const auto e = EllipseRegion::inscribed({0, 0, n, n, 1});
    EXPECT_FALSE(e.in_corner(n / 2, n / 2));
  }
}

TEST(Corners, InscribedEllipseGroundTruthSatisfies) {
  const BoundingBox b{2, 3, 12, 17, 1};
  const GridShape s{16, 20, 2};
  const auto e = EllipseRegion::inscribed(b);
  LabelGrid gt(s.height, s.width, 0);
  for (int i = b.i1; i <= b.i2; ++i) {
    for (int j = b.j1; j <= b.j2; ++j) {
      if (e.level(i, j) <= 1.0) gt(i, j) = 1;
    }
  }
  EXPECT_TRUE(eval_discrete(build_corners(b, s), gt));
  gt(b.i1, b.j1) = 1;
  EXPECT_FALSE(eval_discrete(build_corners(b, s), gt));
}

TEST(Corners, BoundaryTiesAreInside) {
  // 3x3 box: (0,1) sits exactly on the ellipse (level 1).
  const auto e = EllipseRegion::inscribed({0, 0, 2, 2, 1});
  EXPECT_DOUBLE_EQ(e.level(0, 1), 1.0);
  EXPECT_FALSE(e.in_corner(0, 1));
}

TEST(Corners, RejectsDegenerateBox) {
  EXPECT_THROW(build_corners({0, 0, 0, 3, 1}, {4, 4, 2}), InputError);
  EXPECT_THROW(build_corners({0, 0, 3, 0, 1}, {4, 4, 2}), InputError);
}

TEST(Conjoin, WrapsSingle) {
  const auto a = build_bbox_shallow({0, 0, 1, 1, 1}, {2, 2, 2});
  const auto f = conjoin({a});
  ASSERT_EQ(f.op(), Op::And);
  ASSERT_EQ(f.children().size(), 1u);
  EXPECT_EQ(f.children()[0], a);
}

TEST(Conjoin, LogProbIsSumOfChildren) {
  std::mt19937_64 rng(3);
  const GridShape s{3, 3, 3};
  const auto a = build_scribble({{{0, 0}, {2, 1}}, 1}, s);
  const auto b = build_bbox_tight({0, 0, 1, 2, 2}, s);
  const auto p = oracle::random_probs(s, rng);
  const auto r = eval_fuzzy(conjoin({a, b}), p);
  EXPECT_NEAR(r.log_prob, eval_fuzzy(a, p).log_prob + eval_fuzzy(b, p).log_prob, 1e-12);
  EXPECT_NEAR(r.per_label_log_prob.at("scribbles"), eval_fuzzy(a, p).log_prob, 1e-12);
  EXPECT_NEAR(r.per_label_log_prob.at("bbox"), eval_fuzzy(b, p).log_prob, 1e-12);
}

TEST(Conjoin, DiscreteIsAndOfChildren) {
  const GridShape s{2, 2, 2};
  const auto a = build_bbox_tight({0, 0, 1, 0, 1}, s);
  const auto b = build_neighborhood(2, 2);
  const auto f = conjoin({a, b});
  for (const auto& y : all_maps(s)) {
    EXPECT_EQ(oracle::satisfies(f, 2, y), oracle::satisfies(a, 2, y) && oracle::satisfies(b, 2, y));
  }
}

TEST(Conjoin, RejectsEmpty) { EXPECT_THROW(conjoin({}), InputError); }

TEST(MooreNeighbors, ClippedAtBorders) {
  EXPECT_EQ(moore_neighbors({0, 0}, 3, 3).size(), 3u);
  EXPECT_EQ(moore_neighbors({0, 1}, 3, 3).size(), 5u);
  EXPECT_EQ(moore_neighbors({1, 1}, 3, 3).size(), 8u);
  EXPECT_TRUE(moore_neighbors({0, 0}, 1, 1).empty());
}

TEST(Builders, StayInBoundsProperty) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const GridShape s{oracle::uniform_int(rng, 2, 6), oracle::uniform_int(rng, 2, 6), oracle::uniform_int(rng, 2, 4)};
    for (const auto fam : all_families()) {
      const auto f = oracle::random_family_instance(fam, s, rng);
      EXPECT_NO_THROW(check_bounds(f, s));
    }
  }
}

TEST(Formula, JsonRoundTripIsExact) {
  std::mt19937_64 rng(5);
  const GridShape s{3, 3, 3};
  for (const auto fam : all_families()) {
    const auto f = oracle::random_family_instance(fam, s, rng);
    const auto text = formula_to_json(f);
    const auto back = formula_from_json(text);
    EXPECT_EQ(back, f);
    EXPECT_EQ(formula_to_json(back), text);
  }
  const auto imp = Formula::implication(Formula::class_atom(0, 0, 1), Formula::negation(Formula::eq_atom({0, 0}, {1, 1})));
  EXPECT_EQ(formula_from_json(formula_to_json(imp)), imp);
}

TEST(Formula, JsonErrorsNamePath) {
  try {
    formula_from_json(R"({"op":"and","label":"x","children":[{"op":"class_atom","i":0,"j":0}]})");
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("children[0]"), std::string::npos) << e.what();
  }
  EXPECT_THROW(formula_from_json(R"({"op":"or","children":[]})"), InputError);
  EXPECT_THROW(formula_from_json("not json"), InputError);
}

TEST(Formula, AtomInvariants) {
  EXPECT_THROW(Formula::eq_atom({1, 1}, {1, 1}), InputError);
  EXPECT_THROW(Formula::class_atom(0, 0, -1), InputError);
  EXPECT_THROW(Formula::disjunction({}), InputError);
  EXPECT_THROW(check_bounds(Formula::class_atom(0, 0, 2), {1, 1, 2}), InputError);
}
