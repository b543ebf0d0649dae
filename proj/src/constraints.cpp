#include "fuzzyseg/constraints.hpp"

#include <algorithm>
#include <array>

#include "fuzzyseg/error.hpp"

namespace fuzzyseg {

namespace {

constexpr std::array<std::pair<Family, std::string_view>, 9> kFamilyNames{{
    {Family::FullSupervision, "fs"},
    {Family::Scribbles, "scribbles"},
    {Family::BboxShallow, "bbox_shallow"},
    {Family::Bbox, "bbox"},
    {Family::Background, "background"},
    {Family::Neighborhood, "neighborhood"},
    {Family::Fill, "fill"},
    {Family::Borders, "borders"},
    {Family::Corners, "corners"},
}};

std::string label_of(Family f) { return std::string(family_name(f)); }

std::string box_text(const BoundingBox& b) {
  return "box (" + std::to_string(b.i1) + ", " + std::to_string(b.j1) + ")-(" + std::to_string(b.i2) + ", " +
         std::to_string(b.j2) + ")";
}

}  // namespace

std::string_view family_name(Family family) {
  for (const auto& [f, name] : kFamilyNames) {
    if (f == family) return name;
  }
  return "?";
}

std::optional<Family> parse_family(std::string_view name) {
  for (const auto& [f, n] : kFamilyNames) {
    if (n == name) return f;
  }
  return std::nullopt;
}

const std::vector<Family>& all_families() {
  static const std::vector<Family> families = [] {
    std::vector<Family> v;
    for (const auto& entry : kFamilyNames) v.push_back(entry.first);
    return v;
  }();
  return families;
}

void validate_box(const BoundingBox& b, const GridShape& shape) {
  if (b.i1 > b.i2 || b.j1 > b.j2) throw InputError(box_text(b) + " has inverted corners");
  if (!shape.contains(b.i1, b.j1) || !shape.contains(b.i2, b.j2)) {
    throw InputError(box_text(b) + " extends outside the " + std::to_string(shape.height) + "x" +
                     std::to_string(shape.width) + " grid");
  }
  if (b.target_class < 0 || b.target_class >= shape.classes) {
    throw InputError(box_text(b) + " names class " + std::to_string(b.target_class) + " outside [0, " +
                     std::to_string(shape.classes) + ")");
  }
}

SuperpixelMap::SuperpixelMap(int height, int width, std::vector<int> labels)
    : height_(height), width_(width), labels_(std::move(labels)) {
  if (height < 1 || width < 1) throw InputError("superpixel map must be at least 1x1");
  if (labels_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw InputError("superpixel map has " + std::to_string(labels_.size()) + " entries for a " +
                     std::to_string(height) + "x" + std::to_string(width) + " grid");
  }
  const int k = *std::max_element(labels_.begin(), labels_.end()) + 1;
  std::vector<char> seen(static_cast<std::size_t>(std::max(k, 0)), 0);
  for (int v : labels_) {
    if (v < 0) throw InputError("negative superpixel index " + std::to_string(v));
    seen[static_cast<std::size_t>(v)] = 1;
  }
  for (int s = 0; s < k; ++s) {
    if (!seen[static_cast<std::size_t>(s)]) {
      throw InputError("superpixel index " + std::to_string(s) + " never occurs; indices must cover [0, " +
                       std::to_string(k) + ")");
    }
  }
  count_ = k;
}

EllipseRegion EllipseRegion::inscribed(const BoundingBox& box) {
  EllipseRegion e;
  e.box = box;
  e.cy = (box.i1 + box.i2) / 2.0;
  e.cx = (box.j1 + box.j2) / 2.0;
  e.ry = (box.i2 - box.i1) / 2.0;
  e.rx = (box.j2 - box.j1) / 2.0;
  if (!(e.ry > 0.0) || !(e.rx > 0.0)) {
    throw InputError(box_text(box) + " is one pixel thick; its inscribed ellipse is degenerate");
  }
  return e;
}

std::vector<Pixel> moore_neighbors(Pixel p, int height, int width) {
  std::vector<Pixel> out;
  out.reserve(8);
  for (int di = -1; di <= 1; ++di) {
    for (int dj = -1; dj <= 1; ++dj) {
      if (di == 0 && dj == 0) continue;
      const int i = p.i + di;
      const int j = p.j + dj;
      if (i >= 0 && j >= 0 && i < height && j < width) out.push_back({i, j});
    }
  }
  return out;
}

Formula build_full_supervision(const LabelGrid& gt, int classes) {
  std::vector<Formula> atoms;
  atoms.reserve(gt.pixels());
  for (int i = 0; i < gt.height(); ++i) {
    for (int j = 0; j < gt.width(); ++j) {
      const int c = gt(i, j);
      if (c < 0 || c >= classes) {
        throw InputError("ground truth class " + std::to_string(c) + " at (" + std::to_string(i) + ", " +
                         std::to_string(j) + ") outside [0, " + std::to_string(classes) + ")");
      }
      atoms.push_back(Formula::class_atom(i, j, c));
    }
  }
  return Formula::conjunction(std::move(atoms), label_of(Family::FullSupervision));
}

Formula build_scribble(const Scribble& scribble, const GridShape& shape) {
  if (scribble.pixels.empty()) throw InputError("scribble has no pixels");
  if (scribble.target_class < 0 || scribble.target_class >= shape.classes) {
    throw InputError("scribble class " + std::to_string(scribble.target_class) + " outside [0, " +
                     std::to_string(shape.classes) + ")");
  }
  std::vector<Formula> atoms;
  atoms.reserve(scribble.pixels.size());
  for (const auto& p : scribble.pixels) {
    if (!shape.contains(p.i, p.j)) {
      throw InputError("scribble pixel (" + std::to_string(p.i) + ", " + std::to_string(p.j) + ") outside the grid");
    }
    atoms.push_back(Formula::class_atom(p.i, p.j, scribble.target_class));
  }
  return Formula::conjunction(std::move(atoms), label_of(Family::Scribbles));
}

Formula build_bbox_shallow(const BoundingBox& box, const GridShape& shape) {
  validate_box(box, shape);
  std::vector<Formula> atoms;
  atoms.reserve(static_cast<std::size_t>(box.area()));
  for (int i = box.i1; i <= box.i2; ++i) {
    for (int j = box.j1; j <= box.j2; ++j) atoms.push_back(Formula::class_atom(i, j, box.target_class));
  }
  return Formula::disjunction(std::move(atoms), label_of(Family::BboxShallow));
}

Formula build_bbox_tight(const BoundingBox& box, const GridShape& shape) {
  validate_box(box, shape);
  const int y = box.target_class;
  std::vector<Formula> rows;
  for (int i = box.i1; i <= box.i2; ++i) {
    std::vector<Formula> atoms;
    for (int j = box.j1; j <= box.j2; ++j) atoms.push_back(Formula::class_atom(i, j, y));
    rows.push_back(Formula::disjunction(std::move(atoms)));
  }
  std::vector<Formula> cols;
  for (int j = box.j1; j <= box.j2; ++j) {
    std::vector<Formula> atoms;
    for (int i = box.i1; i <= box.i2; ++i) atoms.push_back(Formula::class_atom(i, j, y));
    cols.push_back(Formula::disjunction(std::move(atoms)));
  }
  std::vector<Formula> factors;
  factors.push_back(Formula::conjunction(std::move(rows)));
  factors.push_back(Formula::conjunction(std::move(cols)));
  return Formula::conjunction(std::move(factors), label_of(Family::Bbox));
}

Formula build_background(std::span<const BoundingBox> boxes, int background_class, const GridShape& shape) {
  if (background_class < 0 || background_class >= shape.classes) {
    throw InputError("background class " + std::to_string(background_class) + " outside [0, " +
                     std::to_string(shape.classes) + ")");
  }
  for (const auto& b : boxes) validate_box(b, shape);
  std::vector<Formula> atoms;
  for (int i = 0; i < shape.height; ++i) {
    for (int j = 0; j < shape.width; ++j) {
      const bool covered = std::any_of(boxes.begin(), boxes.end(), [&](const BoundingBox& b) { return b.contains(i, j); });
      if (!covered) atoms.push_back(Formula::class_atom(i, j, background_class));
    }
  }
  return Formula::conjunction(std::move(atoms), label_of(Family::Background));
}

Formula build_neighborhood(int height, int width) {
  if (height < 1 || width < 1) throw InputError("grid must be at least 1x1");
  if (height == 1 && width == 1) throw InputError("neighborhood constraint is undefined on a 1x1 grid");
  std::vector<Formula> clauses;
  clauses.reserve(static_cast<std::size_t>(height) * static_cast<std::size_t>(width));
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      std::vector<Formula> eqs;
      for (const auto& nb : moore_neighbors({i, j}, height, width)) eqs.push_back(Formula::eq_atom({i, j}, nb));
      clauses.push_back(Formula::disjunction(std::move(eqs)));
    }
  }
  return Formula::conjunction(std::move(clauses), label_of(Family::Neighborhood));
}

Formula build_fill(int height, int width) {
  if (height < 1 || width < 1) throw InputError("grid must be at least 1x1");
  std::vector<Formula> clauses;
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      const auto nbs = moore_neighbors({i, j}, height, width);
      if (nbs.empty()) continue;
      std::vector<Formula> consequent;
      for (const auto& nb : nbs) consequent.push_back(Formula::eq_atom({i, j}, nb));
      if (nbs.size() < 2) {
        // No neighbor pairs: the premise is vacuously true.
        clauses.push_back(Formula::conjunction(std::move(consequent)));
        continue;
      }
      std::vector<Formula> premise;
      for (std::size_t a = 0; a < nbs.size(); ++a) {
        for (std::size_t b = a + 1; b < nbs.size(); ++b) premise.push_back(Formula::eq_atom(nbs[a], nbs[b]));
      }
      clauses.push_back(Formula::implication(Formula::conjunction(std::move(premise)),
                                             Formula::conjunction(std::move(consequent))));
    }
  }
  return Formula::conjunction(std::move(clauses), label_of(Family::Fill));
}

Formula build_borders(const SuperpixelMap& sp) {
  const int h = sp.height();
  const int w = sp.width();
  std::vector<Formula> eqs;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const auto here = static_cast<long>(i) * w + j;
      for (const auto& nb : moore_neighbors({i, j}, h, w)) {
        // Each unordered pair once: only look forward in row-major order.
        if (static_cast<long>(nb.i) * w + nb.j <= here) continue;
        if (sp(i, j) == sp(nb.i, nb.j)) eqs.push_back(Formula::eq_atom({i, j}, nb));
      }
    }
  }
  return Formula::conjunction(std::move(eqs), label_of(Family::Borders));
}

Formula build_corners(const BoundingBox& box, const GridShape& shape) {
  validate_box(box, shape);
  const auto ellipse = EllipseRegion::inscribed(box);
  std::vector<Formula> lits;
  for (int i = box.i1; i <= box.i2; ++i) {
    for (int j = box.j1; j <= box.j2; ++j) {
      if (ellipse.in_corner(i, j)) lits.push_back(Formula::negation(Formula::class_atom(i, j, box.target_class)));
    }
  }
  return Formula::conjunction(std::move(lits), label_of(Family::Corners));
}

Formula conjoin(std::vector<Formula> constraints) {
  if (constraints.empty()) throw InputError("conjoin needs at least one constraint");
  return Formula::conjunction(std::move(constraints));
}

}  // namespace fuzzyseg
