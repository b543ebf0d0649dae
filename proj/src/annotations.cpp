#include "fuzzyseg/annotations.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

#include "fuzzyseg/error.hpp"

namespace fuzzyseg {

using nlohmann::ordered_json;

namespace {

class AnnotationParser {
 public:
  AnnotationParser(std::string source, int height, int width) : source_(std::move(source)), height_(height), width_(width) {}

  [[noreturn]] void fail(const std::string& field, const std::string& msg) const {
    throw InputError(source_ + ": " + field + ": " + msg);
  }

  const ordered_json& require(const ordered_json& obj, const std::string& key, const std::string& where) const {
    if (!obj.is_object()) fail(where, "expected an object");
    if (!obj.contains(key)) fail(where + "." + key, "missing");
    return obj.at(key);
  }

  int coordinate(const ordered_json& v, const std::string& field, bool row) const {
    if (!v.is_number_integer()) fail(field, "expected an integer coordinate");
    const long long c = v.get<long long>();
    if (c < 0) fail(field, "coordinate " + std::to_string(c) + " is negative");
    const int limit = row ? height_ : width_;
    if (limit > 0 && c >= limit) {
      fail(field, "coordinate " + std::to_string(c) + " outside " + (row ? "height " : "width ") + std::to_string(limit));
    }
    return static_cast<int>(c);
  }

  int class_index(const ordered_json& v, const std::string& field, const std::vector<std::string>& palette) const {
    if (!v.is_string()) fail(field, "expected a class name");
    const auto name = v.get<std::string>();
    const auto it = std::find(palette.begin(), palette.end(), name);
    if (it == palette.end()) fail(field, "unknown class name '" + name + "'");
    return static_cast<int>(it - palette.begin());
  }

  void set_dims(int h, int w) {
    height_ = h;
    width_ = w;
  }

 private:
  std::string source_;
  int height_;
  int width_;
};

}  // namespace

std::vector<std::string> load_palette(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open palette " + path.string());
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": palette does not parse: " + e.what());
  }
  const auto& arr = j.is_object() && j.contains("classes") ? j.at("classes") : j;
  if (!arr.is_array() || arr.empty()) throw InputError(path.string() + ": palette must list class names");
  std::vector<std::string> names;
  for (const auto& v : arr) {
    if (!v.is_string()) throw InputError(path.string() + ": palette entries must be strings");
    names.push_back(v.get<std::string>());
  }
  return names;
}

AnnotationSet parse_annotations(std::string_view json_text, std::string_view source, int height, int width,
                                const std::vector<std::string>* palette) {
  AnnotationParser ps(std::string(source), height, width);
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    ps.fail("$", std::string("does not parse: ") + e.what());
  }
  if (!j.is_object()) ps.fail("$", "expected a JSON object");

  AnnotationSet set;
  const auto& classes = ps.require(j, "classes", "$");
  if (!classes.is_array() || classes.empty()) ps.fail("classes", "expected a non-empty array of names");
  std::vector<std::string> own;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    if (!classes[k].is_string()) ps.fail("classes[" + std::to_string(k) + "]", "expected a string");
    own.push_back(classes[k].get<std::string>());
  }
  set.class_names = palette ? *palette : own;
  for (std::size_t k = 0; k < own.size(); ++k) {
    if (std::find(set.class_names.begin(), set.class_names.end(), own[k]) == set.class_names.end()) {
      ps.fail("classes[" + std::to_string(k) + "]", "unknown class name '" + own[k] + "'");
    }
  }

  if (j.contains("height") || j.contains("width")) {
    const int fh = j.value("height", 0);
    const int fw = j.value("width", 0);
    if ((height > 0 && fh != height) || (width > 0 && fw != width)) {
      ps.fail("height/width", "annotations are for a " + std::to_string(fh) + "x" + std::to_string(fw) +
                                  " image, expected " + std::to_string(height) + "x" + std::to_string(width));
    }
    set.height = fh;
    set.width = fw;
    ps.set_dims(fh, fw);
  } else {
    set.height = height;
    set.width = width;
  }

  set.background_class = ps.class_index(ps.require(j, "background", "$"), "background", set.class_names);

  if (j.contains("boxes")) {
    const auto& boxes = j.at("boxes");
    if (!boxes.is_array()) ps.fail("boxes", "expected an array");
    for (std::size_t k = 0; k < boxes.size(); ++k) {
      const std::string where = "boxes[" + std::to_string(k) + "]";
      const auto& b = boxes[k];
      BoundingBox box;
      box.target_class = ps.class_index(ps.require(b, "class", where), where + ".class", set.class_names);
      box.i1 = ps.coordinate(ps.require(b, "i1", where), where + ".i1", true);
      box.j1 = ps.coordinate(ps.require(b, "j1", where), where + ".j1", false);
      box.i2 = ps.coordinate(ps.require(b, "i2", where), where + ".i2", true);
      box.j2 = ps.coordinate(ps.require(b, "j2", where), where + ".j2", false);
      if (box.i1 > box.i2 || box.j1 > box.j2) ps.fail(where, "corners are inverted");
      set.boxes.push_back(box);
    }
  }
  if (j.contains("scribbles")) {
    const auto& scribbles = j.at("scribbles");
    if (!scribbles.is_array()) ps.fail("scribbles", "expected an array");
    for (std::size_t k = 0; k < scribbles.size(); ++k) {
      const std::string where = "scribbles[" + std::to_string(k) + "]";
      const auto& s = scribbles[k];
      Scribble scribble;
      scribble.target_class = ps.class_index(ps.require(s, "class", where), where + ".class", set.class_names);
      const auto& pixels = ps.require(s, "pixels", where);
      if (!pixels.is_array() || pixels.empty()) ps.fail(where + ".pixels", "expected a non-empty array of [i, j]");
      for (std::size_t n = 0; n < pixels.size(); ++n) {
        const std::string pw = where + ".pixels[" + std::to_string(n) + "]";
        if (!pixels[n].is_array() || pixels[n].size() != 2) ps.fail(pw, "expected [i, j]");
        scribble.pixels.push_back({ps.coordinate(pixels[n][0], pw + "[0]", true), ps.coordinate(pixels[n][1], pw + "[1]", false)});
      }
      set.scribbles.push_back(std::move(scribble));
    }
  }
  if (j.contains("points")) {
    const auto& points = j.at("points");
    if (!points.is_array()) ps.fail("points", "expected an array");
    for (std::size_t k = 0; k < points.size(); ++k) {
      const std::string where = "points[" + std::to_string(k) + "]";
      const auto& p = points[k];
      PointLabel pt;
      pt.target_class = ps.class_index(ps.require(p, "class", where), where + ".class", set.class_names);
      pt.i = ps.coordinate(ps.require(p, "i", where), where + ".i", true);
      pt.j = ps.coordinate(ps.require(p, "j", where), where + ".j", false);
      set.points.push_back(pt);
    }
  }
  return set;
}

AnnotationSet load_annotations(const std::filesystem::path& path, int height, int width,
                               const std::vector<std::string>* palette) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open annotation file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_annotations(buffer.str(), path.string(), height, width, palette);
}

std::string annotations_to_json(const AnnotationSet& set) {
  auto name = [&](int c) -> const std::string& {
    if (c < 0 || static_cast<std::size_t>(c) >= set.class_names.size()) {
      throw InputError("annotation refers to class " + std::to_string(c) + " without a name");
    }
    return set.class_names[static_cast<std::size_t>(c)];
  };
  ordered_json j;
  j["classes"] = set.class_names;
  j["background"] = name(set.background_class);
  if (set.height > 0 && set.width > 0) {
    j["height"] = set.height;
    j["width"] = set.width;
  }
  j["boxes"] = ordered_json::array();
  for (const auto& b : set.boxes) {
    j["boxes"].push_back({{"class", name(b.target_class)}, {"i1", b.i1}, {"j1", b.j1}, {"i2", b.i2}, {"j2", b.j2}});
  }
  j["scribbles"] = ordered_json::array();
  for (const auto& s : set.scribbles) {
    ordered_json pixels = ordered_json::array();
    for (const auto& p : s.pixels) pixels.push_back({p.i, p.j});
    j["scribbles"].push_back({{"class", name(s.target_class)}, {"pixels", pixels}});
  }
  j["points"] = ordered_json::array();
  for (const auto& p : set.points) j["points"].push_back({{"class", name(p.target_class)}, {"i", p.i}, {"j", p.j}});
  return j.dump(2);
}

void save_annotations(const std::filesystem::path& path, const AnnotationSet& set) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write annotation file " + path.string());
  out << annotations_to_json(set) << '\n';
}

std::vector<BoundingBox> derive_boxes_from_gt(const LabelGrid& gt, int background_class) {
  std::map<int, BoundingBox> boxes;
  for (int i = 0; i < gt.height(); ++i) {
    for (int j = 0; j < gt.width(); ++j) {
      const int c = gt(i, j);
      if (c == background_class) continue;
      auto [it, inserted] = boxes.try_emplace(c, BoundingBox{i, j, i, j, c});
      auto& b = it->second;
      b.i1 = std::min(b.i1, i);
      b.i2 = std::max(b.i2, i);
      b.j1 = std::min(b.j1, j);
      b.j2 = std::max(b.j2, j);
    }
  }
  std::vector<BoundingBox> out;
  for (const auto& [c, b] : boxes) out.push_back(b);
  return out;
}

std::vector<PointLabel> sample_points_from_gt(const LabelGrid& gt, int k, std::uint64_t seed) {
  if (k < 1) throw InputError("point count must be positive");
  std::map<int, std::vector<Pixel>> by_class;
  for (int i = 0; i < gt.height(); ++i) {
    for (int j = 0; j < gt.width(); ++j) by_class[gt(i, j)].push_back({i, j});
  }
  std::mt19937_64 rng(seed);
  std::vector<PointLabel> out;
  for (auto& [c, pixels] : by_class) {
    const auto take = std::min(pixels.size(), static_cast<std::size_t>(k));
    // Partial Fisher-Yates: the first `take` entries become the sample.
    for (std::size_t n = 0; n < take && take < pixels.size(); ++n) {
      std::uniform_int_distribution<std::size_t> pick(n, pixels.size() - 1);
      std::swap(pixels[n], pixels[pick(rng)]);
    }
    for (std::size_t n = 0; n < take; ++n) out.push_back({pixels[n].i, pixels[n].j, c});
  }
  return out;
}

namespace {

// Prefix counts of the pixels of one class, for O(1) box queries.
class ClassCounts {
 public:
  ClassCounts(const LabelGrid& gt, int cls) : w_(gt.width() + 1), sums_(static_cast<std::size_t>((gt.height() + 1) * (gt.width() + 1)), 0) {
    for (int i = 0; i < gt.height(); ++i) {
      for (int j = 0; j < gt.width(); ++j) {
        at(i + 1, j + 1) = at(i, j + 1) + at(i + 1, j) - at(i, j) + (gt(i, j) == cls ? 1 : 0);
      }
    }
    total_ = at(gt.height(), gt.width());
  }
  long total() const { return total_; }
  long inside(const BoundingBox& b) const {
    return get(b.i2 + 1, b.j2 + 1) - get(b.i1, b.j2 + 1) - get(b.i2 + 1, b.j1) + get(b.i1, b.j1);
  }

 private:
  long& at(int i, int j) { return sums_[static_cast<std::size_t>(i * w_ + j)]; }
  long get(int i, int j) const { return sums_[static_cast<std::size_t>(i * w_ + j)]; }
  int w_;
  std::vector<long> sums_;
  long total_ = 0;
};

}  // namespace

double box_overlap(const BoundingBox& box, const LabelGrid& gt) {
  const ClassCounts counts(gt, box.target_class);
  if (counts.total() == 0) throw InputError("class " + std::to_string(box.target_class) + " does not occur in the mask");
  return static_cast<double>(counts.inside(box)) / static_cast<double>(counts.total());
}

JitterResult jitter_box(const BoundingBox& box, const LabelGrid& gt, const JitterSpec& spec) {
  if (!(spec.target_overlap > 0.0 && spec.target_overlap <= 1.0)) {
    throw InputError("jitter target overlap must lie in (0, 1], got " + std::to_string(spec.target_overlap));
  }
  validate_box(box, GridShape{gt.height(), gt.width(), std::max(gt.max_label_plus_one(), box.target_class + 1)});
  const ClassCounts counts(gt, box.target_class);
  if (counts.total() == 0) throw InputError("class " + std::to_string(box.target_class) + " does not occur in the mask");
  const double tight_overlap = static_cast<double>(counts.inside(box)) / static_cast<double>(counts.total());
  if (spec.target_overlap >= 1.0) return {box, tight_overlap, true};

  constexpr double kTolerance = 0.02;
  constexpr int kMaxDraws = 10'000;
  std::mt19937_64 rng(spec.rng_seed);
  std::uniform_real_distribution<double> scale(0.6, 1.3);
  std::uniform_real_distribution<double> shift(-0.5, 0.5);
  const double cy = (box.i1 + box.i2) / 2.0;
  const double cx = (box.j1 + box.j2) / 2.0;
  const double hy = box.rows() / 2.0;
  const double hx = box.cols() / 2.0;
  for (int draw = 0; draw < kMaxDraws; ++draw) {
    const double ny = cy + shift(rng) * box.rows();
    const double nx = cx + shift(rng) * box.cols();
    const double sy = hy * scale(rng);
    const double sx = hx * scale(rng);
    BoundingBox cand = box;
    cand.i1 = std::clamp(static_cast<int>(std::lround(ny - sy + 0.5)), 0, gt.height() - 1);
    cand.i2 = std::clamp(static_cast<int>(std::lround(ny + sy - 0.5)), 0, gt.height() - 1);
    cand.j1 = std::clamp(static_cast<int>(std::lround(nx - sx + 0.5)), 0, gt.width() - 1);
    cand.j2 = std::clamp(static_cast<int>(std::lround(nx + sx - 0.5)), 0, gt.width() - 1);
    if (cand.i1 > cand.i2 || cand.j1 > cand.j2) continue;
    const double overlap = static_cast<double>(counts.inside(cand)) / static_cast<double>(counts.total());
    if (std::abs(overlap - spec.target_overlap) <= kTolerance) return {cand, overlap, true};
  }
  return {box, tight_overlap, false};
}

std::vector<Scribble> promote_points(std::span<const PointLabel> points) {
  std::vector<Scribble> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(Scribble{{Pixel{p.i, p.j}}, p.target_class});
  return out;
}

std::vector<Formula> build_constraint_families(const AnnotationSet& set, const GridShape& shape,
                                               const SuperpixelMap* superpixels, const ConstraintOptions& options) {
  std::vector<Formula> out;
  for (const Family family : options.families) {
    const std::string label(family_name(family));
    std::vector<Formula> parts;
    switch (family) {
      case Family::FullSupervision:
        throw InputError("full supervision needs a dense mask, not weak annotations");
      case Family::Scribbles: {
        for (const auto& s : set.scribbles) parts.push_back(build_scribble(s, shape));
        for (const auto& s : promote_points(set.points)) parts.push_back(build_scribble(s, shape));
        break;
      }
      case Family::BboxShallow:
        for (const auto& b : set.boxes) parts.push_back(build_bbox_shallow(b, shape));
        break;
      case Family::Bbox:
        for (const auto& b : set.boxes) parts.push_back(build_bbox_tight(b, shape));
        break;
      case Family::Background:
        out.push_back(build_background(set.boxes, set.background_class, shape));
        continue;
      case Family::Neighborhood:
        out.push_back(build_neighborhood(shape.height, shape.width));
        continue;
      case Family::Fill:
        out.push_back(build_fill(shape.height, shape.width));
        continue;
      case Family::Borders:
        if (superpixels == nullptr) throw InputError("the borders constraint needs a superpixel map");
        if (superpixels->height() != shape.height || superpixels->width() != shape.width) {
          throw InputError("superpixel map size does not match the grid");
        }
        out.push_back(build_borders(*superpixels));
        continue;
      case Family::Corners:
        for (const auto& b : set.boxes) {
          const bool wanted = options.corner_classes.empty() ||
                              std::find(options.corner_classes.begin(), options.corner_classes.end(), b.target_class) !=
                                  options.corner_classes.end();
          if (wanted && b.rows() >= 2 && b.cols() >= 2) parts.push_back(build_corners(b, shape));
        }
        break;
    }
    if (parts.size() == 1) {
      out.push_back(std::move(parts.front()));
    } else {
      out.push_back(Formula::conjunction(std::move(parts), label));
    }
  }
  return out;
}

}  // namespace fuzzyseg
