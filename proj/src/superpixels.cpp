#include "fuzzyseg/superpixels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <queue>

#include "fuzzyseg/error.hpp"
#include "fuzzyseg/pft.hpp"

namespace fuzzyseg {

namespace {

constexpr double kColorScale = 100.0;

struct Center {
  double y = 0.0;  // continuous coordinates; pixel (i, j) sits at (i + 0.5, j + 0.5)
  double x = 0.0;
  std::vector<double> color;
};

struct SlicGrid {
  int ny = 1;
  int nx = 1;
  double step_y = 1.0;
  double step_x = 1.0;
  double lambda_sq = 0.0;
};

SlicGrid make_grid(const Image& image, const SlicConfig& cfg) {
  const long n = static_cast<long>(image.height) * image.width;
  if (cfg.k < 1) throw InputError("SLIC needs k >= 1");
  if (cfg.k > n) throw InputError("SLIC k = " + std::to_string(cfg.k) + " exceeds the " + std::to_string(n) + " pixels");
  if (!(cfg.compactness > 0.0)) throw InputError("SLIC compactness must be positive");
  if (cfg.max_iters < 1) throw InputError("SLIC needs max_iters >= 1");
  SlicGrid g;
  g.ny = std::clamp(static_cast<int>(std::lround(std::sqrt(static_cast<double>(cfg.k) * image.height / image.width))), 1, image.height);
  g.nx = std::clamp((cfg.k + g.ny - 1) / g.ny, 1, image.width);
  g.step_y = static_cast<double>(image.height) / g.ny;
  g.step_x = static_cast<double>(image.width) / g.nx;
  const double step = std::sqrt(static_cast<double>(n) / (g.ny * g.nx));
  const double lambda = cfg.compactness / step;
  g.lambda_sq = lambda * lambda;
  return g;
}

double gradient_at(const Image& img, int i, int j) {
  auto px = [&](int a, int b, int ch) {
    return img.at(std::clamp(a, 0, img.height - 1), std::clamp(b, 0, img.width - 1), ch);
  };
  double g = 0.0;
  for (int ch = 0; ch < img.channels; ++ch) {
    const double dy = px(i + 1, j, ch) - px(i - 1, j, ch);
    const double dx = px(i, j + 1, ch) - px(i, j - 1, ch);
    g += dy * dy + dx * dx;
  }
  return g;
}

std::vector<Center> seed_centers(const Image& img, const SlicGrid& g) {
  std::vector<Center> centers;
  for (int r = 0; r < g.ny; ++r) {
    for (int c = 0; c < g.nx; ++c) {
      Center ctr;
      ctr.y = (r + 0.5) * g.step_y;
      ctr.x = (c + 0.5) * g.step_x;
      const int pi = std::min(static_cast<int>(ctr.y), img.height - 1);
      const int pj = std::min(static_cast<int>(ctr.x), img.width - 1);
      // Move off edges: only relocate when a neighbor is strictly flatter.
      double best = gradient_at(img, pi, pj);
      int bi = pi;
      int bj = pj;
      for (int di = -1; di <= 1; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          const int i = pi + di;
          const int j = pj + dj;
          if (i < 0 || j < 0 || i >= img.height || j >= img.width) continue;
          const double gr = gradient_at(img, i, j);
          if (gr < best) {
            best = gr;
            bi = i;
            bj = j;
          }
        }
      }
      if (bi != pi || bj != pj) {
        ctr.y = bi + 0.5;
        ctr.x = bj + 0.5;
      }
      ctr.color.resize(static_cast<std::size_t>(img.channels));
      for (int ch = 0; ch < img.channels; ++ch) ctr.color[static_cast<std::size_t>(ch)] = img.at(bi, bj, ch) * kColorScale;
      centers.push_back(std::move(ctr));
    }
  }
  return centers;
}

inline double slic_distance(const Image& img, const SlicGrid& g, const Center& c, int i, int j) {
  double dc = 0.0;
  for (int ch = 0; ch < img.channels; ++ch) {
    const double d = img.at(i, j, ch) * kColorScale - c.color[static_cast<std::size_t>(ch)];
    dc += d * d;
  }
  const double dy = i + 0.5 - c.y;
  const double dx = j + 0.5 - c.x;
  return dc + g.lambda_sq * (dy * dy + dx * dx);
}

inline bool in_window(const SlicGrid& g, const Center& c, int i, int j) {
  return std::abs(i + 0.5 - c.y) <= g.step_y && std::abs(j + 0.5 - c.x) <= g.step_x;
}

// Global nearest center, for pixels outside every search window.
int nearest_center(const Image& img, const SlicGrid& g, const std::vector<Center>& centers, int i, int j) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centers.size(); ++k) {
    const double d = slic_distance(img, g, centers[k], i, j);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

// Flattened per-(row, column block) candidate lists plus center data, read by assign_row.
struct CellIndex {
  const std::uint32_t* start;
  const std::uint32_t* items;
  const double* cy;
  const double* cx;
  const double* color;
  int blocks;
};

// Pixel-major assignment of one row. Kept out of the OpenMP region so the
// compiler sees plain locals instead of shared captures.
void assign_row(const Image& img, const SlicGrid& g, const std::vector<Center>& centers, const CellIndex& index, int i,
                int* labels) {
  const int w = img.width;
  const auto ch = static_cast<std::size_t>(img.channels);
  const double step_y = g.step_y;
  const double step_x = g.step_x;
  const double lambda_sq = g.lambda_sq;
  const double py = i + 0.5;
  const std::size_t row_cell = static_cast<std::size_t>(i) * static_cast<std::size_t>(index.blocks);
  for (int j = 0; j < w; ++j) {
    const double px = j + 0.5;
    const auto cell = row_cell + static_cast<std::size_t>(std::min(index.blocks - 1, static_cast<int>(j / step_x)));
    const double* pix = img.data.data() + (static_cast<std::size_t>(i) * static_cast<std::size_t>(w) + static_cast<std::size_t>(j)) * ch;
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::uint32_t n = index.start[cell]; n < index.start[cell + 1]; ++n) {
      const std::uint32_t k = index.items[n];
      const double dy = py - index.cy[k];
      const double dx = px - index.cx[k];
      if (std::abs(dy) > step_y || std::abs(dx) > step_x) continue;
      double dc = 0.0;
      for (std::size_t c = 0; c < ch; ++c) {
        const double d = pix[c] * kColorScale - index.color[k * ch + c];
        dc += d * d;
      }
      const double d = dc + lambda_sq * (dy * dy + dx * dx);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(k);
      }
    }
    if (best < 0) best = nearest_center(img, g, centers, i, j);
    labels[static_cast<std::size_t>(i) * static_cast<std::size_t>(w) + static_cast<std::size_t>(j)] = best;
  }
}

void assign_parallel(const Image& img, const SlicGrid& g, const std::vector<Center>& centers, std::vector<int>& labels) {
  const int h = img.height;
  const int w = img.width;
  const auto ch = static_cast<std::size_t>(img.channels);
  // Flat copies of the center data; distances use the same expression as slic_distance.
  std::vector<double> cy(centers.size()), cx(centers.size()), ccol(centers.size() * ch);
  for (std::size_t k = 0; k < centers.size(); ++k) {
    cy[k] = centers[k].y;
    cx[k] = centers[k].x;
    for (std::size_t c = 0; c < ch; ++c) ccol[k * ch + c] = centers[k].color[c];
  }
  // Candidate centers per (row, column block) whose window may reach it, in
  // index order so ties still go to the lowest index as in the center-major loop.
  const int blocks = g.nx;
  auto block_of = [&](int j) { return std::min(blocks - 1, static_cast<int>(j / g.step_x)); };
  std::vector<std::uint32_t> cell_start(static_cast<std::size_t>(h) * static_cast<std::size_t>(blocks) + 1, 0);
  std::vector<std::uint32_t> cell_items;
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<std::uint32_t> fill;
    if (pass == 1) {
      for (std::size_t c = 1; c < cell_start.size(); ++c) cell_start[c] += cell_start[c - 1];
      cell_items.resize(cell_start.back());
      fill.assign(cell_start.begin(), cell_start.end() - 1);
    }
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const int i0 = std::max(0, static_cast<int>(std::floor(cy[k] - g.step_y - 0.5)));
      const int i1 = std::min(h - 1, static_cast<int>(std::ceil(cy[k] + g.step_y - 0.5)));
      const int j0 = std::max(0, static_cast<int>(std::floor(cx[k] - g.step_x - 0.5)));
      const int j1 = std::min(w - 1, static_cast<int>(std::ceil(cx[k] + g.step_x - 0.5)));
      if (i0 > i1 || j0 > j1) continue;
      for (int i = i0; i <= i1; ++i) {
        for (int b = block_of(j0); b <= block_of(j1); ++b) {
          const auto cell = static_cast<std::size_t>(i) * static_cast<std::size_t>(blocks) + static_cast<std::size_t>(b);
          if (pass == 0) {
            ++cell_start[cell + 1];
          } else {
            cell_items[fill[cell]++] = static_cast<std::uint32_t>(k);
          }
        }
      }
    }
  }
  const CellIndex index{cell_start.data(), cell_items.data(), cy.data(), cx.data(), ccol.data(), blocks};
#pragma omp parallel for schedule(static)
  for (int i = 0; i < h; ++i) assign_row(img, g, centers, index, i, labels.data());
}

void assign_serial(const Image& img, const SlicGrid& g, const std::vector<Center>& centers, std::vector<int>& labels) {
  const int h = img.height;
  const int w = img.width;
  std::vector<double> dist(labels.size(), std::numeric_limits<double>::infinity());
  std::fill(labels.begin(), labels.end(), -1);
  for (std::size_t k = 0; k < centers.size(); ++k) {
    const auto& c = centers[k];
    const int i0 = std::max(0, static_cast<int>(std::floor(c.y - g.step_y - 0.5)));
    const int i1 = std::min(h - 1, static_cast<int>(std::ceil(c.y + g.step_y - 0.5)));
    const int j0 = std::max(0, static_cast<int>(std::floor(c.x - g.step_x - 0.5)));
    const int j1 = std::min(w - 1, static_cast<int>(std::ceil(c.x + g.step_x - 0.5)));
    for (int i = i0; i <= i1; ++i) {
      for (int j = j0; j <= j1; ++j) {
        if (!in_window(g, c, i, j)) continue;
        const double d = slic_distance(img, g, c, i, j);
        const auto p = static_cast<std::size_t>(i) * static_cast<std::size_t>(w) + static_cast<std::size_t>(j);
        if (d < dist[p]) {
          dist[p] = d;
          labels[p] = static_cast<int>(k);
        }
      }
    }
  }
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      auto& l = labels[static_cast<std::size_t>(i) * static_cast<std::size_t>(w) + static_cast<std::size_t>(j)];
      if (l < 0) l = nearest_center(img, g, centers, i, j);
    }
  }
}

void update_centers(const Image& img, const std::vector<int>& labels, std::vector<Center>& centers) {
  const auto k = centers.size();
  const auto ch = static_cast<std::size_t>(img.channels);
  std::vector<double> sy(k, 0.0), sx(k, 0.0), count(k, 0.0), sc(k * ch, 0.0);
  for (int i = 0; i < img.height; ++i) {
    for (int j = 0; j < img.width; ++j) {
      const auto l = static_cast<std::size_t>(labels[static_cast<std::size_t>(i) * static_cast<std::size_t>(img.width) + static_cast<std::size_t>(j)]);
      sy[l] += i + 0.5;
      sx[l] += j + 0.5;
      count[l] += 1.0;
      for (std::size_t c = 0; c < ch; ++c) sc[l * ch + c] += img.at(i, j, static_cast<int>(c)) * kColorScale;
    }
  }
  for (std::size_t l = 0; l < k; ++l) {
    if (count[l] == 0.0) continue;  // empty cluster keeps its previous center
    centers[l].y = sy[l] / count[l];
    centers[l].x = sx[l] / count[l];
    for (std::size_t c = 0; c < ch; ++c) centers[l].color[c] = sc[l * ch + c] / count[l];
  }
}

// Keeps each label's largest 4-connected component; other components are
// merged into the largest adjacent kept superpixel.
std::vector<int> enforce_connectivity(int h, int w, const std::vector<int>& labels) {
  const auto n = labels.size();
  std::vector<int> comp(n, -1);
  std::vector<std::size_t> comp_size;
  std::vector<int> comp_label;
  std::vector<std::size_t> stack;
  const int di[4] = {-1, 1, 0, 0};
  const int dj[4] = {0, 0, -1, 1};
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    const int id = static_cast<int>(comp_size.size());
    comp_size.push_back(0);
    comp_label.push_back(labels[s]);
    comp[s] = id;
    stack.push_back(s);
    while (!stack.empty()) {
      const auto p = stack.back();
      stack.pop_back();
      ++comp_size[static_cast<std::size_t>(id)];
      const int i = static_cast<int>(p / static_cast<std::size_t>(w));
      const int j = static_cast<int>(p % static_cast<std::size_t>(w));
      for (int d = 0; d < 4; ++d) {
        const int a = i + di[d];
        const int b = j + dj[d];
        if (a < 0 || b < 0 || a >= h || b >= w) continue;
        const auto q = static_cast<std::size_t>(a) * static_cast<std::size_t>(w) + static_cast<std::size_t>(b);
        if (comp[q] < 0 && labels[q] == labels[s]) {
          comp[q] = id;
          stack.push_back(q);
        }
      }
    }
  }

  // Largest component per label (first one wins ties).
  std::map<int, int> keeper;
  for (std::size_t c = 0; c < comp_size.size(); ++c) {
    auto [it, inserted] = keeper.try_emplace(comp_label[c], static_cast<int>(c));
    if (!inserted && comp_size[c] > comp_size[static_cast<std::size_t>(it->second)]) it->second = static_cast<int>(c);
  }
  std::vector<int> out(n, -1);
  std::map<int, std::size_t> kept_size;
  for (std::size_t p = 0; p < n; ++p) {
    const int c = comp[p];
    if (keeper[comp_label[static_cast<std::size_t>(c)]] == c) {
      out[p] = labels[p];
      kept_size[labels[p]] = comp_size[static_cast<std::size_t>(c)];
    }
  }

  // Orphans adjacent to a kept region adopt the largest such neighbor; repeat
  // until every orphan component has been absorbed.
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t c = 0; c < comp_size.size(); ++c) {
      const int cid = static_cast<int>(c);
      if (keeper[comp_label[c]] == cid) continue;
      int best = -1;
      std::size_t best_size = 0;
      bool pending = false;
      for (std::size_t p = 0; p < n; ++p) {
        if (comp[p] != cid) continue;
        if (out[p] >= 0) {
          pending = true;  // already merged
          break;
        }
        const int i = static_cast<int>(p / static_cast<std::size_t>(w));
        const int j = static_cast<int>(p % static_cast<std::size_t>(w));
        for (int d = 0; d < 4; ++d) {
          const int a = i + di[d];
          const int b = j + dj[d];
          if (a < 0 || b < 0 || a >= h || b >= w) continue;
          const int nl = out[static_cast<std::size_t>(a) * static_cast<std::size_t>(w) + static_cast<std::size_t>(b)];
          if (nl < 0) continue;
          const auto sz = kept_size[nl];
          if (best < 0 || sz > best_size || (sz == best_size && nl < best)) {
            best = nl;
            best_size = sz;
          }
        }
      }
      if (pending || best < 0) continue;
      for (std::size_t p = 0; p < n; ++p) {
        if (comp[p] == cid) out[p] = best;
      }
      kept_size[best] += comp_size[c];
      changed = true;
    }
  }
  return out;
}

template <class Assign>
SuperpixelMap run_slic(const Image& image, const SlicConfig& cfg, Assign assign) {
  if (image.height < 1 || image.width < 1 || image.channels < 1) throw InputError("SLIC needs a non-empty image");
  const auto g = make_grid(image, cfg);
  auto centers = seed_centers(image, g);
  std::vector<int> labels(static_cast<std::size_t>(image.height) * static_cast<std::size_t>(image.width), 0);
  for (int it = 0; it < cfg.max_iters; ++it) {
    assign(image, g, centers, labels);
    update_centers(image, labels, centers);
  }
  return relabel_contiguous(image.height, image.width, enforce_connectivity(image.height, image.width, labels));
}

}  // namespace

SlicConfig default_slic_config(int height, int width) {
  SlicConfig cfg;
  const double scaled = 200.0 * static_cast<double>(height) * width / (64.0 * 64.0);
  cfg.k = std::clamp(static_cast<int>(std::lround(scaled)), 1, std::max(1, height * width));
  return cfg;
}

SuperpixelMap slic(const Image& image, const SlicConfig& config) { return run_slic(image, config, assign_parallel); }

SuperpixelMap relabel_contiguous(int height, int width, std::vector<int> labels) {
  std::map<int, int> remap;
  for (auto& v : labels) {
    if (v < 0) throw InputError("superpixel labels must be non-negative");
    auto [it, inserted] = remap.try_emplace(v, static_cast<int>(remap.size()));
    v = it->second;
  }
  return SuperpixelMap(height, width, std::move(labels));
}

SuperpixelMap load_superpixels(const std::filesystem::path& path, int height, int width) {
  const auto t = read_pft(path);
  if (t.channels != 1) throw InputError(path.string() + ": superpixel maps must have one channel");
  if (t.height != height || t.width != width) {
    throw InputError(path.string() + ": superpixel map is " + std::to_string(t.height) + "x" + std::to_string(t.width) +
                     ", expected " + std::to_string(height) + "x" + std::to_string(width));
  }
  std::vector<int> labels(t.data.size());
  for (std::size_t k = 0; k < t.data.size(); ++k) {
    const float v = t.data[k];
    if (!(v >= 0.0f) || v != std::floor(v) || v > 16777216.0f) {
      throw InputError(path.string() + ": superpixel index at position " + std::to_string(k) + " is not a non-negative integer");
    }
    labels[k] = static_cast<int>(v);
  }
  return relabel_contiguous(height, width, std::move(labels));
}

void save_superpixels(const std::filesystem::path& path, const SuperpixelMap& map) {
  std::vector<double> values(map.labels().begin(), map.labels().end());
  write_pft(path, map.height(), map.width(), 1, values);
}

bool superpixels_connected(const SuperpixelMap& map) {
  const std::vector<int> labels(map.labels().begin(), map.labels().end());
  return enforce_connectivity(map.height(), map.width(), labels) == labels;
}

double boundary_recall(const SuperpixelMap& map, const LabelGrid& gt, int tolerance) {
  const int h = gt.height();
  const int w = gt.width();
  if (map.height() != h || map.width() != w) throw InputError("superpixel map and mask differ in size");
  auto is_boundary = [&](auto&& label, int i, int j) {
    const int di[4] = {-1, 1, 0, 0};
    const int dj[4] = {0, 0, -1, 1};
    for (int d = 0; d < 4; ++d) {
      const int a = i + di[d];
      const int b = j + dj[d];
      if (a >= 0 && b >= 0 && a < h && b < w && label(a, b) != label(i, j)) return true;
    }
    return false;
  };
  auto gt_label = [&](int i, int j) { return gt(i, j); };
  auto sp_label = [&](int i, int j) { return map(i, j); };
  long total = 0;
  long hit = 0;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (!is_boundary(gt_label, i, j)) continue;
      ++total;
      bool found = false;
      for (int a = std::max(0, i - tolerance); a <= std::min(h - 1, i + tolerance) && !found; ++a) {
        for (int b = std::max(0, j - tolerance); b <= std::min(w - 1, j + tolerance) && !found; ++b) {
          found = is_boundary(sp_label, a, b);
        }
      }
      hit += found;
    }
  }
  return total == 0 ? 1.0 : static_cast<double>(hit) / static_cast<double>(total);
}

namespace serial {

SuperpixelMap slic(const Image& image, const SlicConfig& config) { return run_slic(image, config, assign_serial); }

}  // namespace serial

}  // namespace fuzzyseg
