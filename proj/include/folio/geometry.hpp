#pragma once

// Grid/image coordinate conversion, boxes, IoU and greedy NMS.
//
// Grid indices are 1-based throughout the public interface: column i runs
// over [1, w_g] left to right and row j over [1, h_g] top to bottom. Cell
// (i, j) covers the half-open pixel range ((i-1)*img_w/w_g, i*img_w/w_g] in x
// and likewise in y.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "folio/error.hpp"

namespace folio {

/// Pixel size of one grid cell in every map file and synthetic page.
inline constexpr int kGridStride = 16;

struct GridShape {
  int w_g = 1;
  int h_g = 1;
  double img_w = kGridStride;
  double img_h = kGridStride;

  static GridShape from_grid(int w_g, int h_g, int stride = kGridStride) {
    GridShape s{w_g, h_g, double(w_g) * stride, double(h_g) * stride};
    s.validate();
    return s;
  }

  void validate() const {
    if (w_g < 1 || h_g < 1 || !(img_w > 0) || !(img_h > 0))
      throw DomainError("GridShape: all dimensions must be positive");
  }

  std::size_t cells() const { return std::size_t(w_g) * std::size_t(h_g); }
  double cell_w() const { return img_w / w_g; }
  double cell_h() const { return img_h / h_g; }

  friend bool operator==(const GridShape&, const GridShape&) = default;
};

struct GridIndex {
  int i = 1;  // column, 1-based
  int j = 1;  // row, 1-based

  friend bool operator==(const GridIndex&, const GridIndex&) = default;
  // Row-major order: rows first, then columns.
  friend bool operator<(const GridIndex& a, const GridIndex& b) {
    return a.j != b.j ? a.j < b.j : a.i < b.i;
  }
};

inline bool in_bounds(GridIndex g, const GridShape& s) {
  return g.i >= 1 && g.i <= s.w_g && g.j >= 1 && g.j <= s.h_g;
}

/// Row-major flat offset of a 1-based grid index.
inline std::size_t flat_index(GridIndex g, const GridShape& s) {
  return std::size_t(g.j - 1) * std::size_t(s.w_g) + std::size_t(g.i - 1);
}

inline GridIndex grid_at(std::size_t flat, const GridShape& s) {
  return {int(flat % std::size_t(s.w_g)) + 1, int(flat / std::size_t(s.w_g)) + 1};
}

inline bool four_adjacent(GridIndex a, GridIndex b) {
  return std::abs(a.i - b.i) + std::abs(a.j - b.j) == 1;
}

// Center in pixels, size as a fraction of the image dimensions.
struct Box {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;

  friend bool operator==(const Box&, const Box&) = default;
};

// Center offset inside a grid cell plus size fractions, as emitted per grid.
struct RelBox {
  double x_o = 0;
  double y_o = 0;
  double w_o = 0;
  double h_o = 0;

  friend bool operator==(const RelBox&, const RelBox&) = default;
};

inline void check_grid(GridIndex g, const GridShape& s, const char* what) {
  if (!in_bounds(g, s))
    throw DomainError(std::string(what) + ": grid (" + std::to_string(g.i) + ", " +
                      std::to_string(g.j) + ") outside " + std::to_string(s.w_g) + "x" +
                      std::to_string(s.h_g));
}

inline Box rel_to_abs(const RelBox& r, GridIndex g, const GridShape& s) {
  check_grid(g, s, "rel_to_abs");
  return {(g.i - 1 + r.x_o) / s.w_g * s.img_w, (g.j - 1 + r.y_o) / s.h_g * s.img_h, r.w_o,
          r.h_o};
}

/// Inverse of rel_to_abs. Offsets fall outside [0,1] when the box center lies
/// outside cell g; clamping is left to the caller.
inline RelBox abs_to_rel(const Box& b, GridIndex g, const GridShape& s) {
  return {b.x * s.w_g / s.img_w - (g.i - 1), b.y * s.h_g / s.img_h - (g.j - 1), b.w, b.h};
}

/// Cell containing the box center, ceil-based and clamped into the grid so a
/// center at exactly 0 (or past the far edge) still yields a valid cell.
inline GridIndex grid_of(const Box& b, const GridShape& s) {
  auto cell = [](double v, int n, double extent) {
    const double c = std::ceil(v * n / extent);
    if (!(c >= 1)) return 1;  // also catches NaN
    if (c > n) return n;
    return int(c);
  };
  return {cell(b.x, s.w_g, s.img_w), cell(b.y, s.h_g, s.img_h)};
}

struct PixelRect {
  double x0, y0, x1, y1;
  double area() const { return std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0); }
};

inline PixelRect to_pixels(const Box& b, const GridShape& s) {
  const double hw = 0.5 * b.w * s.img_w;
  const double hh = 0.5 * b.h * s.img_h;
  return {b.x - hw, b.y - hh, b.x + hw, b.y + hh};
}

inline double iou(const Box& a, const Box& b, const GridShape& s) {
  const PixelRect ra = to_pixels(a, s);
  const PixelRect rb = to_pixels(b, s);
  const PixelRect inter{std::max(ra.x0, rb.x0), std::max(ra.y0, rb.y0), std::min(ra.x1, rb.x1),
                        std::min(ra.y1, rb.y1)};
  const double ia = inter.area();
  const double uni = ra.area() + rb.area() - ia;
  if (!(uni > 0)) return 0.0;
  return std::clamp(ia / uni, 0.0, 1.0);
}

struct ScoredBox {
  Box box;
  double score = 0;
};

/// NMS IoU threshold when none is configured.
inline constexpr double kDefaultNmsIou = 0.3;

/// Greedy non-maximum suppression. Candidates are visited in descending score
/// order, equal scores in input order; a candidate is dropped when its IoU with
/// an already kept one exceeds `iou_threshold`. Returns kept indices in
/// ascending input order.
inline std::vector<std::size_t> nms(std::span<const ScoredBox> candidates, double iou_threshold,
                                    const GridShape& shape) {
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].score > candidates[b].score;
  });
  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (iou(candidates[idx].box, candidates[k].box, shape) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(idx);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

}  // namespace folio
