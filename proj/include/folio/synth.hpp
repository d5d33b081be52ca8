#pragma once

// Synthetic pages: lines of random class ids laid out as boxes on the grid,
// horizontally, rotated by a multiple of 90 degrees, or along a sine curve.
// Characters are geometric objects only; nothing is rasterized.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "folio/decoder.hpp"
#include "folio/error.hpp"
#include "folio/geometry.hpp"
#include "folio/oracle.hpp"
#include "folio/page.hpp"
#include "folio/random.hpp"

namespace folio {

struct SynthConfig {
  int n_lines = 5;
  int chars_min = 10;
  int chars_max = 10;
  int n_cls = 100;
  Layout layout;
  double char_size_min = 0.6;  // box side, in cells
  double char_size_max = 0.9;
  double pitch_min = 1.0;  // center spacing along a line, in cells
  double pitch_max = 1.6;
  double line_gap = 3.0;  // baseline spacing in rows, before curve padding
  int margin = 2;         // empty cells around the text block
  int w_g = 0;            // page size in the unrotated frame; 0 = fit content
  int h_g = 0;
  std::uint64_t seed = 0;
  int max_attempts = 64;
  std::string page_id;  // empty: derived from the seed

  void validate() const {
    if (n_lines < 1) throw GenerationError("synth: n_lines must be >= 1");
    if (chars_min < 1 || chars_max < chars_min)
      throw GenerationError("synth: need 1 <= chars_min <= chars_max");
    if (n_cls < 1) throw GenerationError("synth: n_cls must be >= 1");
    if (!(char_size_min > 0) || char_size_max < char_size_min || char_size_max > 1.0)
      throw GenerationError("synth: char size range must lie in (0, 1] cells");
    if (!(pitch_min >= 1.0) || pitch_max < pitch_min)
      throw GenerationError("synth: pitch range must satisfy 1 <= pitch_min <= pitch_max");
    if (!(line_gap >= 2.0)) throw GenerationError("synth: line_gap must be >= 2 rows");
    if (margin < 1) throw GenerationError("synth: margin must be >= 1");
    if (layout.kind == LayoutKind::SineCurve &&
        (!(layout.amplitude >= 0) || !(layout.period > 0)))
      throw GenerationError("synth: sine amplitude must be >= 0 and period > 0");
    if (max_attempts < 1) throw GenerationError("synth: max_attempts must be >= 1");
  }

  double curve_pad() const {
    return layout.kind == LayoutKind::SineCurve ? std::ceil(layout.amplitude) : 0.0;
  }
  int needed_width() const {
    return 2 * margin + int(std::ceil((chars_max - 1) * pitch_max)) + 1;
  }
  int needed_height() const {
    return 2 * margin + int(std::ceil((n_lines - 1) * (line_gap + 2 * curve_pad()) +
                                      2 * curve_pad())) + 1;
  }
};

namespace detail {

struct PlacedChar {
  double x, y;    // center, grid units, unrotated frame
  double sw, sh;  // size in cells
  int cls;
};

inline double snap_into_cell(double v) {
  const double cell = std::floor(v);
  return cell + std::clamp(v - cell, 0.15, 0.85);
}

/// Rotates a point of a W x H (grid units) frame clockwise by `deg`.
inline void rotate_cw(int deg, double w, double h, double& x, double& y) {
  const double ox = x, oy = y;
  switch (deg) {
    case 90: x = h - oy; y = ox; break;
    case 180: x = w - ox; y = h - oy; break;
    case 270: x = oy; y = w - ox; break;
    default: break;
  }
}

inline Direction rotate_cw(int deg, Direction d) {
  return Direction((std::uint8_t(d) + deg / 90) % 4);
}

inline SyntheticPage layout_page(const SynthConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * uniform01(rng); };
  const int W = cfg.w_g > 0 ? cfg.w_g : cfg.needed_width();
  const int H = cfg.h_g > 0 ? cfg.h_g : cfg.needed_height();
  if (W < cfg.needed_width() || H < cfg.needed_height())
    throw GenerationError("synth: page " + std::to_string(W) + "x" + std::to_string(H) +
                          " too small for the requested content (needs " +
                          std::to_string(cfg.needed_width()) + "x" +
                          std::to_string(cfg.needed_height()) + ")");
  const bool sine = cfg.layout.kind == LayoutKind::SineCurve;
  const double pad = cfg.curve_pad();

  std::vector<std::vector<PlacedChar>> lines;
  for (int l = 0; l < cfg.n_lines; ++l) {
    const int n = std::uniform_int_distribution<int>(cfg.chars_min, cfg.chars_max)(rng);
    const double span_max = (n - 1) * cfg.pitch_max;
    const double slack = std::max(0.0, W - 2.0 * cfg.margin - 1.0 - span_max);
    double x = cfg.margin + 0.5 + uni(0.0, slack);
    const double baseline = cfg.margin + pad + l * (cfg.line_gap + 2 * pad) + 0.5 + uni(-0.2, 0.2);
    std::vector<PlacedChar> line;
    for (int k = 0; k < n; ++k) {
      if (k > 0) x += uni(cfg.pitch_min, cfg.pitch_max);
      const double jy = uni(-0.15, 0.15);
      PlacedChar c;
      c.x = x;
      c.y = baseline + jy;
      if (sine)
        c.y += cfg.layout.amplitude * std::sin(2 * std::numbers::pi * x / cfg.layout.period);
      c.sw = uni(cfg.char_size_min, cfg.char_size_max);
      c.sh = uni(cfg.char_size_min, cfg.char_size_max);
      c.cls = std::uniform_int_distribution<int>(1, cfg.n_cls)(rng);
      line.push_back(c);
    }
    lines.push_back(std::move(line));
  }

  const int deg = cfg.layout.rotation();
  const bool swap = deg == 90 || deg == 270;
  SyntheticPage page;
  page.shape = GridShape::from_grid(swap ? H : W, swap ? W : H);
  page.n_cls = cfg.n_cls;
  page.layout = cfg.layout;
  page.annotation.shape = page.shape;
  for (std::size_t l = 0; l < lines.size(); ++l) {
    ClassSeq transcript;
    std::vector<Box> boxes;
    for (std::size_t k = 0; k < lines[l].size(); ++k) {
      const PlacedChar& p = lines[l][k];
      double x = snap_into_cell(p.x);
      double y = snap_into_cell(p.y);
      rotate_cw(deg, W, H, x, y);
      const double sw = swap ? p.sh : p.sw;
      const double sh = swap ? p.sw : p.sh;
      const double stride = kGridStride;
      Box b{x * stride, y * stride, sw * stride / page.shape.img_w,
            sh * stride / page.shape.img_h};
      page.chars.push_back({l, k, p.cls, b});
      transcript.push_back(p.cls);
      boxes.push_back(b);
    }
    page.annotation.lines.push_back(std::move(transcript));
    page.annotation.boxes.push_back(std::move(boxes));
    page.line_direction.push_back(rotate_cw(deg, Direction::Right));
  }
  return page;
}

}  // namespace detail

/// Structural validity: one character per grid.
inline bool grids_unique(const SyntheticPage& page) {
  std::set<std::pair<int, int>> seen;
  for (std::size_t k = 0; k < page.chars.size(); ++k) {
    const GridIndex g = page.grid(k);
    if (!seen.insert({g.j, g.i}).second) return false;
  }
  return true;
}

/// True when noiseless oracle maps decode back to exactly the page's lines:
/// same grids, classes and segmentation, nothing left over.
inline bool survives_round_trip(const SyntheticPage& page, const DecodeConfig& cfg = {}) {
  if (!grids_unique(page)) return false;
  PageResult r;
  try {
    r = decode(oracle_predict(page, OracleNoise{}), cfg);
  } catch (const Error&) {
    return false;
  }
  if (!r.unassigned.empty() || r.lines.size() != page.n_lines()) return false;
  std::set<std::vector<std::pair<int, int>>> expected, got;
  const auto starts = page.line_starts();
  for (std::size_t l = 0; l < starts.size(); ++l) {
    std::vector<std::pair<int, int>> seq;
    for (std::size_t k = starts[l]; k < page.chars.size() && page.chars[k].line == l; ++k) {
      const GridIndex g = page.grid(k);
      seq.push_back({g.j * 1000000 + g.i, page.chars[k].cls});
    }
    expected.insert(std::move(seq));
  }
  for (const auto& line : r.lines) {
    std::vector<std::pair<int, int>> seq;
    for (const auto& c : line.chars) seq.push_back({c.grid.j * 1000000 + c.grid.i, c.cls_id});
    got.insert(std::move(seq));
  }
  return expected == got;
}

/// Generates a page that passes the noiseless round trip, retrying the layout
/// with derived seeds; throws GenerationError when the configuration is
/// infeasible or every attempt fails.
inline SyntheticPage gen_page(const SynthConfig& cfg) {
  cfg.validate();
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    SyntheticPage page =
        detail::layout_page(cfg, derive_seed(cfg.seed, {std::uint64_t(attempt)}));
    if (!survives_round_trip(page)) continue;
    if (cfg.page_id.empty()) {
      page.page_id = "page-s" + std::to_string(cfg.seed);
    } else {
      page.page_id = cfg.page_id;
    }
    page.annotation.page_id = page.page_id;
    return page;
  }
  throw GenerationError("synth: no valid page after " + std::to_string(cfg.max_attempts) +
                        " attempts");
}

inline std::string dataset_page_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "page-%04zu", index);
  return buf;
}

/// Page `index` of the dataset seeded by `cfg.seed`.
inline SyntheticPage gen_dataset_page(const SynthConfig& cfg, std::size_t index) {
  SynthConfig c = cfg;
  c.seed = derive_seed(cfg.seed, {0x5eedULL, std::uint64_t(index)});
  c.page_id = dataset_page_id(index);
  return gen_page(c);
}

inline std::vector<SyntheticPage> gen_dataset(const SynthConfig& cfg, std::size_t n_pages) {
  std::vector<SyntheticPage> pages;
  pages.reserve(n_pages);
  for (std::size_t k = 0; k < n_pages; ++k) pages.push_back(gen_dataset_page(cfg, k));
  return pages;
}

}  // namespace folio
