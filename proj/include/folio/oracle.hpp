#pragma once

// Noisy-oracle predictor: synthesizes the six prediction maps of a synthetic
// page directly from its ground truth, standing in for a trained network.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "folio/error.hpp"
#include "folio/geometry.hpp"
#include "folio/page.hpp"
#include "folio/predictions.hpp"
#include "folio/random.hpp"

namespace folio {

struct OracleNoise {
  double jitter_sigma = 0;  // center jitter std-dev, fraction of mean char size
  double size_sigma = 0;    // std-dev of log-size jitter
  double label_swap_p = 0;  // class row corrupted
  double drop_p = 0;        // character omitted
  double spurious_p = 0;    // false character per empty grid
  double dir_flip_p = 0;    // rd row re-pointed at random
  std::uint64_t seed = 0;

  bool is_zero() const {
    return jitter_sigma == 0 && size_sigma == 0 && label_swap_p == 0 && drop_p == 0 &&
           spurious_p == 0 && dir_flip_p == 0;
  }

  void validate() const {
    for (double p : {label_swap_p, drop_p, spurious_p, dir_flip_p})
      if (!(p >= 0 && p <= 1)) throw ConfigError("OracleNoise: probabilities must lie in [0,1]");
    if (!(jitter_sigma >= 0) || !(size_sigma >= 0))
      throw ConfigError("OracleNoise: sigmas must be non-negative");
  }

  /// Every magnitude multiplied by `factor` (seed kept).
  OracleNoise scaled(double factor) const {
    OracleNoise n = *this;
    n.jitter_sigma *= factor;
    n.size_sigma *= factor;
    n.label_swap_p = std::min(1.0, label_swap_p * factor);
    n.drop_p = std::min(1.0, drop_p * factor);
    n.spurious_p = std::min(1.0, spurious_p * factor);
    n.dir_flip_p = std::min(1.0, dir_flip_p * factor);
    return n;
  }
};

/// Deterministic 4-connected staircase from `from` to `to`: at every step the
/// move keeping the walk closest to the straight segment is taken, ties going
/// to the dominant axis (horizontal when |dx| == |dy|).
inline std::vector<Direction> rasterize_path(GridIndex from, GridIndex to) {
  const long dx = to.i - from.i;
  const long dy = to.j - from.j;
  const long ax = std::labs(dx);
  const long ay = std::labs(dy);
  const Direction hdir = dx >= 0 ? Direction::Right : Direction::Left;
  const Direction vdir = dy >= 0 ? Direction::Down : Direction::Up;
  std::vector<Direction> moves;
  moves.reserve(std::size_t(ax + ay));
  long u = 0, v = 0;
  while (u < ax || v < ay) {
    bool horizontal;
    if (u == ax) {
      horizontal = false;
    } else if (v == ay) {
      horizontal = true;
    } else {
      const long err_h = std::labs((u + 1) * ay - v * ax);
      const long err_v = std::labs(u * ay - (v + 1) * ax);
      horizontal = err_h < err_v || (err_h == err_v && ax >= ay);
    }
    if (horizontal) {
      moves.push_back(hdir);
      ++u;
    } else {
      moves.push_back(vdir);
      ++v;
    }
  }
  return moves;
}

namespace detail {

inline void set_one_hot(std::span<float> row, std::size_t hot, double floor_total) {
  const std::size_t n = row.size();
  if (n == 1) {
    row[0] = 1.f;
    return;
  }
  const double rest = floor_total / double(n - 1);
  for (std::size_t k = 0; k < n; ++k) row[k] = float(k == hot ? 1.0 - floor_total : rest);
}

inline void normalize(std::span<float> row) {
  double sum = 0;
  for (float v : row) sum += v;
  for (float& v : row) v = float(double(v) / sum);
}

/// Direction towards the nearest page edge (Up, Right, Down, Left on ties).
inline Direction drain_direction(GridIndex g, const GridShape& s) {
  const int dist[4] = {g.j - 1, s.w_g - g.i, s.h_g - g.j, g.i - 1};
  return Direction(std::min_element(std::begin(dist), std::end(dist)) - std::begin(dist));
}

}  // namespace detail

/// Exact maps for `page`, then perturbed according to `noise`.
///
/// Character grids carry dis = 1-kProbFloor, a one-hot class row and the true
/// box; every other grid carries dis = kProbFloor and a uniform class row.
/// rd follows the rasterized path between consecutive characters of a line;
/// a line's last character points one step onward into a grid that points
/// straight back (or off the page), so its search ends without a successor.
/// Remaining grids point towards the nearest page edge.
inline PredictionMaps oracle_predict(const SyntheticPage& page, const OracleNoise& noise) {
  noise.validate();
  const GridShape& s = page.shape;
  const double eps = kProbFloor;
  PredictionMaps m = PredictionMaps::zeros(s, page.n_cls);

  double mean_w = 0, mean_h = 0, mean_px = 0;
  for (const auto& c : page.chars) {
    mean_w += c.box.w;
    mean_h += c.box.h;
    mean_px += 0.5 * (c.box.w * s.img_w + c.box.h * s.img_h);
  }
  if (!page.chars.empty()) {
    mean_w /= double(page.chars.size());
    mean_h /= double(page.chars.size());
    mean_px /= double(page.chars.size());
  } else {
    mean_w = 0.75 / s.w_g;
    mean_h = 0.75 / s.h_g;
  }

  // Background.
  for (std::size_t k = 0; k < s.cells(); ++k) {
    const GridIndex g = grid_at(k, s);
    m.dis[k] = float(eps);
    m.sol[k] = float(eps);
    m.eol[k] = float(eps);
    m.set_box(g, {0.5, 0.5, mean_w, mean_h});
    auto row = m.cls_row(g);
    std::fill(row.begin(), row.end(), float(1.0 / page.n_cls));
    detail::set_one_hot(m.rd_row(g), std::size_t(detail::drain_direction(g, s)), eps);
  }

  // Characters.
  enum class Use : std::uint8_t { Free, Char, Path };
  std::vector<Use> use(s.cells(), Use::Free);
  std::vector<GridIndex> grids(page.chars.size());
  for (std::size_t k = 0; k < page.chars.size(); ++k) {
    const auto& c = page.chars[k];
    if (c.cls < 1 || c.cls > page.n_cls)
      throw GenerationError("oracle_predict: class id out of range");
    const GridIndex g = grid_of(c.box, s);
    const std::size_t f = flat_index(g, s);
    if (use[f] == Use::Char)
      throw GenerationError("oracle_predict: two characters share grid (" + std::to_string(g.i) +
                            ", " + std::to_string(g.j) + ")");
    use[f] = Use::Char;
    grids[k] = g;
    m.dis[f] = float(1.0 - eps);
    detail::set_one_hot(m.cls_row(g), std::size_t(c.cls - 1), eps);
    RelBox r = abs_to_rel(c.box, g, s);
    r.x_o = std::clamp(r.x_o, 0.0, 1.0);
    r.y_o = std::clamp(r.y_o, 0.0, 1.0);
    m.set_box(g, r);
  }

  // Reading-order field along each line.
  const auto starts = page.line_starts();
  for (std::size_t l = 0; l < starts.size(); ++l) {
    const std::size_t first = starts[l];
    std::size_t last = first;
    while (last + 1 < page.chars.size() && page.chars[last + 1].line == page.chars[first].line)
      ++last;
    m.sol[flat_index(grids[first], s)] = float(1.0 - eps);
    m.eol[flat_index(grids[last], s)] = float(1.0 - eps);

    Direction onward = l < page.line_direction.size() ? page.line_direction[l] : Direction::Right;
    for (std::size_t k = first; k < last; ++k) {
      GridIndex at = grids[k];
      for (Direction d : rasterize_path(grids[k], grids[k + 1])) {
        detail::set_one_hot(m.rd_row(at), std::size_t(d), eps);
        if (!(at == grids[k])) use[flat_index(at, s)] = Use::Path;
        at = step(at, d);
        onward = d;
      }
    }

    // Terminate the last character's search: off the page or into a
    // back-pointing grid.
    const GridIndex end = grids[last];
    std::vector<Direction> options{onward};
    for (Direction d : kDirections)
      if (d != onward) options.push_back(d);
    bool placed = false;
    for (Direction d : options) {
      const GridIndex x = step(end, d);
      if (!in_bounds(x, s)) {
        detail::set_one_hot(m.rd_row(end), std::size_t(d), eps);
        placed = true;
        break;
      }
      if (use[flat_index(x, s)] == Use::Free) {
        detail::set_one_hot(m.rd_row(end), std::size_t(d), eps);
        detail::set_one_hot(m.rd_row(x), std::size_t(opposite(d)), eps);
        use[flat_index(x, s)] = Use::Path;
        placed = true;
        break;
      }
    }
    if (!placed) detail::set_one_hot(m.rd_row(end), std::size_t(onward), eps);
  }

  if (noise.is_zero()) return m;

  // Noise. Draws are consumed in a fixed order so a seed fully determines the
  // output.
  Rng rng(noise.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t k = 0; k < page.chars.size(); ++k) {
    const auto& c = page.chars[k];
    const GridIndex g = grids[k];
    const std::size_t f = flat_index(g, s);
    const bool drop = bernoulli(rng, noise.drop_p);
    const double jx = gauss(rng) * noise.jitter_sigma * mean_px;
    const double jy = gauss(rng) * noise.jitter_sigma * mean_px;
    const double sw = std::exp(gauss(rng) * noise.size_sigma);
    const double sh = std::exp(gauss(rng) * noise.size_sigma);
    const bool swap = bernoulli(rng, noise.label_swap_p);
    const int wrong = page.n_cls > 1
                          ? 1 + int((c.cls - 1 + 1 + std::uniform_int_distribution<int>(
                                                         0, page.n_cls - 2)(rng)) %
                                    page.n_cls)
                          : c.cls;
    const double p_wrong = 0.5 + 0.4 * uniform01(rng);
    const double p_true = (1.0 - p_wrong) * (0.3 + 0.6 * uniform01(rng));
    if (drop) {
      m.dis[f] = float(eps);
      continue;
    }
    Box b = c.box;
    b.x += jx;
    b.y += jy;
    b.w = std::clamp(b.w * sw, 1e-6, 1.0);
    b.h = std::clamp(b.h * sh, 1e-6, 1.0);
    RelBox r = abs_to_rel(b, g, s);
    r.x_o = std::clamp(r.x_o, 0.0, 1.0);
    r.y_o = std::clamp(r.y_o, 0.0, 1.0);
    m.set_box(g, r);
    if (swap && wrong != c.cls) {
      auto row = m.cls_row(g);
      std::fill(row.begin(), row.end(), float(eps));
      row[std::size_t(wrong - 1)] = float(p_wrong);
      row[std::size_t(c.cls - 1)] = float(p_true);
      detail::normalize(row);
    }
  }
  for (std::size_t f = 0; f < s.cells(); ++f) {
    const GridIndex g = grid_at(f, s);
    const bool spurious = bernoulli(rng, noise.spurious_p);
    const double conf = 0.5 + 0.5 * uniform01(rng);
    const int cls = 1 + std::uniform_int_distribution<int>(0, page.n_cls - 1)(rng);
    const double p_cls = 0.3 + 0.7 * uniform01(rng);
    const double ox = 0.2 + 0.6 * uniform01(rng);
    const double oy = 0.2 + 0.6 * uniform01(rng);
    const bool flip = bernoulli(rng, noise.dir_flip_p);
    const int dir = std::uniform_int_distribution<int>(0, 3)(rng);
    if (spurious && use[f] != Use::Char) {
      m.dis[f] = float(conf);
      auto row = m.cls_row(g);
      std::fill(row.begin(), row.end(), float(eps));
      row[std::size_t(cls - 1)] = float(p_cls);
      detail::normalize(row);
      m.set_box(g, {ox, oy, mean_w, mean_h});
    }
    if (flip) detail::set_one_hot(m.rd_row(g), std::size_t(dir), eps);
  }
  return m;
}

}  // namespace folio
