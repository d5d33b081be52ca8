#pragma once

// Pseudo-label updating and loss-target assembly.
//
// update() folds matched predictions into the stored boxes with
// score-dependent weights; build_targets() turns the current store and
// matches into the sample sets every loss term is computed over, including
// randomly generated reading-order paths between consecutive pseudo-labels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iterator>
#include <numeric>
#include <span>
#include <vector>

#include "folio/decoder.hpp"
#include "folio/geometry.hpp"
#include "folio/matching.hpp"
#include "folio/page.hpp"
#include "folio/predictions.hpp"
#include "folio/random.hpp"
#include "folio/store.hpp"

namespace folio {

inline constexpr double kEpsilon = 10.0;

/// Weight of the stored label when merging it with a prediction of score
/// `b_sco`: e^{eps*gamma} / (e^{eps*gamma} + e^{eps*b_sco}), evaluated in a
/// form that cannot overflow.
inline double update_weight(double gamma, double b_sco, double epsilon = kEpsilon) {
  if (gamma == b_sco) return 0.5;
  const double z = epsilon * (b_sco - gamma);
  if (z >= 0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

/// Folds every match into `labels`, in the order given.
inline void update(PageLabels& labels, std::span<const CharMatch> m_c, const PageResult& result,
                   double epsilon = kEpsilon) {
  for (const CharMatch& c : m_c) {
    const CharInstance& pred = result.lines.at(c.p).chars.at(c.m);
    auto& slot = labels.at(c.q, c.n);
    if (!slot) {
      slot = PseudoLabel{pred.box, pred.score, 1};
      continue;
    }
    const double lam = update_weight(slot->gamma, pred.score, epsilon);
    Box& b = slot->box;
    b.x = lam * b.x + (1 - lam) * pred.box.x;
    b.y = lam * b.y + (1 - lam) * pred.box.y;
    b.w = lam * b.w + (1 - lam) * pred.box.w;
    b.h = lam * b.h + (1 - lam) * pred.box.h;
    slot->gamma = lam * slot->gamma + (1 - lam) * pred.score;
    ++slot->count;
  }
}

struct GridSample {
  GridIndex grid;
  std::size_t q = 0;
  std::size_t n = 0;
  friend bool operator==(const GridSample&, const GridSample&) = default;
};

struct DirSample {
  GridIndex grid;
  Direction dir = Direction::Right;
  friend bool operator==(const DirSample&, const DirSample&) = default;
  friend bool operator<(const DirSample& a, const DirSample& b) {
    if (!(a.grid == b.grid)) return a.grid < b.grid;
    return a.dir < b.dir;
  }
};

struct LossTargets {
  std::vector<GridSample> s_c;  // one entry per grid, row-major
  std::vector<GridIndex> s_d_neg;
  std::vector<GridIndex> s_s_pos, s_s_neg;
  std::vector<GridIndex> s_e_pos, s_e_neg;
  std::vector<DirSample> s_rd;
  std::size_t collisions = 0;  // pseudo-labels dropped from s_c by a shared grid
};

/// Path samples from grid `from` to grid `to`: |di| horizontal and |dj|
/// vertical moves, the vertical ones placed at uniformly random positions.
/// Each sample is the grid the move leaves from.
inline std::vector<DirSample> random_staircase(GridIndex from, GridIndex to, Rng& rng) {
  const int di = to.i - from.i;
  const int dj = to.j - from.j;
  const std::size_t zeta = std::size_t(std::abs(di) + std::abs(dj));
  std::vector<char> vertical(zeta, 0);
  std::vector<std::size_t> idx(zeta);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<std::size_t> picked;
  std::sample(idx.begin(), idx.end(), std::back_inserter(picked), std::size_t(std::abs(dj)), rng);
  for (std::size_t k : picked) vertical[k] = 1;

  const Direction h = di >= 0 ? Direction::Right : Direction::Left;
  const Direction v = dj >= 0 ? Direction::Down : Direction::Up;
  std::vector<DirSample> out;
  out.reserve(zeta);
  GridIndex g = from;
  for (std::size_t k = 0; k < zeta; ++k) {
    const Direction d = vertical[k] ? v : h;
    out.push_back({g, d});
    g = step(g, d);
  }
  return out;
}

/// Reading-order samples between every pair of consecutive pseudo-labels of
/// a line, in (q, n) order. Duplicates are kept; build_targets reduces them to
/// a set.
inline std::vector<DirSample> gen_paths(const PageLabels& labels, const GridShape& shape,
                                        Rng& rng) {
  std::vector<DirSample> out;
  for (const auto& line : labels.slots) {
    for (std::size_t n = 0; n + 1 < line.size(); ++n) {
      if (!line[n] || !line[n + 1]) continue;
      const auto path =
          random_staircase(grid_of(line[n]->box, shape), grid_of(line[n + 1]->box, shape), rng);
      out.insert(out.end(), path.begin(), path.end());
    }
  }
  return out;
}

namespace detail {

template <class T>
void sort_unique(std::vector<T>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace detail

/// Sample sets for every loss term. `m_ce` indexes characters of `result`;
/// `rng` drives the path generation.
inline LossTargets build_targets(const PageLabels& labels, const PageResult& result,
                                 std::span<const CharKey> m_ce, const GridShape& shape, Rng& rng) {
  LossTargets t;

  struct Entry {
    GridSample s;
    double gamma;
  };
  std::vector<Entry> entries;
  for (std::size_t q = 0; q < labels.slots.size(); ++q)
    for (std::size_t n = 0; n < labels.slots[q].size(); ++n)
      if (const auto& l = labels.slots[q][n]) entries.push_back({{grid_of(l->box, shape), q, n}, l->gamma});
  // Per grid the highest gamma survives, ties to the earlier (q, n).
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (!(a.s.grid == b.s.grid)) return a.s.grid < b.s.grid;
    return a.gamma > b.gamma;
  });
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (k > 0 && entries[k].s.grid == entries[k - 1].s.grid) {
      ++t.collisions;
      continue;
    }
    t.s_c.push_back(entries[k].s);
  }

  for (const GridSample& s : t.s_c) {
    const std::size_t last = labels.slots[s.q].size() - 1;
    (s.n == 0 ? t.s_s_pos : t.s_s_neg).push_back(s.grid);
    (s.n == last ? t.s_e_pos : t.s_e_neg).push_back(s.grid);
  }

  for (const CharKey& k : m_ce)
    for (GridIndex g : result.lines.at(k.p).traces.at(k.m).path()) t.s_d_neg.push_back(g);
  detail::sort_unique(t.s_d_neg);

  t.s_rd = gen_paths(labels, shape, rng);
  detail::sort_unique(t.s_rd);
  return t;
}

}  // namespace folio
