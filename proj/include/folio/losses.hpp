#pragma once

// The six loss terms, evaluated as plain numbers against possibly incomplete
// targets. Nothing here is differentiated.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>

#include "folio/geometry.hpp"
#include "folio/page.hpp"
#include "folio/predictions.hpp"
#include "folio/pseudolabels.hpp"
#include "folio/store.hpp"

namespace folio {

inline constexpr double kLossClamp = 1e-7;
inline constexpr std::array<double, 4> kBoxWeights{1.0, 1.0, 0.1, 0.1};

struct LossTerm {
  double value = 0;
  std::size_t samples = 0;
  bool empty = false;    // no samples contributed anywhere
  bool clamped = false;  // a probability hit the clamp bound
};

namespace detail {

struct LogAccum {
  double sum = 0;
  std::size_t n = 0;
  bool clamped = false;

  void add_log(double p) {
    if (p < kLossClamp || p > 1 - kLossClamp) clamped = true;
    sum += std::log(std::clamp(p, kLossClamp, 1 - kLossClamp));
    ++n;
  }
  // -(1/n) * sum, or 0 when empty.
  double neg_mean() const { return n ? -sum / double(n) : 0.0; }
};

inline LossTerm balanced_bce(const PredictionMaps& maps, const std::vector<float>& channel,
                             std::span<const GridIndex> pos, std::span<const GridIndex> neg) {
  LogAccum a, b;
  for (GridIndex g : pos) a.add_log(channel[maps.at(g)]);
  for (GridIndex g : neg) b.add_log(1.0 - channel[maps.at(g)]);
  return {0.5 * a.neg_mean() + 0.5 * b.neg_mean(), a.n + b.n, a.n + b.n == 0,
          a.clamped || b.clamped};
}

}  // namespace detail

inline LossTerm loss_dis(const PredictionMaps& maps, const LossTargets& t) {
  std::vector<GridIndex> pos;
  pos.reserve(t.s_c.size());
  for (const auto& s : t.s_c) pos.push_back(s.grid);
  return detail::balanced_bce(maps, maps.dis, pos, t.s_d_neg);
}

/// Weighted squared error between the predicted box at each s_c grid and the
/// pseudo-label expressed relative to that grid.
inline LossTerm loss_box(const PredictionMaps& maps, const LossTargets& t, const PageLabels& labels) {
  LossTerm r;
  r.samples = t.s_c.size();
  r.empty = t.s_c.empty();
  if (r.empty) return r;
  double sum = 0;
  for (const auto& s : t.s_c) {
    const RelBox o = maps.box_at(s.grid);
    const RelBox ps = abs_to_rel(labels.at(s.q, s.n)->box, s.grid, maps.shape);
    const std::array<double, 4> d{o.x_o - ps.x_o, o.y_o - ps.y_o, o.w_o - ps.w_o, o.h_o - ps.h_o};
    for (std::size_t k = 0; k < 4; ++k) sum += kBoxWeights[k] * d[k] * d[k];
  }
  r.value = sum / double(t.s_c.size());
  return r;
}

inline LossTerm loss_cls(const PredictionMaps& maps, const LossTargets& t,
                         const PageAnnotation& annot) {
  detail::LogAccum a;
  for (const auto& s : t.s_c) {
    const int c = annot.lines.at(s.q).at(s.n);
    a.add_log(maps.cls_row(s.grid)[std::size_t(c - 1)]);
  }
  return {a.neg_mean(), a.n, a.n == 0, a.clamped};
}

inline LossTerm loss_sol(const PredictionMaps& maps, const LossTargets& t) {
  return detail::balanced_bce(maps, maps.sol, t.s_s_pos, t.s_s_neg);
}

inline LossTerm loss_eol(const PredictionMaps& maps, const LossTargets& t) {
  return detail::balanced_bce(maps, maps.eol, t.s_e_pos, t.s_e_neg);
}

inline LossTerm loss_rd(const PredictionMaps& maps, const LossTargets& t) {
  detail::LogAccum a;
  for (const auto& s : t.s_rd) a.add_log(maps.rd_row(s.grid)[std::size_t(s.dir)]);
  return {a.neg_mean(), a.n, a.n == 0, a.clamped};
}

struct LossReport {
  LossTerm dis, box, cls, sol, eol, rd;
  double total = 0;

  std::array<const LossTerm*, 6> terms() const { return {&dis, &box, &cls, &sol, &eol, &rd}; }
};

inline constexpr std::array<const char*, 6> kLossNames{"l_dis", "l_box", "l_cls",
                                                       "l_sol", "l_eol", "l_rd"};

/// Sums the six terms without weights.
inline LossReport loss_total(LossTerm dis, LossTerm box, LossTerm cls, LossTerm sol, LossTerm eol,
                             LossTerm rd) {
  LossReport r{dis, box, cls, sol, eol, rd, 0};
  r.total = dis.value + box.value + cls.value + sol.value + eol.value + rd.value;
  return r;
}

inline LossReport compute_losses(const PredictionMaps& maps, const LossTargets& t,
                                 const PageLabels& labels, const PageAnnotation& annot) {
  return loss_total(loss_dis(maps, t), loss_box(maps, t, labels), loss_cls(maps, t, annot),
                    loss_sol(maps, t), loss_eol(maps, t), loss_rd(maps, t));
}

}  // namespace folio
