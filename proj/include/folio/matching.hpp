#pragma once

// Semantic matching (line-level by AR, character-level by edit script) and
// spatial matching (IoU veto against stored pseudo-labels).
//
// Line indices p (results) and q (annotations) and character positions m, n
// are 0-based.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "folio/decoder.hpp"
#include "folio/edit_distance.hpp"
#include "folio/geometry.hpp"
#include "folio/page.hpp"
#include "folio/store.hpp"

namespace folio {

inline constexpr double kThAr = 0.3;
inline constexpr double kThIou = 0.5;

struct LinePair {
  std::size_t p = 0;
  std::size_t q = 0;
  friend bool operator==(const LinePair&, const LinePair&) = default;
  friend auto operator<=>(const LinePair&, const LinePair&) = default;
};

struct CharMatch {
  std::size_t p = 0, m = 0;  // result line, position
  std::size_t q = 0, n = 0;  // annotation line, position
  friend bool operator==(const CharMatch&, const CharMatch&) = default;
  friend auto operator<=>(const CharMatch&, const CharMatch&) = default;
};

struct CharKey {
  std::size_t p = 0, m = 0;
  friend bool operator==(const CharKey&, const CharKey&) = default;
  friend auto operator<=>(const CharKey&, const CharKey&) = default;
};

struct MatchSet {
  std::vector<LinePair> m_l;
  std::vector<CharMatch> m_c;
  std::vector<CharKey> m_ce;
};

/// Greedy one-to-one line matching in descending AR order. Equal ARs keep
/// (p, q) lexicographic order. Pairs below `th_ar` are skipped; with no
/// threshold every pair is eligible. The result is sorted by (p, q).
inline std::vector<LinePair> match_lines(std::span<const ClassSeq> results,
                                         std::span<const ClassSeq> annots,
                                         std::optional<double> th_ar = kThAr) {
  struct Cand {
    Rate rate;
    LinePair pair;
  };
  std::vector<Cand> cands;
  cands.reserve(results.size() * annots.size());
  for (std::size_t p = 0; p < results.size(); ++p)
    for (std::size_t q = 0; q < annots.size(); ++q)
      cands.push_back({ar_rate(results[p], annots[q]), {p, q}});
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Cand& a, const Cand& b) { return b.rate < a.rate; });
  std::vector<char> used_p(results.size(), 0), used_q(annots.size(), 0);
  std::vector<LinePair> m_l;
  for (const Cand& c : cands) {
    if (th_ar && c.rate.value() < *th_ar) continue;
    if (used_p[c.pair.p] || used_q[c.pair.q]) continue;
    used_p[c.pair.p] = used_q[c.pair.q] = 1;
    m_l.push_back(c.pair);
  }
  std::sort(m_l.begin(), m_l.end());
  return m_l;
}

/// Character matches from the canonical edit script of every matched line
/// pair. A result character whose state is Equal is matched; it is also a
/// consecutive equal when the next result-side state is Equal or it is the
/// last state.
inline MatchSet match_chars(std::span<const LinePair> m_l, std::span<const ClassSeq> results,
                            std::span<const ClassSeq> annots) {
  MatchSet out;
  out.m_l.assign(m_l.begin(), m_l.end());
  for (const LinePair& lp : m_l) {
    const EditScript script = edit_script(results[lp.p], annots[lp.q]);
    const auto states = script.hyp_states();
    std::size_t m = 0, n = 0;
    for (EditOp op : script.ops) {
      switch (op) {
        case EditOp::Equal: {
          out.m_c.push_back({lp.p, m, lp.q, n});
          const bool last = m + 1 == states.size();
          if (last || states[m + 1] == EditOp::Equal) out.m_ce.push_back({lp.p, m});
          ++m;
          ++n;
          break;
        }
        case EditOp::Substitute: ++m; ++n; break;
        case EditOp::Insert: ++m; break;
        case EditOp::Delete: ++n; break;
      }
    }
  }
  return out;
}

inline MatchSet semantic_match(std::span<const ClassSeq> results, std::span<const ClassSeq> annots,
                               double th_ar = kThAr) {
  return match_chars(match_lines(results, annots, th_ar), results, annots);
}

/// Drops character matches whose predicted box overlaps the existing
/// pseudo-label with IoU below `th_iou`; matches without a pseudo-label pass.
inline std::vector<CharMatch> spatial_filter(std::span<const CharMatch> m_c,
                                             const PageResult& result, const PageLabels& labels,
                                             double th_iou = kThIou) {
  std::vector<CharMatch> kept;
  kept.reserve(m_c.size());
  for (const CharMatch& c : m_c) {
    const auto& label = labels.at(c.q, c.n);
    if (label) {
      const Box& predicted = result.lines.at(c.p).chars.at(c.m).box;
      if (iou(predicted, label->box, result.shape) < th_iou) continue;
    }
    kept.push_back(c);
  }
  return kept;
}

}  // namespace folio
