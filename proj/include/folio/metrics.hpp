#pragma once

// Evaluation: page-level AR*/CR*, character detection precision/recall/F and
// pseudo-label quality (coverage and mean IoU against ground truth).

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "folio/decoder.hpp"
#include "folio/edit_distance.hpp"
#include "folio/error.hpp"
#include "folio/geometry.hpp"
#include "folio/matching.hpp"
#include "folio/page.hpp"
#include "folio/store.hpp"

namespace folio {

struct ErrorCounts {
  long n_ie = 0;
  long n_de = 0;
  long n_se = 0;
  long n_total = 0;

  ErrorCounts& operator+=(const ErrorCounts& o) {
    n_ie += o.n_ie;
    n_de += o.n_de;
    n_se += o.n_se;
    n_total += o.n_total;
    return *this;
  }
  double ar() const { return double(n_total - n_ie - n_de - n_se) / double(n_total); }
  double cr() const { return double(n_total - n_de - n_se) / double(n_total); }
  friend bool operator==(const ErrorCounts&, const ErrorCounts&) = default;
};

/// Error counts of one page: unthresholded greedy line matching, edit counts
/// over matched pairs, unmatched result lines as insertions and unmatched
/// annotation lines as deletions.
inline ErrorCounts page_errors(std::span<const ClassSeq> results, std::span<const ClassSeq> annots) {
  ErrorCounts e;
  for (const auto& a : annots) e.n_total += long(a.size());
  const auto m_l = match_lines(results, annots, std::nullopt);
  std::vector<char> used_p(results.size(), 0), used_q(annots.size(), 0);
  for (const LinePair& lp : m_l) {
    used_p[lp.p] = used_q[lp.q] = 1;
    const EditCounts c = edit_counts(results[lp.p], annots[lp.q]);
    e.n_ie += c.ie;
    e.n_de += c.de;
    e.n_se += c.se;
  }
  for (std::size_t p = 0; p < results.size(); ++p)
    if (!used_p[p]) e.n_ie += long(results[p].size());
  for (std::size_t q = 0; q < annots.size(); ++q)
    if (!used_q[q]) e.n_de += long(annots[q].size());
  return e;
}

struct ArStar {
  double ar_star = 0;
  double cr_star = 0;
  ErrorCounts counts;
  std::vector<ErrorCounts> per_page;
};

/// AR* and CR* over a set of pages; results[k] and annots[k] belong to page k.
/// AR* is not clamped and goes negative when insertions dominate.
inline ArStar ar_star(std::span<const std::vector<ClassSeq>> results,
                      std::span<const std::vector<ClassSeq>> annots) {
  if (results.size() != annots.size())
    throw DomainError("ar_star: result and annotation page counts differ");
  ArStar out;
  for (std::size_t k = 0; k < annots.size(); ++k) {
    out.per_page.push_back(page_errors(results[k], annots[k]));
    out.counts += out.per_page.back();
  }
  if (out.counts.n_total == 0) throw DomainError("ar_star: annotations contain no characters");
  out.ar_star = out.counts.ar();
  out.cr_star = out.counts.cr();
  return out;
}

struct PageArCr {
  double ar = 0;
  double cr = 0;
};

inline PageArCr page_ar_cr(std::span<const int> result, std::span<const int> annot) {
  return {folio::ar(result, annot), folio::cr(result, annot)};
}

struct DetItem {
  Box box;
  int cls = 1;
  double score = 0;
};

struct Prf {
  double p = 0, r = 0, f = 0;
  std::size_t tp = 0, fp = 0, fn = 0;
  bool undefined = false;  // some ratio had a zero denominator and was set to 0
};

/// Precision, recall and F from match counts; ratios with a zero denominator
/// are 0 and flagged.
inline Prf prf_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  Prf out;
  out.tp = tp;
  out.fp = fp;
  out.fn = fn;
  auto ratio = [&](std::size_t num, std::size_t den) {
    if (den == 0) {
      out.undefined = true;
      return 0.0;
    }
    return double(num) / double(den);
  };
  out.p = ratio(tp, tp + fp);
  out.r = ratio(tp, tp + fn);
  if (out.p + out.r > 0) {
    out.f = 2 * out.p * out.r / (out.p + out.r);
  } else {
    out.undefined = true;
  }
  return out;
}

/// Greedy one-to-one detection matching. Results are visited by descending
/// score (ties in input order); each takes the eligible unmatched ground
/// truth with the highest IoU (ties to the lower index).
inline Prf det_prf(std::span<const DetItem> results, std::span<const DetItem> truth,
                   const GridShape& shape, double iou_th = 0.5, bool require_class = false) {
  std::vector<std::size_t> order(results.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return results[a].score > results[b].score;
  });
  std::vector<char> taken(truth.size(), 0);
  std::size_t tp = 0, fp = 0;
  for (std::size_t r : order) {
    std::optional<std::size_t> best;
    double best_iou = 0;
    for (std::size_t g = 0; g < truth.size(); ++g) {
      if (taken[g] || (require_class && truth[g].cls != results[r].cls)) continue;
      const double v = iou(results[r].box, truth[g].box, shape);
      if (v >= iou_th && (!best || v > best_iou)) {
        best = g;
        best_iou = v;
      }
    }
    if (best) {
      taken[*best] = 1;
      ++tp;
    } else {
      ++fp;
    }
  }
  return prf_from_counts(tp, fp, truth.size() - tp);
}

inline std::vector<DetItem> det_items(const PageResult& r) {
  std::vector<DetItem> out;
  for (const auto& line : r.lines)
    for (const auto& c : line.chars) out.push_back({c.box, c.cls_id, c.score});
  return out;
}

inline std::vector<DetItem> det_items(const PageAnnotation& a) {
  if (!a.has_boxes()) throw DomainError("annotation '" + a.page_id + "' has no boxes");
  std::vector<DetItem> out;
  for (std::size_t q = 0; q < a.lines.size(); ++q)
    for (std::size_t n = 0; n < a.lines[q].size(); ++n) out.push_back({a.boxes[q][n], a.lines[q][n], 1.0});
  return out;
}

/// Pseudo-label coverage and IoU against ground truth, summable across pages.
struct LabelQuality {
  std::size_t n_slots = 0;
  std::size_t n_labeled = 0;
  double iou_sum = 0;

  LabelQuality& operator+=(const LabelQuality& o) {
    n_slots += o.n_slots;
    n_labeled += o.n_labeled;
    iou_sum += o.iou_sum;
    return *this;
  }
  double coverage() const { return n_slots ? double(n_labeled) / double(n_slots) : 0.0; }
  double mean_iou() const { return n_labeled ? iou_sum / double(n_labeled) : 0.0; }
};

inline LabelQuality label_quality(const PageLabels& labels, const PageAnnotation& truth,
                                  const GridShape& shape) {
  if (!truth.has_boxes()) throw DomainError("label_quality: annotation has no boxes");
  if (labels.slots.size() != truth.lines.size())
    throw DomainError("label_quality: store does not match annotation '" + truth.page_id + "'");
  LabelQuality q;
  for (std::size_t l = 0; l < labels.slots.size(); ++l) {
    if (labels.slots[l].size() != truth.boxes[l].size())
      throw DomainError("label_quality: store does not match annotation '" + truth.page_id + "'");
    for (std::size_t n = 0; n < labels.slots[l].size(); ++n) {
      ++q.n_slots;
      if (const auto& s = labels.slots[l][n]) {
        ++q.n_labeled;
        q.iou_sum += iou(s->box, truth.boxes[l][n], shape);
      }
    }
  }
  return q;
}

}  // namespace folio
