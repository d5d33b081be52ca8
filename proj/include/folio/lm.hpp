#pragma once

// N-gram language-model rescoring of decoded lines.
//
// A line is re-read as a frame sequence: each character's grid followed by
// the grids of its search path, in reading order. Frame t offers a blank with
// probability 1 - dis_t and class c with probability dis_t * cls_t[c]. The
// decoder searches alignments (one symbol per frame, blanks dropped, no
// merging of repeats since every frame is a distinct grid) maximizing
//
//   sum_t log p_t(symbol_t) + lm_weight * sum_k log P(label_k | history)
//                           + insertion_bonus * |labels|
//
// with a beam over hypotheses recombined on their n-gram history.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "folio/decoder.hpp"
#include "folio/error.hpp"
#include "folio/predictions.hpp"

namespace folio {

class NgramLm {
 public:
  virtual ~NgramLm() = default;
  virtual int order() const = 0;
  virtual int n_cls() const = 0;
  /// log P(c | context); context holds the most recent labels, last = newest,
  /// at most order()-1 of them. -infinity for zero mass.
  virtual double log_prob(std::span<const int> context, int c) const = 0;
};

class UniformLm final : public NgramLm {
 public:
  UniformLm(int n_cls, int order = 3) : n_cls_(n_cls), order_(order) {
    if (n_cls < 1 || order < 1) throw DomainError("UniformLm: n_cls and order must be >= 1");
  }
  int order() const override { return order_; }
  int n_cls() const override { return n_cls_; }
  double log_prob(std::span<const int>, int) const override { return -std::log(double(n_cls_)); }

 private:
  int n_cls_;
  int order_;
};

/// Explicit conditional probability table. Lookups use the longest stored
/// context suffix; unknown events get `fallback` probability.
class TableLm final : public NgramLm {
 public:
  TableLm(int n_cls, int order, double fallback)
      : n_cls_(n_cls), order_(order), fallback_(fallback) {
    if (n_cls < 1 || order < 1) throw DomainError("TableLm: n_cls and order must be >= 1");
  }

  void set(std::vector<int> context, int c, double prob) {
    if (int(context.size()) >= order_) throw DomainError("TableLm: context longer than order-1");
    context.push_back(c);
    table_[std::move(context)] = prob;
  }

  int order() const override { return order_; }
  int n_cls() const override { return n_cls_; }
  double log_prob(std::span<const int> context, int c) const override {
    const std::size_t keep = std::min<std::size_t>(context.size(), std::size_t(order_ - 1));
    for (std::size_t k = keep + 1; k-- > 0;) {
      std::vector<int> key(context.end() - long(k), context.end());
      key.push_back(c);
      if (auto it = table_.find(key); it != table_.end()) return safe_log(it->second);
    }
    return safe_log(fallback_);
  }

 private:
  static double safe_log(double p) {
    return p > 0 ? std::log(p) : -std::numeric_limits<double>::infinity();
  }
  int n_cls_;
  int order_;
  double fallback_;
  std::map<std::vector<int>, double> table_;
};

/// Add-k smoothed n-gram counts over class sequences. Contexts shorter than
/// order-1 (line starts) are counted as their own histories.
class CountLm final : public NgramLm {
 public:
  CountLm(int n_cls, int order, double add_k = 0.1) : n_cls_(n_cls), order_(order), k_(add_k) {
    if (n_cls < 1 || order < 1 || !(add_k > 0)) throw DomainError("CountLm: bad parameters");
  }

  void add(std::span<const int> seq) {
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const std::size_t lo = t >= std::size_t(order_ - 1) ? t - std::size_t(order_ - 1) : 0;
      std::vector<int> hist(seq.begin() + long(lo), seq.begin() + long(t));
      ++context_[hist];
      hist.push_back(seq[t]);
      ++event_[hist];
    }
  }

  int order() const override { return order_; }
  int n_cls() const override { return n_cls_; }
  double log_prob(std::span<const int> context, int c) const override {
    const std::size_t keep = std::min<std::size_t>(context.size(), std::size_t(order_ - 1));
    std::vector<int> hist(context.end() - long(keep), context.end());
    const auto ctx = context_.find(hist);
    const double denom = (ctx == context_.end() ? 0.0 : double(ctx->second)) + k_ * n_cls_;
    hist.push_back(c);
    const auto ev = event_.find(hist);
    const double num = (ev == event_.end() ? 0.0 : double(ev->second)) + k_;
    return std::log(num / denom);
  }

 private:
  int n_cls_;
  int order_;
  double k_;
  std::map<std::vector<int>, long> context_;
  std::map<std::vector<int>, long> event_;
};

struct LmConfig {
  int beam = 8;
  double lm_weight = 1.0;
  double insertion_bonus = 0.0;
};

/// Per-frame log probabilities: blank and every class (index c-1).
struct FrameScores {
  std::vector<double> log_blank;
  std::vector<std::vector<double>> log_cls;

  std::size_t size() const { return log_blank.size(); }
};

inline constexpr double kFrameProbFloor = 1e-30;

inline FrameScores frame_scores(const PredictionMaps& maps, std::span<const GridIndex> frames) {
  FrameScores fs;
  for (GridIndex g : frames) {
    const double dis = maps.dis_at(g);
    fs.log_blank.push_back(std::log(std::max(1.0 - dis, kFrameProbFloor)));
    std::vector<double> row;
    row.reserve(std::size_t(maps.n_cls));
    for (float p : maps.cls_row(g)) row.push_back(std::log(std::max(dis * p, kFrameProbFloor)));
    fs.log_cls.push_back(std::move(row));
  }
  return fs;
}

struct Alignment {
  ClassSeq labels;
  std::vector<std::size_t> frames;  // emitting frame of each label
  double score = -std::numeric_limits<double>::infinity();
};

/// Orders alignments best first; ties fall to the lexicographically smaller
/// label sequence, then frame sequence.
inline bool better_alignment(const Alignment& a, const Alignment& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.labels != b.labels) return a.labels < b.labels;
  return a.frames < b.frames;
}

inline double alignment_score(const FrameScores& fs, std::span<const int> symbols,
                              const NgramLm& lm, const LmConfig& cfg) {
  double score = 0;
  std::vector<int> history;
  for (std::size_t t = 0; t < symbols.size(); ++t) {
    if (symbols[t] == 0) {
      score += fs.log_blank[t];
      continue;
    }
    const std::size_t keep = std::min<std::size_t>(history.size(), std::size_t(lm.order() - 1));
    score += fs.log_cls[t][std::size_t(symbols[t] - 1)] +
             cfg.lm_weight *
                 lm.log_prob(std::span<const int>(history).last(keep), symbols[t]) +
             cfg.insertion_bonus;
    history.push_back(symbols[t]);
  }
  return score;
}

inline Alignment beam_search(const FrameScores& fs, const NgramLm& lm, const LmConfig& cfg) {
  if (cfg.beam < 1) throw DomainError("beam_search: beam must be >= 1");
  const std::size_t ctx_len = std::size_t(std::max(lm.order() - 1, 0));
  std::vector<Alignment> beam{Alignment{{}, {}, 0.0}};
  for (std::size_t t = 0; t < fs.size(); ++t) {
    std::map<std::vector<int>, Alignment> next;  // keyed by LM history
    auto offer = [&](Alignment&& a) {
      const std::size_t keep = std::min(ctx_len, a.labels.size());
      std::vector<int> key(a.labels.end() - long(keep), a.labels.end());
      auto [it, inserted] = next.try_emplace(std::move(key));
      if (inserted || better_alignment(a, it->second)) it->second = std::move(a);
    };
    for (const Alignment& h : beam) {
      Alignment blank = h;
      blank.score += fs.log_blank[t];
      offer(std::move(blank));
      const std::size_t keep = std::min(ctx_len, h.labels.size());
      std::span<const int> ctx = std::span<const int>(h.labels).last(keep);
      for (std::size_t c = 0; c < fs.log_cls[t].size(); ++c) {
        const double lp = lm.log_prob(ctx, int(c + 1));
        if (lp == -std::numeric_limits<double>::infinity()) continue;
        Alignment e = h;
        e.score += fs.log_cls[t][c] + cfg.lm_weight * lp + cfg.insertion_bonus;
        e.labels.push_back(int(c + 1));
        e.frames.push_back(t);
        offer(std::move(e));
      }
    }
    beam.clear();
    for (auto& [key, a] : next) beam.push_back(std::move(a));
    std::sort(beam.begin(), beam.end(), better_alignment);
    if (beam.size() > std::size_t(cfg.beam)) beam.resize(std::size_t(cfg.beam));
  }
  return beam.front();
}

/// Frame grids of a line: each character's grid followed by its search path.
inline std::vector<GridIndex> line_frames(const LineResult& line,
                                          std::vector<std::size_t>* owner = nullptr) {
  std::vector<GridIndex> frames;
  for (std::size_t m = 0; m < line.chars.size(); ++m) {
    frames.push_back(line.chars[m].grid);
    if (owner) owner->push_back(m);
    for (GridIndex g : line.traces[m].path()) {
      frames.push_back(g);
      if (owner) owner->push_back(m);
    }
  }
  return frames;
}

/// Replaces each line's classes with the LM-rescored alignment. Characters
/// keep their boxes and order; a character whose frame turns blank moves to
/// `unassigned`, and a label emitted on a path grid becomes a new character
/// read from the maps at that grid. Traces are re-cut at the emitting frames.
inline PageResult rescore_with_lm(const PredictionMaps& maps, const PageResult& result,
                                  const NgramLm& lm, const LmConfig& cfg = {}) {
  if (lm.n_cls() != maps.n_cls) throw DomainError("rescore_with_lm: LM/maps class count differ");
  PageResult out;
  out.shape = result.shape;
  out.unassigned = result.unassigned;
  for (const LineResult& line : result.lines) {
    if (line.chars.empty()) {
      out.lines.push_back(line);
      continue;
    }
    std::vector<std::size_t> owner;
    const std::vector<GridIndex> frames = line_frames(line, &owner);
    std::vector<char> is_node(frames.size(), 0);
    for (std::size_t t = 0; t < frames.size(); ++t)
      is_node[t] = (t == 0 || owner[t] != owner[t - 1]);
    const Alignment best = beam_search(frame_scores(maps, frames), lm, cfg);
    if (best.labels.empty()) {
      for (const auto& c : line.chars) out.unassigned.push_back(c);
      continue;
    }
    std::vector<char> emitted(frames.size(), 0);
    for (std::size_t t : best.frames) emitted[t] = 1;
    for (std::size_t t = 0; t < frames.size(); ++t)
      if (is_node[t] && !emitted[t]) out.unassigned.push_back(line.chars[owner[t]]);

    LineResult nl;
    for (std::size_t k = 0; k < best.labels.size(); ++k) {
      const std::size_t t = best.frames[k];
      const GridIndex g = frames[t];
      const int label = best.labels[k];
      CharInstance c;
      if (is_node[t]) {
        c = line.chars[owner[t]];
      } else {
        c.grid = g;
        c.box = rel_to_abs(maps.box_at(g), g, maps.shape);
      }
      c.cls_id = label;
      c.cls_prob = maps.cls_row(g)[std::size_t(label - 1)];
      if (!is_node[t]) c.score = fused_score(maps.dis_at(g), c.cls_prob);
      nl.chars.push_back(c);

      SearchTrace tr;
      tr.origin = g;
      const bool last = k + 1 == best.labels.size();
      const std::size_t stop = last ? frames.size() : best.frames[k + 1];
      std::size_t t_end = t + 1;
      while (t_end < stop && !(last && is_node[t_end])) ++t_end;
      for (std::size_t u = t; u < t_end; ++u) tr.visited.push_back(frames[u]);
      if (!last) {
        tr.outcome = TraceOutcome::Reached;
        tr.target = frames[stop];
      } else if (t_end < frames.size()) {
        tr.outcome = TraceOutcome::Reached;
        tr.target = frames[t_end];
      } else {
        const SearchTrace& orig = line.traces.back();
        tr.outcome = orig.outcome;
        tr.target = orig.target;
      }
      nl.traces.push_back(std::move(tr));
    }
    nl.sol_conf = maps.sol_at(nl.chars.front().grid);
    nl.eol_conf = maps.eol_at(nl.chars.back().grid);
    out.lines.push_back(std::move(nl));
  }
  return out;
}

}  // namespace folio
