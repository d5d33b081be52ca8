#pragma once

// Graph-based decoding of prediction maps into text lines.
//
//   1. extract_nodes: grids whose character confidence passes a threshold
//      become candidate characters, pruned by NMS.
//   2. follow: from every node, walk the argmax reading-order direction grid
//      by grid until another node is reached (or the walk leaves the page,
//      revisits a grid, or exceeds the step budget).
//   3. resolve_edges: enforce at most one edge into and out of every node and
//      break any remaining cycles.
//   4. assemble: lines are chains that start at start-of-line nodes and stop
//      at the first end-of-line node.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "folio/error.hpp"
#include "folio/geometry.hpp"
#include "folio/page.hpp"
#include "folio/predictions.hpp"

namespace folio {

inline constexpr double kDisWeight = 0.8;
inline constexpr double kDefaultDisThreshold = 0.5;
inline constexpr double kSolEolThreshold = 0.9;

struct DecodeConfig {
  double dis_threshold = kDefaultDisThreshold;
  double nms_iou = kDefaultNmsIou;
  double sol_eol_threshold = kSolEolThreshold;
  double dis_weight = kDisWeight;
  int max_steps = 0;  // 0 selects w_g + h_g

  int step_budget(const GridShape& s) const { return max_steps > 0 ? max_steps : s.w_g + s.h_g; }
};

struct CharInstance {
  GridIndex grid;
  Box box;
  double score = 0;  // fused detection score
  int cls_id = 1;    // 1-based argmax class
  double cls_prob = 0;

  friend bool operator==(const CharInstance&, const CharInstance&) = default;
};

enum class TraceOutcome { Reached, Boundary, Cycle, MaxSteps };

inline const char* outcome_name(TraceOutcome o) {
  switch (o) {
    case TraceOutcome::Reached: return "reached";
    case TraceOutcome::Boundary: return "boundary";
    case TraceOutcome::Cycle: return "cycle";
    case TraceOutcome::MaxSteps: return "max_steps";
  }
  return "?";
}

struct SearchTrace {
  GridIndex origin;
  std::vector<GridIndex> visited;  // origin first
  TraceOutcome outcome = TraceOutcome::Boundary;
  std::optional<GridIndex> target;  // set iff outcome == Reached

  /// Grids walked after leaving the origin.
  std::span<const GridIndex> path() const {
    if (visited.empty()) return {};
    return std::span<const GridIndex>(visited).subspan(1);
  }

  friend bool operator==(const SearchTrace&, const SearchTrace&) = default;
};

struct LineResult {
  std::vector<CharInstance> chars;
  std::vector<SearchTrace> traces;  // parallel to chars
  double sol_conf = 0;
  double eol_conf = 0;

  ClassSeq classes() const {
    ClassSeq out;
    out.reserve(chars.size());
    for (const auto& c : chars) out.push_back(c.cls_id);
    return out;
  }

  friend bool operator==(const LineResult&, const LineResult&) = default;
};

struct PageResult {
  GridShape shape;
  std::vector<LineResult> lines;
  std::vector<CharInstance> unassigned;  // nodes on no line

  std::vector<ClassSeq> transcripts() const {
    std::vector<ClassSeq> out;
    out.reserve(lines.size());
    for (const auto& l : lines) out.push_back(l.classes());
    return out;
  }

  std::size_t n_chars() const {
    std::size_t n = 0;
    for (const auto& l : lines) n += l.chars.size();
    return n;
  }

  friend bool operator==(const PageResult&, const PageResult&) = default;
};

inline double fused_score(double dis, double cls_prob, double dis_weight = kDisWeight) {
  return dis_weight * dis + (1.0 - dis_weight) * cls_prob;
}

inline std::vector<CharInstance> extract_nodes(const PredictionMaps& maps, double dis_threshold,
                                               double nms_threshold,
                                               double dis_weight = kDisWeight) {
  const GridShape& s = maps.shape;
  std::vector<CharInstance> candidates;
  for (std::size_t f = 0; f < s.cells(); ++f) {
    if (!(maps.dis[f] >= dis_threshold)) continue;
    const GridIndex g = grid_at(f, s);
    CharInstance c;
    c.grid = g;
    c.box = rel_to_abs(maps.box_at(g), g, s);
    c.cls_id = maps.argmax_cls(g);
    c.cls_prob = maps.max_cls(g);
    c.score = fused_score(maps.dis[f], c.cls_prob, dis_weight);
    candidates.push_back(c);
  }
  std::vector<ScoredBox> scored;
  scored.reserve(candidates.size());
  for (const auto& c : candidates) scored.push_back({c.box, c.score});
  std::vector<CharInstance> nodes;
  for (std::size_t k : nms(scored, nms_threshold, s)) nodes.push_back(candidates[k]);
  return nodes;  // candidates were row-major, nms keeps input order
}

/// Grid -> node lookup used while following reading-order directions.
class NodeIndex {
 public:
  NodeIndex(const GridShape& shape, std::span<const CharInstance> nodes)
      : shape_(shape), at_(shape.cells(), -1), nodes_(nodes) {
    for (std::size_t k = 0; k < nodes.size(); ++k) at_[flat_index(nodes[k].grid, shape)] = int(k);
  }

  std::optional<std::size_t> find(GridIndex g) const {
    if (!in_bounds(g, shape_)) return std::nullopt;
    const int k = at_[flat_index(g, shape_)];
    if (k < 0) return std::nullopt;
    return std::size_t(k);
  }
  const CharInstance& node(std::size_t k) const { return nodes_[k]; }
  std::size_t size() const { return nodes_.size(); }
  const GridShape& shape() const { return shape_; }

 private:
  GridShape shape_;
  std::vector<int> at_;
  std::span<const CharInstance> nodes_;
};

/// Walks argmax directions from `origin`.
///
/// The walk ends Reached as soon as the grid it is about to enter holds a
/// node. When it would otherwise stop (leaving the page, revisiting a grid,
/// running out of steps) after at least one step, a node in the 4-neighborhood
/// of the final grid still counts as reached, the highest-scoring one winning.
inline SearchTrace follow(const PredictionMaps& maps, GridIndex origin, const NodeIndex& nodes,
                          int max_steps) {
  const GridShape& s = maps.shape;
  check_grid(origin, s, "follow");
  SearchTrace t;
  t.origin = origin;
  t.visited.push_back(origin);
  std::vector<char> seen(s.cells(), 0);
  seen[flat_index(origin, s)] = 1;
  GridIndex cur = origin;
  for (;;) {
    const GridIndex next = step(cur, maps.argmax_rd(cur));
    if (!in_bounds(next, s)) {
      t.outcome = TraceOutcome::Boundary;
    } else if (nodes.find(next) && !(next == origin)) {
      t.outcome = TraceOutcome::Reached;
      t.target = next;
      return t;
    } else if (seen[flat_index(next, s)]) {
      t.outcome = TraceOutcome::Cycle;
    } else if (int(t.visited.size()) >= max_steps) {
      t.outcome = TraceOutcome::MaxSteps;
    } else {
      seen[flat_index(next, s)] = 1;
      t.visited.push_back(next);
      cur = next;
      continue;
    }
    break;
  }
  if (t.visited.size() >= 2) {
    std::optional<std::size_t> best;
    for (Direction d : kDirections) {
      const auto k = nodes.find(step(cur, d));
      if (!k || nodes.node(*k).grid == origin) continue;
      if (!best || nodes.node(*k).score > nodes.node(*best).score ||
          (nodes.node(*k).score == nodes.node(*best).score &&
           nodes.node(*k).grid < nodes.node(*best).grid))
        best = k;
    }
    if (best) {
      t.outcome = TraceOutcome::Reached;
      t.target = nodes.node(*best).grid;
    }
  }
  return t;
}

/// Successor of every node after conflict resolution (nullopt: no edge).
using EdgeSet = std::vector<std::optional<std::size_t>>;

namespace detail {

inline double edge_angle(const CharInstance& from, const CharInstance& to) {
  return std::atan2(to.box.y - from.box.y, to.box.x - from.box.x);
}

inline double angle_gap(double a, double b) {
  double d = std::fmod(std::abs(a - b), 2 * std::numbers::pi);
  return d > std::numbers::pi ? 2 * std::numbers::pi - d : d;
}

}  // namespace detail

/// Reduces the raw trace targets to a graph where every node has at most one
/// incoming and one outgoing edge and no cycles exist.
///
/// A node claimed by several incoming edges keeps the edge whose direction is
/// closest to the circular mean direction of the edges already committed along
/// the competing incoming chains; when no such edges exist the source with the
/// highest score wins. Losing edges are dropped. Contested nodes are settled in
/// row-major order, after all uncontested edges are committed. Remaining cycles
/// are opened by removing the edge into the cycle node with the highest
/// start-of-line confidence.
inline EdgeSet resolve_edges(std::span<const CharInstance> nodes,
                             std::span<const SearchTrace> traces, const PredictionMaps& maps) {
  if (traces.size() != nodes.size())
    throw DomainError("resolve_edges: need exactly one trace per node");
  const std::size_t n = nodes.size();
  NodeIndex index(maps.shape, nodes);
  std::vector<std::vector<std::size_t>> incoming(n);
  for (std::size_t u = 0; u < n; ++u) {
    if (traces[u].outcome != TraceOutcome::Reached || !traces[u].target) continue;
    const auto v = index.find(*traces[u].target);
    if (v && *v != u) incoming[*v].push_back(u);
  }

  EdgeSet succ(n);
  std::vector<std::optional<std::size_t>> pred(n);
  for (std::size_t v = 0; v < n; ++v) {
    if (incoming[v].size() == 1) {
      succ[incoming[v][0]] = v;
      pred[v] = incoming[v][0];
    }
  }

  for (std::size_t v = 0; v < n; ++v) {
    if (incoming[v].size() < 2) continue;
    double sx = 0, sy = 0;
    std::size_t pooled = 0;
    for (std::size_t u : incoming[v]) {
      std::vector<char> walked(n, 0);
      std::size_t cur = u;
      walked[cur] = 1;
      while (pred[cur] && !walked[*pred[cur]]) {
        const double a = detail::edge_angle(nodes[*pred[cur]], nodes[cur]);
        sx += std::cos(a);
        sy += std::sin(a);
        ++pooled;
        cur = *pred[cur];
        walked[cur] = 1;
      }
    }
    const bool have_ref = pooled > 0 && (sx != 0 || sy != 0);
    const double ref = have_ref ? std::atan2(sy, sx) : 0.0;
    std::size_t best = incoming[v][0];
    auto better = [&](std::size_t a, std::size_t b) {
      if (have_ref) {
        const double ga = detail::angle_gap(detail::edge_angle(nodes[a], nodes[v]), ref);
        const double gb = detail::angle_gap(detail::edge_angle(nodes[b], nodes[v]), ref);
        if (ga != gb) return ga < gb;
      }
      if (nodes[a].score != nodes[b].score) return nodes[a].score > nodes[b].score;
      return a < b;
    };
    for (std::size_t u : incoming[v])
      if (better(u, best)) best = u;
    succ[best] = v;
    pred[v] = best;
  }

  // Open cycles.
  std::vector<int> state(n, 0);  // 0 new, 1 on current walk, 2 done
  for (std::size_t start = 0; start < n; ++start) {
    if (state[start]) continue;
    std::vector<std::size_t> walk;
    std::size_t cur = start;
    while (state[cur] == 0) {
      state[cur] = 1;
      walk.push_back(cur);
      if (!succ[cur]) break;
      cur = *succ[cur];
    }
    if (state[cur] == 1 && succ[walk.back()] && *succ[walk.back()] == cur) {
      // cur .. walk.back() is a cycle
      auto it = std::find(walk.begin(), walk.end(), cur);
      std::size_t cut = cur;
      for (auto k = it; k != walk.end(); ++k) {
        const double sk = maps.sol_at(nodes[*k].grid);
        const double sc = maps.sol_at(nodes[cut].grid);
        if (sk > sc || (sk == sc && *k < cut)) cut = *k;
      }
      const std::size_t from = *pred[cut];
      succ[from].reset();
      pred[cut].reset();
    }
    for (std::size_t k : walk) state[k] = 2;
  }
  return succ;
}

inline PageResult assemble(std::span<const CharInstance> nodes, std::span<const SearchTrace> traces,
                           const EdgeSet& succ, const PredictionMaps& maps,
                           double sol_eol_threshold) {
  const std::size_t n = nodes.size();
  PageResult r;
  r.shape = maps.shape;
  std::vector<char> is_sol(n), is_eol(n), assigned(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    is_sol[k] = maps.sol_at(nodes[k].grid) > sol_eol_threshold;
    is_eol[k] = maps.eol_at(nodes[k].grid) > sol_eol_threshold;
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!is_sol[k] || assigned[k]) continue;
    LineResult line;
    std::size_t cur = k;
    for (;;) {
      assigned[cur] = 1;
      line.chars.push_back(nodes[cur]);
      line.traces.push_back(traces[cur]);
      if (is_eol[cur]) break;
      const auto next = succ[cur];
      if (!next || assigned[*next] || is_sol[*next]) break;
      cur = *next;
    }
    line.sol_conf = maps.sol_at(line.chars.front().grid);
    line.eol_conf = maps.eol_at(line.chars.back().grid);
    r.lines.push_back(std::move(line));
  }
  for (std::size_t k = 0; k < n; ++k)
    if (!assigned[k]) r.unassigned.push_back(nodes[k]);
  return r;
}

/// Throws InvariantError unless every character sits on exactly one line,
/// consecutive characters are linked by Reached traces, traces walk
/// 4-adjacent grids without repeats, and no grid appears twice.
inline void check_structure(const PageResult& r) {
  std::vector<char> used(r.shape.cells(), 0);
  auto claim = [&](GridIndex g) {
    if (!in_bounds(g, r.shape)) throw InvariantError("character grid outside the page");
    char& u = used[flat_index(g, r.shape)];
    if (u) throw InvariantError("grid used by two characters");
    u = 1;
  };
  for (const auto& c : r.unassigned) claim(c.grid);
  for (const auto& line : r.lines) {
    if (line.chars.empty()) throw InvariantError("empty line");
    if (line.traces.size() != line.chars.size()) throw InvariantError("trace/char count mismatch");
    for (std::size_t m = 0; m < line.chars.size(); ++m) {
      claim(line.chars[m].grid);
      const SearchTrace& t = line.traces[m];
      if (t.visited.empty() || !(t.visited.front() == line.chars[m].grid))
        throw InvariantError("trace does not start at its character");
      for (std::size_t k = 1; k < t.visited.size(); ++k)
        if (!four_adjacent(t.visited[k - 1], t.visited[k]))
          throw InvariantError("trace grids not 4-adjacent");
      if (t.outcome != TraceOutcome::Cycle) {
        auto v = t.visited;
        std::sort(v.begin(), v.end());
        if (std::adjacent_find(v.begin(), v.end()) != v.end())
          throw InvariantError("trace revisits a grid");
      }
      if (m + 1 < line.chars.size()) {
        if (t.outcome != TraceOutcome::Reached || !t.target ||
            !(*t.target == line.chars[m + 1].grid))
          throw InvariantError("consecutive characters not linked by a reached trace");
      }
    }
  }
}

inline PageResult decode(const PredictionMaps& maps, const DecodeConfig& cfg = {}) {
  std::vector<CharInstance> nodes =
      extract_nodes(maps, cfg.dis_threshold, cfg.nms_iou, cfg.dis_weight);
  NodeIndex index(maps.shape, nodes);
  const int budget = cfg.step_budget(maps.shape);
  std::vector<SearchTrace> traces;
  traces.reserve(nodes.size());
  for (const auto& node : nodes) traces.push_back(follow(maps, node.grid, index, budget));
  const EdgeSet succ = resolve_edges(nodes, traces, maps);
  PageResult r = assemble(nodes, traces, succ, maps, cfg.sol_eol_threshold);
  check_structure(r);
  return r;
}

}  // namespace folio
