#pragma once

// Shared fixtures for the unit tests and the acceptance runner.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "folio/folio.hpp"

namespace fixture {

/// A 2x1-grid page with one single-character line, used by the hand-computed
/// loss examples. Maps start from the oracle-free zero state; callers set the
/// probabilities each example needs.
struct LossCase {
  folio::PredictionMaps maps;
  folio::LossTargets targets;
  folio::PageLabels labels;
  folio::PageAnnotation annot;
};

inline LossCase loss_case() {
  LossCase c;
  const auto shape = folio::GridShape::from_grid(2, 1);
  c.maps = folio::PredictionMaps::zeros(shape, 2);
  for (std::size_t f = 0; f < shape.cells(); ++f) {
    c.maps.dis[f] = 0.5f;
    c.maps.sol[f] = 0.5f;
    c.maps.eol[f] = 0.5f;
    c.maps.cls[2 * f] = 0.5f;
    c.maps.cls[2 * f + 1] = 0.5f;
    for (int d = 0; d < 4; ++d) c.maps.rd[4 * f + std::size_t(d)] = 0.25f;
  }
  c.annot.page_id = "loss-fixture";
  c.annot.lines = {{1}};
  c.labels = folio::PageLabels::for_annotation(c.annot);
  // Center at x = 6.4 px, y = 8 px in a 32x16 image: offsets (0.4, 0.5) in
  // grid (1,1); size fractions (0.4, 0.5).
  c.labels.at(0, 0) = folio::PseudoLabel{{6.4, 8.0, 0.4, 0.5}, 1.0, 1};
  c.maps.set_box({1, 1}, {0.4, 0.5, 0.4, 0.5});
  return c;
}

/// Everything needed to evaluate losses on noiseless maps against a store
/// holding the ground truth.
struct PerfectCase {
  folio::SyntheticPage page;
  folio::PredictionMaps maps;
  folio::PageResult result;
  folio::PageLabels labels;
  folio::LossTargets targets;
};

inline PerfectCase perfect_case(const folio::SynthConfig& cfg, std::uint64_t path_seed) {
  PerfectCase c;
  c.page = folio::gen_page(cfg);
  c.maps = folio::oracle_predict(c.page, {});
  c.result = folio::decode(c.maps);
  c.labels = folio::PageLabels::for_annotation(c.page.annotation);
  for (const auto& ch : c.page.chars) c.labels.at(ch.line, ch.pos) = folio::PseudoLabel{ch.box, 1.0, 1};
  const auto ms = folio::semantic_match(c.result.transcripts(), c.page.annotation.lines);
  folio::Rng rng(path_seed);
  c.targets = folio::build_targets(c.labels, c.result, ms.m_ce, c.page.shape, rng);
  return c;
}

/// Structural audit of a decode, recomputed from the decoder stages. Returns
/// an empty string when every check passes.
inline std::string graph_violation(const folio::PredictionMaps& maps,
                                   const folio::DecodeConfig& cfg = {}) {
  const auto nodes = folio::extract_nodes(maps, cfg.dis_threshold, cfg.nms_iou, cfg.dis_weight);
  folio::NodeIndex index(maps.shape, nodes);
  std::vector<folio::SearchTrace> traces;
  for (const auto& n : nodes) traces.push_back(folio::follow(maps, n.grid, index, cfg.step_budget(maps.shape)));
  const auto succ = folio::resolve_edges(nodes, traces, maps);

  // One edge in, one edge out, no self loops.
  std::vector<int> indeg(nodes.size(), 0);
  for (std::size_t k = 0; k < succ.size(); ++k) {
    if (!succ[k]) continue;
    if (*succ[k] == k) return "self loop";
    if (*succ[k] >= nodes.size()) return "edge to a missing node";
    if (++indeg[*succ[k]] > 1) return "node with two incoming edges";
    if (!traces[k].target || !(*traces[k].target == nodes[*succ[k]].grid))
      return "edge not backed by a reached trace";
  }
  // No cycles: every walk along successors ends within |nodes| steps.
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    std::size_t cur = k, steps = 0;
    while (succ[cur]) {
      cur = *succ[cur];
      if (++steps > nodes.size()) return "cycle in the edge set";
    }
  }

  const folio::PageResult r = folio::decode(maps, cfg);
  // Vertex-disjoint paths covering each node at most once, lines follow edges.
  std::vector<int> seen(nodes.size(), 0);
  auto node_of = [&](folio::GridIndex g) -> long {
    const auto k = index.find(g);
    return k ? long(*k) : -1;
  };
  std::size_t placed = 0;
  for (const auto& line : r.lines) {
    for (std::size_t m = 0; m < line.chars.size(); ++m) {
      const long k = node_of(line.chars[m].grid);
      if (k < 0) return "line character is not a node";
      if (seen[std::size_t(k)]++) return "node on two lines";
      ++placed;
      if (m + 1 < line.chars.size()) {
        const long nxt = node_of(line.chars[m + 1].grid);
        if (!succ[std::size_t(k)] || long(*succ[std::size_t(k)]) != nxt)
          return "consecutive line characters not joined by an edge";
      }
    }
  }
  for (const auto& c : r.unassigned) {
    const long k = node_of(c.grid);
    if (k < 0) return "unassigned character is not a node";
    if (seen[std::size_t(k)]++) return "unassigned node also on a line";
    ++placed;
  }
  if (placed != nodes.size()) return "node lost between stages";
  return {};
}

/// Maps with every channel drawn at random, rows normalized.
inline folio::PredictionMaps random_maps(const folio::GridShape& shape, int n_cls, folio::Rng& rng) {
  auto m = folio::PredictionMaps::zeros(shape, n_cls);
  for (std::size_t f = 0; f < shape.cells(); ++f) {
    const double u = folio::uniform01(rng);
    m.dis[f] = float(u < 0.35 ? 0.5 + 0.5 * folio::uniform01(rng) : 0.5 * folio::uniform01(rng));
    m.sol[f] = float(folio::uniform01(rng));
    m.eol[f] = float(folio::uniform01(rng));
    m.box[4 * f] = float(folio::uniform01(rng));
    m.box[4 * f + 1] = float(folio::uniform01(rng));
    m.box[4 * f + 2] = float((0.3 + 0.7 * folio::uniform01(rng)) / shape.w_g);
    m.box[4 * f + 3] = float((0.3 + 0.7 * folio::uniform01(rng)) / shape.h_g);
    double total = 0;
    for (int c = 0; c < n_cls; ++c) total += m.cls[f * std::size_t(n_cls) + std::size_t(c)] = float(folio::uniform01(rng) + 1e-3);
    for (int c = 0; c < n_cls; ++c) m.cls[f * std::size_t(n_cls) + std::size_t(c)] = float(m.cls[f * std::size_t(n_cls) + std::size_t(c)] / total);
    double rt = 0;
    for (int d = 0; d < 4; ++d) rt += m.rd[4 * f + std::size_t(d)] = float(folio::uniform01(rng) + 1e-3);
    for (int d = 0; d < 4; ++d) m.rd[4 * f + std::size_t(d)] = float(m.rd[4 * f + std::size_t(d)] / rt);
  }
  return m;
}

}  // namespace fixture
