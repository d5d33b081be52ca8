#pragma once

// Simulated weak-supervision lifecycle. A noisy oracle stands in for the
// network; "training" lowers its noise pass by pass while matching, updating
// and loss evaluation run exactly as they would against real predictions.
//
//   Pretrain:   synthetic pages only, losses against full ground truth.
//   Initialize: real pages, matching and updating, no losses.
//   Train:      real and synthetic pages interleaved, everything.

#include <array>
#include <cmath>
#include <functional>
#include <cstdint>
#include <future>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "folio/decoder.hpp"
#include "folio/error.hpp"
#include "folio/losses.hpp"
#include "folio/matching.hpp"
#include "folio/metrics.hpp"
#include "folio/oracle.hpp"
#include "folio/page.hpp"
#include "folio/pseudolabels.hpp"
#include "folio/random.hpp"
#include "folio/store.hpp"
#include "folio/synth.hpp"

namespace folio {

enum class Stage { Pretrain, Initialize, Train };

inline const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Pretrain: return "pretrain";
    case Stage::Initialize: return "initialize";
    case Stage::Train: return "train";
  }
  return "?";
}

inline Stage parse_stage(const std::string& s) {
  for (Stage st : {Stage::Pretrain, Stage::Initialize, Stage::Train})
    if (s == stage_name(st)) return st;
  throw ConfigError("unknown stage '" + s + "'");
}

struct StageConfig {
  Stage stage = Stage::Train;
  int n_passes = 1;
  OracleNoise noise;          // noise of pass 0
  int halve_every = 5;        // noise halves every this many passes; 0 keeps it constant
  double p_real = 0.7;        // Train stage mix
  double p_synth = 0.3;
  SynthConfig synth;          // source of synthetic pages
  DecodeConfig decode;
  double th_ar = kThAr;
  double th_iou = kThIou;
  double epsilon = kEpsilon;
  std::uint64_t seed = 0;
  bool deterministic = true;  // false: per-page prediction runs concurrently

  void validate() const {
    if (n_passes < 1) throw ConfigError("stage: n_passes must be >= 1");
    if (halve_every < 0) throw ConfigError("stage: halve_every must be >= 0");
    if (!(p_real >= 0 && p_synth >= 0) || std::abs(p_real + p_synth - 1.0) > 1e-9)
      throw ConfigError("stage: real/synthetic probabilities must be non-negative and sum to 1");
    if (stage == Stage::Train && p_real == 0)
      throw ConfigError("stage: train needs p_real > 0");
    noise.validate();
  }

  double noise_factor(int pass) const {
    return halve_every > 0 ? std::ldexp(1.0, -(pass / halve_every)) : 1.0;
  }
};

struct LossSummary {
  std::array<double, 6> mean{};  // per-term mean over pages
  double total = 0;
  std::size_t pages = 0;

  void add(const LossReport& r) {
    const auto t = r.terms();
    for (std::size_t k = 0; k < 6; ++k) mean[k] += t[k]->value;
    ++pages;
  }
  void finish() {
    if (pages)
      for (double& v : mean) v /= double(pages);
    total = 0;
    for (double v : mean) total += v;
  }
};

struct PassReport {
  Stage stage = Stage::Train;
  int pass = 0;
  double noise_factor = 1;
  std::size_t real_visits = 0;
  std::size_t synth_visits = 0;
  std::size_t n_ml = 0;
  std::size_t n_mc = 0;
  std::size_t n_kept = 0;  // m_c after spatial filtering
  std::size_t collisions = 0;
  bool has_losses = false;
  LossSummary real_losses;
  LossSummary synth_losses;
  LabelQuality quality;

  double coverage() const { return quality.coverage(); }
  double mean_iou() const { return quality.mean_iou(); }
};

namespace detail {

struct Visit {
  bool real = true;
  std::size_t index = 0;  // into the dataset, or into the pass's synthetic pages
};

inline std::vector<Visit> visit_schedule(const StageConfig& cfg, std::size_t n_real, Rng& rng) {
  std::vector<Visit> v;
  if (cfg.stage == Stage::Pretrain) {
    for (std::size_t k = 0; k < n_real; ++k) v.push_back({false, 0});
    return v;
  }
  if (cfg.stage == Stage::Initialize) {
    for (std::size_t k = 0; k < n_real; ++k) v.push_back({true, k});
    return v;
  }
  std::size_t next = 0;
  while (next < n_real) {
    if (uniform01(rng) < cfg.p_real) {
      v.push_back({true, next++});
    } else {
      v.push_back({false, 0});
    }
  }
  return v;
}

struct Observation {
  PredictionMaps maps;
  PageResult result;
};

inline Observation observe(const SyntheticPage& page, const OracleNoise& noise,
                           const DecodeConfig& dc) {
  Observation o{oracle_predict(page, noise), {}};
  o.result = decode(o.maps, dc);
  return o;
}

inline PageLabels truth_labels(const SyntheticPage& page) {
  PageLabels l = PageLabels::for_annotation(page.annotation);
  for (const auto& c : page.chars) l.slots[c.line][c.pos] = PseudoLabel{c.box, 1.0, 1};
  return l;
}

}  // namespace detail

/// Runs every pass of one stage over `dataset`, mutating `store`. The result
/// depends only on the inputs and `cfg.seed`.
inline std::vector<PassReport> run_stage(const std::vector<SyntheticPage>& dataset,
                                         PseudoLabelStore& store, const StageConfig& cfg) {
  cfg.validate();
  std::set<std::string> ids;
  for (const auto& p : dataset)
    if (!ids.insert(p.page_id).second)
      throw ConfigError("dataset has duplicate page id '" + p.page_id + "'");
  for (const auto& [id, labels] : store.pages())
    if (!ids.count(id)) throw ConfigError("store page '" + id + "' is not in the dataset");
  for (const auto& p : dataset) store.ensure_page(p.annotation);

  std::vector<PassReport> reports;
  std::size_t synth_counter = 0;
  for (int pass = 0; pass < cfg.n_passes; ++pass) {
    PassReport rep;
    rep.stage = cfg.stage;
    rep.pass = pass;
    rep.noise_factor = cfg.noise_factor(pass);
    rep.has_losses = cfg.stage != Stage::Initialize;
    const OracleNoise noise = cfg.noise.scaled(rep.noise_factor);

    Rng mix_rng(derive_seed(cfg.seed, {0x6d6978ULL, std::uint64_t(pass)}));
    Rng path_rng(derive_seed(cfg.seed, {0x70617468ULL, std::uint64_t(pass)}));
    auto visits = detail::visit_schedule(cfg, dataset.size(), mix_rng);

    std::vector<SyntheticPage> synth_pages;
    std::vector<OracleNoise> noises;
    for (auto& v : visits) {
      std::uint64_t key = v.index;
      if (!v.real) {
        key = synth_counter++;
        SynthConfig sc = cfg.synth;
        sc.seed = derive_seed(cfg.seed, {0x73796eULL});
        synth_pages.push_back(gen_dataset_page(sc, key));
        v.index = synth_pages.size() - 1;
      }
      OracleNoise n = noise;
      n.seed = derive_seed(cfg.noise.seed, {std::uint64_t(pass), std::uint64_t(v.real), key});
      noises.push_back(n);
    }
    auto page_of = [&](const detail::Visit& v) -> const SyntheticPage& {
      return v.real ? dataset[v.index] : synth_pages[v.index];
    };

    std::vector<detail::Observation> obs(visits.size());
    if (cfg.deterministic) {
      for (std::size_t k = 0; k < visits.size(); ++k)
        obs[k] = detail::observe(page_of(visits[k]), noises[k], cfg.decode);
    } else {
      std::vector<std::future<detail::Observation>> jobs;
      for (std::size_t k = 0; k < visits.size(); ++k)
        jobs.push_back(std::async(std::launch::async, detail::observe,
                                  std::cref(page_of(visits[k])), noises[k], cfg.decode));
      for (std::size_t k = 0; k < visits.size(); ++k) obs[k] = jobs[k].get();
    }

    // Store writes happen here, in visit order.
    for (std::size_t k = 0; k < visits.size(); ++k) {
      const SyntheticPage& page = page_of(visits[k]);
      const auto& [maps, result] = obs[k];
      const auto transcripts = result.transcripts();
      const MatchSet ms = semantic_match(transcripts, page.annotation.lines, cfg.th_ar);
      if (!visits[k].real) {
        ++rep.synth_visits;
        const PageLabels truth = detail::truth_labels(page);
        const LossTargets t = build_targets(truth, result, ms.m_ce, page.shape, path_rng);
        rep.synth_losses.add(compute_losses(maps, t, truth, page.annotation));
        continue;
      }
      ++rep.real_visits;
      PageLabels& labels = store.page(page.page_id);
      const auto kept = spatial_filter(ms.m_c, result, labels, cfg.th_iou);
      rep.n_ml += ms.m_l.size();
      rep.n_mc += ms.m_c.size();
      rep.n_kept += kept.size();
      update(labels, kept, result, cfg.epsilon);
      if (cfg.stage == Stage::Train) {
        const LossTargets t = build_targets(labels, result, ms.m_ce, page.shape, path_rng);
        rep.collisions += t.collisions;
        rep.real_losses.add(compute_losses(maps, t, labels, page.annotation));
      }
    }
    rep.real_losses.finish();
    rep.synth_losses.finish();
    for (const auto& p : dataset)
      if (p.annotation.has_boxes()) rep.quality += label_quality(store.page(p.page_id), p.annotation, p.shape);
    reports.push_back(rep);
  }
  return reports;
}

struct LabelRecord {
  std::string page_id;
  std::size_t q = 0, n = 0;
  PseudoLabel label;
};

struct ExportResult {
  std::vector<LabelRecord> records;  // page order, then (q, n)
  LabelQuality quality;              // pages with ground-truth boxes only
  std::vector<LabelQuality> per_page;
};

/// Flattens the store for the given pages and scores it against ground truth
/// where an annotation carries boxes and a grid shape.
inline ExportResult export_labels(const PseudoLabelStore& store,
                                  std::span<const PageAnnotation> pages) {
  ExportResult out;
  for (const auto& a : pages) {
    const PageLabels empty = PageLabels::for_annotation(a);
    const PageLabels& labels = store.has_page(a.page_id) ? store.page(a.page_id) : empty;
    for (std::size_t q = 0; q < labels.slots.size(); ++q)
      for (std::size_t n = 0; n < labels.slots[q].size(); ++n)
        if (const auto& s = labels.slots[q][n]) out.records.push_back({a.page_id, q, n, *s});
    if (a.has_boxes() && a.shape) {
      out.per_page.push_back(label_quality(labels, a, *a.shape));
      out.quality += out.per_page.back();
    }
  }
  return out;
}

inline ExportResult export_labels(const PseudoLabelStore& store,
                                  const std::vector<SyntheticPage>& dataset) {
  std::vector<PageAnnotation> pages;
  for (const auto& p : dataset) pages.push_back(p.annotation);
  return export_labels(store, pages);
}

}  // namespace folio
