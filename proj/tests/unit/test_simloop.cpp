#include <gtest/gtest.h>

#include <cstdio>

#include "folio/folio.hpp"

using namespace folio;

namespace {

std::vector<SyntheticPage> dataset(std::size_t n, std::uint64_t seed = 1) {
  SynthConfig cfg;
  cfg.n_lines = 3;
  cfg.chars_min = 4;
  cfg.chars_max = 8;
  cfg.n_cls = 30;
  cfg.seed = seed;
  return gen_dataset(cfg, n);
}

OracleNoise moderate(std::uint64_t seed) {
  OracleNoise n;
  n.jitter_sigma = 0.1;
  n.label_swap_p = 0.05;
  n.drop_p = 0.02;
  n.spurious_p = 0.01;
  n.seed = seed;
  return n;
}

}  // namespace

TEST(Simloop, ZeroNoiseTrainPassFillsStore) {
  const auto data = dataset(5);
  PseudoLabelStore store;
  StageConfig cfg;
  cfg.stage = Stage::Train;
  cfg.p_real = 1.0;
  cfg.p_synth = 0.0;
  const auto reps = run_stage(data, store, cfg);
  ASSERT_EQ(reps.size(), 1u);
  EXPECT_EQ(reps[0].coverage(), 1.0);
  EXPECT_NEAR(reps[0].mean_iou(), 1.0, 1e-6);
  EXPECT_TRUE(reps[0].has_losses);
  for (double v : reps[0].real_losses.mean) EXPECT_LT(v, 1e-4);
  EXPECT_EQ(reps[0].real_visits, 5u);
}

TEST(Simloop, InitializeUpdatesStoreWithoutLosses) {
  const auto data = dataset(4);
  PseudoLabelStore store;
  StageConfig cfg;
  cfg.stage = Stage::Initialize;
  cfg.noise = moderate(3);
  const auto reps = run_stage(data, store, cfg);
  ASSERT_EQ(reps.size(), 1u);
  EXPECT_FALSE(reps[0].has_losses);
  EXPECT_EQ(reps[0].real_losses.pages, 0u);
  EXPECT_GT(reps[0].coverage(), 0.5);
  EXPECT_EQ(reps[0].synth_visits, 0u);
}

TEST(Simloop, PretrainLeavesStoreEmpty) {
  const auto data = dataset(4);
  PseudoLabelStore store;
  StageConfig cfg;
  cfg.stage = Stage::Pretrain;
  cfg.n_passes = 2;
  cfg.noise = moderate(4);
  const auto reps = run_stage(data, store, cfg);
  for (const auto& r : reps) {
    EXPECT_EQ(r.coverage(), 0.0);
    EXPECT_EQ(r.real_visits, 0u);
    EXPECT_EQ(r.synth_visits, 4u);
    EXPECT_EQ(r.synth_losses.pages, 4u);
  }
}

TEST(Simloop, TrainMixesSyntheticPages) {
  const auto data = dataset(20);
  PseudoLabelStore store;
  StageConfig cfg;
  cfg.n_passes = 5;
  const auto reps = run_stage(data, store, cfg);
  std::size_t real = 0, synth = 0;
  for (const auto& r : reps) {
    real += r.real_visits;
    synth += r.synth_visits;
    EXPECT_EQ(r.real_visits, 20u);
  }
  const double frac = double(synth) / double(real + synth);
  EXPECT_GT(frac, 0.15);
  EXPECT_LT(frac, 0.45);
}

TEST(Simloop, NoiseHalvesOnSchedule) {
  StageConfig cfg;
  cfg.halve_every = 5;
  EXPECT_EQ(cfg.noise_factor(0), 1.0);
  EXPECT_EQ(cfg.noise_factor(4), 1.0);
  EXPECT_EQ(cfg.noise_factor(5), 0.5);
  EXPECT_EQ(cfg.noise_factor(19), 0.125);
  cfg.halve_every = 0;
  EXPECT_EQ(cfg.noise_factor(19), 1.0);
}

TEST(Simloop, ModerateNoiseQualityMostlyNonDecreasing) {
  // Single runs plateau within each constant-noise block, so the transition
  // count is taken on the curve averaged over seeds.
  constexpr int kSeeds = 8;
  std::vector<double> cov(20, 0.0), iou(20, 0.0);
  int single_run_ok = 0;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto data = dataset(20, seed);
    PseudoLabelStore store;
    StageConfig cfg;
    cfg.n_passes = 20;
    cfg.noise = moderate(seed + 5);
    cfg.seed = seed + 6;
    const auto reps = run_stage(data, store, cfg);
    ASSERT_EQ(reps.size(), 20u);
    for (std::size_t k = 0; k < 20; ++k) {
      cov[k] += reps[k].coverage() / kSeeds;
      iou[k] += reps[k].mean_iou() / kSeeds;
      if (k > 0) single_run_ok += reps[k].mean_iou() >= reps[k - 1].mean_iou();
    }
    EXPECT_GE(reps.back().coverage(), 0.98);
    EXPECT_GE(reps.back().mean_iou(), 0.85);
  }
  int ok_cov = 0, ok_iou = 0;
  for (std::size_t k = 1; k < 20; ++k) {
    ok_cov += cov[k] >= cov[k - 1];
    ok_iou += iou[k] >= iou[k - 1];
  }
  RecordProperty("single_run_iou_nondecreasing_transitions", single_run_ok);
  std::printf("single-run IoU transitions non-decreasing: %d of %d\n", single_run_ok, 19 * kSeeds);
  EXPECT_GE(ok_cov, 18);
  EXPECT_GE(ok_iou, 18);
}

TEST(Simloop, LossesDescendAsNoiseHalves) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto data = dataset(20, seed + 3);
    PseudoLabelStore store;
    StageConfig cfg;
    cfg.n_passes = 20;
    cfg.noise = moderate(seed + 7);
    const auto reps = run_stage(data, store, cfg);
    double first = 0, last = 0;
    for (std::size_t k = 0; k < 5; ++k) {
      first += reps[k].real_losses.total;
      last += reps[15 + k].real_losses.total;
    }
    EXPECT_LT(last, first) << "seed " << seed;
  }
}

TEST(Simloop, DeterministicGivenSeed) {
  const auto data = dataset(6, 4);
  StageConfig cfg;
  cfg.n_passes = 4;
  cfg.noise = moderate(8);
  cfg.seed = 9;
  PseudoLabelStore a, b;
  run_stage(data, a, cfg);
  run_stage(data, b, cfg);
  EXPECT_EQ(a, b);
  PseudoLabelStore c;
  cfg.deterministic = false;
  run_stage(data, c, cfg);
  EXPECT_EQ(a, c);
  PseudoLabelStore d;
  cfg.seed = 10;
  cfg.noise.seed = 11;
  run_stage(data, d, cfg);
  EXPECT_NE(a, d);
}

TEST(Simloop, GammaNeverDropsBelowConvexBound) {
  const auto data = dataset(6, 5);
  PseudoLabelStore store;
  StageConfig cfg;
  cfg.noise = moderate(12);
  run_stage(data, store, cfg);
  for (int pass = 0; pass < 5; ++pass) {
    const PseudoLabelStore before = store;
    cfg.seed = 100 + std::uint64_t(pass);
    run_stage(data, store, cfg);
    for (const auto& [id, labels] : store.pages())
      for (std::size_t q = 0; q < labels.slots.size(); ++q)
        for (std::size_t n = 0; n < labels.slots[q].size(); ++n) {
          const auto& now = labels.slots[q][n];
          const auto& old = before.page(id).slots[q][n];
          if (!now) continue;
          EXPECT_GT(now->gamma, 0.0);
          EXPECT_LE(now->gamma, 1.0);
          // Every update mixes the old gamma with a score no lower than the
          // decode threshold contribution 0.8 * 0.5.
          if (old) EXPECT_GE(now->gamma, std::min(old->gamma, 0.4) - 1e-12);
        }
  }
}

TEST(Simloop, RejectsMismatchedStores) {
  const auto data = dataset(3);
  PseudoLabelStore store;
  PageAnnotation stray;
  stray.page_id = "stray";
  stray.lines = {{1}};
  store.ensure_page(stray);
  EXPECT_THROW(run_stage(data, store, {}), ConfigError);

  auto dup = data;
  dup.push_back(data[0]);
  PseudoLabelStore empty;
  EXPECT_THROW(run_stage(dup, empty, {}), ConfigError);

  PseudoLabelStore wrong;
  PageAnnotation reshaped = data[0].annotation;
  reshaped.lines.push_back({1});
  wrong.ensure_page(reshaped);
  EXPECT_THROW(run_stage(data, wrong, {}), ConfigError);
}

TEST(Simloop, RejectsBadConfig) {
  const auto data = dataset(2);
  PseudoLabelStore store;
  StageConfig cfg;
  cfg.n_passes = 0;
  EXPECT_THROW(run_stage(data, store, cfg), ConfigError);
  cfg = {};
  cfg.p_real = 0.5;
  cfg.p_synth = 0.4;
  EXPECT_THROW(run_stage(data, store, cfg), ConfigError);
}

TEST(ExportLabels, CoverageAndConsistency) {
  const auto data = dataset(4, 6);
  PseudoLabelStore store;
  EXPECT_EQ(export_labels(store, data).quality.coverage(), 0.0);
  StageConfig cfg;
  cfg.n_passes = 3;
  cfg.noise = moderate(13);
  run_stage(data, store, cfg);
  const auto ex = export_labels(store, data);
  LabelQuality direct;
  for (const auto& p : data) direct += label_quality(store.page(p.page_id), p.annotation, p.shape);
  EXPECT_EQ(ex.quality.n_labeled, direct.n_labeled);
  EXPECT_NEAR(ex.quality.mean_iou(), direct.mean_iou(), 1e-12);
  EXPECT_EQ(ex.records.size(), direct.n_labeled);
  ASSERT_EQ(ex.per_page.size(), data.size());

  PseudoLabelStore full;
  for (const auto& p : data) full.ensure_page(p.annotation) = detail::truth_labels(p);
  EXPECT_EQ(export_labels(full, data).quality.coverage(), 1.0);
}

TEST(Stage, NamesRoundTrip) {
  for (Stage s : {Stage::Pretrain, Stage::Initialize, Stage::Train}) EXPECT_EQ(parse_stage(stage_name(s)), s);
  EXPECT_THROW(parse_stage("finetune"), ConfigError);
}
