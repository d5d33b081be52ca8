#include <gtest/gtest.h>

#include <cmath>

#include "folio/folio.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace folio;

namespace {

const double kLn2 = std::log(2.0);

}  // namespace

TEST(LossDis, HalfProbabilitiesGiveLn2) {
  auto c = fixture::loss_case();
  c.targets.s_c = {{{1, 1}, 0, 0}};
  c.targets.s_d_neg = {{2, 1}};
  const auto t = loss_dis(c.maps, c.targets);
  EXPECT_NEAR(t.value, kLn2, 1e-12);
  EXPECT_EQ(t.samples, 2u);
  EXPECT_FALSE(t.empty);
}

TEST(LossDis, EmptySetsAreZeroAndFlagged) {
  auto c = fixture::loss_case();
  const auto t = loss_dis(c.maps, c.targets);
  EXPECT_EQ(t.value, 0.0);
  EXPECT_TRUE(t.empty);
  c.targets.s_d_neg = {{2, 1}};
  EXPECT_NEAR(loss_dis(c.maps, c.targets).value, 0.5 * kLn2, 1e-12);
}

TEST(LossDis, ExactZeroIsClampedAndFlagged) {
  auto c = fixture::loss_case();
  c.maps.dis[0] = 0.0f;
  c.targets.s_c = {{{1, 1}, 0, 0}};
  const auto t = loss_dis(c.maps, c.targets);
  EXPECT_TRUE(t.clamped);
  EXPECT_NEAR(t.value, -0.5 * std::log(kLossClamp), 1e-9);
  EXPECT_TRUE(std::isfinite(t.value));
}

TEST(LossBox, Examples) {
  auto c = fixture::loss_case();
  c.targets.s_c = {{{1, 1}, 0, 0}};
  EXPECT_NEAR(loss_box(c.maps, c.targets, c.labels).value, 0.0, 1e-12);
  c.maps.set_box({1, 1}, {0.5, 0.5, 0.4, 0.5});
  EXPECT_NEAR(loss_box(c.maps, c.targets, c.labels).value, 0.01, 1e-9);
  c.maps.set_box({1, 1}, {0.4, 0.5, 0.5, 0.5});
  EXPECT_NEAR(loss_box(c.maps, c.targets, c.labels).value, 0.001, 1e-9);
  c.targets.s_c.clear();
  EXPECT_TRUE(loss_box(c.maps, c.targets, c.labels).empty);
}

TEST(LossCls, Examples) {
  auto c = fixture::loss_case();
  c.targets.s_c = {{{1, 1}, 0, 0}};
  EXPECT_NEAR(loss_cls(c.maps, c.targets, c.annot).value, kLn2, 1e-12);
  c.maps.cls[0] = 1.0f;
  c.maps.cls[1] = 0.0f;
  EXPECT_NEAR(loss_cls(c.maps, c.targets, c.annot).value, 0.0, 1e-6);
  c.targets.s_c.clear();
  const auto t = loss_cls(c.maps, c.targets, c.annot);
  EXPECT_EQ(t.value, 0.0);
  EXPECT_TRUE(t.empty);
}

TEST(LossSolEol, HalfWeightedPositives) {
  auto c = fixture::loss_case();
  c.targets.s_s_pos = {{1, 1}};
  EXPECT_NEAR(loss_sol(c.maps, c.targets).value, 0.5 * kLn2, 1e-12);
  c.targets.s_e_neg = {{2, 1}};
  EXPECT_NEAR(loss_eol(c.maps, c.targets).value, 0.5 * kLn2, 1e-12);
  c.targets.s_e_pos = {{1, 1}};
  EXPECT_NEAR(loss_eol(c.maps, c.targets).value, kLn2, 1e-12);
}

TEST(LossRd, Examples) {
  auto c = fixture::loss_case();
  c.targets.s_rd = {{{1, 1}, Direction::Right}, {{2, 1}, Direction::Up}};
  EXPECT_NEAR(loss_rd(c.maps, c.targets).value, std::log(4.0), 1e-12);
  for (int d = 0; d < 4; ++d) c.maps.rd[std::size_t(d)] = d == 1 ? 1.0f : 0.0f;
  c.targets.s_rd = {{{1, 1}, Direction::Right}};
  EXPECT_NEAR(loss_rd(c.maps, c.targets).value, 0.0, 1e-6);
  c.targets.s_rd.clear();
  EXPECT_TRUE(loss_rd(c.maps, c.targets).empty);
}

TEST(LossTotal, IsPlainSum) {
  auto c = fixture::loss_case();
  c.targets.s_c = {{{1, 1}, 0, 0}};
  c.targets.s_d_neg = {{2, 1}};
  c.targets.s_s_pos = {{1, 1}};
  c.targets.s_rd = {{{1, 1}, Direction::Right}};
  const auto r = compute_losses(c.maps, c.targets, c.labels, c.annot);
  double sum = 0;
  for (const auto* t : r.terms()) sum += t->value;
  EXPECT_EQ(r.total, sum);
  EXPECT_NEAR(r.total, kLn2 + 0 + kLn2 + 0.5 * kLn2 + 0 + std::log(4.0), 1e-9);
  EXPECT_EQ(r.dis.samples, 2u);
  EXPECT_EQ(r.rd.samples, 1u);
  EXPECT_TRUE(r.eol.empty);
  const LossTerm zero{};
  EXPECT_EQ(loss_total(zero, zero, zero, zero, zero, zero).total, 0.0);
}

TEST(Losses, PerfectMapsAreNearZero) {
  for (auto layout : {Layout::horizontal(), Layout::rotated(180)}) {
    SynthConfig cfg;
    cfg.layout = layout;
    cfg.seed = 31;
    const auto pc = fixture::perfect_case(cfg, 2);
    const auto r = compute_losses(pc.maps, pc.targets, pc.labels, pc.page.annotation);
    for (const auto* t : r.terms()) EXPECT_LT(t->value, 1e-4);
    EXPECT_LT(r.total, 1e-4);
  }
}

TEST(Losses, MatchNaiveReferenceOnRandomFixtures) {
  Rng rng(41);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    SynthConfig cfg;
    cfg.n_lines = 3;
    cfg.chars_min = 2;
    cfg.chars_max = 7;
    cfg.n_cls = 9;
    cfg.layout = seed % 3 ? Layout::sine() : Layout::rotated(90);
    cfg.seed = seed;
    const auto page = gen_page(cfg);
    const auto maps = fixture::random_maps(page.shape, cfg.n_cls, rng);
    auto labels = PageLabels::for_annotation(page.annotation);
    for (const auto& c : page.chars) {
      if (uniform01(rng) < 0.2) continue;
      Box b = c.box;
      b.x += 4 * (uniform01(rng) - 0.5);
      b.y += 4 * (uniform01(rng) - 0.5);
      labels.at(c.line, c.pos) = PseudoLabel{b, uniform01(rng), 1};
    }
    const auto decoded = decode(oracle_predict(page, {}));
    const auto ms = semantic_match(decoded.transcripts(), page.annotation.lines);
    const auto t = build_targets(labels, decoded, ms.m_ce, page.shape, rng);
    const auto r = compute_losses(maps, t, labels, page.annotation);
    const auto n = oracle::naive_losses(maps, t, labels, page.annotation);
    EXPECT_NEAR(r.dis.value, n.dis, 1e-12);
    EXPECT_NEAR(r.box.value, n.box, 1e-12);
    EXPECT_NEAR(r.cls.value, n.cls, 1e-12);
    EXPECT_NEAR(r.sol.value, n.sol, 1e-12);
    EXPECT_NEAR(r.eol.value, n.eol, 1e-12);
    EXPECT_NEAR(r.rd.value, n.rd, 1e-12);
  }
}

TEST(Losses, PermutationInvariant) {
  Rng rng(42);
  SynthConfig cfg;
  cfg.seed = 43;
  const auto pc = fixture::perfect_case(cfg, 3);
  const auto maps = fixture::random_maps(pc.page.shape, pc.page.n_cls, rng);
  auto t = pc.targets;
  const auto before = compute_losses(maps, t, pc.labels, pc.page.annotation);
  std::shuffle(t.s_c.begin(), t.s_c.end(), rng);
  std::shuffle(t.s_d_neg.begin(), t.s_d_neg.end(), rng);
  std::shuffle(t.s_rd.begin(), t.s_rd.end(), rng);
  std::shuffle(t.s_s_neg.begin(), t.s_s_neg.end(), rng);
  const auto after = compute_losses(maps, t, pc.labels, pc.page.annotation);
  EXPECT_NEAR(before.total, after.total, 1e-12);
  EXPECT_NEAR(before.dis.value, after.dis.value, 1e-12);
}

TEST(Losses, TermsNonNegativeAndFinite) {
  Rng rng(44);
  for (int k = 0; k < 20; ++k) {
    SynthConfig cfg;
    cfg.seed = 50 + std::uint64_t(k);
    const auto pc = fixture::perfect_case(cfg, std::uint64_t(k));
    const auto maps = fixture::random_maps(pc.page.shape, pc.page.n_cls, rng);
    const auto r = compute_losses(maps, pc.targets, pc.labels, pc.page.annotation);
    for (const auto* t : r.terms()) {
      EXPECT_GE(t->value, 0.0);
      EXPECT_TRUE(std::isfinite(t->value));
    }
  }
}
