#include <gtest/gtest.h>

#include <regex>

#include "folio/folio.hpp"

using namespace folio;

namespace {

SyntheticPage sample_page(std::uint64_t seed, Layout layout = Layout::sine()) {
  SynthConfig cfg;
  cfg.n_lines = 3;
  cfg.layout = layout;
  cfg.seed = seed;
  return gen_page(cfg);
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST(ResultJson, RoundTripsDecodedPages) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto page = sample_page(seed, seed % 2 ? Layout::rotated(90) : Layout::sine());
    OracleNoise n;
    n.jitter_sigma = 0.1;
    n.spurious_p = 0.05;
    n.seed = seed;
    const auto r = decode(oracle_predict(page, n));
    std::string id;
    const auto back = result_from_json(json::parse(result_to_json(r, page.page_id).dump()), &id);
    EXPECT_EQ(back, r);
    EXPECT_EQ(id, page.page_id);
  }
}

TEST(ResultJson, RejectsMalformedInput) {
  const auto r = decode(oracle_predict(sample_page(1), {}));
  json j = result_to_json(r);
  json no_lines = j;
  no_lines.erase("lines");
  EXPECT_THROW(result_from_json(no_lines), FormatError);
  json bad_size = j;
  bad_size["img_w"] = 3;
  EXPECT_THROW(result_from_json(bad_size), FormatError);
  json off_grid = j;
  off_grid["lines"][0]["chars"][0]["i"] = 999;
  EXPECT_THROW(result_from_json(off_grid), DomainError);
  json bad_outcome = j;
  bad_outcome["lines"][0]["chars"][0]["outcome"] = "teleported";
  EXPECT_THROW(result_from_json(bad_outcome), FormatError);
  json wrong_type = j;
  wrong_type["lines"][0]["chars"][0]["cls"] = "a";
  EXPECT_THROW(result_from_json(wrong_type), FormatError);
}

TEST(ResultsJsonl, SkipsBlankLinesAndNamesBadLine) {
  const auto r = decode(oracle_predict(sample_page(2), {}));
  const std::string text = result_to_json(r, "p0").dump() + "\n\n" + result_to_json(r, "p1").dump() + "\n";
  const auto items = results_from_jsonl(text);
  ASSERT_EQ(items.size(), 2u);
  EXPECT_EQ(items[1].first, "p1");
  EXPECT_EQ(items[1].second, r);
  try {
    results_from_jsonl(text + "{broken\n");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  }
}

TEST(AnnotationJson, RoundTripWithAndWithoutBoxes) {
  const auto page = sample_page(3);
  const auto back = annotation_from_json(annotation_to_json(page.annotation));
  EXPECT_EQ(back.lines, page.annotation.lines);
  EXPECT_EQ(back.boxes, page.annotation.boxes);
  ASSERT_TRUE(back.shape);
  EXPECT_EQ(*back.shape, page.shape);
  const auto bare = annotation_from_json(annotation_to_json(page.annotation, false));
  EXPECT_EQ(bare.lines, page.annotation.lines);
  EXPECT_FALSE(bare.has_boxes());
  EXPECT_THROW(annotation_from_json(json{{"lines", json::array()}}), FormatError);
}

TEST(PageJson, RoundTripsSyntheticPages) {
  std::vector<SyntheticPage> pages;
  for (std::uint64_t seed = 0; seed < 4; ++seed)
    pages.push_back(sample_page(seed, seed % 2 ? Layout::rotated(270) : Layout::sine(2.5, 9)));
  const auto back = pages_from_jsonl(to_jsonl(pages, page_to_json));
  ASSERT_EQ(back.size(), pages.size());
  for (std::size_t k = 0; k < pages.size(); ++k) {
    EXPECT_EQ(back[k].page_id, pages[k].page_id);
    EXPECT_EQ(back[k].shape, pages[k].shape);
    EXPECT_EQ(back[k].n_cls, pages[k].n_cls);
    EXPECT_EQ(back[k].layout.kind, pages[k].layout.kind);
    EXPECT_EQ(back[k].line_direction, pages[k].line_direction);
    EXPECT_EQ(back[k].annotation.lines, pages[k].annotation.lines);
    ASSERT_EQ(back[k].chars.size(), pages[k].chars.size());
    for (std::size_t c = 0; c < pages[k].chars.size(); ++c) EXPECT_EQ(back[k].chars[c].box, pages[k].chars[c].box);
    EXPECT_EQ(oracle_predict(back[k], {}), oracle_predict(pages[k], {}));
  }
}

TEST(PageJson, RejectsInconsistentPages) {
  json j = page_to_json(sample_page(5));
  json no_boxes = j;
  no_boxes.erase("boxes");
  EXPECT_THROW(page_from_json(no_boxes), FormatError);
  json bad_cls = j;
  bad_cls["lines"][0][0] = 10000;
  EXPECT_THROW(page_from_json(bad_cls), FormatError);
  json bad_dir = j;
  bad_dir["line_direction"][0] = 7;
  EXPECT_THROW(page_from_json(bad_dir), FormatError);
  json bad_layout = j;
  bad_layout["layout"]["kind"] = "spiral";
  EXPECT_THROW(page_from_json(bad_layout), FormatError);
}

TEST(StoreJsonl, RoundTripKeepsEmptyPages) {
  const auto a = sample_page(6), b = sample_page(7);
  PseudoLabelStore s;
  s.ensure_page(a.annotation);
  auto& labels = s.ensure_page(b.annotation);
  labels.at(0, 0) = PseudoLabel{b.chars[0].box, 0.75, 3};
  labels.at(1, 1) = PseudoLabel{b.chars[b.annotation.lines[0].size() + 1].box, 0.125, 1};
  const std::string text = store_to_jsonl(s);
  EXPECT_EQ(store_from_jsonl(text), s);
  EXPECT_EQ(store_to_jsonl(store_from_jsonl(text)), text);
  EXPECT_EQ(store_from_jsonl(""), PseudoLabelStore{});
}

TEST(StoreJsonl, RejectsMalformedRecords) {
  const auto page = sample_page(8);
  PseudoLabelStore s;
  s.ensure_page(page.annotation).at(0, 0) = PseudoLabel{page.chars[0].box, 0.5, 1};
  const std::string text = store_to_jsonl(s);
  const std::string header = text.substr(0, text.find('\n') + 1);
  const std::string record = text.substr(header.size());

  EXPECT_THROW(store_from_jsonl(record), FormatError);
  EXPECT_THROW(store_from_jsonl(header + header), FormatError);
  EXPECT_THROW(store_from_jsonl(header + "not json\n"), FormatError);

  auto rec = json::parse(record);
  rec["gamma"] = 1.5;
  EXPECT_THROW(store_from_jsonl(header + rec.dump() + "\n"), FormatError);
  rec = json::parse(record);
  rec["q"] = 99;
  EXPECT_THROW(store_from_jsonl(header + rec.dump() + "\n"), FormatError);
  rec = json::parse(record);
  rec.erase("x");
  EXPECT_THROW(store_from_jsonl(header + rec.dump() + "\n"), FormatError);
}

TEST(Svg, EmptyPageIsWellFormed) {
  PageResult r;
  r.shape = GridShape::from_grid(4, 3);
  const auto svg = render_svg(r);
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_NE(svg.find("width=\"64\" height=\"48\""), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_EQ(count(svg, "<polyline"), 0u);
  EXPECT_EQ(count(svg, "<circle"), 0u);
}

TEST(Svg, DrawsOneElementPerItem) {
  SynthConfig cfg;
  cfg.n_lines = 1;
  cfg.chars_min = cfg.chars_max = 6;
  cfg.seed = 9;
  const auto page = gen_page(cfg);
  const auto r = decode(oracle_predict(page, {}));
  ASSERT_EQ(r.lines.size(), 1u);
  const auto svg = render_svg(r);
  EXPECT_EQ(count(svg, "<polyline"), 1u);
  EXPECT_EQ(count(svg, "class=\"char\""), 6u);
  EXPECT_EQ(count(svg, "class=\"sol\""), 1u);
  EXPECT_EQ(count(svg, "class=\"eol\""), 1u);
  const auto with_truth = render_svg(r, &page.annotation);
  EXPECT_EQ(count(with_truth, "class=\"truth\""), 6u);
  EXPECT_EQ(render_svg(r), svg);

  const std::regex points("points=\"([^\"]*)\"");
  std::smatch m;
  ASSERT_TRUE(std::regex_search(svg, m, points));
  EXPECT_EQ(count(m[1].str(), ","), 6u);
}

TEST(SimConfig, DefaultsAndDerivedSeeds) {
  const auto c = parse_sim_config(json::parse(R"({"seed": 3, "stages": [{"stage": "train"}, {"stage": "train"}]})"));
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.n_pages, 20u);
  EXPECT_FALSE(c.dataset_file);
  ASSERT_EQ(c.stages.size(), 2u);
  EXPECT_EQ(c.stages[0].stage, Stage::Train);
  EXPECT_EQ(c.stages[0].n_passes, 1u);
  EXPECT_DOUBLE_EQ(c.stages[0].p_real, 0.7);
  EXPECT_DOUBLE_EQ(c.stages[0].p_real + c.stages[0].p_synth, 1.0);
  EXPECT_NE(c.stages[0].seed, c.stages[1].seed);
  EXPECT_NE(c.stages[0].noise.seed, c.stages[1].noise.seed);
  EXPECT_EQ(c.dataset.seed, derive_seed(3, {0x64617461ULL}));
  const auto again = parse_sim_config(json::parse(R"({"seed": 3, "stages": [{"stage": "train"}, {"stage": "train"}]})"));
  EXPECT_EQ(again.stages[1].seed, c.stages[1].seed);
}

TEST(SimConfig, RejectsTyposAndBadValues) {
  auto bad = [](const char* text) { return parse_sim_config(json::parse(text)); };
  EXPECT_THROW(bad(R"({"stages": [{"stage": "train"}], "sed": 1})"), ConfigError);
  EXPECT_THROW(bad(R"({"stages": []})"), ConfigError);
  EXPECT_THROW(bad(R"({})"), ConfigError);
  EXPECT_THROW(bad(R"({"stages": [{"stage": "train", "pases": 2}]})"), ConfigError);
  EXPECT_THROW(bad(R"({"stages": [{"stage": "finetune"}]})"), ConfigError);
  EXPECT_THROW(bad(R"({"stages": [{"stage": "train", "p_real": 1.5}]})"), ConfigError);
  EXPECT_THROW(bad(R"({"stages": [{"stage": "train", "noise": {"jiter": 0.1}}]})"), ConfigError);
  EXPECT_THROW(bad(R"({"dataset": {"layout": "spiral"}, "stages": [{"stage": "train"}]})"), ConfigError);
  EXPECT_THROW(bad(R"({"dataset": {"pages": "many"}, "stages": [{"stage": "train"}]})"), ConfigError);
  EXPECT_THROW(bad(R"({"dataset": {}, "dataset_file": "x", "stages": [{"stage": "train"}]})"), ConfigError);
  EXPECT_THROW(bad(R"({"decode": {"dis_weight": 2}, "stages": [{"stage": "train"}]})"), ConfigError);
}

TEST(SimConfig, ShippedSampleParses) {
  const auto text = detail::read_file(std::string(FOLIO_SAMPLES) + "/train_sim.json");
  const auto c = parse_sim_config(json::parse(text));
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.n_pages, 20u);
  EXPECT_EQ(c.dataset.n_cls, 100);
  ASSERT_EQ(c.stages.size(), 3u);
  EXPECT_EQ(c.stages[0].stage, Stage::Pretrain);
  EXPECT_EQ(c.stages[1].stage, Stage::Initialize);
  EXPECT_EQ(c.stages[2].n_passes, 20u);
  EXPECT_EQ(c.stages[2].halve_every, 5u);
  EXPECT_EQ(c.stages[2].synth.layout.kind, LayoutKind::SineCurve);
}
