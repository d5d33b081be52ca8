// folio command-line tool.
//
// Exit codes: 0 success, 1 usage error, 2 data/format/config error,
// 3 internal invariant violation.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "folio/folio.hpp"

namespace fs = std::filesystem;
using folio::json;

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string config;
  bool deterministic = true;
  folio::DecodeConfig decode;
  double th_ar = folio::kThAr;
  double th_iou = folio::kThIou;
  double epsilon = folio::kEpsilon;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Master seed");
  cmd->add_option("--out", c.out, "Output path (stdout when omitted)");
  cmd->add_option("--config", c.config, "JSON configuration file");
  cmd->add_option("--deterministic", c.deterministic, "Sequential, reproducible execution")
      ->default_val(true);
  cmd->add_option("--nms-iou", c.decode.nms_iou, "NMS IoU threshold")->default_val(folio::kDefaultNmsIou);
  cmd->add_option("--dis-threshold", c.decode.dis_threshold, "Character confidence threshold")
      ->default_val(folio::kDefaultDisThreshold);
  cmd->add_option("--sol-eol-threshold", c.decode.sol_eol_threshold, "Start/end-of-line threshold")
      ->default_val(folio::kSolEolThreshold);
  cmd->add_option("--th-ar", c.th_ar, "Line matching AR threshold")->default_val(folio::kThAr);
  cmd->add_option("--th-iou", c.th_iou, "Spatial matching IoU threshold")->default_val(folio::kThIou);
  cmd->add_option("--epsilon", c.epsilon, "Pseudo-label update scale")->default_val(folio::kEpsilon);
  cmd->add_option("--max-steps", c.decode.max_steps, "Search step budget (0: w_g + h_g)")
      ->default_val(0);
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
  } else {
    folio::detail::write_file(out, text);
  }
}

std::string read_text(const std::string& path) {
  try {
    return folio::detail::read_file(path);
  } catch (const std::exception& e) {
    throw folio::FormatError(e.what());
  }
}

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
  std::size_t pages = 1;
  folio::SynthConfig cfg;
  std::string layout = "horizontal";
  folio::OracleNoise noise;
  std::string maps_format = "bin";
};

int cmd_synth(const Common& c, SynthArgs a) {
  a.cfg.layout.kind = folio::parse_layout(a.layout);
  a.cfg.seed = c.seed.value_or(0);
  const auto pages = folio::gen_dataset(a.cfg, a.pages);
  const std::string truth = folio::to_jsonl(pages, folio::page_to_json);
  if (c.out.empty()) {
    std::cout << truth;
    return 0;
  }
  const fs::path dir(c.out);
  fs::create_directories(dir / "maps");
  folio::detail::write_file(dir / "truth.jsonl", truth);
  std::string annots;
  for (const auto& p : pages) annots += folio::annotation_to_json(p.annotation, false).dump() + "\n";
  folio::detail::write_file(dir / "annotations.jsonl", annots);
  json listing = json::array();
  for (std::size_t k = 0; k < pages.size(); ++k) {
    folio::OracleNoise n = a.noise;
    n.seed = folio::derive_seed(a.cfg.seed, {0x6d617073ULL, k});
    const auto maps = folio::oracle_predict(pages[k], n);
    const fs::path file = dir / "maps" / (pages[k].page_id + (a.maps_format == "json" ? ".json" : ".pgnm"));
    if (a.maps_format == "json") {
      folio::detail::write_file(file, folio::maps_to_json(maps).dump());
    } else {
      folio::save_maps(maps, file);
    }
    listing.push_back(file.string());
  }
  std::cout << json{{"pages", pages.size()}, {"maps", listing}}.dump(2) << "\n";
  return 0;
}

// ---- decode ----------------------------------------------------------------

struct DecodeArgs {
  std::vector<std::string> maps;
  std::string lm = "none";
  int beam = 8;
};

int cmd_decode(const Common& c, const DecodeArgs& a) {
  std::string out;
  for (const auto& file : a.maps) {
    const auto maps = folio::load_maps(file);
    folio::PageResult r = folio::decode(maps, c.decode);
    if (a.lm == "uniform") {
      folio::LmConfig lc;
      lc.beam = a.beam;
      r = folio::rescore_with_lm(maps, r, folio::UniformLm(maps.n_cls), lc);
      folio::check_structure(r);
    }
    out += folio::result_to_json(r, fs::path(file).stem().string()).dump() + "\n";
  }
  emit(out, c.out);
  return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string results;
  std::string annotations;
  double iou = 0.5;
};

json prf_json(const folio::Prf& p) {
  return {{"p", p.p}, {"r", p.r}, {"f", p.f}, {"tp", p.tp}, {"fp", p.fp}, {"fn", p.fn}};
}

int cmd_eval(const Common& c, const EvalArgs& a) {
  const auto results = folio::results_from_jsonl(read_text(a.results));
  const auto annots = folio::annotations_from_jsonl(read_text(a.annotations));
  std::map<std::string, std::size_t> by_id;
  for (std::size_t k = 0; k < results.size(); ++k)
    if (!by_id.emplace(results[k].first, k).second)
      throw folio::FormatError("eval: duplicate result page '" + results[k].first + "'");
  std::vector<std::vector<folio::ClassSeq>> hyp, ref;
  std::size_t used = 0;
  bool boxes = true;
  for (const auto& an : annots) {
    ref.push_back(an.lines);
    auto it = by_id.find(an.page_id);
    if (it == by_id.end() && results.size() == 1 && annots.size() == 1 && results[0].first.empty())
      it = by_id.begin();
    if (it != by_id.end()) {
      ++used;
      hyp.push_back(results[it->second].second.transcripts());
    } else {
      hyp.emplace_back();
    }
    boxes = boxes && an.has_boxes() && an.shape;
  }
  if (used != results.size()) throw folio::FormatError("eval: result pages without an annotation");
  const folio::ArStar s = folio::ar_star(hyp, ref);

  json per_page = json::array();
  for (std::size_t k = 0; k < annots.size(); ++k) {
    const auto& e = s.per_page[k];
    json pj{{"page_id", annots[k].page_id}, {"ie", e.n_ie}, {"de", e.n_de}, {"se", e.n_se}, {"n", e.n_total}};
    if (e.n_total > 0) {
      pj["ar_star"] = e.ar();
      pj["cr_star"] = e.cr();
    }
    per_page.push_back(std::move(pj));
  }
  json report{{"ar_star", s.ar_star},
              {"cr_star", s.cr_star},
              {"counts", {{"ie", s.counts.n_ie}, {"de", s.counts.n_de}, {"se", s.counts.n_se}, {"n", s.counts.n_total}}},
              {"per_page", per_page},
              {"det_only", nullptr},
              {"det_cls", nullptr}};
  if (boxes) {
    // Detection is pooled over pages; each page is matched on its own grid.
    std::size_t o_tp = 0, o_fp = 0, o_fn = 0, c_tp = 0, c_fp = 0, c_fn = 0;
    for (const auto& an : annots) {
      const auto it = by_id.find(an.page_id);
      const auto gt = folio::det_items(an);
      std::vector<folio::DetItem> rd;
      if (it != by_id.end()) rd = folio::det_items(results[it->second].second);
      const auto o = folio::det_prf(rd, gt, *an.shape, a.iou, false);
      const auto k = folio::det_prf(rd, gt, *an.shape, a.iou, true);
      o_tp += o.tp, o_fp += o.fp, o_fn += o.fn;
      c_tp += k.tp, c_fp += k.fp, c_fn += k.fn;
    }
    report["det_only"] = prf_json(folio::prf_from_counts(o_tp, o_fp, o_fn));
    report["det_cls"] = prf_json(folio::prf_from_counts(c_tp, c_fp, c_fn));
  }
  emit(report.dump(2) + "\n", c.out);
  return 0;
}

// ---- train-sim -------------------------------------------------------------

int cmd_train_sim(const Common& c) {
  json cj;
  try {
    cj = json::parse(read_text(c.config));
  } catch (const json::parse_error& e) {
    throw folio::ConfigError(std::string("config: ") + e.what());
  }
  if (c.seed) cj["seed"] = *c.seed;
  cj["deterministic"] = c.deterministic;
  const folio::SimConfig cfg = folio::parse_sim_config(cj);
  std::vector<folio::SyntheticPage> dataset;
  if (cfg.dataset_file) {
    fs::path f(*cfg.dataset_file);
    if (f.is_relative()) f = fs::path(c.config).parent_path() / f;
    dataset = folio::pages_from_jsonl(read_text(f.string()));
  } else {
    dataset = folio::gen_dataset(cfg.dataset, cfg.n_pages);
  }

  folio::PseudoLabelStore store;
  std::string passes;
  json last;
  for (const auto& stage : cfg.stages) {
    for (const auto& r : folio::run_stage(dataset, store, stage)) {
      last = folio::pass_report_json(r);
      passes += last.dump() + "\n";
    }
  }
  const auto exported = folio::export_labels(store, dataset);
  json quality{{"coverage", exported.quality.coverage()},
               {"mean_iou", exported.quality.mean_iou()},
               {"labeled", exported.quality.n_labeled},
               {"slots", exported.quality.n_slots}};
  if (!c.out.empty()) {
    const fs::path dir(c.out);
    fs::create_directories(dir);
    folio::detail::write_file(dir / "passes.jsonl", passes);
    folio::detail::write_file(dir / "store.jsonl", folio::store_to_jsonl(store));
    folio::detail::write_file(dir / "truth.jsonl", folio::to_jsonl(dataset, folio::page_to_json));
    folio::detail::write_file(dir / "quality.json", quality.dump(2) + "\n");
    std::cout << json{{"passes", std::count(passes.begin(), passes.end(), '\n')},
                      {"final", last},
                      {"quality", quality}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << passes;
  }
  return 0;
}

// ---- export-labels ---------------------------------------------------------

struct ExportArgs {
  std::string store;
  std::string annotations;
  std::string report;
};

int cmd_export(const Common& c, const ExportArgs& a) {
  const auto store = folio::store_from_jsonl(read_text(a.store));
  const auto annots = folio::annotations_from_jsonl(read_text(a.annotations));
  for (const auto& an : annots)
    if (store.has_page(an.page_id)) {
      const auto& slots = store.page(an.page_id).slots;
      bool same = slots.size() == an.lines.size();
      for (std::size_t q = 0; same && q < slots.size(); ++q) same = slots[q].size() == an.lines[q].size();
      if (!same) throw folio::ConfigError("store page '" + an.page_id + "' does not match its annotation");
    }
  const auto ex = folio::export_labels(store, annots);

  // One labeled annotation per page; unlabeled characters carry null boxes.
  std::string out;
  for (const auto& an : annots) {
    json boxes = json::array(), gammas = json::array();
    for (std::size_t q = 0; q < an.lines.size(); ++q) {
      json row = json::array(), grow = json::array();
      for (std::size_t n = 0; n < an.lines[q].size(); ++n) {
        const folio::PseudoLabel* l = nullptr;
        if (store.has_page(an.page_id) && store.page(an.page_id).at(q, n)) l = &*store.page(an.page_id).at(q, n);
        row.push_back(l ? folio::detail::box_json(l->box) : json(nullptr));
        grow.push_back(l ? json(l->gamma) : json(nullptr));
      }
      boxes.push_back(std::move(row));
      gammas.push_back(std::move(grow));
    }
    json j{{"page_id", an.page_id}, {"lines", an.lines}, {"boxes", boxes}, {"gamma", gammas}};
    if (an.shape) {
      j["w_g"] = an.shape->w_g;
      j["h_g"] = an.shape->h_g;
    }
    out += j.dump() + "\n";
  }
  emit(out, c.out);
  json report{{"labeled", ex.quality.n_labeled}, {"records", ex.records.size()}};
  if (ex.quality.n_slots) {
    report["coverage"] = ex.quality.coverage();
    report["mean_iou"] = ex.quality.mean_iou();
    report["slots"] = ex.quality.n_slots;
  }
  if (!a.report.empty()) folio::detail::write_file(a.report, report.dump(2) + "\n");
  else std::cerr << report.dump() << "\n";
  return 0;
}

// ---- viz -------------------------------------------------------------------

struct VizArgs {
  std::string result;
  std::string page;
  std::string annotation;
};

int cmd_viz(const Common& c, const VizArgs& a) {
  const auto results = folio::results_from_jsonl(read_text(a.result));
  if (results.empty()) throw folio::FormatError("viz: no result in '" + a.result + "'");
  const std::pair<std::string, folio::PageResult>* pick = &results.front();
  if (!a.page.empty()) {
    pick = nullptr;
    for (const auto& r : results)
      if (r.first == a.page) pick = &r;
    if (!pick) throw folio::FormatError("viz: no result for page '" + a.page + "'");
  }
  std::optional<folio::PageAnnotation> truth;
  if (!a.annotation.empty())
    for (auto& an : folio::annotations_from_jsonl(read_text(a.annotation)))
      if (an.page_id == pick->first) truth = std::move(an);
  emit(folio::render_svg(pick->second, truth ? &*truth : nullptr), c.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"folio: grid-based page decoding and weak-supervision simulator"};
  app.require_subcommand(1);
  Common common;

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate synthetic pages (and oracle maps with --out)");
  add_common(synth, common);
  synth->add_option("--pages", sa.pages, "Number of pages")->default_val(1);
  synth->add_option("--lines", sa.cfg.n_lines, "Lines per page")->default_val(5);
  synth->add_option("--chars-min", sa.cfg.chars_min, "Minimum characters per line")->default_val(10);
  synth->add_option("--chars-max", sa.cfg.chars_max, "Maximum characters per line")->default_val(10);
  synth->add_option("--n-cls", sa.cfg.n_cls, "Number of classes")->default_val(100);
  synth->add_option("--layout", sa.layout, "horizontal|rot90|rot180|rot270|sine")->default_val("horizontal");
  synth->add_option("--amplitude", sa.cfg.layout.amplitude, "Sine amplitude (grid units)")->default_val(1.5);
  synth->add_option("--period", sa.cfg.layout.period, "Sine period (grid units)")->default_val(12.0);
  synth->add_option("--jitter", sa.noise.jitter_sigma, "Oracle center jitter (fraction of char size)");
  synth->add_option("--size-noise", sa.noise.size_sigma, "Oracle log-size jitter");
  synth->add_option("--label-swap", sa.noise.label_swap_p, "Oracle label swap probability");
  synth->add_option("--drop", sa.noise.drop_p, "Oracle drop probability");
  synth->add_option("--spurious", sa.noise.spurious_p, "Oracle spurious character probability");
  synth->add_option("--dir-flip", sa.noise.dir_flip_p, "Oracle direction flip probability");
  synth->add_option("--maps-format", sa.maps_format, "bin|json")->check(CLI::IsMember({"bin", "json"}));

  DecodeArgs da;
  auto* dec = app.add_subcommand("decode", "Decode prediction map files into line results (JSON lines)");
  add_common(dec, common);
  dec->add_option("maps", da.maps, "Map files (.pgnm or .json)")->required();
  dec->add_option("--lm", da.lm, "none|uniform")->check(CLI::IsMember({"none", "uniform"}));
  dec->add_option("--beam", da.beam, "LM beam width")->default_val(8)->check(CLI::PositiveNumber);

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "AR*/CR* and detection P/R/F");
  add_common(ev, common);
  ev->add_option("--results", ea.results, "Result JSON lines")->required();
  ev->add_option("--annotations", ea.annotations, "Annotation JSON lines")->required();
  ev->add_option("--iou", ea.iou, "Detection IoU threshold")->default_val(0.5);

  auto* train = app.add_subcommand("train-sim", "Run the simulated weak-supervision schedule");
  add_common(train, common);
  train->get_option("--config")->required();

  ExportArgs xa;
  auto* exp = app.add_subcommand("export-labels", "Export pseudo-labels as labeled annotations");
  add_common(exp, common);
  exp->add_option("--store", xa.store, "Store JSON lines")->required();
  exp->add_option("--annotations", xa.annotations, "Annotation JSON lines")->required();
  exp->add_option("--report", xa.report, "Quality report path (stderr when omitted)");

  VizArgs va;
  auto* viz = app.add_subcommand("viz", "Render a result as SVG");
  add_common(viz, common);
  viz->add_option("--result", va.result, "Result JSON lines")->required();
  viz->add_option("--page", va.page, "Page id (first result when omitted)");
  viz->add_option("--annotation", va.annotation, "Annotation JSON lines (draws truth boxes)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*synth) return cmd_synth(common, sa);
    if (*dec) return cmd_decode(common, da);
    if (*ev) return cmd_eval(common, ea);
    if (*train) return cmd_train_sim(common);
    if (*exp) return cmd_export(common, xa);
    if (*viz) return cmd_viz(common, va);
  } catch (const folio::InvariantError& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 3;
  } catch (const folio::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
