#pragma once

// JSON and JSON-lines formats for results, annotations, synthetic pages,
// pseudo-label stores and reports.
//
// Line and position indices (q, n) are 0-based; class ids are 1-based; grid
// indices (i, j) are 1-based.

#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "folio/decoder.hpp"
#include "folio/error.hpp"
#include "folio/geometry.hpp"
#include "folio/losses.hpp"
#include "folio/page.hpp"
#include "folio/predictions.hpp"
#include "folio/simloop.hpp"
#include "folio/store.hpp"
#include "json.hpp"

namespace folio {

using nlohmann::json;

namespace detail {

template <class T>
T get_field(const json& j, const char* key, const char* what) {
  if (!j.is_object() || !j.contains(key))
    throw FormatError(std::string(what) + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(std::string(what) + ": field '" + key + "' has the wrong type");
  }
}

inline json box_json(const Box& b) { return json::array({b.x, b.y, b.w, b.h}); }

inline Box box_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 4) throw FormatError(std::string(what) + ": box must be [x,y,w,h]");
  try {
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  } catch (const json::exception&) {
    throw FormatError(std::string(what) + ": box entries must be numbers");
  }
}

inline json char_json(const CharInstance& c, const SearchTrace* trace) {
  json j{{"i", c.grid.i},   {"j", c.grid.j}, {"x", c.box.x},        {"y", c.box.y},
         {"w", c.box.w},    {"h", c.box.h},  {"cls", c.cls_id},     {"score", c.score},
         {"cls_prob", c.cls_prob}};
  if (trace) {
    json path = json::array();
    for (GridIndex g : trace->path()) path.push_back({g.i, g.j});
    j["path"] = std::move(path);
    j["outcome"] = outcome_name(trace->outcome);
    if (trace->target) j["target"] = {trace->target->i, trace->target->j};
  }
  return j;
}

inline TraceOutcome parse_outcome(const std::string& s) {
  for (TraceOutcome o : {TraceOutcome::Reached, TraceOutcome::Boundary, TraceOutcome::Cycle,
                         TraceOutcome::MaxSteps})
    if (s == outcome_name(o)) return o;
  throw FormatError("result: unknown trace outcome '" + s + "'");
}

inline CharInstance char_from(const json& j, SearchTrace* trace) {
  const char* what = "result character";
  CharInstance c;
  c.grid = {get_field<int>(j, "i", what), get_field<int>(j, "j", what)};
  c.box = {get_field<double>(j, "x", what), get_field<double>(j, "y", what),
           get_field<double>(j, "w", what), get_field<double>(j, "h", what)};
  c.cls_id = get_field<int>(j, "cls", what);
  c.score = get_field<double>(j, "score", what);
  c.cls_prob = j.value("cls_prob", 0.0);
  if (trace) {
    trace->origin = c.grid;
    trace->visited = {c.grid};
    if (j.contains("path"))
      for (const auto& g : j.at("path")) trace->visited.push_back({g.at(0).get<int>(), g.at(1).get<int>()});
    trace->outcome = parse_outcome(j.value("outcome", std::string("boundary")));
    if (j.contains("target")) trace->target = GridIndex{j["target"][0].get<int>(), j["target"][1].get<int>()};
  }
  return c;
}

}  // namespace detail

// ---- PageResult ------------------------------------------------------------

inline json result_to_json(const PageResult& r, const std::string& page_id = {}) {
  json lines = json::array();
  for (const auto& line : r.lines) {
    json chars = json::array();
    for (std::size_t m = 0; m < line.chars.size(); ++m)
      chars.push_back(detail::char_json(line.chars[m], m < line.traces.size() ? &line.traces[m] : nullptr));
    lines.push_back({{"chars", std::move(chars)}, {"sol_conf", line.sol_conf}, {"eol_conf", line.eol_conf}});
  }
  json un = json::array();
  for (const auto& c : r.unassigned) un.push_back(detail::char_json(c, nullptr));
  json j{{"w_g", r.shape.w_g},     {"h_g", r.shape.h_g},  {"img_w", r.shape.img_w},
         {"img_h", r.shape.img_h}, {"lines", std::move(lines)}, {"unassigned", std::move(un)}};
  if (!page_id.empty()) j["page_id"] = page_id;
  return j;
}

inline PageResult result_from_json(const json& j, std::string* page_id = nullptr) {
  const char* what = "result";
  PageResult r;
  const int w = detail::get_field<int>(j, "w_g", what);
  const int h = detail::get_field<int>(j, "h_g", what);
  if (w < 1 || h < 1) throw FormatError("result: grid dimensions must be positive");
  r.shape = GridShape::from_grid(w, h);
  if (j.contains("img_w") && (j["img_w"].get<int>() != r.shape.img_w || j["img_h"].get<int>() != r.shape.img_h))
    throw FormatError("result: image size disagrees with grid size");
  if (page_id) *page_id = j.value("page_id", std::string());
  for (const auto& lj : detail::get_field<json>(j, "lines", what)) {
    LineResult line;
    for (const auto& cj : detail::get_field<json>(lj, "chars", "result line")) {
      SearchTrace t;
      line.chars.push_back(detail::char_from(cj, &t));
      line.traces.push_back(std::move(t));
    }
    line.sol_conf = lj.value("sol_conf", 0.0);
    line.eol_conf = lj.value("eol_conf", 0.0);
    r.lines.push_back(std::move(line));
  }
  if (j.contains("unassigned"))
    for (const auto& cj : j["unassigned"]) r.unassigned.push_back(detail::char_from(cj, nullptr));
  for (const auto& line : r.lines)
    for (const auto& c : line.chars) check_grid(c.grid, r.shape, "result");
  return r;
}

// ---- Annotations and synthetic pages ---------------------------------------

inline json annotation_to_json(const PageAnnotation& a, bool with_boxes = true) {
  json j{{"page_id", a.page_id}, {"lines", a.lines}};
  if (with_boxes && a.has_boxes()) {
    json boxes = json::array();
    for (const auto& line : a.boxes) {
      json row = json::array();
      for (const auto& b : line) row.push_back(detail::box_json(b));
      boxes.push_back(std::move(row));
    }
    j["boxes"] = std::move(boxes);
  }
  if (a.shape) {
    j["w_g"] = a.shape->w_g;
    j["h_g"] = a.shape->h_g;
  }
  return j;
}

inline PageAnnotation annotation_from_json(const json& j) {
  const char* what = "annotation";
  PageAnnotation a;
  a.page_id = detail::get_field<std::string>(j, "page_id", what);
  a.lines = detail::get_field<std::vector<ClassSeq>>(j, "lines", what);
  if (j.contains("boxes") && !j["boxes"].is_null()) {
    for (const auto& row : j["boxes"]) {
      std::vector<Box> line;
      for (const auto& b : row) line.push_back(detail::box_from(b, what));
      a.boxes.push_back(std::move(line));
    }
  }
  if (j.contains("w_g") && j.contains("h_g"))
    a.shape = GridShape::from_grid(j["w_g"].get<int>(), j["h_g"].get<int>());
  return a;
}

inline json page_to_json(const SyntheticPage& p) {
  json j = annotation_to_json(p.annotation, true);
  j["page_id"] = p.page_id;
  j["w_g"] = p.shape.w_g;
  j["h_g"] = p.shape.h_g;
  j["n_cls"] = p.n_cls;
  j["layout"] = {{"kind", layout_name(p.layout.kind)},
                 {"amplitude", p.layout.amplitude},
                 {"period", p.layout.period}};
  json dirs = json::array();
  for (Direction d : p.line_direction) dirs.push_back(int(d));
  j["line_direction"] = std::move(dirs);
  return j;
}

inline SyntheticPage page_from_json(const json& j) {
  const char* what = "page";
  SyntheticPage p;
  p.annotation = annotation_from_json(j);
  if (!p.annotation.has_boxes()) throw FormatError("page '" + p.annotation.page_id + "': missing boxes");
  if (!p.annotation.shape) throw FormatError("page '" + p.annotation.page_id + "': missing w_g/h_g");
  p.page_id = p.annotation.page_id;
  p.shape = *p.annotation.shape;
  p.n_cls = detail::get_field<int>(j, "n_cls", what);
  try {
    p.annotation.validate(p.n_cls);
  } catch (const DomainError& e) {
    throw FormatError(e.what());
  }
  if (j.contains("layout")) {
    const auto& l = j["layout"];
    try {
      p.layout.kind = parse_layout(l.value("kind", std::string("horizontal")));
    } catch (const DomainError& e) {
      throw FormatError(e.what());
    }
    p.layout.amplitude = l.value("amplitude", p.layout.amplitude);
    p.layout.period = l.value("period", p.layout.period);
  }
  for (std::size_t q = 0; q < p.annotation.lines.size(); ++q)
    for (std::size_t n = 0; n < p.annotation.lines[q].size(); ++n)
      p.chars.push_back({q, n, p.annotation.lines[q][n], p.annotation.boxes[q][n]});
  if (j.contains("line_direction")) {
    for (const auto& d : j["line_direction"]) {
      const int v = d.get<int>();
      if (v < 0 || v > 3) throw FormatError("page: line_direction entries must be 0..3");
      p.line_direction.push_back(Direction(v));
    }
  } else {
    p.line_direction.assign(p.annotation.lines.size(), Direction::Right);
  }
  return p;
}

// ---- Pseudo-label store ----------------------------------------------------

inline json label_record_json(const std::string& page_id, std::size_t q, std::size_t n,
                              const PseudoLabel& l) {
  return {{"page_id", page_id}, {"q", q},         {"n", n},          {"x", l.box.x},
          {"y", l.box.y},       {"w", l.box.w},   {"h", l.box.h},    {"gamma", l.gamma},
          {"count", l.count}};
}

/// Store as JSON lines; a page with no labels yet is still written as a
/// header record {"page_id", "shape": [line lengths]} so it survives a round
/// trip.
inline std::string store_to_jsonl(const PseudoLabelStore& s) {
  std::string out;
  for (const auto& [id, labels] : s.pages()) {
    json shape = json::array();
    for (const auto& line : labels.slots) shape.push_back(line.size());
    out += json{{"page_id", id}, {"shape", std::move(shape)}}.dump() + "\n";
    for (std::size_t q = 0; q < labels.slots.size(); ++q)
      for (std::size_t n = 0; n < labels.slots[q].size(); ++n)
        if (const auto& l = labels.slots[q][n]) out += label_record_json(id, q, n, *l).dump() + "\n";
  }
  return out;
}

namespace detail {

inline std::vector<json> parse_jsonl(std::string_view text, const char* what) {
  std::vector<json> out;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw FormatError(std::string(what) + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace detail

inline PseudoLabelStore store_from_jsonl(std::string_view text) {
  PseudoLabelStore s;
  for (const json& j : detail::parse_jsonl(text, "store")) {
    const auto id = detail::get_field<std::string>(j, "page_id", "store");
    if (j.contains("shape")) {
      if (s.has_page(id)) throw FormatError("store: duplicate header for page '" + id + "'");
      PageAnnotation a;
      a.page_id = id;
      for (std::size_t len : j["shape"].get<std::vector<std::size_t>>()) a.lines.emplace_back(len, 1);
      s.ensure_page(a);
      continue;
    }
    if (!s.has_page(id)) throw FormatError("store: record for page '" + id + "' precedes its header");
    const auto q = detail::get_field<std::size_t>(j, "q", "store");
    const auto n = detail::get_field<std::size_t>(j, "n", "store");
    PseudoLabel l;
    l.box = {detail::get_field<double>(j, "x", "store"), detail::get_field<double>(j, "y", "store"),
             detail::get_field<double>(j, "w", "store"), detail::get_field<double>(j, "h", "store")};
    l.gamma = detail::get_field<double>(j, "gamma", "store");
    l.count = j.value("count", 1);
    if (!(l.gamma >= 0 && l.gamma <= 1)) throw FormatError("store: gamma outside [0,1]");
    try {
      s.page(id).at(q, n) = l;
    } catch (const DomainError& e) {
      throw FormatError(std::string("store: ") + e.what());
    }
  }
  return s;
}

template <class T, class F>
std::string to_jsonl(const std::vector<T>& items, F&& fn) {
  std::string out;
  for (const auto& it : items) out += fn(it).dump() + "\n";
  return out;
}

inline std::vector<PageAnnotation> annotations_from_jsonl(std::string_view text) {
  std::vector<PageAnnotation> out;
  for (const json& j : detail::parse_jsonl(text, "annotations")) out.push_back(annotation_from_json(j));
  return out;
}

inline std::vector<SyntheticPage> pages_from_jsonl(std::string_view text) {
  std::vector<SyntheticPage> out;
  for (const json& j : detail::parse_jsonl(text, "pages")) out.push_back(page_from_json(j));
  return out;
}

inline std::vector<std::pair<std::string, PageResult>> results_from_jsonl(std::string_view text) {
  std::vector<std::pair<std::string, PageResult>> out;
  for (const json& j : detail::parse_jsonl(text, "results")) {
    std::string id;
    PageResult r = result_from_json(j, &id);
    out.emplace_back(std::move(id), std::move(r));
  }
  return out;
}

// ---- Reports ---------------------------------------------------------------

inline json loss_term_json(const LossTerm& t) {
  return {{"value", t.value}, {"samples", t.samples}, {"empty", t.empty}, {"clamped", t.clamped}};
}

inline json loss_report_json(const LossReport& r) {
  json j;
  const auto terms = r.terms();
  for (std::size_t k = 0; k < terms.size(); ++k) j[kLossNames[k]] = loss_term_json(*terms[k]);
  j["l_total"] = r.total;
  return j;
}

inline json loss_summary_json(const LossSummary& s) {
  json j;
  for (std::size_t k = 0; k < s.mean.size(); ++k) j[kLossNames[k]] = s.mean[k];
  j["l_total"] = s.total;
  j["pages"] = s.pages;
  return j;
}

inline json pass_report_json(const PassReport& r) {
  json j{{"stage", stage_name(r.stage)},
         {"pass", r.pass},
         {"noise_factor", r.noise_factor},
         {"real_visits", r.real_visits},
         {"synth_visits", r.synth_visits},
         {"m_l", r.n_ml},
         {"m_c", r.n_mc},
         {"m_c_kept", r.n_kept},
         {"collisions", r.collisions},
         {"coverage", r.coverage()},
         {"mean_iou", r.mean_iou()},
         {"labeled", r.quality.n_labeled},
         {"slots", r.quality.n_slots}};
  if (r.has_losses) {
    if (r.real_losses.pages) j["losses"] = loss_summary_json(r.real_losses);
    if (r.synth_losses.pages) j["synth_losses"] = loss_summary_json(r.synth_losses);
  }
  return j;
}

}  // namespace folio
