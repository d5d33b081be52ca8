#pragma once

// SVG overlay of a decoded page: character boxes, reading-order polylines,
// start-of-line (orange) and end-of-line (green) markers.

#include <cstdio>
#include <string>

#include "folio/decoder.hpp"
#include "folio/geometry.hpp"
#include "folio/page.hpp"

namespace folio {

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string dim(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace detail

/// Optional `truth` boxes are drawn dashed underneath the result.
inline std::string render_svg(const PageResult& r, const PageAnnotation* truth = nullptr) {
  using detail::dim;
  using detail::num;
  const GridShape& s = r.shape;
  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + dim(s.img_w) +
         "\" height=\"" + dim(s.img_h) + "\" viewBox=\"0 0 " + dim(s.img_w) +
         " " + dim(s.img_h) + "\">\n";
  out += "<rect class=\"page\" x=\"0\" y=\"0\" width=\"" + dim(s.img_w) + "\" height=\"" +
         dim(s.img_h) + "\" fill=\"white\"/>\n";

  auto rect = [&](const Box& b, const char* cls, const char* style) {
    const PixelRect p = to_pixels(b, s);
    out += "<rect class=\"" + std::string(cls) + "\" x=\"" + num(p.x0) + "\" y=\"" + num(p.y0) +
           "\" width=\"" + num(p.x1 - p.x0) + "\" height=\"" + num(p.y1 - p.y0) + "\" " + style +
           "/>\n";
  };

  if (truth && truth->has_boxes())
    for (const auto& line : truth->boxes)
      for (const Box& b : line)
        rect(b, "truth", "fill=\"none\" stroke=\"gray\" stroke-dasharray=\"2,2\"");

  for (const auto& line : r.lines)
    for (const auto& c : line.chars) rect(c.box, "char", "fill=\"none\" stroke=\"blue\"");
  for (const auto& c : r.unassigned) rect(c.box, "unassigned", "fill=\"none\" stroke=\"red\"");

  for (const auto& line : r.lines) {
    if (line.chars.empty()) continue;
    std::string pts;
    for (const auto& c : line.chars) {
      if (!pts.empty()) pts += ' ';
      pts += num(c.box.x) + "," + num(c.box.y);
    }
    out += "<polyline class=\"line\" points=\"" + pts + "\" fill=\"none\" stroke=\"black\"/>\n";
    const Box& a = line.chars.front().box;
    const Box& z = line.chars.back().box;
    out += "<circle class=\"sol\" cx=\"" + num(a.x) + "\" cy=\"" + num(a.y) +
           "\" r=\"3\" fill=\"orange\"/>\n";
    out += "<circle class=\"eol\" cx=\"" + num(z.x) + "\" cy=\"" + num(z.y) +
           "\" r=\"2\" fill=\"green\"/>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace folio
