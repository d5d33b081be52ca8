#pragma once

// Page-level ground truth: line transcripts (what weak supervision sees) and
// the full synthetic page they were derived from.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "folio/error.hpp"
#include "folio/geometry.hpp"
#include "folio/predictions.hpp"

namespace folio {

/// Ordered 1-based class ids of one text line.
using ClassSeq = std::vector<int>;

struct PageAnnotation {
  std::string page_id;
  std::vector<ClassSeq> lines;
  // Ground-truth boxes parallel to `lines`; empty when not annotated. Only
  // generation and evaluation read them, never matching.
  std::vector<std::vector<Box>> boxes;
  std::optional<GridShape> shape;

  bool has_boxes() const { return !boxes.empty(); }

  std::size_t n_chars() const {
    std::size_t n = 0;
    for (const auto& l : lines) n += l.size();
    return n;
  }

  void validate(int n_cls) const {
    for (std::size_t q = 0; q < lines.size(); ++q) {
      if (lines[q].empty())
        throw DomainError("annotation '" + page_id + "': line " + std::to_string(q) + " is empty");
      for (int c : lines[q])
        if (c < 1 || c > n_cls)
          throw DomainError("annotation '" + page_id + "': class id " + std::to_string(c) +
                            " outside [1, " + std::to_string(n_cls) + "]");
    }
    if (has_boxes()) {
      if (boxes.size() != lines.size())
        throw DomainError("annotation '" + page_id + "': boxes/lines count mismatch");
      for (std::size_t q = 0; q < lines.size(); ++q)
        if (boxes[q].size() != lines[q].size())
          throw DomainError("annotation '" + page_id + "': boxes/line length mismatch on line " +
                            std::to_string(q));
    }
  }
};

enum class LayoutKind { Horizontal, Rotated90, Rotated180, Rotated270, SineCurve };

struct Layout {
  LayoutKind kind = LayoutKind::Horizontal;
  double amplitude = 1.5;  // grid units, SineCurve only
  double period = 12.0;    // grid units, SineCurve only

  static Layout horizontal() { return {}; }
  static Layout rotated(int degrees_clockwise) {
    switch (((degrees_clockwise % 360) + 360) % 360) {
      case 0: return {LayoutKind::Horizontal};
      case 90: return {LayoutKind::Rotated90};
      case 180: return {LayoutKind::Rotated180};
      case 270: return {LayoutKind::Rotated270};
      default: throw DomainError("rotation must be a multiple of 90 degrees");
    }
  }
  static Layout sine(double amplitude = 1.5, double period = 12.0) {
    return {LayoutKind::SineCurve, amplitude, period};
  }

  /// Clockwise rotation in degrees applied after layout.
  int rotation() const {
    switch (kind) {
      case LayoutKind::Rotated90: return 90;
      case LayoutKind::Rotated180: return 180;
      case LayoutKind::Rotated270: return 270;
      default: return 0;
    }
  }
};

inline const char* layout_name(LayoutKind k) {
  switch (k) {
    case LayoutKind::Horizontal: return "horizontal";
    case LayoutKind::Rotated90: return "rot90";
    case LayoutKind::Rotated180: return "rot180";
    case LayoutKind::Rotated270: return "rot270";
    case LayoutKind::SineCurve: return "sine";
  }
  return "?";
}

inline LayoutKind parse_layout(const std::string& name) {
  for (LayoutKind k : {LayoutKind::Horizontal, LayoutKind::Rotated90, LayoutKind::Rotated180,
                       LayoutKind::Rotated270, LayoutKind::SineCurve})
    if (name == layout_name(k)) return k;
  if (name == "rot0") return LayoutKind::Horizontal;
  throw DomainError("unknown layout '" + name + "'");
}

struct SynthChar {
  std::size_t line = 0;  // 0-based
  std::size_t pos = 0;   // 0-based position in the line
  int cls = 1;
  Box box;
};

struct SyntheticPage {
  std::string page_id;
  GridShape shape;
  int n_cls = 1;
  Layout layout;
  std::vector<SynthChar> chars;          // ordered by (line, pos)
  std::vector<Direction> line_direction;  // reading direction of each line
  PageAnnotation annotation;

  std::size_t n_lines() const { return annotation.lines.size(); }

  /// Offsets into `chars` of each line's first character.
  std::vector<std::size_t> line_starts() const {
    std::vector<std::size_t> starts;
    for (std::size_t k = 0; k < chars.size(); ++k)
      if (chars[k].pos == 0) starts.push_back(k);
    return starts;
  }

  GridIndex grid(std::size_t k) const { return grid_of(chars[k].box, shape); }
};

}  // namespace folio
