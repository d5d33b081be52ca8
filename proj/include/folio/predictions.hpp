#pragma once

// The six per-grid prediction maps of one page and their file formats.
//
// Binary map file (little-endian):
//   "PGNM" | version u16 | w_g u32 | h_g u32 | n_cls u32
//   then box[w_g*h_g*4], dis[w_g*h_g], cls[w_g*h_g*n_cls], sol[w_g*h_g],
//   eol[w_g*h_g], rd[w_g*h_g*4] as float32, row-major over the grid with the
//   channel dimension innermost.
// The image extent is implied by the grid stride (kGridStride pixels/cell).
//
// JSON mirror: {"w_g", "h_g", "n_cls", "box", "dis", "cls", "sol", "eol", "rd"}
// with tensors as nested arrays indexed [row][column] or [row][column][channel].

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "folio/error.hpp"
#include "folio/geometry.hpp"
#include "json.hpp"

namespace folio {

/// Reading-order direction. The numeric values index the rd channel.
enum class Direction : std::uint8_t { Up = 0, Right = 1, Down = 2, Left = 3 };

inline constexpr std::array<Direction, 4> kDirections{Direction::Up, Direction::Right,
                                                      Direction::Down, Direction::Left};

struct GridDelta {
  int di;
  int dj;
  friend bool operator==(const GridDelta&, const GridDelta&) = default;
};

inline constexpr std::array<GridDelta, 4> kDirectionDeltas{
    GridDelta{0, -1}, GridDelta{1, 0}, GridDelta{0, 1}, GridDelta{-1, 0}};

inline constexpr GridDelta delta(Direction d) { return kDirectionDeltas[std::size_t(d)]; }

inline constexpr Direction opposite(Direction d) {
  return Direction((std::uint8_t(d) + 2) % 4);
}

inline GridIndex step(GridIndex g, Direction d) {
  const GridDelta v = delta(d);
  return {g.i + v.di, g.j + v.dj};
}

/// Direction whose delta equals (di, dj); nullopt unless it is a unit 4-move.
inline std::optional<Direction> direction_of(int di, int dj) {
  for (Direction d : kDirections)
    if (delta(d) == GridDelta{di, dj}) return d;
  return std::nullopt;
}

inline const char* direction_name(Direction d) {
  switch (d) {
    case Direction::Up: return "up";
    case Direction::Right: return "right";
    case Direction::Down: return "down";
    case Direction::Left: return "left";
  }
  return "?";
}

/// Floor used in place of exact 0/1 probabilities by synthetic predictors.
inline constexpr double kProbFloor = 1e-6;

struct PredictionMaps {
  GridShape shape;
  int n_cls = 1;
  std::vector<float> box;  // cells x 4  (x_o, y_o, w_o, h_o)
  std::vector<float> dis;  // cells
  std::vector<float> cls;  // cells x n_cls
  std::vector<float> sol;  // cells
  std::vector<float> eol;  // cells
  std::vector<float> rd;   // cells x 4, indexed by Direction

  /// Zero-filled maps of the right extents.
  static PredictionMaps zeros(const GridShape& shape, int n_cls) {
    shape.validate();
    if (n_cls < 1) throw DomainError("PredictionMaps: n_cls must be >= 1");
    PredictionMaps m;
    m.shape = shape;
    m.n_cls = n_cls;
    const std::size_t c = shape.cells();
    m.box.assign(c * 4, 0.f);
    m.dis.assign(c, 0.f);
    m.cls.assign(c * std::size_t(n_cls), 0.f);
    m.sol.assign(c, 0.f);
    m.eol.assign(c, 0.f);
    m.rd.assign(c * 4, 0.f);
    return m;
  }

  std::size_t at(GridIndex g) const {
    check_grid(g, shape, "PredictionMaps");
    return flat_index(g, shape);
  }

  RelBox box_at(GridIndex g) const {
    const std::size_t k = at(g) * 4;
    return {box[k], box[k + 1], box[k + 2], box[k + 3]};
  }
  void set_box(GridIndex g, const RelBox& r) {
    const std::size_t k = at(g) * 4;
    box[k] = float(r.x_o);
    box[k + 1] = float(r.y_o);
    box[k + 2] = float(r.w_o);
    box[k + 3] = float(r.h_o);
  }

  float dis_at(GridIndex g) const { return dis[at(g)]; }
  float sol_at(GridIndex g) const { return sol[at(g)]; }
  float eol_at(GridIndex g) const { return eol[at(g)]; }

  std::span<const float> cls_row(GridIndex g) const {
    return {cls.data() + at(g) * std::size_t(n_cls), std::size_t(n_cls)};
  }
  std::span<float> cls_row(GridIndex g) {
    return {cls.data() + at(g) * std::size_t(n_cls), std::size_t(n_cls)};
  }
  std::span<const float> rd_row(GridIndex g) const { return {rd.data() + at(g) * 4, 4}; }
  std::span<float> rd_row(GridIndex g) { return {rd.data() + at(g) * 4, 4}; }

  /// 1-based class id with the highest probability (lowest id on ties).
  int argmax_cls(GridIndex g) const {
    auto row = cls_row(g);
    return int(std::max_element(row.begin(), row.end()) - row.begin()) + 1;
  }
  float max_cls(GridIndex g) const {
    auto row = cls_row(g);
    return *std::max_element(row.begin(), row.end());
  }
  /// Direction with the highest probability (Up < Right < Down < Left on ties).
  Direction argmax_rd(GridIndex g) const {
    auto row = rd_row(g);
    return Direction(std::max_element(row.begin(), row.end()) - row.begin());
  }

  /// Throws FormatError naming the first offending tensor.
  void validate(double row_tol = 1e-6) const {
    shape.validate();
    const std::size_t c = shape.cells();
    auto need = [](const std::vector<float>& v, std::size_t n, const char* name) {
      if (v.size() != n)
        throw FormatError(std::string(name) + ": expected " + std::to_string(n) +
                          " values, found " + std::to_string(v.size()));
    };
    need(box, c * 4, "box");
    need(dis, c, "dis");
    need(cls, c * std::size_t(n_cls), "cls");
    need(sol, c, "sol");
    need(eol, c, "eol");
    need(rd, c * 4, "rd");
    auto finite = [](const std::vector<float>& v, const char* name) {
      for (float x : v)
        if (!std::isfinite(x)) throw FormatError(std::string(name) + ": non-finite value");
    };
    finite(box, "box");
    auto probs = [&](const std::vector<float>& v, const char* name) {
      finite(v, name);
      for (float x : v)
        if (x < 0.f || x > 1.f)
          throw FormatError(std::string(name) + ": probability outside [0,1]");
    };
    probs(dis, "dis");
    probs(cls, "cls");
    probs(sol, "sol");
    probs(eol, "eol");
    probs(rd, "rd");
    auto rows = [&](const std::vector<float>& v, std::size_t width, const char* name) {
      for (std::size_t r = 0; r < c; ++r) {
        double sum = 0;
        for (std::size_t k = 0; k < width; ++k) sum += v[r * width + k];
        if (std::abs(sum - 1.0) > row_tol)
          throw FormatError(std::string(name) + ": row " + std::to_string(r) +
                            " does not sum to 1");
      }
    };
    rows(cls, std::size_t(n_cls), "cls");
    rows(rd, 4, "rd");
  }

  friend bool operator==(const PredictionMaps&, const PredictionMaps&) = default;
};

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char(v >> 8));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(char((v >> (8 * k)) & 0xff));
}
inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= std::uint32_t(std::uint8_t(bytes_[pos_ + k])) << (8 * k);
    pos_ += 4;
    return v;
  }
  std::uint16_t u16(const char* field) {
    need(2, field);
    const auto v = std::uint16_t(std::uint8_t(bytes_[pos_]) |
                                 (std::uint16_t(std::uint8_t(bytes_[pos_ + 1])) << 8));
    pos_ += 2;
    return v;
  }
  std::string_view raw(std::size_t n, const char* field) {
    need(n, field);
    auto v = bytes_.substr(pos_, n);
    pos_ += n;
    return v;
  }
  void floats(std::vector<float>& out, std::size_t n, const char* field) {
    if (n > (bytes_.size() - pos_) / 4)
      throw FormatError(std::string("truncated map file: tensor '") + field + "' needs " +
                        std::to_string(n * 4) + " bytes, " +
                        std::to_string(bytes_.size() - pos_) + " left");
    out.resize(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = std::bit_cast<float>(u32(field));
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* field) const {
    if (bytes_.size() - pos_ < n)
      throw FormatError(std::string("truncated map file at field '") + field + "'");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

}  // namespace detail

inline constexpr std::uint16_t kMapFormatVersion = 1;

inline std::string encode_maps(const PredictionMaps& m) {
  std::string out = "PGNM";
  detail::put_u16(out, kMapFormatVersion);
  detail::put_u32(out, std::uint32_t(m.shape.w_g));
  detail::put_u32(out, std::uint32_t(m.shape.h_g));
  detail::put_u32(out, std::uint32_t(m.n_cls));
  for (const auto* t : {&m.box, &m.dis, &m.cls, &m.sol, &m.eol, &m.rd})
    for (float f : *t) detail::put_f32(out, f);
  return out;
}

inline PredictionMaps decode_maps_binary(std::string_view bytes) {
  detail::ByteReader r(bytes);
  if (r.raw(4, "magic") != "PGNM") throw FormatError("bad magic: not a PGNM map file");
  const std::uint16_t version = r.u16("version");
  if (version != kMapFormatVersion)
    throw FormatError("unsupported map file version " + std::to_string(version));
  const std::uint32_t w_g = r.u32("w_g");
  const std::uint32_t h_g = r.u32("h_g");
  const std::uint32_t n_cls = r.u32("n_cls");
  if (w_g == 0 || h_g == 0 || w_g > 1u << 15 || h_g > 1u << 15)
    throw FormatError("header: grid dimensions out of range");
  if (n_cls == 0 || n_cls > 1u << 20) throw FormatError("header: n_cls out of range");
  PredictionMaps m;
  m.shape = GridShape::from_grid(int(w_g), int(h_g));
  m.n_cls = int(n_cls);
  const std::size_t c = m.shape.cells();
  r.floats(m.box, c * 4, "box");
  r.floats(m.dis, c, "dis");
  r.floats(m.cls, c * n_cls, "cls");
  r.floats(m.sol, c, "sol");
  r.floats(m.eol, c, "eol");
  r.floats(m.rd, c * 4, "rd");
  if (r.remaining() != 0)
    throw FormatError("trailing " + std::to_string(r.remaining()) +
                      " bytes after tensor 'rd': header dimensions or n_cls disagree with "
                      "the payload");
  m.validate();
  return m;
}

inline nlohmann::json maps_to_json(const PredictionMaps& m) {
  using nlohmann::json;
  const auto& s = m.shape;
  auto grid = [&](const std::vector<float>& v, std::size_t width) {
    json rows = json::array();
    for (int j = 1; j <= s.h_g; ++j) {
      json row = json::array();
      for (int i = 1; i <= s.w_g; ++i) {
        const std::size_t k = flat_index({i, j}, s) * width;
        if (width == 1) {
          row.push_back(v[k]);
        } else {
          row.push_back(json(std::vector<float>(v.begin() + long(k), v.begin() + long(k + width))));
        }
      }
      rows.push_back(std::move(row));
    }
    return rows;
  };
  return json{{"w_g", s.w_g}, {"h_g", s.h_g}, {"n_cls", m.n_cls},
              {"box", grid(m.box, 4)}, {"dis", grid(m.dis, 1)},
              {"cls", grid(m.cls, std::size_t(m.n_cls))}, {"sol", grid(m.sol, 1)},
              {"eol", grid(m.eol, 1)}, {"rd", grid(m.rd, 4)}};
}

inline PredictionMaps maps_from_json(const nlohmann::json& j) {
  auto dim = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number_integer() || j[key].get<long long>() < 1)
      throw FormatError(std::string("header: missing or invalid '") + key + "'");
    return int(j[key].get<long long>());
  };
  const int w_g = dim("w_g");
  const int h_g = dim("h_g");
  const int n_cls = dim("n_cls");
  PredictionMaps m = PredictionMaps::zeros(GridShape::from_grid(w_g, h_g), n_cls);
  auto fill = [&](const char* key, std::vector<float>& out, std::size_t width) {
    if (!j.contains(key) || !j[key].is_array() || j[key].size() != std::size_t(h_g))
      throw FormatError(std::string(key) + ": expected " + std::to_string(h_g) + " rows");
    for (int row = 0; row < h_g; ++row) {
      const auto& r = j[key][std::size_t(row)];
      if (!r.is_array() || r.size() != std::size_t(w_g))
        throw FormatError(std::string(key) + ": row " + std::to_string(row) + " must have " +
                          std::to_string(w_g) + " cells");
      for (int col = 0; col < w_g; ++col) {
        const auto& cell = r[std::size_t(col)];
        const std::size_t base = flat_index({col + 1, row + 1}, m.shape) * width;
        auto number = [&](const nlohmann::json& v) {
          if (v.is_null()) throw FormatError(std::string(key) + ": NaN/null value");
          if (!v.is_number()) throw FormatError(std::string(key) + ": non-numeric value");
          return v.get<float>();
        };
        if (width == 1) {
          out[base] = number(cell);
        } else {
          if (!cell.is_array() || cell.size() != width)
            throw FormatError(std::string(key) + ": cell extent " +
                              std::to_string(cell.is_array() ? cell.size() : 0) +
                              " disagrees with expected " + std::to_string(width));
          for (std::size_t k = 0; k < width; ++k) out[base + k] = number(cell[k]);
        }
      }
    }
  };
  fill("box", m.box, 4);
  fill("dis", m.dis, 1);
  fill("cls", m.cls, std::size_t(n_cls));
  fill("sol", m.sol, 1);
  fill("eol", m.eol, 1);
  fill("rd", m.rd, 4);
  m.validate();
  return m;
}

/// Parses either format, sniffing the leading bytes.
inline PredictionMaps decode_maps(std::string_view bytes) {
  const auto first = bytes.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && bytes[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("map JSON: ") + e.what());
    }
    return maps_from_json(j);
  }
  return decode_maps_binary(bytes);
}

inline void save_maps(const PredictionMaps& m, const std::filesystem::path& path) {
  detail::write_file(path, encode_maps(m));
}

inline PredictionMaps load_maps(const std::filesystem::path& path) {
  return decode_maps(detail::read_file(path));
}

}  // namespace folio
