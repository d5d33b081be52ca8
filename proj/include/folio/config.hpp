#pragma once

// JSON configuration for a full simulated training run. Unknown keys are
// rejected so typos surface as errors instead of silently taking defaults.
//
//   {
//     "seed": 7,
//     "dataset":   { "pages": 20, <synth keys> },   or  "dataset_file": "truth.jsonl"
//     "synthetic": { <synth keys> },                 pages mixed in by the train stage
//     "decode":    { "dis_threshold": 0.5, "nms_iou": 0.3, "sol_eol_threshold": 0.9,
//                    "dis_weight": 0.8, "max_steps": 0 },
//     "th_ar": 0.3, "th_iou": 0.5, "epsilon": 10,
//     "deterministic": true,
//     "stages": [ { "stage": "initialize" | "pretrain" | "train", "passes": 1,
//                   "halve_every": 5, "p_real": 0.7,
//                   "noise": { "jitter": 0.1, "size": 0, "label_swap": 0.05,
//                              "drop": 0.02, "spurious": 0.01, "dir_flip": 0 } } ]
//   }
//
// Synth keys: n_lines, chars_min, chars_max, n_cls, layout, amplitude, period,
// char_size_min, char_size_max, pitch_min, pitch_max, line_gap, margin, w_g, h_g.

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "folio/decoder.hpp"
#include "folio/error.hpp"
#include "folio/oracle.hpp"
#include "folio/simloop.hpp"
#include "folio/synth.hpp"
#include "json.hpp"

namespace folio {

struct SimConfig {
  std::uint64_t seed = 0;
  std::size_t n_pages = 20;
  SynthConfig dataset;
  std::optional<std::string> dataset_file;
  SynthConfig synthetic;
  DecodeConfig decode;
  double th_ar = kThAr;
  double th_iou = kThIou;
  double epsilon = kEpsilon;
  bool deterministic = true;
  std::vector<StageConfig> stages;
};

namespace detail {

inline void only_keys(const nlohmann::json& j, std::initializer_list<const char*> keys,
                      const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + ": '" + key + "' has the wrong type");
  }
}

inline void read_synth(const nlohmann::json& j, SynthConfig& c, const std::string& where,
                       std::size_t* pages) {
  if (pages) {
    only_keys(j, {"pages", "n_lines", "chars_min", "chars_max", "n_cls", "layout", "amplitude",
                  "period", "char_size_min", "char_size_max", "pitch_min", "pitch_max",
                  "line_gap", "margin", "w_g", "h_g"},
              where);
    read_key(j, "pages", *pages, where);
  } else {
    only_keys(j, {"n_lines", "chars_min", "chars_max", "n_cls", "layout", "amplitude", "period",
                  "char_size_min", "char_size_max", "pitch_min", "pitch_max", "line_gap",
                  "margin", "w_g", "h_g"},
              where);
  }
  read_key(j, "n_lines", c.n_lines, where);
  read_key(j, "chars_min", c.chars_min, where);
  read_key(j, "chars_max", c.chars_max, where);
  read_key(j, "n_cls", c.n_cls, where);
  if (j.contains("layout")) {
    std::string name;
    read_key(j, "layout", name, where);
    try {
      c.layout.kind = parse_layout(name);
    } catch (const DomainError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  read_key(j, "amplitude", c.layout.amplitude, where);
  read_key(j, "period", c.layout.period, where);
  read_key(j, "char_size_min", c.char_size_min, where);
  read_key(j, "char_size_max", c.char_size_max, where);
  read_key(j, "pitch_min", c.pitch_min, where);
  read_key(j, "pitch_max", c.pitch_max, where);
  read_key(j, "line_gap", c.line_gap, where);
  read_key(j, "margin", c.margin, where);
  read_key(j, "w_g", c.w_g, where);
  read_key(j, "h_g", c.h_g, where);
  try {
    c.validate();
  } catch (const GenerationError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline OracleNoise read_noise(const nlohmann::json& j, const std::string& where) {
  only_keys(j, {"jitter", "size", "label_swap", "drop", "spurious", "dir_flip"}, where);
  OracleNoise n;
  read_key(j, "jitter", n.jitter_sigma, where);
  read_key(j, "size", n.size_sigma, where);
  read_key(j, "label_swap", n.label_swap_p, where);
  read_key(j, "drop", n.drop_p, where);
  read_key(j, "spurious", n.spurious_p, where);
  read_key(j, "dir_flip", n.dir_flip_p, where);
  n.validate();
  return n;
}

inline void read_decode(const nlohmann::json& j, DecodeConfig& d, const std::string& where) {
  only_keys(j, {"dis_threshold", "nms_iou", "sol_eol_threshold", "dis_weight", "max_steps"}, where);
  read_key(j, "dis_threshold", d.dis_threshold, where);
  read_key(j, "nms_iou", d.nms_iou, where);
  read_key(j, "sol_eol_threshold", d.sol_eol_threshold, where);
  read_key(j, "dis_weight", d.dis_weight, where);
  read_key(j, "max_steps", d.max_steps, where);
  if (!(d.dis_weight >= 0 && d.dis_weight <= 1)) throw ConfigError(where + ": dis_weight must lie in [0,1]");
  if (d.max_steps < 0) throw ConfigError(where + ": max_steps must be >= 0");
}

}  // namespace detail

inline SimConfig parse_sim_config(const nlohmann::json& j) {
  using namespace detail;
  only_keys(j, {"seed", "dataset", "dataset_file", "synthetic", "decode", "th_ar", "th_iou",
                "epsilon", "deterministic", "stages"},
            "config");
  SimConfig c;
  read_key(j, "seed", c.seed, "config");
  if (j.contains("dataset") && j.contains("dataset_file"))
    throw ConfigError("config: give either 'dataset' or 'dataset_file', not both");
  if (j.contains("dataset")) read_synth(j["dataset"], c.dataset, "config.dataset", &c.n_pages);
  if (j.contains("dataset_file")) {
    std::string f;
    read_key(j, "dataset_file", f, "config");
    c.dataset_file = f;
  }
  if (j.contains("synthetic")) read_synth(j["synthetic"], c.synthetic, "config.synthetic", nullptr);
  if (j.contains("decode")) read_decode(j["decode"], c.decode, "config.decode");
  read_key(j, "th_ar", c.th_ar, "config");
  read_key(j, "th_iou", c.th_iou, "config");
  read_key(j, "epsilon", c.epsilon, "config");
  read_key(j, "deterministic", c.deterministic, "config");
  if (!j.contains("stages") || !j["stages"].is_array() || j["stages"].empty())
    throw ConfigError("config: 'stages' must be a non-empty array");
  for (std::size_t k = 0; k < j["stages"].size(); ++k) {
    const auto& sj = j["stages"][k];
    const std::string where = "config.stages[" + std::to_string(k) + "]";
    only_keys(sj, {"stage", "passes", "halve_every", "p_real", "noise"}, where);
    StageConfig s;
    std::string name = "train";
    read_key(sj, "stage", name, where);
    s.stage = parse_stage(name);
    read_key(sj, "passes", s.n_passes, where);
    read_key(sj, "halve_every", s.halve_every, where);
    read_key(sj, "p_real", s.p_real, where);
    s.p_synth = 1.0 - s.p_real;
    if (sj.contains("noise")) s.noise = read_noise(sj["noise"], where + ".noise");
    s.noise.seed = derive_seed(c.seed, {0x6e6f6973ULL, k});
    s.seed = derive_seed(c.seed, {0x73746167ULL, k});
    s.synth = c.synthetic;
    s.decode = c.decode;
    s.th_ar = c.th_ar;
    s.th_iou = c.th_iou;
    s.epsilon = c.epsilon;
    s.deterministic = c.deterministic;
    if (!(s.p_real >= 0 && s.p_real <= 1)) throw ConfigError(where + ": p_real must lie in [0,1]");
    s.validate();
    c.stages.push_back(s);
  }
  c.dataset.seed = derive_seed(c.seed, {0x64617461ULL});
  return c;
}

}  // namespace folio
