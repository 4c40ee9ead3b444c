// diaruq/src/config.cc
//
// Copyright (c) 2026 The diaruq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "diaruq/config.h"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <toml.hpp>

namespace diaruq {

namespace {

[[noreturn]] void fail_at(const toml::source_region& where, const std::string& msg) {
  const auto line = static_cast<std::size_t>(where.begin.line);
  const auto col = static_cast<std::size_t>(where.begin.column);
  throw ParseError("config: line " + std::to_string(line) + ", column " + std::to_string(col) +
                       ": " + msg,
                   line, col);
}

// Typed access to one TOML table with unknown-key rejection.
class Section {
 public:
  Section(const toml::table& table, std::string name) : table_(table), name_(std::move(name)) {}

  void allow(std::initializer_list<std::string_view> keys) const {
    for (auto&& [key, node] : table_)
      if (std::find(keys.begin(), keys.end(), key.str()) == keys.end())
        fail_at(key.source(), "unknown key '" + std::string(key.str()) + "' in [" + name_ + "]");
  }

  const toml::node* find(std::string_view key) const { return table_.get(key); }

  std::optional<double> number(std::string_view key) const {
    const toml::node* n = find(key);
    if (!n) return std::nullopt;
    if (!n->is_number()) fail_at(n->source(), where(key) + " must be a number");
    return n->value<double>();
  }

  std::optional<std::int64_t> integer(std::string_view key, std::int64_t lo = 0) const {
    const toml::node* n = find(key);
    if (!n) return std::nullopt;
    if (!n->is_integer()) fail_at(n->source(), where(key) + " must be an integer");
    const auto v = *n->value<std::int64_t>();
    if (v < lo) fail_at(n->source(), where(key) + " must be >= " + std::to_string(lo));
    return v;
  }

  std::optional<bool> boolean(std::string_view key) const {
    const toml::node* n = find(key);
    if (!n) return std::nullopt;
    if (!n->is_boolean()) fail_at(n->source(), where(key) + " must be true or false");
    return n->value<bool>();
  }

  std::optional<std::string> string(std::string_view key) const {
    const toml::node* n = find(key);
    if (!n) return std::nullopt;
    if (!n->is_string()) fail_at(n->source(), where(key) + " must be a string");
    return n->value<std::string>();
  }

  std::optional<std::vector<double>> numbers(std::string_view key) const {
    const toml::node* n = find(key);
    if (!n) return std::nullopt;
    const toml::array* a = n->as_array();
    if (!a) fail_at(n->source(), where(key) + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : *a) {
      if (!e.is_number()) fail_at(e.source(), where(key) + " must contain only numbers");
      out.push_back(*e.value<double>());
    }
    return out;
  }

  std::optional<std::vector<std::string>> strings(std::string_view key) const {
    const toml::node* n = find(key);
    if (!n) return std::nullopt;
    const toml::array* a = n->as_array();
    if (!a) fail_at(n->source(), where(key) + " must be an array of strings");
    std::vector<std::string> out;
    for (const auto& e : *a) {
      if (!e.is_string()) fail_at(e.source(), where(key) + " must contain only strings");
      out.push_back(*e.value<std::string>());
    }
    return out;
  }

  const toml::source_region& source(std::string_view key) const {
    const toml::node* n = find(key);
    return n ? n->source() : table_.source();
  }

 private:
  std::string where(std::string_view key) const {
    return "'" + std::string(key) + "' in [" + name_ + "]";
  }

  const toml::table& table_;
  std::string name_;
};

template <typename T>
void set(T& dst, const std::optional<T>& v) {
  if (v) dst = *v;
}

const toml::table* subtable(const toml::table& root, std::string_view name) {
  const toml::node* n = root.get(name);
  if (!n) return nullptr;
  if (!n->is_table()) fail_at(n->source(), "'" + std::string(name) + "' must be a table");
  return n->as_table();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

void read_synth(const toml::table& table, RunConfig& cfg) {
  Section s(table, "synth");
  s.allow({"frames", "speakers", "passes", "seed", "p_start", "p_continue", "p_initial",
           "p_flip", "attenuation", "jitter", "spread", "model"});
  SynthRun run;
  SynthSpec& spec = run.spec;
  if (auto v = s.integer("frames", 1)) spec.frames = static_cast<std::size_t>(*v);
  if (auto v = s.integer("speakers", 1)) spec.speakers = static_cast<std::size_t>(*v);
  if (auto v = s.integer("passes", 1)) spec.passes = static_cast<std::size_t>(*v);
  if (auto v = s.integer("seed", 0)) spec.seed = static_cast<std::uint64_t>(*v);
  set(spec.activity.p_start, s.number("p_start"));
  set(spec.activity.p_continue, s.number("p_continue"));
  set(spec.activity.p_initial, s.number("p_initial"));
  set(spec.noise.p_flip, s.number("p_flip"));
  set(spec.noise.attenuation, s.number("attenuation"));
  set(spec.noise.jitter, s.number("jitter"));
  set(spec.spread, s.number("spread"));
  spec.frame_spec = cfg.frame_spec;
  try {
    spec.validate();
  } catch (const InvalidArgument& e) {
    fail_at(table.source(), e.what());
  }

  if (const toml::node* models = table.get("model")) {
    const toml::array* arr = models->as_array();
    if (!arr || !arr->is_array_of_tables())
      fail_at(models->source(), "'model' in [synth] must be an array of tables ([[synth.model]])");
    std::uint64_t stream = 0;
    for (const auto& node : *arr) {
      Section m(*node.as_table(), "synth.model");
      m.allow({"id", "region", "p_flip", "spread"});
      ModelSkew skew;
      skew.stream = stream++;
      skew.model_id = m.string("id").value_or("model" + std::to_string(skew.stream));
      skew.p_flip = spec.noise.p_flip;
      skew.spread = spec.spread;
      const std::string region = m.string("region").value_or("none");
      if (region == "odd")
        skew.region = ModelSkew::Region::kOdd;
      else if (region == "even")
        skew.region = ModelSkew::Region::kEven;
      else if (region != "none")
        fail_at(m.source("region"), "region must be \"none\", \"odd\" or \"even\"");
      set(skew.p_flip, m.number("p_flip"));
      set(skew.spread, m.number("spread"));
      if (!(skew.p_flip >= 0.0 && skew.p_flip <= 1.0) || !(skew.spread >= 0.0))
        fail_at(node.source(), "model p_flip must lie in [0, 1] and spread be >= 0");
      run.models.push_back(std::move(skew));
    }
  }
  if (run.models.empty()) run.models.push_back({});
  cfg.synth = std::move(run);
}

}  // namespace

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    fail_at(e.source(), std::string(e.description()));
  }

  RunConfig cfg;
  cfg.base_dir = base_dir;
  Section top(root, "top level");
  top.allow({"frame", "input", "synth", "resegment", "smoother", "score", "output"});

  if (const auto* t = subtable(root, "frame")) {
    Section s(*t, "frame");
    s.allow({"acoustic_window_s", "acoustic_step_s", "mod_window_s", "mod_step_s",
             "cepstral_window_s", "cepstral_step_s"});
    FrameSpec& f = cfg.frame_spec;
    set(f.acoustic_window_s, s.number("acoustic_window_s"));
    set(f.acoustic_step_s, s.number("acoustic_step_s"));
    set(f.mod_window_s, s.number("mod_window_s"));
    set(f.mod_step_s, s.number("mod_step_s"));
    set(f.cepstral_window_s, s.number("cepstral_window_s"));
    set(f.cepstral_step_s, s.number("cepstral_step_s"));
    try {
      f.validate();
    } catch (const InvalidArgument& e) {
      fail_at(t->source(), e.what());
    }
  }

  if (const auto* t = subtable(root, "input")) {
    Section s(*t, "input");
    s.allow({"samples", "truth", "sad", "gt_sad", "duration_s", "audio", "features",
             "delta_order"});
    if (auto v = s.strings("samples"))
      for (const auto& p : *v) cfg.samples.push_back(resolve(base_dir, p));
    if (auto v = s.string("truth")) cfg.truth = resolve(base_dir, *v);
    if (auto v = s.string("sad")) cfg.sad = resolve(base_dir, *v);
    set(cfg.gt_sad, s.boolean("gt_sad"));
    if (auto v = s.number("duration_s")) {
      if (!(*v > 0.0)) fail_at(s.source("duration_s"), "duration_s must be positive");
      cfg.duration_s = *v;
    }
    if (auto v = s.string("audio")) cfg.audio = resolve(base_dir, *v);
    set(cfg.features, s.string("features"));
    if (cfg.features != "modspec" && cfg.features != "mfcc")
      fail_at(s.source("features"), "features must be \"modspec\" or \"mfcc\"");
    if (auto v = s.integer("delta_order")) {
      if (*v > 2) fail_at(s.source("delta_order"), "delta_order must be 0, 1 or 2");
      cfg.delta_order = static_cast<int>(*v);
    }
  }

  if (const auto* t = subtable(root, "synth")) read_synth(*t, cfg);

  if (const auto* t = subtable(root, "resegment")) {
    Section s(*t, "resegment");
    s.allow({"method", "lambda", "gap", "backward"});
    if (auto m = s.string("method")) {
      if (*m == "threshold")
        cfg.method = ResegMethod::kThreshold;
      else if (*m == "modal")
        cfg.method = ResegMethod::kModal;
      else if (*m == "smooth")
        cfg.method = ResegMethod::kSmooth;
      else if (*m == "kalman")
        cfg.method = ResegMethod::kKalman;
      else
        fail_at(s.source("method"),
                "method must be \"threshold\", \"modal\", \"smooth\" or \"kalman\"");
    }
    set(cfg.smoother.lambda, s.number("lambda"));
    if (!(cfg.smoother.lambda >= 0.0 && cfg.smoother.lambda <= 1.0))
      fail_at(s.source("lambda"), "lambda must lie in [0, 1]");
    if (auto v = s.integer("gap")) {
      if (*v > 10) fail_at(s.source("gap"), "gap must lie in [0, 10]");
      cfg.gap = static_cast<std::size_t>(*v);
    }
    set(cfg.backward, s.boolean("backward"));
  }

  if (const auto* t = subtable(root, "smoother")) {
    Section s(*t, "smoother");
    s.allow({"f0", "f1", "f2", "q0", "q1", "h", "x_init", "p_init", "lambda"});
    SmootherConfig& k = cfg.smoother;
    set(k.f0, s.number("f0"));
    set(k.f1, s.number("f1"));
    set(k.f2, s.number("f2"));
    set(k.q0, s.number("q0"));
    set(k.q1, s.number("q1"));
    set(k.x_init, s.number("x_init"));
    set(k.p_init, s.number("p_init"));
    set(k.lambda, s.number("lambda"));
    if (auto h = s.numbers("h")) {
      if (h->empty()) fail_at(s.source("h"), "h must not be empty");
      k.h = *h;
      cfg.smoother_h_set = true;
    }
    try {
      k.validate(k.h.size());
    } catch (const InvalidArgument& e) {
      fail_at(t->source(), e.what());
    }
  }

  if (const auto* t = subtable(root, "score")) {
    Section s(*t, "score");
    s.allow({"collar_s", "permute"});
    set(cfg.collar_s, s.number("collar_s"));
    if (!(cfg.collar_s >= 0.0)) fail_at(s.source("collar_s"), "collar_s must be >= 0");
    set(cfg.permute, s.boolean("permute"));
  }

  if (const auto* t = subtable(root, "output")) {
    Section s(*t, "output");
    s.allow({"dir", "file_id", "entropy_bins", "entropy_svg", "calibration_bins"});
    if (auto v = s.string("dir")) cfg.output_dir = *v;
    set(cfg.file_id, s.string("file_id"));
    if (auto v = s.integer("entropy_bins", 1)) cfg.entropy_bins = static_cast<std::size_t>(*v);
    set(cfg.entropy_svg, s.boolean("entropy_svg"));
    if (auto v = s.integer("calibration_bins", 1))
      cfg.calibration_bins = static_cast<std::size_t>(*v);
  }
  cfg.output_dir = resolve(base_dir, cfg.output_dir.string());
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return parse_run_config(buf.str(), base);
}

void write_smoother_toml(std::ostream& out, const SmootherConfig& cfg) {
  out << std::setprecision(17) << "[smoother]\n"
      << "f0 = " << cfg.f0 << "\nf1 = " << cfg.f1 << "\nf2 = " << cfg.f2 << "\nq0 = " << cfg.q0
      << "\nq1 = " << cfg.q1 << "\nh = [";
  for (std::size_t i = 0; i < cfg.h.size(); ++i) out << (i ? ", " : "") << cfg.h[i];
  out << "]\nx_init = " << cfg.x_init << "\np_init = " << cfg.p_init
      << "\nlambda = " << cfg.lambda << '\n';
}

}  // namespace diaruq
