// diaruq/include/diaruq/config.h
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

#ifndef DIARUQ_CONFIG_H_
#define DIARUQ_CONFIG_H_

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "diaruq/reseg.h"
#include "diaruq/signal.h"
#include "diaruq/synth.h"

namespace diaruq {

enum class ResegMethod { kThreshold, kModal, kSmooth, kKalman };

struct SynthRun {
  SynthSpec spec;
  std::vector<ModelSkew> models;  // at least one
};

/// A TOML run description. Every table and key is optional; unknown keys are
/// errors. Relative paths resolve against the config file's directory.
///
///   [frame]      acoustic_window_s, acoustic_step_s, mod_window_s, mod_step_s,
///                cepstral_window_s, cepstral_step_s
///   [input]      samples = [...], truth, sad, gt_sad, duration_s,
///                audio, features = "modspec" | "mfcc", delta_order
///   [synth]      frames, speakers, passes, seed, p_start, p_continue,
///                p_initial, p_flip, attenuation, jitter, spread
///   [[synth.model]]  id, region = "none" | "odd" | "even", p_flip, spread
///   [resegment]  method = "threshold" | "modal" | "smooth" | "kalman",
///                lambda, gap, backward
///   [smoother]   f0, f1, f2, q0, q1, h = [...], x_init, p_init
///   [score]      collar_s, permute
///   [output]     dir, file_id, entropy_bins, entropy_svg, calibration_bins
struct RunConfig {
  std::filesystem::path base_dir;
  FrameSpec frame_spec;

  std::vector<std::filesystem::path> samples;
  std::optional<std::filesystem::path> truth;
  std::optional<std::filesystem::path> sad;
  bool gt_sad = false;
  std::optional<double> duration_s;
  std::optional<std::filesystem::path> audio;
  std::string features = "modspec";
  int delta_order = 0;

  std::optional<SynthRun> synth;

  ResegMethod method = ResegMethod::kKalman;
  std::size_t gap = kDefaultGap;
  bool backward = true;
  SmootherConfig smoother;
  bool smoother_h_set = false;

  double collar_s = 0.0;
  bool permute = false;

  std::filesystem::path output_dir = "out";
  std::string file_id = "recording";
  std::size_t entropy_bins = 40;
  bool entropy_svg = false;
  std::size_t calibration_bins = 20;
};

/// Parse errors and schema violations raise ParseError with line and column.
RunConfig parse_run_config(std::string_view toml, const std::filesystem::path& base_dir = ".");
RunConfig load_run_config(const std::filesystem::path& path);

/// A [smoother] table (plus lambda) as TOML that parse_run_config accepts.
void write_smoother_toml(std::ostream& out, const SmootherConfig& cfg);

}  // namespace diaruq

#endif  // DIARUQ_CONFIG_H_
