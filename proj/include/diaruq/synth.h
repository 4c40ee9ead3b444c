// diaruq/include/diaruq/synth.h
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

#ifndef DIARUQ_SYNTH_H_
#define DIARUQ_SYNTH_H_

#include <cstdint>
#include <string>
#include <vector>

#include "diaruq/labels.h"
#include "diaruq/uq.h"

namespace diaruq {

/// Two-state Markov chain per speaker.
struct Activity {
  double p_start = 0.1;     // silent -> speaking
  double p_continue = 0.9;  // speaking -> speaking
  double p_initial = 0.5;   // speaking at frame 0
};

/// With probability p_flip a frame's base probability becomes the wrong label
/// pulled toward 0.5 by `attenuation`; jitter is added Gaussian noise.
struct AleatoricNoise {
  double p_flip = 0.0;
  double attenuation = 0.0;
  double jitter = 0.0;
};

struct SynthSpec {
  std::size_t frames = 100;
  std::size_t speakers = 4;
  std::size_t passes = 200;
  Activity activity;
  AleatoricNoise noise;
  double spread = 0.0;  // per-sample dispersion around the base probability
  std::uint64_t seed = 0;
  FrameSpec frame_spec;

  void validate() const;
};

/// Systematic errors confined to odd or even frames, to build complementary
/// ensembles.
struct ModelSkew {
  enum class Region { kNone, kOdd, kEven };
  Region region = Region::kNone;
  double p_flip = 0.0;  // replaces the spec's flip rate inside the region
  double spread = 0.0;  // replaces the spec's spread inside the region
  std::string model_id = "model";
  std::uint64_t stream = 0;  // distinguishes the noise of otherwise equal models
};

std::vector<std::string> synth_speaker_ids(std::size_t speakers);

LabelMatrix gen_truth(const SynthSpec& spec);

SampleTensor gen_samples(const LabelMatrix& truth, const SynthSpec& spec,
                         const ModelSkew& skew = {});

/// Contiguous utterances of each speaker's active frames.
std::vector<Utterance> labels_to_utterances(const LabelMatrix& labels);

}  // namespace diaruq

#endif  // DIARUQ_SYNTH_H_
