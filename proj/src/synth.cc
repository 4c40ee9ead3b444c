// diaruq/src/synth.cc
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

#include "diaruq/synth.h"

#include <algorithm>
#include <random>

namespace diaruq {

namespace {

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

std::mt19937_64 engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

bool in_region(ModelSkew::Region region, std::size_t l) {
  switch (region) {
    case ModelSkew::Region::kOdd: return l % 2 == 1;
    case ModelSkew::Region::kEven: return l % 2 == 0;
    default: return false;
  }
}

}  // namespace

void SynthSpec::validate() const {
  if (frames == 0 || speakers == 0 || passes == 0)
    throw InvalidArgument("synth: frames, speakers and passes must be >= 1");
  for (double p : {activity.p_start, activity.p_continue, activity.p_initial, noise.p_flip,
                   noise.attenuation})
    if (!is_probability(p)) throw InvalidArgument("synth: probabilities must lie in [0, 1]");
  if (!(noise.jitter >= 0.0) || !(spread >= 0.0))
    throw InvalidArgument("synth: jitter and spread must be >= 0");
  frame_spec.validate();
}

std::vector<std::string> synth_speaker_ids(std::size_t speakers) {
  std::vector<std::string> ids;
  for (std::size_t s = 0; s < speakers; ++s)
    ids.push_back(s < 26 ? std::string(1, static_cast<char>('A' + s))
                         : "S" + std::to_string(s));
  return ids;
}

LabelMatrix gen_truth(const SynthSpec& spec) {
  spec.validate();
  auto rng = engine(spec.seed, 0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LabelMatrix out;
  out.speaker_order = synth_speaker_ids(spec.speakers);
  out.frame_spec = spec.frame_spec;
  out.values = BinaryMatrix({spec.frames, spec.speakers});
  for (std::size_t s = 0; s < spec.speakers; ++s) {
    bool on = u(rng) < spec.activity.p_initial;
    for (std::size_t l = 0; l < spec.frames; ++l) {
      if (l > 0) on = u(rng) < (on ? spec.activity.p_continue : spec.activity.p_start);
      out.values(l, s) = on ? 1 : 0;
    }
  }
  return out;
}

SampleTensor gen_samples(const LabelMatrix& truth, const SynthSpec& spec,
                         const ModelSkew& skew) {
  spec.validate();
  if (!is_probability(skew.p_flip) || !(skew.spread >= 0.0))
    throw InvalidArgument("synth: bad model skew");
  const std::size_t L = truth.frames(), S = truth.speakers(), N = spec.passes;
  auto rng = engine(spec.seed, 1 + skew.stream);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SampleTensor out;
  out.probs = NdArray<double>({N, L, S});
  out.model_id = skew.model_id;
  out.speaker_order = truth.speaker_order;
  out.frame_spec = truth.frame_spec;
  for (std::size_t l = 0; l < L; ++l) {
    const bool skewed = in_region(skew.region, l);
    const double p_flip = skewed ? skew.p_flip : spec.noise.p_flip;
    const double spread = skewed ? skew.spread : spec.spread;
    for (std::size_t s = 0; s < S; ++s) {
      const double y = truth.values(l, s) != 0 ? 1.0 : 0.0;
      double base = y;
      if (p_flip > 0.0 && u(rng) < p_flip)
        base = 0.5 + ((1.0 - y) - 0.5) * (1.0 - spec.noise.attenuation);
      if (spec.noise.jitter > 0.0) base += spec.noise.jitter * gauss(rng);
      base = std::clamp(base, 0.0, 1.0);
      for (std::size_t n = 0; n < N; ++n) {
        const double v = spread > 0.0 ? base + spread * gauss(rng) : base;
        out.probs(n, l, s) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return out;
}

std::vector<Utterance> labels_to_utterances(const LabelMatrix& labels) {
  std::vector<Utterance> out;
  const double step = labels.frame_spec.mod_step_s;
  const std::size_t L = labels.frames();
  for (std::size_t s = 0; s < labels.speakers(); ++s)
    for (std::size_t l = 0; l < L;) {
      if (labels.values(l, s) == 0) {
        ++l;
        continue;
      }
      std::size_t end = l;
      while (end < L && labels.values(end, s) != 0) ++end;
      out.push_back({labels.speaker_order[s], static_cast<double>(l) * step,
                     static_cast<double>(end) * step});
      l = end;
    }
  std::stable_sort(out.begin(), out.end(), [](const Utterance& a, const Utterance& b) {
    return a.start_s < b.start_s;
  });
  return out;
}

}  // namespace diaruq
