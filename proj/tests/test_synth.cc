// diaruq/tests/test_synth.cc
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

#include <doctest.h>

#include "diaruq/reseg.h"
#include "diaruq/score.h"
#include "diaruq/synth.h"

using namespace diaruq;

TEST_CASE("truth chains") {
  SynthSpec spec;
  spec.frames = 50;
  spec.activity = {0.0, 0.9, 0.0};
  const LabelMatrix silent = gen_truth(spec);
  for (auto v : silent.values.flat()) CHECK(v == 0);

  spec.activity = {0.3, 1.0, 1.0};
  const LabelMatrix busy = gen_truth(spec);
  for (auto v : busy.values.flat()) CHECK(v == 1);

  spec.activity = {};
  spec.seed = 42;
  CHECK(gen_truth(spec).values == gen_truth(spec).values);
  SynthSpec other = spec;
  other.seed = 43;
  CHECK(gen_truth(other).values != gen_truth(spec).values);
  CHECK(gen_truth(spec).speaker_order == std::vector<std::string>{"A", "B", "C", "D"});
}

TEST_CASE("noise-free samples equal the truth") {
  SynthSpec spec;
  spec.passes = 7;
  const LabelMatrix y = gen_truth(spec);
  const SampleTensor t = gen_samples(y, spec);
  for (std::size_t n = 0; n < 7; ++n)
    for (std::size_t l = 0; l < y.frames(); ++l)
      for (std::size_t s = 0; s < y.speakers(); ++s)
        REQUIRE(t.probs(n, l, s) == static_cast<double>(y.values(l, s)));
}

TEST_CASE("spread around a certain frame keeps the mean high") {
  SynthSpec spec;
  spec.frames = 500;
  spec.speakers = 2;
  spec.passes = 200;
  spec.spread = 0.1;
  spec.activity = {1.0, 1.0, 1.0};
  const LabelMatrix y = gen_truth(spec);
  const Aggregate a = aggregate(gen_samples(y, spec), {.lambda = 0.5, .fit_trunc = false});
  for (const auto& c : a.cells) REQUIRE(c.mean_prob >= 0.8);
}

TEST_CASE("determinism and model streams") {
  SynthSpec spec;
  spec.noise = {0.1, 0.5, 0.05};
  spec.spread = 0.05;
  spec.passes = 20;
  const LabelMatrix y = gen_truth(spec);
  ModelSkew a, b;
  b.stream = 1;
  CHECK(gen_samples(y, spec, a).probs == gen_samples(y, spec, a).probs);
  CHECK(gen_samples(y, spec, a).probs != gen_samples(y, spec, b).probs);
  const SampleTensor streamed = gen_samples(y, spec, b);
  for (double v : streamed.probs.flat()) {
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 1.0);
  }
  SynthSpec bad = spec;
  bad.noise.p_flip = 1.5;
  CHECK_THROWS_AS(gen_truth(bad), InvalidArgument);
}

TEST_CASE("complementary skews fuse to a lower error") {
  SynthSpec spec;
  spec.frames = 300;
  spec.passes = 60;
  spec.seed = 5;
  spec.noise.attenuation = 0.3;
  spec.spread = 0.03;
  const LabelMatrix y = gen_truth(spec);
  ModelSkew odd{ModelSkew::Region::kOdd, 0.45, 0.3, "odd", 0};
  ModelSkew even{ModelSkew::Region::kEven, 0.45, 0.3, "even", 1};
  const Aggregate models[] = {aggregate(gen_samples(y, spec, odd)),
                              aggregate(gen_samples(y, spec, even))};
  SmootherConfig cfg;
  cfg.h = {1.0, 1.0};
  const double fused = frame_der(y, fuse_models(models, cfg).preds).der_pct;
  for (const auto& m : models) CHECK(frame_der(y, m.modal_preds()).der_pct > fused);
}

TEST_CASE("round trip through labels and scoring") {
  SynthSpec spec;
  spec.frames = 120;
  spec.passes = 5;
  spec.seed = 9;
  const LabelMatrix y = gen_truth(spec);
  const auto utts = labels_to_utterances(y);
  const LabelMatrix back = utterances_to_labels(
      utts, spec.frame_spec, static_cast<double>(spec.frames) * spec.frame_spec.mod_step_s,
      y.speaker_order);
  CHECK(back.values == y.values);

  const Aggregate a = aggregate(gen_samples(y, spec));
  const BinaryMatrix preds = threshold_states(a.mean_probs(), 0.5);
  CHECK(frame_der(y, preds).der_pct == 0.0);
  const auto segs = frames_to_segments(preds, spec.frame_spec, y.speaker_order);
  CHECK(time_der(segments_from_utterances(utts), segs).der_pct == 0.0);
}
