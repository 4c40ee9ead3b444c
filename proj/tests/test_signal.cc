// diaruq/tests/test_signal.cc
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

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "diaruq/common.h"
#include "diaruq/signal.h"
#include "support.h"

using namespace diaruq;

namespace {

AudioSignal silence(double seconds, int fs = 16000) {
  AudioSignal s;
  s.sample_rate_hz = fs;
  s.samples.assign(static_cast<std::size_t>(std::llround(seconds * fs)), 0);
  return s;
}

}  // namespace

TEST_CASE("num_mod_frames rounds up") {
  FrameSpec spec;
  CHECK(num_mod_frames(1043.360, spec) == 4174);
  CHECK(num_mod_frames(1.0, spec) == 4);
  CHECK(num_mod_frames(1.01, spec) == 5);
  CHECK_THROWS_AS(num_mod_frames(0.0, spec), InvalidArgument);
  CHECK_THROWS_AS(num_mod_frames(-1.0, spec), InvalidArgument);
}

TEST_CASE("frame spec validation") {
  FrameSpec spec;
  CHECK_NOTHROW(spec.validate());
  CHECK(spec.cepstral_group_size() == 25);
  FrameSpec bad = spec;
  bad.mod_step_s = 2.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = spec;
  bad.cepstral_step_s = 0.011;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = spec;
  bad.acoustic_window_s = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("modspec padding") {
  FrameSpec spec;
  const auto one = silence(1.0);
  const PaddedSignal p = pad_for_modspec(one, spec);
  CHECK(p.prepended == 6016);
  // (4*0.25 - 1) + 0.75 + 0.002 seconds, halved.
  CHECK(p.appended == 6016);
  CHECK(p.signal.samples.size() == one.samples.size() + p.prepended + p.appended);

  SUBCASE("no overhang, exact multiple") {
    FrameSpec flat = spec;
    flat.mod_window_s = flat.mod_step_s;
    flat.acoustic_window_s = flat.acoustic_step_s;
    const PaddedSignal q = pad_for_modspec(one, flat);
    CHECK(q.prepended == 0);
    CHECK(q.appended == 0);
  }

  SUBCASE("trailing fill") {
    const AudioSignal s = silence(1.01);
    const PaddedSignal q = pad_for_modspec(s, spec);
    // (5*0.25 - 1.01) = 0.24 s of fill plus the overhang.
    CHECK(q.appended == std::llround((0.24 + 0.752) * 16000 / 2));
    CHECK(q.prepended == 6016);
  }

  SUBCASE("original samples sit untouched in the middle") {
    AudioSignal s = testing::tone(0.3, 440.0);
    const PaddedSignal q = pad_for_modspec(s, spec);
    for (std::size_t i = 0; i < s.samples.size(); ++i)
      REQUIRE(q.signal.samples[q.prepended + i] == s.samples[i]);
    for (std::size_t i = 0; i < q.prepended; ++i) REQUIRE(q.signal.samples[i] == 0);
  }
}

TEST_CASE("cepstral padding") {
  FrameSpec spec;
  const PaddedSignal p = pad_for_cepstral(silence(1.0), spec);
  CHECK(p.prepended == 160);
  CHECK(p.appended == 160);
  FrameSpec flat = spec;
  flat.cepstral_window_s = flat.cepstral_step_s;
  CHECK(pad_for_cepstral(silence(1.0), flat).prepended == 0);
}

TEST_CASE("awgn at 30 dB lands within a tenth of a decibel") {
  const AudioSignal clean = testing::white_noise(2.0, 3000.0, 11);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const AudioSignal noisy = add_awgn(clean, 30.0, seed);
    const double snr = measured_snr_db(clean, noisy);
    CHECK(snr >= 29.9);
    CHECK(snr <= 30.1);
  }
  const AudioSignal speechy = testing::am_tone(1.0, 800.0, 4.0);
  CHECK(measured_snr_db(speechy, add_awgn(speechy, 30.0, 3)) == doctest::Approx(30.0).epsilon(0.0034));
}

TEST_CASE("awgn is deterministic and disabled at infinite SNR") {
  const AudioSignal clean = testing::tone(0.5, 300.0);
  CHECK(add_awgn(clean, 20.0, 5).samples == add_awgn(clean, 20.0, 5).samples);
  CHECK(add_awgn(clean, 20.0, 5).samples != add_awgn(clean, 20.0, 6).samples);
  CHECK(add_awgn(clean, std::numeric_limits<double>::infinity(), 5).samples == clean.samples);
  CHECK_THROWS_AS(add_awgn(silence(0.5), 30.0, 1), InvalidArgument);
}

TEST_CASE("awgn at 0 dB matches the signal power") {
  std::vector<double> sine(32000);
  for (std::size_t i = 0; i < sine.size(); ++i)
    sine[i] = std::sqrt(2.0) * std::sin(2.0 * std::numbers::pi * 440.0 * i / 16000.0);
  const std::vector<double> noise = awgn_noise(sine, 0.0, 9);
  double ps = 0, pn = 0;
  for (std::size_t i = 0; i < sine.size(); ++i) {
    ps += sine[i] * sine[i];
    pn += noise[i] * noise[i];
  }
  CHECK(pn / ps == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("dither") {
  const AudioSignal zero = silence(0.25);
  const AudioSignal d = add_dither(zero, 4);
  bool moved = false;
  for (auto v : d.samples) {
    REQUIRE(v >= -4);
    REQUIRE(v <= 4);
    moved |= v != 0;
  }
  CHECK(moved);
  CHECK(add_dither(zero, 4).samples == d.samples);

  AudioSignal loud = zero;
  for (std::size_t i = 0; i < loud.samples.size(); ++i)
    loud.samples[i] = i % 2 ? std::int16_t{32767} : std::int16_t{-32768};
  const AudioSignal e = add_dither(loud, 4);
  for (std::size_t i = 0; i < e.samples.size(); ++i) {
    if (i % 2)
      REQUIRE(e.samples[i] >= 32763);
    else
      REQUIRE(e.samples[i] <= -32764);
  }
}

TEST_CASE("wav round trip and format checks") {
  const auto dir = testing::scratch_dir("wav");
  const AudioSignal s = testing::tone(0.1, 1000.0);
  write_wav(dir / "a.wav", s);
  const AudioSignal r = read_wav(dir / "a.wav");
  CHECK(r.sample_rate_hz == 16000);
  CHECK(r.samples == s.samples);

  testing::write_text(dir / "junk.wav", "definitely not RIFF");
  CHECK_THROWS_AS(read_wav(dir / "junk.wav"), FormatError);
  CHECK_THROWS_AS(read_wav(dir / "missing.wav"), FormatError);

  // Stereo header: patch the channel count of a valid file.
  std::string bytes;
  {
    std::ifstream in(dir / "a.wav", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  bytes[22] = 2;
  {
    std::ofstream out(dir / "stereo.wav", std::ios::binary);
    out << bytes;
  }
  CHECK_THROWS_AS(read_wav(dir / "stereo.wav"), FormatError);
}

TEST_CASE("exact_samples refuses fractional counts") {
  CHECK(exact_samples(0.003, 16000) == 48);
  CHECK(exact_samples(0.25, 16000) == 4000);
  CHECK_THROWS_AS(exact_samples(0.00001, 16000), InvalidArgument);
}
