// diaruq/tests/support.h
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

#ifndef DIARUQ_TESTS_SUPPORT_H_
#define DIARUQ_TESTS_SUPPORT_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

#include "diaruq/signal.h"

namespace testing {

// Fresh, empty directory under DIARUQ_TEST_TMP (or the system temp dir).
inline std::filesystem::path scratch_dir(const std::string& name) {
  const char* root = std::getenv("DIARUQ_TEST_TMP");
  std::filesystem::path dir =
      (root ? std::filesystem::path(root) : std::filesystem::temp_directory_path() / "diaruq") /
      name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

inline diaruq::AudioSignal am_tone(double seconds, double carrier_hz, double mod_hz,
                                   double depth = 0.8, double amplitude = 12000.0,
                                   int fs = 16000) {
  diaruq::AudioSignal sig;
  sig.sample_rate_hz = fs;
  const auto n = static_cast<std::size_t>(std::llround(seconds * fs));
  sig.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double env = 1.0 + depth * std::sin(2.0 * std::numbers::pi * mod_hz * t);
    sig.samples[i] = static_cast<std::int16_t>(
        std::lround(amplitude / (1.0 + depth) * env * std::sin(2.0 * std::numbers::pi * carrier_hz * t)));
  }
  return sig;
}

inline diaruq::AudioSignal tone(double seconds, double hz, double amplitude = 10000.0,
                                int fs = 16000) {
  return am_tone(seconds, hz, 0.0, 0.0, amplitude, fs);
}

inline diaruq::AudioSignal white_noise(double seconds, double stddev, std::uint64_t seed,
                                       int fs = 16000) {
  diaruq::AudioSignal sig;
  sig.sample_rate_hz = fs;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, stddev);
  sig.samples.resize(static_cast<std::size_t>(std::llround(seconds * fs)));
  for (auto& s : sig.samples)
    s = static_cast<std::int16_t>(std::clamp(std::lround(nd(rng)), -32768L, 32767L));
  return sig;
}

}  // namespace testing

#endif  // DIARUQ_TESTS_SUPPORT_H_
