// diaruq/src/signal.cc
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

#include "diaruq/signal.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <string>

#include "diaruq/common.h"

namespace diaruq {

namespace {

std::int16_t saturate(double v) {
  return static_cast<std::int16_t>(std::clamp(
      v, static_cast<double>(std::numeric_limits<std::int16_t>::min()),
      static_cast<double>(std::numeric_limits<std::int16_t>::max())));
}

bool near_integer(double x, double tol = 1e-6) {
  return std::abs(x - std::round(x)) <= tol * std::max(1.0, std::abs(x));
}

std::size_t round_count(double x) {
  // Formula counts may land a hair below zero through cancellation.
  return static_cast<std::size_t>(std::llround(std::max(0.0, x)));
}

PaddedSignal pad(const AudioSignal& sig, std::size_t front, std::size_t back) {
  PaddedSignal out;
  out.signal.sample_rate_hz = sig.sample_rate_hz;
  out.signal.samples.reserve(front + sig.samples.size() + back);
  out.signal.samples.assign(front, 0);
  out.signal.samples.insert(out.signal.samples.end(), sig.samples.begin(),
                            sig.samples.end());
  out.signal.samples.resize(out.signal.samples.size() + back, 0);
  out.prepended = front;
  out.appended = back;
  return out;
}

double mean_power(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return x.empty() ? 0.0 : acc / x.size();
}

std::vector<double> to_double(const AudioSignal& sig) {
  return {sig.samples.begin(), sig.samples.end()};
}

}  // namespace

void FrameSpec::validate() const {
  const std::array<std::pair<double, double>, 3> pairs{{
      {acoustic_window_s, acoustic_step_s},
      {mod_window_s, mod_step_s},
      {cepstral_window_s, cepstral_step_s},
  }};
  for (auto [window, step] : pairs) {
    if (!(window > 0.0) || !(step > 0.0) || !std::isfinite(window) ||
        !std::isfinite(step))
      throw InvalidArgument("frame spec: windows and steps must be positive");
    if (step > window * (1.0 + 1e-12))
      throw InvalidArgument("frame spec: step exceeds window");
  }
  if (!near_integer(mod_step_s / cepstral_step_s))
    throw InvalidArgument(
        "frame spec: modulation step must be an integer multiple of the "
        "cepstral step");
}

std::size_t FrameSpec::cepstral_group_size() const {
  validate();
  return static_cast<std::size_t>(std::llround(mod_step_s / cepstral_step_s));
}

std::size_t num_mod_frames(double duration_s, const FrameSpec& spec) {
  if (!(duration_s > 0.0) || !std::isfinite(duration_s))
    throw InvalidArgument("num_mod_frames: duration must be positive");
  if (!(spec.mod_step_s > 0.0))
    throw InvalidArgument("num_mod_frames: modulation step must be positive");
  double q = duration_s / spec.mod_step_s;
  // 0.75 / 0.25 must not become 3.0000000000000004 -> 4.
  if (near_integer(q, 1e-9)) return static_cast<std::size_t>(std::llround(q));
  return static_cast<std::size_t>(std::ceil(q));
}

std::size_t exact_samples(double seconds, int sample_rate_hz) {
  double n = seconds * sample_rate_hz;
  if (!near_integer(n))
    throw InvalidArgument("duration " + std::to_string(seconds) +
                          " s is not a whole number of samples at " +
                          std::to_string(sample_rate_hz) + " Hz");
  return static_cast<std::size_t>(std::llround(n));
}

PaddedSignal pad_for_modspec(const AudioSignal& sig, const FrameSpec& spec) {
  spec.validate();
  if (sig.sample_rate_hz <= 0)
    throw InvalidArgument("pad_for_modspec: sample rate must be positive");
  const double fs = sig.sample_rate_hz;
  const double t = sig.duration_s();
  const double overhang = (spec.mod_window_s - spec.mod_step_s) +
                          (spec.acoustic_window_s - spec.acoustic_step_s);
  const double tail =
      t > 0.0 ? num_mod_frames(t, spec) * spec.mod_step_s - t : 0.0;
  return pad(sig, round_count(overhang * fs / 2.0),
             round_count((tail + overhang) * fs / 2.0));
}

PaddedSignal pad_for_cepstral(const AudioSignal& sig, const FrameSpec& spec) {
  spec.validate();
  if (sig.sample_rate_hz <= 0)
    throw InvalidArgument("pad_for_cepstral: sample rate must be positive");
  const double fs = sig.sample_rate_hz;
  const double t = sig.duration_s();
  const double overhang = spec.cepstral_window_s - spec.cepstral_step_s;
  const double tail =
      t > 0.0 ? num_mod_frames(t, spec) * spec.mod_step_s - t : 0.0;
  return pad(sig, round_count(overhang * fs / 2.0),
             round_count((tail + overhang) * fs / 2.0));
}

std::vector<double> awgn_noise(std::span<const double> signal, double snr_db,
                               std::uint64_t seed) {
  const double p_signal = mean_power(signal);
  if (!(p_signal > 0.0))
    throw InvalidArgument("add_awgn: signal has zero power, SNR undefined");
  std::vector<double> noise(signal.size());
  if (std::isinf(snr_db) && snr_db > 0) return noise;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : noise) v = normal(rng);
  const double p_noise = mean_power(noise);
  if (!(p_noise > 0.0)) return noise;
  const double scale =
      std::sqrt(p_signal / (p_noise * std::pow(10.0, snr_db / 10.0)));
  for (double& v : noise) v *= scale;
  return noise;
}

AudioSignal add_awgn(const AudioSignal& sig, double snr_db,
                     std::uint64_t seed) {
  const std::vector<double> clean = to_double(sig);
  if (std::isinf(snr_db) && snr_db > 0) {
    if (!(mean_power(clean) > 0.0))
      throw InvalidArgument("add_awgn: signal has zero power, SNR undefined");
    return sig;
  }
  const std::vector<double> noise = awgn_noise(clean, snr_db, seed);
  AudioSignal out = sig;
  for (std::size_t i = 0; i < out.samples.size(); ++i)
    out.samples[i] = saturate(clean[i] + std::round(noise[i]));
  return out;
}

AudioSignal add_dither(const AudioSignal& sig, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> offset(-4, 4);
  AudioSignal out = sig;
  for (auto& s : out.samples)
    s = saturate(static_cast<double>(s) + offset(rng));
  return out;
}

double measured_snr_db(const AudioSignal& clean, const AudioSignal& noisy) {
  if (clean.samples.size() != noisy.samples.size())
    throw InvalidArgument("measured_snr_db: length mismatch");
  double ps = 0.0, pn = 0.0;
  for (std::size_t i = 0; i < clean.samples.size(); ++i) {
    double c = clean.samples[i];
    double d = static_cast<double>(noisy.samples[i]) - c;
    ps += c * c;
    pn += d * d;
  }
  if (pn == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(ps / pn);
}

// --- WAV -------------------------------------------------------------------

namespace {

std::uint32_t le32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (std::uint32_t(p[3]) << 24);
}
std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

AudioSignal read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";
  if (bytes.size() < 12 || std::string(bytes.begin(), bytes.begin() + 4) != "RIFF" ||
      std::string(bytes.begin() + 8, bytes.begin() + 12) != "WAVE")
    throw FormatError(where + "not a RIFF/WAVE file");

  bool have_fmt = false;
  AudioSignal sig;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id(bytes.begin() + pos, bytes.begin() + pos + 4);
    const std::size_t size = le32(&bytes[pos + 4]);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw FormatError(where + "truncated chunk " + id);
    if (id == "fmt ") {
      if (size < 16) throw FormatError(where + "short fmt chunk");
      std::uint16_t format = le16(&bytes[body]);
      const std::uint16_t channels = le16(&bytes[body + 2]);
      sig.sample_rate_hz = static_cast<int>(le32(&bytes[body + 4]));
      const std::uint16_t bits = le16(&bytes[body + 14]);
      if (format == 0xFFFE && size >= 26) format = le16(&bytes[body + 24]);
      if (format != 1) throw FormatError(where + "only PCM is supported");
      if (channels != 1)
        throw FormatError(where + "expected mono, got " + std::to_string(channels) +
                          " channels");
      if (bits != 16) throw FormatError(where + "expected 16-bit samples");
      if (sig.sample_rate_hz <= 0) throw FormatError(where + "bad sample rate");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError(where + "data chunk before fmt chunk");
      sig.samples.resize(size / 2);
      for (std::size_t i = 0; i < sig.samples.size(); ++i)
        sig.samples[i] = static_cast<std::int16_t>(le16(&bytes[body + 2 * i]));
      return sig;
    }
    pos = body + size + (size & 1);
  }
  throw FormatError(where + "no data chunk");
}

void write_wav(const std::filesystem::path& path, const AudioSignal& sig) {
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(sig.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(sig.sample_rate_hz));
  put32(out, static_cast<std::uint32_t>(sig.sample_rate_hz) * 2);
  put16(out, 2);
  put16(out, 16);
  out += "data";
  put32(out, data_bytes);
  for (std::int16_t s : sig.samples) put16(out, static_cast<std::uint16_t>(s));
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace diaruq
