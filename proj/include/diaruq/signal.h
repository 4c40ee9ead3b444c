// diaruq/include/diaruq/signal.h
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

#ifndef DIARUQ_SIGNAL_H_
#define DIARUQ_SIGNAL_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace diaruq {

/// 16-bit PCM mono audio.
struct AudioSignal {
  std::vector<std::int16_t> samples;
  int sample_rate_hz = 16000;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

/// Analysis window/step pairs, all in seconds.
///
/// Acoustic frames (W_a, F_a) feed the modulation spectrum; modulation frames
/// (W_m, F_m) are the scoring unit; cepstral frames (W_a2, F_a2) feed MFCCs
/// and are grouped F_m / F_a2 at a time.
struct FrameSpec {
  double acoustic_window_s = 0.003;
  double acoustic_step_s = 0.001;
  double mod_window_s = 1.0;
  double mod_step_s = 0.25;
  double cepstral_window_s = 0.030;
  double cepstral_step_s = 0.010;

  /// Throws InvalidArgument on non-positive values, step > window, or a
  /// modulation step that is not an integer multiple of the cepstral step.
  void validate() const;

  /// Cepstral frames per modulation frame (F_m / F_a2).
  std::size_t cepstral_group_size() const;

  bool operator==(const FrameSpec&) const = default;
};

/// Number of modulation frames for a signal of the given duration.
std::size_t num_mod_frames(double duration_s, const FrameSpec& spec);

/// Converts seconds to a whole number of samples; throws if `seconds * fs`
/// is not within 1e-6 of an integer.
std::size_t exact_samples(double seconds, int sample_rate_hz);

/// A padded copy of a signal and the zero counts that were added.
struct PaddedSignal {
  AudioSignal signal;
  std::size_t prepended = 0;
  std::size_t appended = 0;
};

/// Zero padding that centres modulation frame l on [l*F_m, (l+1)*F_m).
/// Fractional zero counts are rounded to the nearest sample.
PaddedSignal pad_for_modspec(const AudioSignal& sig, const FrameSpec& spec);

/// Zero padding that centres cepstral frame j on [j*F_a2, (j+1)*F_a2).
PaddedSignal pad_for_cepstral(const AudioSignal& sig, const FrameSpec& spec);

/// Gaussian noise scaled so that 10*log10(P_signal / P_noise) == snr_db.
/// Works in floating point; used by add_awgn.
std::vector<double> awgn_noise(std::span<const double> signal, double snr_db,
                               std::uint64_t seed);

/// Adds white Gaussian noise at the target SNR in the 16-bit domain with
/// saturation. An infinite SNR returns the input unchanged. Power is measured
/// over the whole signal.
AudioSignal add_awgn(const AudioSignal& sig, double snr_db, std::uint64_t seed);

/// Adds an independent uniform integer in [-4, 4] to every sample.
AudioSignal add_dither(const AudioSignal& sig, std::uint64_t seed);

/// SNR of `noisy - clean` relative to `clean`, in dB.
double measured_snr_db(const AudioSignal& clean, const AudioSignal& noisy);

/// RIFF/WAVE, 16-bit PCM, mono. Anything else is a FormatError.
AudioSignal read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioSignal& sig);

}  // namespace diaruq

#endif  // DIARUQ_SIGNAL_H_
