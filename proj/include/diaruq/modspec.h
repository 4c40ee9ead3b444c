// diaruq/include/diaruq/modspec.h
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

#ifndef DIARUQ_MODSPEC_H_
#define DIARUQ_MODSPEC_H_

#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "diaruq/common.h"
#include "diaruq/signal.h"

namespace diaruq {

enum ModChannel : std::size_t { kEnv = 0, kTfs = 1 };

/// Stacked ENV/TFS modulation features, indexed [frame, band, mod_bin, channel].
struct ModFeatureTensor {
  NdArray<double> values;
  FrameSpec frame_spec;
  std::vector<double> band_centers_hz;
  std::vector<double> mod_freqs_hz;

  std::size_t frames() const { return values.empty() ? 0 : values.dim(0); }
  std::size_t bands() const { return values.dim(1); }
  std::size_t mod_bins() const { return values.dim(2); }
};

/// Amplitude envelope and instantaneous-frequency deviation of one band.
struct AnalyticBand {
  std::vector<double> envelope;
  std::vector<double> inst_freq_dev_hz;
};

struct ModspecOptions {
  /// Subtract each window's mean before the second transform. Without it the
  /// non-negative envelope always peaks at 0 Hz modulation.
  bool remove_dc = true;
  bool normalize = true;
  /// Standardise using statistics from this tensor alone.
  bool standardize = true;
};

/// Periodic Hann window.
std::vector<double> hann_window(std::size_t n);

/// First STFT of an already padded signal: Hann frames of W_a stepped by F_a,
/// one-sided spectrum with W_a*fs/2+1 bins. Returns [frames, bins]. When
/// `num_frames` is given the signal is zero-extended as needed to yield
/// exactly that many frames.
NdArray<std::complex<double>> stft_acoustic(
    const AudioSignal& padded, const FrameSpec& spec,
    std::optional<std::size_t> num_frames = std::nullopt);

/// Envelope and TFS trajectory of band `band` over rows [first, first+count)
/// of an acoustic spectrogram. The one-sided STFT bin is the analytic band
/// signal; it is shifted to baseband with an absolute-time phase reference
/// so the unwrapped phase slope is the deviation from the band centre.
AnalyticBand band_envelope_tfs(const NdArray<std::complex<double>>& spectrogram,
                               std::size_t first, std::size_t count,
                               std::size_t band, const FrameSpec& spec,
                               int sample_rate_hz);

/// Full feature pipeline on a raw (unpadded) signal.
ModFeatureTensor extract_modspec(const AudioSignal& sig, const FrameSpec& spec,
                                 const ModspecOptions& opts = {});

/// Divides each [l, :, :, c] slice by its Frobenius norm; zero slices stay zero.
ModFeatureTensor normalize_frames(ModFeatureTensor t);

struct StandardizeResult {
  std::vector<ModFeatureTensor> tensors;
  NdArray<double> mean;    // [K, H, 2]
  NdArray<double> stddev;  // [K, H, 2], floored at 1e-8
};

/// Per-(k, h, c) standardisation with statistics pooled over the frames of
/// tensors[i] for i in `stats_from`, applied to every tensor.
StandardizeResult standardize(std::vector<ModFeatureTensor> tensors,
                              std::span<const std::size_t> stats_from);

}  // namespace diaruq

#endif  // DIARUQ_MODSPEC_H_
