// diaruq/include/diaruq/cepstral.h
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

#ifndef DIARUQ_CEPSTRAL_H_
#define DIARUQ_CEPSTRAL_H_

#include <optional>

#include "diaruq/common.h"
#include "diaruq/signal.h"

namespace diaruq {

struct MfccOptions {
  std::size_t num_mel_bins = 32;
  std::size_t num_ceps = 19;  // c0 included
  double preemphasis = 0.97;
  double log_floor = 1e-10;
  double low_freq_hz = 0.0;
  double high_freq_hz = 0.0;  // <= 0 means Nyquist
};

/// Grouped cepstra [l, F_m/F_a2, D] aligned with modulation frames.
struct CepstralTensor {
  NdArray<double> values;
  FrameSpec frame_spec;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// MFCCs of an already padded signal, one row per cepstral frame. With
/// `num_frames` the signal is zero-extended to yield exactly that many rows.
NdArray<double> extract_mfcc(const AudioSignal& padded, const FrameSpec& spec,
                             const MfccOptions& opts = {},
                             std::optional<std::size_t> num_frames = std::nullopt);

/// Appends regression deltas (window +-2, edge replication). Order 2 appends
/// deltas and delta-deltas. Needs at least 5 frames.
NdArray<double> add_deltas(const NdArray<double>& ceps, int order);

/// Modulation frame l owns cepstral rows [g*l, g*l + g) with g = F_m/F_a2.
CepstralTensor group_frames(const NdArray<double>& ceps, const FrameSpec& spec,
                            std::size_t num_frames);

/// Pad, extract, optionally add deltas, and group a raw signal.
CepstralTensor extract_cepstral(const AudioSignal& sig, const FrameSpec& spec,
                                int delta_order = 0, const MfccOptions& opts = {});

}  // namespace diaruq

#endif  // DIARUQ_CEPSTRAL_H_
