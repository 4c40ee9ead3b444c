// diaruq/src/cepstral.cc
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

#include "diaruq/cepstral.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "diaruq/modspec.h"

namespace diaruq {

namespace {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Triangular filters, equally spaced on the HTK mel scale, evaluated at FFT
// bin centres. Returns [num_bins, fft_bins].
NdArray<double> mel_filterbank(const MfccOptions& opts, std::size_t fft_size, int fs) {
  const double nyquist = fs / 2.0;
  const double high = opts.high_freq_hz > 0.0 ? opts.high_freq_hz : nyquist;
  if (!(opts.low_freq_hz >= 0.0 && opts.low_freq_hz < high && high <= nyquist))
    throw InvalidArgument("mel filterbank: bad frequency range");
  const double mel_lo = hz_to_mel(opts.low_freq_hz), mel_hi = hz_to_mel(high);
  const double delta = (mel_hi - mel_lo) / static_cast<double>(opts.num_mel_bins + 1);
  const std::size_t fft_bins = fft_size / 2 + 1;
  NdArray<double> fb({opts.num_mel_bins, fft_bins});
  for (std::size_t m = 0; m < opts.num_mel_bins; ++m) {
    const double left = mel_lo + m * delta, centre = left + delta, right = centre + delta;
    for (std::size_t i = 0; i < fft_bins; ++i) {
      const double mel = hz_to_mel(static_cast<double>(i) * fs / fft_size);
      if (mel > left && mel < right)
        fb(m, i) = mel <= centre ? (mel - left) / delta : (right - mel) / delta;
    }
  }
  return fb;
}

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

NdArray<double> extract_mfcc(const AudioSignal& padded, const FrameSpec& spec,
                             const MfccOptions& opts,
                             std::optional<std::size_t> num_frames) {
  spec.validate();
  if (padded.sample_rate_hz <= 0) throw InvalidArgument("sample rate must be positive");
  if (opts.num_ceps == 0 || opts.num_ceps > opts.num_mel_bins)
    throw InvalidArgument("extract_mfcc: need 0 < num_ceps <= num_mel_bins");
  const int fs = padded.sample_rate_hz;
  const std::size_t window = exact_samples(spec.cepstral_window_s, fs);
  const std::size_t hop = exact_samples(spec.cepstral_step_s, fs);
  std::size_t frames;
  if (num_frames) {
    frames = *num_frames;
  } else {
    if (padded.samples.size() < window)
      throw InvalidArgument("extract_mfcc: signal shorter than one window");
    frames = (padded.samples.size() - window) / hop + 1;
  }

  const std::size_t fft_size = next_pow2(window);
  const NdArray<double> fb = mel_filterbank(opts, fft_size, fs);
  const std::vector<double> win = hann_window(window);
  const std::size_t mels = opts.num_mel_bins, fft_bins = fft_size / 2 + 1;

  // Orthonormal DCT-II rows.
  NdArray<double> dct({opts.num_ceps, mels});
  for (std::size_t i = 0; i < opts.num_ceps; ++i) {
    const double scale = std::sqrt((i == 0 ? 1.0 : 2.0) / static_cast<double>(mels));
    for (std::size_t m = 0; m < mels; ++m)
      dct(i, m) = scale * std::cos(std::numbers::pi * i * (m + 0.5) / mels);
  }

  NdArray<double> out({frames, opts.num_ceps});
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(fft_size), logmel(mels);
  std::vector<std::complex<double>> spectrum;
  for (std::size_t j = 0; j < frames; ++j) {
    std::fill(frame.begin(), frame.end(), 0.0);
    const std::size_t start = j * hop;
    for (std::size_t n = 0; n < window; ++n) {
      const std::size_t i = start + n;
      frame[n] = i < padded.samples.size() ? padded.samples[i] : 0.0;
    }
    for (std::size_t n = window; n-- > 1;) frame[n] -= opts.preemphasis * frame[n - 1];
    frame[0] -= opts.preemphasis * frame[0];
    for (std::size_t n = 0; n < window; ++n) frame[n] *= win[n];
    fft.fwd(spectrum, frame);
    for (std::size_t m = 0; m < mels; ++m) {
      double e = 0.0;
      for (std::size_t i = 0; i < fft_bins; ++i)
        if (fb(m, i) != 0.0) e += fb(m, i) * std::norm(spectrum[i]);
      logmel[m] = std::log(std::max(e, opts.log_floor));
    }
    for (std::size_t i = 0; i < opts.num_ceps; ++i) {
      double c = 0.0;
      for (std::size_t m = 0; m < mels; ++m) c += dct(i, m) * logmel[m];
      out(j, i) = c;
    }
  }
  return out;
}

NdArray<double> add_deltas(const NdArray<double>& ceps, int order) {
  if (order != 1 && order != 2) throw InvalidArgument("add_deltas: order must be 1 or 2");
  if (ceps.rank() != 2 || ceps.dim(0) < 5)
    throw InvalidArgument("add_deltas: need at least 5 frames");
  const std::size_t frames = ceps.dim(0), dim = ceps.dim(1);
  NdArray<double> out({frames, dim * (order + 1)});
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t d = 0; d < dim; ++d) out(t, d) = ceps(t, d);

  auto at = [&](std::size_t block, std::ptrdiff_t t, std::size_t d) {
    t = std::clamp<std::ptrdiff_t>(t, 0, static_cast<std::ptrdiff_t>(frames) - 1);
    return out(static_cast<std::size_t>(t), block * dim + d);
  };
  for (int o = 1; o <= order; ++o) {
    const std::size_t src = o - 1, dst = o;
    for (std::size_t t = 0; t < frames; ++t) {
      const auto ti = static_cast<std::ptrdiff_t>(t);
      for (std::size_t d = 0; d < dim; ++d) {
        const double num = (at(src, ti + 1, d) - at(src, ti - 1, d)) +
                           2.0 * (at(src, ti + 2, d) - at(src, ti - 2, d));
        out(t, dst * dim + d) = num / 10.0;
      }
    }
  }
  return out;
}

CepstralTensor group_frames(const NdArray<double>& ceps, const FrameSpec& spec,
                            std::size_t num_frames) {
  const std::size_t g = spec.cepstral_group_size();
  if (ceps.rank() != 2) throw InvalidArgument("group_frames: expected [frames, dim]");
  if (ceps.dim(0) < g * num_frames)
    throw InvalidArgument("group_frames: " + std::to_string(ceps.dim(0)) +
                          " cepstral frames cannot fill " + std::to_string(num_frames) +
                          " groups of " + std::to_string(g));
  const std::size_t dim = ceps.dim(1);
  CepstralTensor out;
  out.frame_spec = spec;
  out.values = NdArray<double>({num_frames, g, dim});
  for (std::size_t l = 0; l < num_frames; ++l)
    for (std::size_t i = 0; i < g; ++i)
      for (std::size_t d = 0; d < dim; ++d) out.values(l, i, d) = ceps(l * g + i, d);
  return out;
}

CepstralTensor extract_cepstral(const AudioSignal& sig, const FrameSpec& spec,
                                int delta_order, const MfccOptions& opts) {
  const std::size_t frames = num_mod_frames(sig.duration_s(), spec);
  const std::size_t rows = frames * spec.cepstral_group_size();
  const PaddedSignal padded = pad_for_cepstral(sig, spec);
  NdArray<double> ceps = extract_mfcc(padded.signal, spec, opts, rows);
  if (delta_order > 0) ceps = add_deltas(ceps, delta_order);
  return group_frames(ceps, spec, frames);
}

}  // namespace diaruq
