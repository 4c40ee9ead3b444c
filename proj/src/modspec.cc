// diaruq/src/modspec.cc
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

#include "diaruq/modspec.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <unsupported/Eigen/FFT>

namespace diaruq {

namespace {

using cplx = std::complex<double>;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kStdFloor = 1e-8;

struct AcousticGeometry {
  std::size_t window = 0;  // samples, also the FFT size
  std::size_t hop = 0;
  std::size_t bins = 0;
};

AcousticGeometry acoustic_geometry(const FrameSpec& spec, int fs) {
  AcousticGeometry g;
  g.window = exact_samples(spec.acoustic_window_s, fs);
  g.hop = exact_samples(spec.acoustic_step_s, fs);
  if (g.window == 0 || g.hop == 0)
    throw InvalidArgument("acoustic window/step shorter than one sample");
  g.bins = g.window / 2 + 1;
  return g;
}

std::size_t ratio(double num, double den, const char* what) {
  double q = num / den;
  if (std::abs(q - std::round(q)) > 1e-6 || std::round(q) < 1)
    throw InvalidArgument(std::string(what) +
                          " must be a whole number of acoustic steps");
  return static_cast<std::size_t>(std::llround(q));
}

// Single-bin DFT of every frame: the k-th column of the acoustic STFT.
std::vector<cplx> stft_column(std::span<const std::int16_t> x,
                              std::size_t num_frames, const AcousticGeometry& g,
                              std::span<const double> window, std::size_t band) {
  std::vector<cplx> kernel(g.window);
  for (std::size_t n = 0; n < g.window; ++n) {
    double angle = -kTwoPi * static_cast<double>((band * n) % g.window) / g.window;
    kernel[n] = window[n] * cplx(std::cos(angle), std::sin(angle));
  }
  std::vector<cplx> out(num_frames);
  for (std::size_t j = 0; j < num_frames; ++j) {
    const std::size_t start = j * g.hop;
    cplx acc = 0.0;
    const std::size_t avail = start < x.size() ? std::min(g.window, x.size() - start) : 0;
    for (std::size_t n = 0; n < avail; ++n) acc += static_cast<double>(x[start + n]) * kernel[n];
    out[j] = acc;
  }
  return out;
}

AnalyticBand analytic_band(std::span<const cplx> column, std::size_t first_row,
                           std::size_t band, const AcousticGeometry& g,
                           double frame_rate_hz) {
  AnalyticBand out;
  const std::size_t n = column.size();
  out.envelope.resize(n);
  out.inst_freq_dev_hz.assign(n, 0.0);
  std::vector<double> phase(n);
  for (std::size_t j = 0; j < n; ++j) {
    // Undo the carrier rotation band*hop/N cycles per frame.
    const std::size_t row = first_row + j;
    const std::size_t idx = (band * ((row * g.hop) % g.window)) % g.window;
    const double angle = -kTwoPi * static_cast<double>(idx) / g.window;
    const cplx base = column[j] * cplx(std::cos(angle), std::sin(angle));
    out.envelope[j] = std::abs(base);
    phase[j] = std::arg(base);
  }
  for (std::size_t j = 1; j < n; ++j) {
    // No phase difference exists across a zero bin (silence or its onset).
    if (out.envelope[j] == 0.0 || out.envelope[j - 1] == 0.0) continue;
    double d = phase[j] - phase[j - 1];
    d -= kTwoPi * std::round(d / kTwoPi);
    phase[j] = phase[j - 1] + d;
    out.inst_freq_dev_hz[j] = d * frame_rate_hz / kTwoPi;
  }
  if (n > 1) out.inst_freq_dev_hz[0] = out.inst_freq_dev_hz[1];
  return out;
}

void check_signal(const AudioSignal& sig) {
  if (sig.sample_rate_hz <= 0) throw InvalidArgument("sample rate must be positive");
}

}  // namespace

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / n);
  return w;
}

NdArray<cplx> stft_acoustic(const AudioSignal& padded, const FrameSpec& spec,
                            std::optional<std::size_t> num_frames) {
  spec.validate();
  check_signal(padded);
  const AcousticGeometry g = acoustic_geometry(spec, padded.sample_rate_hz);
  std::size_t frames;
  if (num_frames) {
    frames = *num_frames;
  } else {
    if (padded.samples.size() < g.window)
      throw InvalidArgument("stft_acoustic: signal shorter than one window");
    frames = (padded.samples.size() - g.window) / g.hop + 1;
  }
  const std::vector<double> window = hann_window(g.window);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  NdArray<cplx> out({frames, g.bins});
  std::vector<double> frame(g.window);
  std::vector<cplx> spectrum;
  for (std::size_t j = 0; j < frames; ++j) {
    const std::size_t start = j * g.hop;
    for (std::size_t n = 0; n < g.window; ++n) {
      const std::size_t i = start + n;
      frame[n] = i < padded.samples.size() ? padded.samples[i] * window[n] : 0.0;
    }
    fft.fwd(spectrum, frame);
    for (std::size_t k = 0; k < g.bins; ++k) out(j, k) = spectrum[k];
  }
  return out;
}

AnalyticBand band_envelope_tfs(const NdArray<cplx>& spectrogram, std::size_t first,
                               std::size_t count, std::size_t band,
                               const FrameSpec& spec, int sample_rate_hz) {
  const AcousticGeometry g = acoustic_geometry(spec, sample_rate_hz);
  if (spectrogram.rank() != 2 || band >= spectrogram.dim(1) ||
      first + count > spectrogram.dim(0))
    throw InvalidArgument("band_envelope_tfs: row/band range out of bounds");
  std::vector<cplx> column(count);
  for (std::size_t j = 0; j < count; ++j) column[j] = spectrogram(first + j, band);
  return analytic_band(column, first, band, g, 1.0 / spec.acoustic_step_s);
}

ModFeatureTensor extract_modspec(const AudioSignal& sig, const FrameSpec& spec,
                                 const ModspecOptions& opts) {
  spec.validate();
  check_signal(sig);
  const int fs = sig.sample_rate_hz;
  const AcousticGeometry g = acoustic_geometry(spec, fs);
  const std::size_t mod_hop = ratio(spec.mod_step_s, spec.acoustic_step_s, "F_m");
  const std::size_t mod_win = ratio(spec.mod_window_s, spec.acoustic_step_s, "W_m");
  const std::size_t frames = num_mod_frames(sig.duration_s(), spec);
  const std::size_t bins_h = mod_win / 2 + 1;
  const std::size_t acoustic_frames = (frames - 1) * mod_hop + mod_win;
  const double frame_rate = 1.0 / spec.acoustic_step_s;

  const PaddedSignal padded = pad_for_modspec(sig, spec);
  const std::vector<double> window = hann_window(g.window);
  const std::vector<double> mod_window = hann_window(mod_win);

  ModFeatureTensor out;
  out.frame_spec = spec;
  out.values = NdArray<double>({frames, g.bins, bins_h, 2});
  for (std::size_t k = 0; k < g.bins; ++k)
    out.band_centers_hz.push_back(static_cast<double>(k) * fs / g.window);
  for (std::size_t h = 0; h < bins_h; ++h)
    out.mod_freqs_hz.push_back(static_cast<double>(h) * frame_rate / mod_win);

  parallel_for(g.bins, [&](std::size_t k) {
    const std::vector<cplx> column =
        stft_column(padded.signal.samples, acoustic_frames, g, window, k);
    const AnalyticBand band = analytic_band(column, 0, k, g, frame_rate);
    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    std::vector<double> seg(mod_win);
    std::vector<cplx> spectrum;
    for (std::size_t l = 0; l < frames; ++l) {
      for (std::size_t c = 0; c < 2; ++c) {
        const std::vector<double>& src = c == kEnv ? band.envelope : band.inst_freq_dev_hz;
        const auto first = src.begin() + static_cast<std::ptrdiff_t>(l * mod_hop);
        std::copy(first, first + static_cast<std::ptrdiff_t>(mod_win), seg.begin());
        if (opts.remove_dc) {
          double mean = 0.0;
          for (double v : seg) mean += v;
          mean /= static_cast<double>(mod_win);
          for (double& v : seg) v -= mean;
        }
        for (std::size_t i = 0; i < mod_win; ++i) seg[i] *= mod_window[i];
        fft.fwd(spectrum, seg);
        for (std::size_t h = 0; h < bins_h; ++h) out.values(l, k, h, c) = std::abs(spectrum[h]);
      }
    }
  });

  if (opts.normalize) out = normalize_frames(std::move(out));
  if (opts.standardize) {
    const std::size_t self = 0;
    std::vector<ModFeatureTensor> one;
    one.push_back(std::move(out));
    out = std::move(standardize(std::move(one), std::span(&self, 1)).tensors.front());
  }
  return out;
}

ModFeatureTensor normalize_frames(ModFeatureTensor t) {
  if (t.values.empty()) return t;
  const std::size_t frames = t.values.dim(0), bands = t.values.dim(1),
                    bins = t.values.dim(2), channels = t.values.dim(3);
  for (std::size_t l = 0; l < frames; ++l) {
    for (std::size_t c = 0; c < channels; ++c) {
      double sq = 0.0;
      for (std::size_t k = 0; k < bands; ++k)
        for (std::size_t h = 0; h < bins; ++h) sq += t.values(l, k, h, c) * t.values(l, k, h, c);
      if (sq == 0.0) continue;
      const double inv = 1.0 / std::sqrt(sq);
      for (std::size_t k = 0; k < bands; ++k)
        for (std::size_t h = 0; h < bins; ++h) t.values(l, k, h, c) *= inv;
    }
  }
  return t;
}

StandardizeResult standardize(std::vector<ModFeatureTensor> tensors,
                              std::span<const std::size_t> stats_from) {
  if (stats_from.empty()) throw InvalidArgument("standardize: empty statistics set");
  if (tensors.empty()) throw InvalidArgument("standardize: no tensors");
  const auto& ref = tensors.front().values;
  if (ref.rank() != 4) throw InvalidArgument("standardize: expected rank-4 tensors");
  const std::vector<std::size_t> cell_shape{ref.dim(1), ref.dim(2), ref.dim(3)};
  const std::size_t cells = NdArray<double>::count(cell_shape);
  for (const auto& t : tensors) {
    if (t.values.rank() != 4 || t.values.dim(1) != cell_shape[0] ||
        t.values.dim(2) != cell_shape[1] || t.values.dim(3) != cell_shape[2])
      throw InvalidArgument("standardize: tensor shapes disagree");
  }

  std::vector<double> sum(cells, 0.0), sumsq(cells, 0.0);
  std::size_t n = 0;
  for (std::size_t idx : stats_from) {
    if (idx >= tensors.size()) throw InvalidArgument("standardize: index out of range");
    auto flat = tensors[idx].values.flat();
    const std::size_t frames = tensors[idx].values.dim(0);
    for (std::size_t l = 0; l < frames; ++l)
      for (std::size_t i = 0; i < cells; ++i) sum[i] += flat[l * cells + i];
    n += frames;
  }
  if (n == 0) throw InvalidArgument("standardize: statistics set has no frames");

  StandardizeResult res;
  res.mean = NdArray<double>(cell_shape);
  res.stddev = NdArray<double>(cell_shape);
  auto mean = res.mean.flat();
  for (std::size_t i = 0; i < cells; ++i) mean[i] = sum[i] / static_cast<double>(n);
  for (std::size_t idx : stats_from) {
    auto flat = tensors[idx].values.flat();
    const std::size_t frames = tensors[idx].values.dim(0);
    for (std::size_t l = 0; l < frames; ++l)
      for (std::size_t i = 0; i < cells; ++i) {
        const double d = flat[l * cells + i] - mean[i];
        sumsq[i] += d * d;
      }
  }
  auto sd = res.stddev.flat();
  for (std::size_t i = 0; i < cells; ++i)
    sd[i] = std::max(std::sqrt(sumsq[i] / static_cast<double>(n)), kStdFloor);

  for (auto& t : tensors) {
    auto flat = t.values.flat();
    const std::size_t frames = t.values.dim(0);
    for (std::size_t l = 0; l < frames; ++l)
      for (std::size_t i = 0; i < cells; ++i)
        flat[l * cells + i] = (flat[l * cells + i] - mean[i]) / sd[i];
  }
  res.tensors = std::move(tensors);
  return res;
}

}  // namespace diaruq
