// diaruq/include/diaruq/uq.h
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

#ifndef DIARUQ_UQ_H_
#define DIARUQ_UQ_H_

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diaruq/common.h"
#include "diaruq/labels.h"
#include "diaruq/signal.h"

namespace diaruq {

inline constexpr double kSigmaFloor = 1e-6;

/// Monte Carlo dropout outputs, probs[n, l, s] in [0, 1].
struct SampleTensor {
  NdArray<double> probs;
  std::string model_id;
  std::vector<std::string> speaker_order;
  FrameSpec frame_spec;

  std::size_t passes() const { return probs.empty() ? 0 : probs.dim(0); }
  std::size_t frames() const { return probs.empty() ? 0 : probs.dim(1); }
  std::size_t speakers() const { return probs.empty() ? 0 : probs.dim(2); }

  /// Throws InvalidArgument unless rank 3, N >= 1, and every value in [0, 1].
  void validate() const;
};

/// Maximum-likelihood truncated normal on [0, 1].
struct TruncatedGaussian {
  double mu = 0.0;
  double sigma = kSigmaFloor;
  double variance = 0.0;  // of the truncated distribution, not sigma^2
  bool converged = true;
  bool degenerate = false;
};

struct FrameUncertainty {
  double mean_prob = 0.0;
  std::optional<double> pct_lo;  // 2.5 %
  std::optional<double> pct_hi;  // 97.5 %
  TruncatedGaussian trunc;
  double mean_pred = 0.0;
  int modal_pred = 0;
};

/// Per-(l, s) summaries of one model, stored row-major [L, S].
struct Aggregate {
  std::size_t frames = 0;
  std::size_t speakers = 0;
  std::vector<FrameUncertainty> cells;
  std::string model_id;
  std::vector<std::string> speaker_order;
  FrameSpec frame_spec;

  const FrameUncertainty& at(std::size_t l, std::size_t s) const {
    return cells[l * speakers + s];
  }
  NdArray<double> mean_probs() const;
  NdArray<double> trunc_variances() const;
  BinaryMatrix modal_preds() const;
};

/// 1 iff p > lambda.
int threshold_predict(double p, double lambda);

/// Linear interpolation between order statistics at position q (N - 1).
/// `sorted` must be ascending and non-empty.
double percentile(std::span<const double> sorted, double q);

/// Negative mean log-likelihood of `samples` under N(mu, sigma^2) truncated to [0, 1].
double truncnorm_nll(std::span<const double> samples, double mu, double sigma);

/// Variance of N(mu, sigma^2) truncated to [0, 1].
double truncnorm_variance(double mu, double sigma);

/// Bounded Nelder-Mead over (mu, log sigma) started from the sample moments.
/// Samples must lie in [0, 1]; at least two are required.
TruncatedGaussian fit_truncated_gaussian(std::span<const double> samples,
                                         double sigma_floor = kSigmaFloor);

struct AggregateOptions {
  double lambda = 0.5;
  bool fit_trunc = true;
  double sigma_floor = kSigmaFloor;
};

/// Mean, percentiles, mean and modal predictions, and a truncated-Gaussian fit
/// for every (l, s). Fits run in parallel over frames.
Aggregate aggregate(const SampleTensor& samples, const AggregateOptions& opts = {});

/// Sum over speakers of the binary entropy of each mean probability, in bits.
std::vector<double> frame_entropy(const NdArray<double>& mean_probs);

struct Histogram {
  std::vector<std::size_t> counts;
  double lo = 0.0;
  double hi = 0.0;
  double mean = 0.0;  // of the values, 0 when empty
  std::size_t total = 0;
};

struct EntropyReport {
  Histogram correct;
  Histogram incorrect;
  std::vector<Histogram> by_speaker_count;  // index = true active speakers
};

/// Frames whose whole prediction row equals the truth row are "correct".
/// Histograms span [0, S] bits.
EntropyReport entropy_report(std::span<const double> entropy, const BinaryMatrix& preds,
                             const LabelMatrix& truth, std::size_t bins = 40);
void write_entropy_csv(std::ostream& out, const EntropyReport& report);
void write_entropy_svg(std::ostream& out, const EntropyReport& report);

struct CalibrationBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  std::optional<double> predicted;  // mean probability in the bin
  std::optional<double> observed;   // fraction of positives
};

/// Equal-width bins over [0, 1]; p = 1 falls in the last bin.
std::vector<CalibrationBin> calibration_curve(const NdArray<double>& mean_probs,
                                              const LabelMatrix& truth, std::size_t bins = 20);
void write_calibration_csv(std::ostream& out, const std::vector<CalibrationBin>& curve);

}  // namespace diaruq

#endif  // DIARUQ_UQ_H_
