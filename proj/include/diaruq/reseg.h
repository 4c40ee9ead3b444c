// diaruq/include/diaruq/reseg.h
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

#ifndef DIARUQ_RESEG_H_
#define DIARUQ_RESEG_H_

#include <span>
#include <vector>

#include "diaruq/common.h"
#include "diaruq/labels.h"
#include "diaruq/uq.h"

namespace diaruq {

inline constexpr std::size_t kDefaultGap = 3;

/// Scalar-state smoother over U observations per frame.
///
/// f0/q0 apply while the h-weighted mean observation exceeds lambda (speech),
/// f1/q1 otherwise; the backward sweep uses f2.
struct SmootherConfig {
  double f0 = 1.0;
  double f1 = 1.0;
  double f2 = 1.0;
  double q0 = 1e-2;
  double q1 = 1e-2;
  std::vector<double> h{1.0};
  double lambda = 0.5;
  double x_init = 0.5;
  double p_init = 1.0;

  /// Throws InvalidArgument; returns true when f1 < f0 (allowed, but odd).
  bool validate(std::size_t models) const;
  bool operator==(const SmootherConfig&) const = default;
};

/// Per-model mean probabilities z and observation variances r, each [U, L, S].
struct ObservationSet {
  NdArray<double> z;
  NdArray<double> r;

  std::size_t models() const { return z.empty() ? 0 : z.dim(0); }
  std::size_t frames() const { return z.empty() ? 0 : z.dim(1); }
  std::size_t speakers() const { return z.empty() ? 0 : z.dim(2); }
  void validate() const;
};

struct SmoothResult {
  NdArray<double> x;  // [L, S]
  NdArray<double> p;  // [L, S]
  std::vector<std::size_t> regularized_frames;  // l * S + s of singular S matrices
};

/// Bridges zero runs of length <= gap that sit between ones, then clears
/// isolated single ones. Works per speaker column.
BinaryMatrix simple_smooth(const BinaryMatrix& preds, std::size_t gap = kDefaultGap);

/// Forward filter followed by the Rauch-Tung-Striebel backward sweep.
SmoothResult kalman_smooth(const ObservationSet& obs, const SmootherConfig& cfg);

/// Forward filter only; frame l holds the filtered estimate x_{l|l}.
SmoothResult forward_only(const ObservationSet& obs, const SmootherConfig& cfg);

/// Clamp to [0, 1] then threshold at lambda.
BinaryMatrix threshold_states(const NdArray<double>& x, double lambda);

/// z from mean probabilities and r from truncated-Gaussian variances (floored
/// at sigma_floor^2) of each model.
ObservationSet observations_from(std::span<const Aggregate> models,
                                 double sigma_floor = kSigmaFloor);

struct FusionResult {
  BinaryMatrix preds;
  SmoothResult smoothed;
};

FusionResult fuse_models(std::span<const Aggregate> models, const SmootherConfig& cfg,
                         bool backward = true);

struct HyperGrid {
  std::vector<double> f{0.80, 0.85, 0.90, 0.95, 1.0};
  std::vector<double> q{1e-4, 1e-3, 1e-2, 1e-1};
  std::vector<double> h{0.5, 0.75, 1.0, 1.25};
  std::size_t sweeps = 3;
  bool backward = true;
};

struct FitResult {
  SmootherConfig config;
  double der_pct = 0.0;
};

/// Coordinate search over the grid minimising frame DER on validation data.
/// Equal DER resolves to the lexicographically smallest
/// (f0, f1, f2, q0, q1, h...) tuple. The search starts from `start`.
FitResult fit_hyperparams(const ObservationSet& val_obs, const LabelMatrix& val_truth,
                          const HyperGrid& grid = {}, const SmootherConfig& start = {});

}  // namespace diaruq

#endif  // DIARUQ_RESEG_H_
