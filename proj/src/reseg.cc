// diaruq/src/reseg.cc
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

#include "diaruq/reseg.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

#include <Eigen/Dense>

#include "diaruq/score.h"

namespace diaruq {

namespace {

struct Track {
  std::vector<double> x_filt, p_filt, x_pred, p_pred;
  std::vector<std::size_t> regularized;  // frame indices
};

Track filter_column(const ObservationSet& obs, const SmootherConfig& cfg, std::size_t s) {
  const std::size_t U = obs.models(), L = obs.frames();
  const Eigen::Map<const Eigen::VectorXd> h(cfg.h.data(), static_cast<Eigen::Index>(U));
  const double h_sum = h.sum();
  Track t;
  t.x_filt.resize(L);
  t.p_filt.resize(L);
  t.x_pred.resize(L);
  t.p_pred.resize(L);

  Eigen::VectorXd z(U), r(U);
  Eigen::MatrixXd S(U, U);
  double x = cfg.x_init, p = cfg.p_init;
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t u = 0; u < U; ++u) {
      z[u] = obs.z(u, l, s);
      r[u] = obs.r(u, l, s);
    }
    const bool speech = h.dot(z) / h_sum > cfg.lambda;
    const double f = speech ? cfg.f0 : cfg.f1;
    const double q = speech ? cfg.q0 : cfg.q1;

    const double xp = f * x, pp = f * f * p + q;
    S.noalias() = pp * h * h.transpose();
    S.diagonal() += r;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 0.0) {
      S.diagonal().array() += kSigmaFloor * kSigmaFloor;
      ldlt.compute(S);
      t.regularized.push_back(l);
    }
    // k = pp h^T S^{-1}
    const Eigen::VectorXd k = pp * ldlt.solve(h);
    x = xp + k.dot(z - h * xp);
    p = (1.0 - k.dot(h)) * pp;

    t.x_pred[l] = xp;
    t.p_pred[l] = pp;
    t.x_filt[l] = x;
    t.p_filt[l] = p;
  }
  return t;
}

SmoothResult run(const ObservationSet& obs, const SmootherConfig& cfg, bool backward) {
  obs.validate();
  cfg.validate(obs.models());
  const std::size_t L = obs.frames(), S = obs.speakers();
  SmoothResult out{NdArray<double>({L, S}), NdArray<double>({L, S}), {}};
  std::mutex mu;

  parallel_for(S, [&](std::size_t s) {
    Track t = filter_column(obs, cfg, s);
    std::vector<double> xs = t.x_filt, ps = t.p_filt;
    if (backward) {
      for (std::size_t l = L - 1; l-- > 0;) {
        const double a = t.p_filt[l] * cfg.f2 / t.p_pred[l + 1];
        xs[l] = t.x_filt[l] + a * (xs[l + 1] - t.x_pred[l + 1]);
        ps[l] = t.p_filt[l] + a * a * (ps[l + 1] - t.p_pred[l + 1]);
      }
    }
    for (std::size_t l = 0; l < L; ++l) {
      out.x(l, s) = xs[l];
      out.p(l, s) = ps[l];
    }
    if (!t.regularized.empty()) {
      std::lock_guard lock(mu);
      for (std::size_t l : t.regularized) out.regularized_frames.push_back(l * S + s);
    }
  });
  std::sort(out.regularized_frames.begin(), out.regularized_frames.end());
  return out;
}

bool column_one(const BinaryMatrix& m, std::ptrdiff_t l, std::size_t s, std::size_t L) {
  return l >= 0 && static_cast<std::size_t>(l) < L && m(static_cast<std::size_t>(l), s) != 0;
}

using ConfigKey = std::vector<double>;

ConfigKey key_of(const SmootherConfig& c) {
  ConfigKey k{c.f0, c.f1, c.f2, c.q0, c.q1};
  k.insert(k.end(), c.h.begin(), c.h.end());
  return k;
}

}  // namespace

bool SmootherConfig::validate(std::size_t models) const {
  for (double f : {f0, f1, f2})
    if (!(f > 0.0 && f <= 1.0)) throw InvalidArgument("transition factors must lie in (0, 1]");
  if (!(q0 >= 0.0) || !(q1 >= 0.0)) throw InvalidArgument("process variances must be >= 0");
  if (h.size() != models)
    throw InvalidArgument("observation factors: expected " + std::to_string(models) + ", got " +
                          std::to_string(h.size()));
  for (double v : h)
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("observation factors must be > 0");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("lambda must lie in [0, 1]");
  if (!(p_init > 0.0) || !std::isfinite(x_init))
    throw InvalidArgument("p_init must be > 0 and x_init finite");
  return f1 < f0;
}

void ObservationSet::validate() const {
  if (z.rank() != 3 || z.shape() != r.shape())
    throw InvalidArgument("observations: z and r must both be [U, L, S]");
  if (models() == 0 || frames() == 0) throw InvalidArgument("observations: empty");
  for (double v : r.flat())
    if (!(v > 0.0) || !std::isfinite(v))
      throw InvalidArgument("observations: variances must be positive");
  for (double v : z.flat())
    if (!std::isfinite(v)) throw InvalidArgument("observations: non-finite value");
}

BinaryMatrix simple_smooth(const BinaryMatrix& preds, std::size_t gap) {
  if (preds.rank() != 2) throw InvalidArgument("simple_smooth: expected [L, S]");
  const std::size_t L = preds.dim(0), S = preds.dim(1);
  BinaryMatrix bridged = preds;
  for (std::size_t s = 0; s < S; ++s) {
    std::size_t l = 0;
    while (l < L) {
      if (bridged(l, s) != 0) {
        ++l;
        continue;
      }
      std::size_t end = l;
      while (end < L && bridged(end, s) == 0) ++end;
      if (l > 0 && end < L && end - l <= gap)
        for (std::size_t i = l; i < end; ++i) bridged(i, s) = 1;
      l = end;
    }
  }
  BinaryMatrix out = bridged;
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t l = 0; l < L; ++l) {
      const auto i = static_cast<std::ptrdiff_t>(l);
      if (bridged(l, s) != 0 && !column_one(bridged, i - 1, s, L) &&
          !column_one(bridged, i + 1, s, L))
        out(l, s) = 0;
    }
  return out;
}

SmoothResult kalman_smooth(const ObservationSet& obs, const SmootherConfig& cfg) {
  return run(obs, cfg, true);
}

SmoothResult forward_only(const ObservationSet& obs, const SmootherConfig& cfg) {
  return run(obs, cfg, false);
}

BinaryMatrix threshold_states(const NdArray<double>& x, double lambda) {
  BinaryMatrix out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    out.flat()[i] =
        static_cast<unsigned char>(threshold_predict(std::clamp(x.flat()[i], 0.0, 1.0), lambda));
  return out;
}

ObservationSet observations_from(std::span<const Aggregate> models, double sigma_floor) {
  if (models.empty()) throw InvalidArgument("fusion needs at least one model");
  const std::size_t L = models.front().frames, S = models.front().speakers;
  for (const auto& m : models)
    if (m.frames != L || m.speakers != S)
      throw InvalidArgument("model '" + m.model_id + "' has shape [" + std::to_string(m.frames) +
                            ", " + std::to_string(m.speakers) + "], expected [" +
                            std::to_string(L) + ", " + std::to_string(S) + "]");
  const std::size_t U = models.size();
  ObservationSet obs{NdArray<double>({U, L, S}), NdArray<double>({U, L, S})};
  const double floor2 = sigma_floor * sigma_floor;
  for (std::size_t u = 0; u < U; ++u)
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t s = 0; s < S; ++s) {
        const auto& c = models[u].at(l, s);
        obs.z(u, l, s) = c.mean_prob;
        obs.r(u, l, s) = std::max(c.trunc.variance, floor2);
      }
  return obs;
}

FusionResult fuse_models(std::span<const Aggregate> models, const SmootherConfig& cfg,
                         bool backward) {
  const ObservationSet obs = observations_from(models);
  FusionResult out;
  out.smoothed = backward ? kalman_smooth(obs, cfg) : forward_only(obs, cfg);
  out.preds = threshold_states(out.smoothed.x, cfg.lambda);
  return out;
}

FitResult fit_hyperparams(const ObservationSet& val_obs, const LabelMatrix& val_truth,
                          const HyperGrid& grid, const SmootherConfig& start) {
  val_obs.validate();
  if (grid.f.empty() || grid.q.empty() || grid.h.empty())
    throw InvalidArgument("fit_hyperparams: empty grid");
  if (val_truth.frames() != val_obs.frames() || val_truth.speakers() != val_obs.speakers())
    throw InvalidArgument("fit_hyperparams: truth and observations disagree in shape");

  const std::size_t U = val_obs.models();
  SmootherConfig best = start;
  if (best.h.size() != U) best.h.assign(U, 1.0);

  auto der_of = [&](const SmootherConfig& c) {
    const SmoothResult sm = grid.backward ? kalman_smooth(val_obs, c) : forward_only(val_obs, c);
    return frame_der(val_truth, threshold_states(sm.x, c.lambda)).der_pct;
  };

  // Coordinates: f0 f1 f2 q0 q1 h_0 ... h_{U-1}
  auto coord = [&](SmootherConfig& c, std::size_t i) -> double& {
    switch (i) {
      case 0: return c.f0;
      case 1: return c.f1;
      case 2: return c.f2;
      case 3: return c.q0;
      case 4: return c.q1;
      default: return c.h[i - 5];
    }
  };
  auto values = [&](std::size_t i) -> const std::vector<double>& {
    return i < 3 ? grid.f : i < 5 ? grid.q : grid.h;
  };

  double best_der = std::numeric_limits<double>::infinity();
  for (std::size_t sweep = 0; sweep < std::max<std::size_t>(grid.sweeps, 1); ++sweep) {
    bool changed = false;
    for (std::size_t i = 0; i < 5 + U; ++i) {
      const auto& vals = values(i);
      std::vector<SmootherConfig> cands(vals.size(), best);
      for (std::size_t j = 0; j < vals.size(); ++j) coord(cands[j], i) = vals[j];
      std::vector<double> ders(vals.size());
      parallel_for(vals.size(), [&](std::size_t j) { ders[j] = der_of(cands[j]); });

      std::size_t pick = 0;
      for (std::size_t j = 1; j < vals.size(); ++j)
        if (ders[j] < ders[pick] ||
            (ders[j] == ders[pick] && key_of(cands[j]) < key_of(cands[pick])))
          pick = j;
      if (coord(best, i) != vals[pick]) changed = true;
      best = cands[pick];
      best_der = ders[pick];
    }
    if (!changed) break;
  }
  return {best, best_der};
}

}  // namespace diaruq
