// diaruq/src/uq.cc
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

#include "diaruq/uq.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>

namespace diaruq {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;
constexpr double kMuLo = -5.0, kMuHi = 6.0, kSigmaHi = 10.0;

// log of the upper normal tail Q(x) = P(Z > x).
double log_q(double x) {
  if (x < 30.0) return std::log(0.5 * std::erfc(x / std::numbers::sqrt2));
  const double x2 = x * x;
  return -0.5 * x2 - std::log(x) - kLogSqrt2Pi + std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

// log(Phi(b) - Phi(a)) for a < b.
double log_mass(double a, double b) {
  if (a > 0.0) {
    const double la = log_q(a), lb = log_q(b);
    return la + std::log1p(-std::exp(lb - la));
  }
  if (b < 0.0) {
    const double la = log_q(-b), lb = log_q(-a);
    return la + std::log1p(-std::exp(lb - la));
  }
  return std::log(0.5 * (std::erf(b / std::numbers::sqrt2) - std::erf(a / std::numbers::sqrt2)));
}

double log_phi(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

struct Moments {
  double n = 0.0;
  double mean = 0.0;
  double var = 0.0;  // population
};

Moments moments(std::span<const double> xs) {
  Moments m;
  m.n = static_cast<double>(xs.size());
  for (double x : xs) m.mean += x;
  m.mean /= m.n;
  for (double x : xs) m.var += (x - m.mean) * (x - m.mean);
  m.var /= m.n;
  return m;
}

double nll_from_moments(const Moments& m, double mu, double sigma) {
  const double d = m.mean - mu;
  const double mean_sq = (m.var + d * d) / (sigma * sigma);
  return 0.5 * mean_sq + std::log(sigma) + kLogSqrt2Pi +
         log_mass(-mu / sigma, (1.0 - mu) / sigma);
}

// Fallback for the variance when the closed form cancels badly: Simpson's
// rule on the normalised density over [0, 1].
double variance_by_quadrature(double mu, double sigma) {
  constexpr int kIntervals = 4000;
  auto logf = [&](double x) { return -0.5 * ((x - mu) / sigma) * ((x - mu) / sigma); };
  const double peak = logf(std::clamp(mu, 0.0, 1.0));
  double w0 = 0.0, w1 = 0.0, w2 = 0.0;
  for (int i = 0; i <= kIntervals; ++i) {
    const double x = static_cast<double>(i) / kIntervals;
    const double c = (i == 0 || i == kIntervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double f = c * std::exp(logf(x) - peak);
    w0 += f;
    w1 += f * x;
    w2 += f * x * x;
  }
  const double mean = w1 / w0;
  return std::max(w2 / w0 - mean * mean, 0.0);
}

struct Point {
  std::array<double, 2> theta;  // mu, log sigma
  double value;
};

}  // namespace

void SampleTensor::validate() const {
  if (probs.rank() != 3) throw InvalidArgument("sample tensor must be [N, L, S]");
  if (probs.dim(0) < 1) throw InvalidArgument("sample tensor needs N >= 1");
  if (!speaker_order.empty() && speaker_order.size() != probs.dim(2))
    throw InvalidArgument("speaker_order length does not match S");
  for (double p : probs.flat())
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("sample probabilities must lie in [0, 1]");
}

NdArray<double> Aggregate::mean_probs() const {
  NdArray<double> out({frames, speakers});
  for (std::size_t i = 0; i < cells.size(); ++i) out.flat()[i] = cells[i].mean_prob;
  return out;
}

NdArray<double> Aggregate::trunc_variances() const {
  NdArray<double> out({frames, speakers});
  for (std::size_t i = 0; i < cells.size(); ++i) out.flat()[i] = cells[i].trunc.variance;
  return out;
}

BinaryMatrix Aggregate::modal_preds() const {
  BinaryMatrix out({frames, speakers});
  for (std::size_t i = 0; i < cells.size(); ++i)
    out.flat()[i] = static_cast<unsigned char>(cells[i].modal_pred);
  return out;
}

int threshold_predict(double p, double lambda) { return p > lambda ? 1 : 0; }

double percentile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InvalidArgument("percentile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(i);
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

double truncnorm_nll(std::span<const double> samples, double mu, double sigma) {
  if (samples.empty() || !(sigma > 0.0)) throw InvalidArgument("truncnorm_nll: bad input");
  return nll_from_moments(moments(samples), mu, sigma);
}

double truncnorm_variance(double mu, double sigma) {
  const double a = -mu / sigma, b = (1.0 - mu) / sigma;
  const double lz = log_mass(a, b);
  const double ra = std::exp(log_phi(a) - lz), rb = std::exp(log_phi(b) - lz);
  const double ratio = 1.0 + a * ra - b * rb - (ra - rb) * (ra - rb);
  const double var = sigma * sigma * ratio;
  if (std::isfinite(var) && ratio > 1e-3) return var;
  return variance_by_quadrature(mu, sigma);
}

TruncatedGaussian fit_truncated_gaussian(std::span<const double> samples, double sigma_floor) {
  if (samples.size() < 2) throw InvalidArgument("fit_truncated_gaussian: need >= 2 samples");
  if (!(sigma_floor > 0.0)) throw InvalidArgument("fit_truncated_gaussian: sigma_floor <= 0");
  for (double x : samples)
    if (!(x >= 0.0 && x <= 1.0))
      throw InvalidArgument("fit_truncated_gaussian: samples must lie in [0, 1]");

  const Moments m = moments(samples);
  const double std0 = std::sqrt(m.var);
  TruncatedGaussian out;
  if (std0 <= sigma_floor) {
    out.mu = m.mean;
    out.sigma = sigma_floor;
    out.variance = sigma_floor * sigma_floor;
    out.degenerate = true;
    return out;
  }

  const double log_lo = std::log(sigma_floor), log_hi = std::log(kSigmaHi);
  auto project = [&](std::array<double, 2> t) {
    t[0] = std::clamp(t[0], kMuLo, kMuHi);
    t[1] = std::clamp(t[1], log_lo, log_hi);
    return t;
  };
  auto eval = [&](std::array<double, 2> t) -> Point {
    t = project(t);
    const double v = nll_from_moments(m, t[0], std::exp(t[1]));
    return {t, std::isfinite(v) ? v : std::numeric_limits<double>::infinity()};
  };

  const Point init = eval({m.mean, std::log(std0)});
  Point best = init;
  constexpr int kMaxIter = 4000, kMaxRestarts = 8;
  constexpr double kFTol = 1e-13, kXTol = 1e-10;
  bool converged = false;

  for (int restart = 0; restart < kMaxRestarts && !converged; ++restart) {
    const double step_mu = restart == 0 ? std::max(0.1, std0) : 0.05;
    const double step_ls = restart == 0 ? 0.5 : 0.1;
    std::array<Point, 3> simplex = {best, eval({best.theta[0] + step_mu, best.theta[1]}),
                                    eval({best.theta[0], best.theta[1] + step_ls})};
    bool local = false;
    for (int it = 0; it < kMaxIter; ++it) {
      std::sort(simplex.begin(), simplex.end(),
                [](const Point& x, const Point& y) { return x.value < y.value; });
      const double fspread = simplex[2].value - simplex[0].value;
      double xspread = 0.0;
      for (int i = 1; i < 3; ++i)
        for (int k = 0; k < 2; ++k)
          xspread = std::max(xspread, std::abs(simplex[i].theta[k] - simplex[0].theta[k]));
      if (fspread <= kFTol * (1.0 + std::abs(simplex[0].value)) && xspread <= kXTol) {
        local = true;
        break;
      }
      std::array<double, 2> c{};
      for (int k = 0; k < 2; ++k) c[k] = 0.5 * (simplex[0].theta[k] + simplex[1].theta[k]);
      auto along = [&](double t) {
        return eval({c[0] + t * (simplex[2].theta[0] - c[0]),
                     c[1] + t * (simplex[2].theta[1] - c[1])});
      };
      const Point r = along(-1.0);
      if (r.value < simplex[0].value) {
        const Point e = along(-2.0);
        simplex[2] = e.value < r.value ? e : r;
      } else if (r.value < simplex[1].value) {
        simplex[2] = r;
      } else {
        const Point k = r.value < simplex[2].value ? along(-0.5) : along(0.5);
        if (k.value < std::min(r.value, simplex[2].value)) {
          simplex[2] = k;
        } else {
          for (int i = 1; i < 3; ++i)
            simplex[i] = eval({0.5 * (simplex[0].theta[0] + simplex[i].theta[0]),
                               0.5 * (simplex[0].theta[1] + simplex[i].theta[1])});
        }
      }
    }
    std::sort(simplex.begin(), simplex.end(),
              [](const Point& x, const Point& y) { return x.value < y.value; });
    const double gain = best.value - simplex[0].value;
    if (simplex[0].value <= best.value) best = simplex[0];
    // A restart that finds nothing new confirms the optimum.
    converged = local && gain <= kFTol * (1.0 + std::abs(best.value)) && restart > 0;
  }

  if (!converged || !std::isfinite(best.value) || best.value > init.value) {
    out.mu = m.mean;
    out.sigma = std::max(std0, sigma_floor);
    out.converged = false;
  } else {
    out.mu = best.theta[0];
    out.sigma = std::max(std::exp(best.theta[1]), sigma_floor);
  }
  out.variance = std::max(truncnorm_variance(out.mu, out.sigma), sigma_floor * sigma_floor);
  return out;
}

Aggregate aggregate(const SampleTensor& samples, const AggregateOptions& opts) {
  samples.validate();
  if (!(opts.lambda >= 0.0 && opts.lambda <= 1.0))
    throw InvalidArgument("aggregate: lambda must lie in [0, 1]");
  const std::size_t n = samples.passes(), frames = samples.frames(),
                    speakers = samples.speakers();
  Aggregate out;
  out.frames = frames;
  out.speakers = speakers;
  out.cells.resize(frames * speakers);
  out.model_id = samples.model_id;
  out.speaker_order = samples.speaker_order;
  out.frame_spec = samples.frame_spec;

  parallel_for(frames, [&](std::size_t l) {
    std::vector<double> xs(n);
    for (std::size_t s = 0; s < speakers; ++s) {
      std::size_t ones = 0;
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        xs[i] = samples.probs(i, l, s);
        sum += xs[i];
        ones += threshold_predict(xs[i], opts.lambda);
      }
      FrameUncertainty& u = out.cells[l * speakers + s];
      u.mean_prob = sum / static_cast<double>(n);
      u.mean_pred = static_cast<double>(ones) / static_cast<double>(n);
      u.modal_pred = 2 * ones > n ? 1 : 0;
      if (n >= 2) {
        std::sort(xs.begin(), xs.end());
        u.pct_lo = percentile(xs, 0.025);
        u.pct_hi = percentile(xs, 0.975);
        if (opts.fit_trunc) u.trunc = fit_truncated_gaussian(xs, opts.sigma_floor);
      }
      if (n < 2 || !opts.fit_trunc) {
        u.trunc.mu = u.mean_prob;
        u.trunc.sigma = opts.sigma_floor;
        u.trunc.variance = opts.sigma_floor * opts.sigma_floor;
        u.trunc.degenerate = true;
      }
    }
  });
  return out;
}

std::vector<double> frame_entropy(const NdArray<double>& mean_probs) {
  if (mean_probs.rank() != 2) throw InvalidArgument("frame_entropy: expected [L, S]");
  auto h = [](double p) { return p > 0.0 ? -p * std::log2(p) : 0.0; };
  std::vector<double> out(mean_probs.dim(0));
  for (std::size_t l = 0; l < out.size(); ++l)
    for (std::size_t s = 0; s < mean_probs.dim(1); ++s) {
      const double p = mean_probs(l, s);
      if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("frame_entropy: p outside [0, 1]");
      out[l] += h(p) + h(1.0 - p);
    }
  return out;
}

EntropyReport entropy_report(std::span<const double> entropy, const BinaryMatrix& preds,
                             const LabelMatrix& truth, std::size_t bins) {
  const std::size_t frames = truth.frames(), speakers = truth.speakers();
  if (bins == 0) throw InvalidArgument("entropy_report: bins must be positive");
  if (entropy.size() != frames || preds.rank() != 2 || preds.dim(0) != frames ||
      preds.dim(1) != speakers)
    throw InvalidArgument("entropy_report: shapes disagree");

  const double hi = static_cast<double>(speakers);
  auto blank = [&] {
    Histogram h;
    h.counts.assign(bins, 0);
    h.hi = hi;
    return h;
  };
  EntropyReport r{blank(), blank(), std::vector<Histogram>(speakers + 1)};
  for (auto& h : r.by_speaker_count) h = blank();
  auto add = [&](Histogram& h, double v) {
    auto b = hi > 0.0 ? static_cast<std::size_t>(v / hi * static_cast<double>(bins)) : 0;
    h.counts[std::min(b, bins - 1)]++;
    h.mean += v;
    h.total++;
  };
  for (std::size_t l = 0; l < frames; ++l) {
    bool equal = true;
    std::size_t active = 0;
    for (std::size_t s = 0; s < speakers; ++s) {
      equal = equal && (preds(l, s) != 0) == (truth.values(l, s) != 0);
      active += truth.values(l, s) != 0;
    }
    add(equal ? r.correct : r.incorrect, entropy[l]);
    add(r.by_speaker_count[active], entropy[l]);
  }
  for (Histogram* h : {&r.correct, &r.incorrect}) h->mean = h->total ? h->mean / h->total : 0.0;
  for (auto& h : r.by_speaker_count) h.mean = h.total ? h.mean / h.total : 0.0;
  return r;
}

void write_entropy_csv(std::ostream& out, const EntropyReport& report) {
  out << "group,bin_lo,bin_hi,count,group_mean,group_total\n" << std::setprecision(8);
  auto emit = [&](const std::string& name, const Histogram& h) {
    const double width = (h.hi - h.lo) / static_cast<double>(h.counts.size());
    for (std::size_t b = 0; b < h.counts.size(); ++b)
      out << name << ',' << h.lo + b * width << ',' << h.lo + (b + 1) * width << ','
          << h.counts[b] << ',' << h.mean << ',' << h.total << '\n';
  };
  emit("correct", report.correct);
  emit("incorrect", report.incorrect);
  for (std::size_t k = 0; k < report.by_speaker_count.size(); ++k)
    emit("speakers_" + std::to_string(k), report.by_speaker_count[k]);
}

void write_entropy_svg(std::ostream& out, const EntropyReport& report) {
  constexpr double kW = 640, kH = 320, kPad = 40;
  const std::size_t bins = report.correct.counts.size();
  auto density = [](const Histogram& h, std::size_t b) {
    return h.total ? static_cast<double>(h.counts[b]) / h.total : 0.0;
  };
  double top = 1e-12;
  for (std::size_t b = 0; b < bins; ++b)
    top = std::max({top, density(report.correct, b), density(report.incorrect, b)});
  const double bw = (kW - 2 * kPad) / bins;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  auto bars = [&](const Histogram& h, const char* colour) {
    for (std::size_t b = 0; b < bins; ++b) {
      const double bh = density(h, b) / top * (kH - 2 * kPad);
      out << "<rect x=\"" << kPad + b * bw << "\" y=\"" << kH - kPad - bh << "\" width=\"" << bw
          << "\" height=\"" << bh << "\" fill=\"" << colour << "\" fill-opacity=\"0.5\"/>\n";
    }
  };
  bars(report.correct, "steelblue");
  bars(report.incorrect, "firebrick");
  out << "<line x1=\"" << kPad << "\" y1=\"" << kH - kPad << "\" x2=\"" << kW - kPad
      << "\" y2=\"" << kH - kPad << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << kPad << "\" y=\"" << kPad / 2 << "\" font-size=\"12\">correct mean "
      << report.correct.mean << " bits, incorrect mean " << report.incorrect.mean
      << " bits</text>\n<text x=\"" << kW - kPad << "\" y=\"" << kH - kPad / 3
      << "\" font-size=\"12\" text-anchor=\"end\">" << report.correct.hi << " bits</text>\n"
      << "</svg>\n";
}

std::vector<CalibrationBin> calibration_curve(const NdArray<double>& mean_probs,
                                              const LabelMatrix& truth, std::size_t bins) {
  if (bins == 0) throw InvalidArgument("calibration_curve: bins must be positive");
  if (mean_probs.rank() != 2 || mean_probs.dim(0) != truth.frames() ||
      mean_probs.dim(1) != truth.speakers())
    throw InvalidArgument("calibration_curve: shapes disagree");
  std::vector<CalibrationBin> curve(bins);
  std::vector<double> psum(bins), pos(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    curve[b].lo = static_cast<double>(b) / bins;
    curve[b].hi = static_cast<double>(b + 1) / bins;
  }
  for (std::size_t i = 0; i < mean_probs.size(); ++i) {
    const double p = mean_probs.flat()[i];
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("calibration_curve: p outside [0, 1]");
    const std::size_t b = std::min(static_cast<std::size_t>(p * bins), bins - 1);
    curve[b].count++;
    psum[b] += p;
    pos[b] += truth.values.flat()[i] != 0;
  }
  for (std::size_t b = 0; b < bins; ++b)
    if (curve[b].count) {
      curve[b].predicted = psum[b] / curve[b].count;
      curve[b].observed = pos[b] / curve[b].count;
    }
  return curve;
}

void write_calibration_csv(std::ostream& out, const std::vector<CalibrationBin>& curve) {
  out << "bin_lo,bin_hi,count,predicted,observed\n" << std::setprecision(8);
  for (const auto& b : curve) {
    out << b.lo << ',' << b.hi << ',' << b.count << ',';
    if (b.predicted) out << *b.predicted;
    out << ',';
    if (b.observed) out << *b.observed;
    out << '\n';
  }
}

}  // namespace diaruq
