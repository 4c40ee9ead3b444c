// diaruq/tests/acceptance.cc
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

// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failures, capped at 1.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "diaruq/labels.h"
#include "diaruq/modspec.h"
#include "diaruq/reseg.h"
#include "diaruq/score.h"
#include "diaruq/synth.h"
#include "diaruq/uq.h"
#include "es2008.h"
#include "oracles.h"
#include "support.h"

using namespace diaruq;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

int failures = 0;

void criterion(const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("threw: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool pass = out.ok && secs < budget_s;
  if (!pass) ++failures;
  std::printf("%s  %-28s %7.3fs / %gs  %s\n", pass ? "PASS" : "FAIL", name, secs, budget_s,
              out.detail.c_str());
  std::fflush(stdout);
}

LabelMatrix label_matrix(const oracle::Grid& g) {
  LabelMatrix y;
  y.values = BinaryMatrix({g.size(), g.front().size()});
  for (std::size_t l = 0; l < g.size(); ++l)
    for (std::size_t s = 0; s < g[l].size(); ++s) y.values(l, s) = g[l][s];
  for (std::size_t s = 0; s < g.front().size(); ++s)
    y.speaker_order.push_back(std::string(1, static_cast<char>('A' + s)));
  return y;
}

oracle::Grid random_grid(std::mt19937_64& rng, std::size_t L, std::size_t S) {
  std::bernoulli_distribution b(0.4);
  oracle::Grid g(L, std::vector<int>(S));
  for (auto& row : g)
    for (int& v : row) v = b(rng);
  return g;
}

SegmentList random_segments(std::mt19937_64& rng, const std::vector<std::string>& speakers,
                            double horizon) {
  std::uniform_real_distribution<double> len(0.05, 3.0), gap(0.05, 3.0);
  SegmentList out;
  for (const auto& s : speakers) {
    double t = gap(rng);
    while (t < horizon) {
      const double end = std::min(horizon, t + len(rng));
      out.push_back({s, t, end});
      t = end + gap(rng);
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Segment& a, const Segment& b) { return a.start_s < b.start_s; });
  return out;
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome meeting_table() {
  Outcome out;
  for (const auto& row : es2008::kRows) {
    const MeetingStats st = meeting_stats(es2008::inventory(row), row.duration_s);
    const bool ok = std::abs(st.overlap_pct - row.overlap_pct) < 5e-4 &&
                    std::abs(st.change_rate_hz - row.change_rate_hz) < 5e-4 &&
                    std::abs(st.asd_s - row.asd_s) < 5e-3;
    out.ok = out.ok && ok;
    out.detail += fmt("%s %.4f/%.3f/%.3f%s ", row.meeting, st.overlap_pct, st.change_rate_hz,
                      st.asd_s, ok ? "" : "(mismatch)");
  }
  return out;
}

Outcome frame_der_oracle() {
  std::mt19937_64 rng(1000);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t L = 1 + rng() % 32, S = 1 + rng() % 6;
    const auto y = random_grid(rng, L, S), p = random_grid(rng, L, S);
    const auto ref = oracle::frame_der(y, p);
    const FrameScore s = frame_der(label_matrix(y), label_matrix(p).values);
    if (static_cast<long>(s.miss) != ref.miss || static_cast<long>(s.false_alarm) != ref.fa ||
        static_cast<long>(s.speaker_error) != ref.se || static_cast<long>(s.total) != ref.total)
      return {false, fmt("counts differ at trial %d", trial)};
  }
  return {true, "1000 instances"};
}

Outcome rts_map() {
  std::mt19937_64 rng(100);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t L = 20;
    ObservationSet obs{NdArray<double>({1, L, 1}), NdArray<double>({1, L, 1})};
    std::vector<double> z(L), r(L);
    for (std::size_t l = 0; l < L; ++l) {
      obs.z(0, l, 0) = z[l] = U(rng);
      obs.r(0, l, 0) = r[l] = 1e-3 + 0.2 * U(rng);
    }
    SmootherConfig cfg;
    cfg.q0 = cfg.q1 = 1e-3 + 0.1 * U(rng);
    cfg.x_init = U(rng);
    cfg.p_init = 0.1 + U(rng);
    const auto sm = kalman_smooth(obs, cfg);
    const auto ref = oracle::random_walk_map(z, r, cfg.q0, cfg.x_init, cfg.p_init);
    for (std::size_t l = 0; l < L; ++l)
      worst = std::max({worst, std::abs(sm.x(l, 0) - ref.x[l]), std::abs(sm.p(l, 0) - ref.p[l])});
  }
  return {worst <= 1e-9, fmt("max abs diff %.2e", worst)};
}

Outcome truncnorm_recovery() {
  std::mt19937_64 rng(2023);
  std::uniform_real_distribution<double> mu_d(0.1, 0.9), sigma_d(0.05, 0.4);
  Outcome out{true, ""};
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double mu = mu_d(rng), sigma = sigma_d(rng);
    const auto d = oracle::truncnorm_draws(mu, sigma, 10000, 2023 + static_cast<unsigned>(i));
    const auto f = fit_truncated_gaussian(d);
    const double err = std::max(std::abs(f.mu - mu), std::abs(f.sigma - sigma));
    worst = std::max(worst, err);
    if (err > 0.02) {
      out.ok = false;
      out.detail += fmt("(%.3f,%.3f)->(%.3f,%.3f) ", mu, sigma, f.mu, f.sigma);
    }
  }
  out.detail += fmt("max error %.4f", worst);
  return out;
}

Outcome entropy_signature() {
  SynthSpec spec;
  spec.frames = 2000;
  spec.speakers = 4;
  spec.passes = 200;
  spec.seed = 31;
  spec.noise = {0.15, 0.6, 0.05};
  spec.spread = 0.1;
  const LabelMatrix y = gen_truth(spec);
  const Aggregate a = aggregate(gen_samples(y, spec), {.lambda = 0.5, .fit_trunc = false});
  const auto ent = frame_entropy(a.mean_probs());
  const auto [lo, hi] = std::minmax_element(ent.begin(), ent.end());
  const auto rep = entropy_report(ent, a.modal_preds(), y);
  const bool ok = *lo >= 0.0 && *hi <= 4.0 && rep.incorrect.mean > rep.correct.mean;
  return {ok, fmt("H in [%.3f, %.3f], incorrect %.3f vs correct %.3f bits", *lo, *hi,
                  rep.incorrect.mean, rep.correct.mean)};
}

Outcome fusion_benefit() {
  int wins = 0;
  for (int trial = 0; trial < 50; ++trial) {
    SynthSpec spec;
    spec.frames = 300;
    spec.passes = 60;
    spec.seed = static_cast<std::uint64_t>(trial);
    spec.noise.attenuation = 0.3;
    spec.spread = 0.03;
    const LabelMatrix y = gen_truth(spec);
    const ModelSkew odd{ModelSkew::Region::kOdd, 0.45, 0.3, "odd", 0};
    const ModelSkew even{ModelSkew::Region::kEven, 0.45, 0.3, "even", 1};
    const Aggregate models[] = {aggregate(gen_samples(y, spec, odd)),
                                aggregate(gen_samples(y, spec, even))};
    SmootherConfig cfg;
    cfg.h = {1.0, 1.0};
    const double fused = frame_der(y, fuse_models(models, cfg).preds).der_pct;
    const double best = std::min(frame_der(y, models[0].modal_preds()).der_pct,
                                 frame_der(y, models[1].modal_preds()).der_pct);
    if (fused <= best) ++wins;
  }
  return {wins >= 40, fmt("%d/50 trials", wins)};
}

Outcome smoothing_exhaustive() {
  std::size_t cases = 0;
  for (std::size_t n = 1; n <= 12; ++n)
    for (unsigned bits = 0; bits < (1u << n); ++bits) {
      std::vector<int> v(n);
      BinaryMatrix m({n, 1});
      for (std::size_t i = 0; i < n; ++i) m(i, 0) = static_cast<unsigned char>(v[i] = (bits >> i) & 1);
      for (int g = 0; g <= 4; ++g) {
        const auto ref = oracle::simple_smooth(v, g);
        const BinaryMatrix got = simple_smooth(m, static_cast<std::size_t>(g));
        for (std::size_t i = 0; i < n; ++i)
          if (got(i, 0) != ref[i]) return {false, fmt("length %zu bits %u G %d", n, bits, g)};
        ++cases;
      }
    }
  return {true, fmt("%zu sequences", cases)};
}

Outcome modspec_peak() {
  const AudioSignal sig = testing::am_tone(5.0, 1000.0, 8.0);
  const ModFeatureTensor t = extract_modspec(sig, FrameSpec{}, {.standardize = false});
  const auto& v = t.values;
  const std::size_t L = t.frames();
  if (v.shape() != std::vector<std::size_t>{L, 25, 501, 2})
    return {false, fmt("shape %zu x %zu x %zu", L, v.dim(1), v.dim(2))};
  std::size_t bk = 0, bh = 0;
  double best = -1.0;
  for (std::size_t k = 0; k < 25; ++k)
    for (std::size_t h = 0; h < 501; ++h) {
      double sum = 0.0;
      for (std::size_t l = 0; l < L; ++l) sum += v(l, k, h, kEnv);
      if (sum > best) {
        best = sum;
        bk = k;
        bh = h;
      }
    }
  const bool ok = bk == 3 && bh == 8 && std::abs(t.band_centers_hz[bk] - 1000.0) < 1e-6 &&
                  std::abs(t.mod_freqs_hz[bh] - 8.0) < 1e-6;
  return {ok, fmt("shape (%zu, 25, 501, 2), ENV argmax (%.0f Hz, %.0f Hz)", L,
                  t.band_centers_hz[bk], t.mod_freqs_hz[bh])};
}

Outcome sad_monotone() {
  std::mt19937_64 rng(200);
  const std::vector<std::string> spk{"A", "B", "C"};
  double worst = -1e300;
  for (int trial = 0; trial < 200; ++trial) {
    const auto t = random_segments(rng, spk, 60.0);
    const auto p = random_segments(rng, spk, 60.0);
    SadMask mask;
    for (const auto& s : random_segments(rng, {"sad"}, 60.0))
      mask.intervals.push_back({s.start_s, s.end_s});
    TimeDerOptions opts;
    opts.speakers = spk;
    const double diff = time_der(t, apply_gt_sad(p, mask), opts).fa_s - time_der(t, p, opts).fa_s;
    worst = std::max(worst, diff);
  }
  return {worst <= 1e-9, fmt("max FA change %+.3e s", worst)};
}

Outcome end_to_end() {
  SynthSpec spec;
  spec.frames = 400;
  spec.passes = 20;
  spec.seed = 77;
  const LabelMatrix y = gen_truth(spec);
  const Aggregate a = aggregate(gen_samples(y, spec));
  const BinaryMatrix preds = threshold_states(a.mean_probs(), 0.5);
  const double eps = frame_der(y, preds).der_pct;
  const auto truth = segments_from_utterances(labels_to_utterances(y));
  TimeDerOptions opts;
  opts.speakers = y.speaker_order;
  const double tau =
      time_der(truth, frames_to_segments(preds, spec.frame_spec, y.speaker_order), opts).der_pct;
  return {eps == 0.0 && tau == 0.0, fmt("DER_eps %g, DER_tau %g", eps, tau)};
}

}  // namespace

int main() {
  criterion("meeting statistics table", 1.0, meeting_table);
  criterion("frame DER oracle", 5.0, frame_der_oracle);
  criterion("RTS equals MAP", 5.0, rts_map);
  criterion("truncated Gaussian recovery", 30.0, truncnorm_recovery);
  criterion("entropy bounds and signature", 30.0, entropy_signature);
  criterion("fusion benefit", 60.0, fusion_benefit);
  criterion("simple smoothing exhaustive", 10.0, smoothing_exhaustive);
  criterion("modulation spectrum peak", 10.0, modspec_peak);
  criterion("GT-SAD false alarm", 5.0, sad_monotone);
  criterion("end-to-end round trip", 5.0, end_to_end);
  std::printf("%d failed\n", failures);
  return failures ? 1 : 0;
}
