// diaruq/tests/test_reseg.cc
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

#include <doctest.h>

#include <cmath>
#include <random>

#include "diaruq/reseg.h"
#include "diaruq/score.h"
#include "diaruq/synth.h"
#include "oracles.h"

using namespace diaruq;

namespace {

BinaryMatrix as_column(const std::vector<int>& v) {
  BinaryMatrix m({v.size(), 1});
  for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = static_cast<unsigned char>(v[i]);
  return m;
}

std::vector<int> from_column(const BinaryMatrix& m, std::size_t s = 0) {
  std::vector<int> v(m.dim(0));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = m(i, s);
  return v;
}

ObservationSet single(const std::vector<double>& z, const std::vector<double>& r) {
  ObservationSet o{NdArray<double>({1, z.size(), 1}), NdArray<double>({1, z.size(), 1})};
  for (std::size_t l = 0; l < z.size(); ++l) {
    o.z(0, l, 0) = z[l];
    o.r(0, l, 0) = r[l];
  }
  return o;
}

SmootherConfig random_walk(double q) {
  SmootherConfig c;
  c.q0 = c.q1 = q;
  return c;
}

Aggregate agg_from(const NdArray<double>& mean, const NdArray<double>& var) {
  Aggregate a;
  a.frames = mean.dim(0);
  a.speakers = mean.dim(1);
  a.cells.resize(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    a.cells[i].mean_prob = mean.flat()[i];
    a.cells[i].trunc.variance = var.flat()[i];
  }
  return a;
}

}  // namespace

TEST_CASE("simple smoothing examples") {
  CHECK(from_column(simple_smooth(as_column({1, 0, 0, 1}), 3)) == std::vector<int>{1, 1, 1, 1});
  CHECK(from_column(simple_smooth(as_column({0, 1, 0}), 3)) == std::vector<int>{0, 0, 0});
  CHECK(from_column(simple_smooth(as_column({1, 0, 0, 0, 0, 1}), 3)) ==
        std::vector<int>(6, 0));
  CHECK(from_column(simple_smooth(as_column({0, 0, 1, 1, 0}), 0)) ==
        std::vector<int>{0, 0, 1, 1, 0});
}

TEST_CASE("simple smoothing against the two-pass reference") {
  for (int n = 1; n <= 10; ++n)
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      std::vector<int> v(n);
      for (int i = 0; i < n; ++i) v[i] = (mask >> i) & 1u;
      for (int g = 0; g <= 4; ++g)
        REQUIRE(from_column(simple_smooth(as_column(v), g)) == oracle::simple_smooth(v, g));
    }
}

TEST_CASE("simple smoothing is idempotent and column-wise") {
  std::mt19937_64 rng(21);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t L = 1 + rng() % 64, S = 1 + rng() % 4, G = rng() % 11;
    BinaryMatrix m({L, S});
    for (auto& v : m.flat()) v = coin(rng);
    const BinaryMatrix once = simple_smooth(m, G);
    REQUIRE(simple_smooth(once, G) == once);
    for (std::size_t s = 0; s < S; ++s) {
      std::vector<int> col(L);
      for (std::size_t l = 0; l < L; ++l) col[l] = m(l, s);
      REQUIRE(from_column(once, s) == oracle::simple_smooth(col, static_cast<int>(G)));
    }
  }
}

TEST_CASE("constant observations pull the state to the constant") {
  const double c = 0.8, r = 1e-8;
  const std::size_t L = 60;
  SmootherConfig cfg = random_walk(0.0);
  const auto obs = single(std::vector<double>(L, c), std::vector<double>(L, r));
  // With q = 0 every state equals the precision-weighted mean of prior and data.
  const double expect = (cfg.x_init / cfg.p_init + L * c / r) / (1.0 / cfg.p_init + L / r);
  const SmoothResult sm = kalman_smooth(obs, cfg);
  const SmoothResult fw = forward_only(obs, cfg);
  CHECK(sm.x(L - 1, 0) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(std::abs(sm.x(L - 1, 0) - c) <= 1e-9);
  CHECK(std::abs(fw.x(L - 1, 0) - c) <= 1e-9);
  for (std::size_t l = 0; l < L; ++l) CHECK(sm.x(l, 0) == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("uninformative observations leave the prior alone") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<double> z(100);
  for (double& v : z) v = U(rng);
  const auto sm = kalman_smooth(single(z, std::vector<double>(100, 1e6)), random_walk(0.0));
  for (std::size_t l = 0; l < 100; ++l) CHECK(std::abs(sm.x(l, 0) - 0.5) <= 1e-3);
}

TEST_CASE("smoother equals the dense MAP solution") {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t L = 20;
    std::vector<double> z(L), r(L);
    for (std::size_t l = 0; l < L; ++l) {
      z[l] = U(rng);
      r[l] = 1e-3 + 0.2 * U(rng);
    }
    const double q = 1e-3 + 0.1 * U(rng);
    SmootherConfig cfg = random_walk(q);
    cfg.x_init = U(rng);
    cfg.p_init = 0.1 + U(rng);
    const auto sm = kalman_smooth(single(z, r), cfg);
    const auto ref = oracle::random_walk_map(z, r, q, cfg.x_init, cfg.p_init);
    for (std::size_t l = 0; l < L; ++l) {
      REQUIRE(std::abs(sm.x(l, 0) - ref.x[l]) <= 1e-9);
      REQUIRE(std::abs(sm.p(l, 0) - ref.p[l]) <= 1e-9);
    }
  }
}

TEST_CASE("forward filter contracts") {
  SmootherConfig cfg = random_walk(0.02);
  const auto one = forward_only(single({0.9}, {0.05}), cfg);
  const double pp = cfg.p_init + cfg.q0;
  const double k = pp / (pp + 0.05);
  CHECK(one.x(0, 0) == doctest::Approx(cfg.x_init + k * (0.9 - cfg.x_init)).epsilon(1e-15));
  CHECK(one.p(0, 0) == doctest::Approx((1 - k) * pp).epsilon(1e-15));

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t L = 1 + rng() % 40;
    std::vector<double> z(L), r(L);
    for (std::size_t l = 0; l < L; ++l) {
      z[l] = U(rng);
      r[l] = 1e-4 + 0.1 * U(rng);
    }
    SmootherConfig c;
    c.f0 = 0.8 + 0.2 * U(rng);
    c.f1 = 0.8 + 0.2 * U(rng);
    c.f2 = 0.8 + 0.2 * U(rng);
    c.q0 = 0.1 * U(rng);
    c.q1 = 0.1 * U(rng);
    const auto sm = kalman_smooth(single(z, r), c);
    const auto fw = forward_only(single(z, r), c);
    REQUIRE(sm.x(L - 1, 0) == fw.x(L - 1, 0));
    REQUIRE(sm.p(L - 1, 0) == fw.p(L - 1, 0));
    for (std::size_t l = 0; l < L; ++l) REQUIRE(sm.p(l, 0) > 0.0);

    // Random walk: smoothing never increases uncertainty.
    const auto rw = kalman_smooth(single(z, r), random_walk(c.q0));
    const auto rwf = forward_only(single(z, r), random_walk(c.q0));
    for (std::size_t l = 0; l < L; ++l) {
      REQUIRE(rw.p(l, 0) > 0.0);
      REQUIRE(rw.p(l, 0) <= rwf.p(l, 0) + 1e-12);
    }
  }
}

TEST_CASE("speakers are smoothed independently") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const std::size_t L = 30, S = 3;
  ObservationSet o{NdArray<double>({1, L, S}), NdArray<double>({1, L, S})};
  for (double& v : o.z.flat()) v = U(rng);
  for (double& v : o.r.flat()) v = 0.01 + 0.1 * U(rng);
  SmootherConfig cfg;
  cfg.f1 = 0.9;
  const auto all = kalman_smooth(o, cfg);
  for (std::size_t s = 0; s < S; ++s) {
    std::vector<double> z(L), r(L);
    for (std::size_t l = 0; l < L; ++l) {
      z[l] = o.z(0, l, s);
      r[l] = o.r(0, l, s);
    }
    const auto one = kalman_smooth(single(z, r), cfg);
    for (std::size_t l = 0; l < L; ++l) REQUIRE(all.x(l, s) == one.x(l, 0));
  }
}

TEST_CASE("configuration checks") {
  SmootherConfig c;
  CHECK(!c.validate(1));
  c.f1 = 0.8;
  CHECK(c.validate(1));
  c.f0 = 1.2;
  CHECK_THROWS_AS(c.validate(1), InvalidArgument);
  c = {};
  CHECK_THROWS_AS(c.validate(2), InvalidArgument);
  c.q0 = -1.0;
  CHECK_THROWS_AS(c.validate(1), InvalidArgument);
  ObservationSet bad{NdArray<double>({1, 3, 1}, 0.5), NdArray<double>({1, 3, 1}, 0.0)};
  CHECK_THROWS_AS(kalman_smooth(bad, SmootherConfig{}), InvalidArgument);
}

TEST_CASE("fusion") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const std::size_t L = 50, S = 2;
  NdArray<double> mean({L, S}), var({L, S});
  for (double& v : mean.flat()) v = U(rng);
  for (double& v : var.flat()) v = 0.001 + 0.05 * U(rng);
  const Aggregate a = agg_from(mean, var);

  SUBCASE("one model is kalman plus threshold") {
    SmootherConfig cfg;
    const Aggregate models[] = {a};
    const auto fused = fuse_models(models, cfg);
    const auto sm = kalman_smooth(observations_from(models), cfg);
    CHECK(fused.preds == threshold_states(sm.x, cfg.lambda));
  }
  SUBCASE("two identical models act as one with half the variance") {
    SmootherConfig one_cfg, two_cfg;
    two_cfg.h = {1.0, 1.0};
    const Aggregate one[] = {a};
    const Aggregate two[] = {a, a};
    NdArray<double> half = var;
    for (double& v : half.flat()) v /= 2.0;
    const Aggregate halved[] = {agg_from(mean, half)};
    const auto f1 = fuse_models(one, one_cfg);
    const auto f2 = fuse_models(two, two_cfg);
    const auto fh = fuse_models(halved, one_cfg);
    for (std::size_t i = 0; i < L * S; ++i) {
      REQUIRE(f2.smoothed.x.flat()[i] == doctest::Approx(fh.smoothed.x.flat()[i]).epsilon(1e-10));
      REQUIRE(f2.smoothed.p.flat()[i] <= f1.smoothed.p.flat()[i]);
    }
    CHECK(f2.preds == fh.preds);
  }
  SUBCASE("shape mismatch") {
    const Aggregate other = agg_from(NdArray<double>({L + 1, S}, 0.5), NdArray<double>({L + 1, S}, 0.1));
    const Aggregate models[] = {a, other};
    SmootherConfig cfg;
    cfg.h = {1.0, 1.0};
    CHECK_THROWS_AS(fuse_models(models, cfg), InvalidArgument);
  }
}

TEST_CASE("hyperparameter search") {
  SUBCASE("one-point grid") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    ObservationSet o{NdArray<double>({1, 40, 2}), NdArray<double>({1, 40, 2}, 0.02)};
    LabelMatrix y{BinaryMatrix({40, 2}), {"A", "B"}, {}};
    for (std::size_t i = 0; i < o.z.size(); ++i) {
      o.z.flat()[i] = U(rng);
      y.values.flat()[i] = U(rng) < 0.5;
    }
    HyperGrid g;
    g.f = {0.85};
    g.q = {1e-3};
    g.h = {1.25};
    const FitResult r = fit_hyperparams(o, y, g);
    CHECK(r.config.f0 == 0.85);
    CHECK(r.config.f2 == 0.85);
    CHECK(r.config.q1 == 1e-3);
    CHECK(r.config.h == std::vector<double>{1.25});
  }
  SUBCASE("ties go to the smallest tuple") {
    ObservationSet o{NdArray<double>({1, 30, 1}), NdArray<double>({1, 30, 1}, 1e-6)};
    LabelMatrix y{BinaryMatrix({30, 1}), {"A"}, {}};
    for (std::size_t l = 0; l < 30; ++l) {
      const bool on = (l / 10) % 2 == 0;
      o.z(0, l, 0) = on ? 1.0 : 0.0;
      y.values(l, 0) = on;
    }
    HyperGrid g;
    g.f = {1.0, 0.9};
    g.q = {1e-2, 1e-3};
    g.h = {1.0, 0.5};
    const FitResult r = fit_hyperparams(o, y, g);
    CHECK(r.der_pct == 0.0);
    CHECK(r.config.f0 == 0.9);
    CHECK(r.config.f1 == 0.9);
    CHECK(r.config.f2 == 0.9);
    CHECK(r.config.q0 == 1e-3);
    CHECK(r.config.q1 == 1e-3);
    CHECK(r.config.h == std::vector<double>{0.5});
  }
  SUBCASE("empty grid") {
    ObservationSet o{NdArray<double>({1, 3, 1}, 0.5), NdArray<double>({1, 3, 1}, 0.1)};
    LabelMatrix y{BinaryMatrix({3, 1}), {"A"}, {}};
    HyperGrid g;
    g.q.clear();
    CHECK_THROWS_AS(fit_hyperparams(o, y, g), InvalidArgument);
  }
  SUBCASE("recovers a generating random walk") {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> N(0.0, 1.0);
    const std::size_t L = 400, S = 3;
    const double f = 0.95, q = 1e-1, r = 0.04;
    ObservationSet o{NdArray<double>({1, L, S}), NdArray<double>({1, L, S}, r)};
    LabelMatrix y{BinaryMatrix({L, S}), {"A", "B", "C"}, {}};
    for (std::size_t s = 0; s < S; ++s) {
      double x = 0.5;
      for (std::size_t l = 0; l < L; ++l) {
        x = f * x + std::sqrt(q) * N(rng);
        y.values(l, s) = x > 0.5;
        o.z(0, l, s) = x + std::sqrt(r) * N(rng);
      }
    }
    SmootherConfig gen;
    gen.f0 = gen.f1 = gen.f2 = f;
    gen.q0 = gen.q1 = q;
    const double gen_der =
        frame_der(y, threshold_states(kalman_smooth(o, gen).x, gen.lambda)).der_pct;
    const FitResult fit = fit_hyperparams(o, y);
    CHECK(fit.der_pct <= gen_der * 1.05);
    CHECK(fit.der_pct ==
          frame_der(y, threshold_states(kalman_smooth(o, fit.config).x, 0.5)).der_pct);
  }
}
