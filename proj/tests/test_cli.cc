// diaruq/tests/test_cli.cc
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

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "diaruq/config.h"
#include "diaruq/container.h"
#include "diaruq/pipeline.h"
#include "diaruq/reseg.h"
#include "diaruq/score.h"
#include "support.h"

using namespace diaruq;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string(DIARUQ_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t entries(const fs::path& dir) {
  if (!fs::exists(dir)) return 0;
  return static_cast<std::size_t>(std::distance(fs::directory_iterator(dir), {}));
}

const char* kSynthRun = R"([synth]
frames = 80
speakers = 3
passes = 10
seed = 4

[[synth.model]]
id = "clean"

[resegment]
method = "threshold"

[output]
dir = "out"
file_id = "synthetic"
entropy_svg = true
)";

}  // namespace

TEST_CASE("container round trip is bit exact") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> U(-1e6f, 1e6f);
  TensorFile f;
  f.data = NdArray<float>({3, 4, 5});
  for (float& v : f.data.flat()) v = U(rng);
  f.data.flat()[7] = -0.0f;
  f.meta = {{"model_id", "m"}, {"speaker_order", {"A", "B"}}};
  std::stringstream buf;
  write_container(buf, f);
  const TensorFile g = read_container(buf);
  CHECK(g.magic == "DUQT");
  CHECK(g.data.shape() == f.data.shape());
  CHECK(std::memcmp(g.data.flat().data(), f.data.flat().data(), f.data.size() * 4) == 0);
  CHECK(g.meta == f.meta);
}

TEST_CASE("container layout is little-endian") {
  TensorFile f;
  f.data = NdArray<float>({2}, 0.0f);
  f.data.flat()[0] = 1.0f;  // 0x3f800000
  f.data.flat()[1] = -2.0f;  // 0xc0000000
  std::stringstream buf;
  write_container(buf, f);
  const std::string b = buf.str();
  const unsigned char expect[] = {'D', 'U', 'Q', 'T', 1, 0, 0, 0,   1, 0,    0,    0,
                                  2,   0,   0,   0,   1, 0, 0, 0,   0, 0,    0x80, 0x3f,
                                  0,   0,   0,   0xc0};
  REQUIRE(b.size() > sizeof(expect));
  CHECK(std::memcmp(b.data(), expect, sizeof(expect)) == 0);
}

TEST_CASE("damaged containers raise format errors") {
  TensorFile f;
  f.data = NdArray<float>({10, 10}, 0.5f);
  std::stringstream buf;
  write_container(buf, f);
  const std::string whole = buf.str();
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, std::size_t{50},
                          whole.size() - 1}) {
    std::stringstream part(whole.substr(0, cut));
    CHECK_THROWS_AS(read_container(part), FormatError);
  }
  std::string wrong = whole;
  wrong[0] = 'X';
  std::stringstream bad_magic(wrong);
  CHECK_THROWS_AS(read_container(bad_magic), FormatError);
  wrong = whole;
  wrong[4] = 9;
  std::stringstream bad_version(wrong);
  CHECK_THROWS_AS(read_container(bad_version), FormatError);
  // A huge declared size must not be trusted.
  wrong = whole;
  wrong[12] = '\xff';
  wrong[13] = '\xff';
  wrong[14] = '\xff';
  std::stringstream huge(wrong);
  CHECK_THROWS_AS(read_container(huge), FormatError);
}

TEST_CASE("sample tensors in binary and CSV form") {
  const auto dir = testing::scratch_dir("samples");
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  SampleTensor t;
  t.probs = NdArray<double>({4, 6, 2});
  for (double& v : t.probs.flat()) v = U(rng);
  t.model_id = "mcd";
  t.speaker_order = {"A", "B"};
  write_samples(dir / "s.duqs", t);
  write_samples(dir / "s.csv", t);
  CHECK(sniff_magic(dir / "s.duqs") == "DUQS");
  const SampleTensor b = read_samples(dir / "s.duqs");
  const SampleTensor c = read_samples(dir / "s.csv");
  for (const auto* r : {&b, &c}) {
    CHECK(r->model_id == "mcd");
    CHECK(r->speaker_order == t.speaker_order);
    CHECK(r->probs.shape() == t.probs.shape());
    for (std::size_t i = 0; i < t.probs.size(); ++i)
      REQUIRE(std::abs(r->probs.flat()[i] - t.probs.flat()[i]) <= 1e-6);
  }
  for (std::size_t i = 0; i < t.probs.size(); ++i)
    REQUIRE(b.probs.flat()[i] == static_cast<double>(static_cast<float>(t.probs.flat()[i])));

  testing::write_text(dir / "bad.csv", "# shape 1,1,1\n0,0,0,0.5\n0,0,0,oops\n");
  CHECK_THROWS(read_samples(dir / "bad.csv"));
}

TEST_CASE("labels and aggregates survive the container") {
  const auto dir = testing::scratch_dir("labels");
  LabelMatrix y;
  y.values = BinaryMatrix({5, 2});
  y.values(1, 0) = y.values(4, 1) = 1;
  y.speaker_order = {"X", "Y"};
  write_labels(dir / "y.duqt", y);
  const LabelMatrix back = read_labels(dir / "y.duqt");
  CHECK(back.values == y.values);
  CHECK(back.speaker_order == y.speaker_order);
  CHECK(back.frame_spec == y.frame_spec);

  SynthSpec spec;
  spec.frames = 10;
  spec.passes = 12;
  spec.spread = 0.1;
  const Aggregate a = aggregate(gen_samples(gen_truth(spec), spec));
  write_aggregate(dir / "a.duqt", a);
  const Aggregate r = read_aggregate(dir / "a.duqt");
  REQUIRE(r.cells.size() == a.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(r.cells[i].mean_prob == doctest::Approx(a.cells[i].mean_prob).epsilon(1e-6));
    CHECK(r.cells[i].trunc.variance == doctest::Approx(a.cells[i].trunc.variance).epsilon(1e-5));
    CHECK(r.cells[i].modal_pred == a.cells[i].modal_pred);
  }
}

TEST_CASE("run configuration parsing") {
  const RunConfig c = parse_run_config(R"(
[frame]
mod_step_s = 0.25

[resegment]
method = "smooth"
gap = 2

[smoother]
f0 = 0.9
h = [1.0, 0.5]

[score]
collar_s = 0.25
)",
                                       "/data");
  CHECK(c.method == ResegMethod::kSmooth);
  CHECK(c.gap == 2);
  CHECK(c.smoother.f0 == 0.9);
  CHECK(c.smoother.h == std::vector<double>{1.0, 0.5});
  CHECK(c.smoother_h_set);
  CHECK(c.collar_s == 0.25);
  CHECK(c.output_dir == fs::path("/data/out"));

  SUBCASE("unknown keys point at their line") {
    try {
      parse_run_config("[score]\ncollar_s = 0.1\ncolar = 2\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
      CHECK(e.column() >= 1);
      CHECK(std::string(e.what()).find("colar") != std::string::npos);
    }
  }
  SUBCASE("malformed TOML") {
    try {
      parse_run_config("[frame]\nmod_step_s = = 1\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
      CHECK(e.column() > 0);
    }
  }
  SUBCASE("wrong types and values") {
    CHECK_THROWS_AS(parse_run_config("[resegment]\nmethod = 3\n"), ParseError);
    CHECK_THROWS_AS(parse_run_config("[resegment]\nmethod = \"viterbi\"\n"), ParseError);
    CHECK_THROWS_AS(parse_run_config("[bogus]\n"), ParseError);
  }
  SUBCASE("smoother TOML reads back") {
    SmootherConfig s;
    s.f0 = 0.85;
    s.q1 = 1e-4;
    s.h = {0.5, 1.25};
    std::ostringstream out;
    write_smoother_toml(out, s);
    const RunConfig r = parse_run_config(out.str());
    CHECK(r.smoother == s);
  }
}

TEST_CASE("synthetic pipeline scores zero and writes its reports") {
  const auto dir = testing::scratch_dir("pipeline_ok");
  testing::write_text(dir / "run.toml", kSynthRun);
  std::ostringstream err;
  PipelineResult res;
  REQUIRE(run_pipeline_file(dir / "run.toml", err, &res) == kExitOk);
  REQUIRE(res.frame);
  REQUIRE(res.time);
  CHECK(res.frame->der_pct == 0.0);
  CHECK(res.time->der_pct == 0.0);
  for (const char* name : {"clean.aggregate.csv", "synthetic.rttm", "synthetic.pred.duqt",
                           "score.json", "entropy.csv", "entropy.svg", "calibration.csv"})
    CHECK(fs::exists(dir / "out" / name));
  for (const auto& p : res.written) CHECK(p.parent_path() == dir / "out");
  const auto j = nlohmann::json::parse(slurp(dir / "out" / "score.json"));
  CHECK(j["frame"]["der_pct"] == 0.0);
  CHECK(j["time"]["der_pct"] == 0.0);
}

TEST_CASE("failures leave no outputs behind") {
  const auto dir = testing::scratch_dir("pipeline_fail");
  testing::write_text(dir / "missing.toml",
                      "[input]\nsamples = [\"nope.duqs\"]\n[output]\ndir = \"out\"\n");
  std::ostringstream err;
  CHECK(run_pipeline_file(dir / "missing.toml", err) == kExitValidation);
  CHECK(err.str().find("nope.duqs") != std::string::npos);
  CHECK(!fs::exists(dir / "out"));

  testing::write_text(dir / "broken.toml", "[output\ndir = \"out\"\n");
  std::ostringstream err2;
  CHECK(run_pipeline_file(dir / "broken.toml", err2) == kExitValidation);
  CHECK(!fs::exists(dir / "out"));

  CHECK(exit_code_for(std::make_exception_ptr(std::runtime_error("x"))) == kExitRuntime);
  CHECK(exit_code_for(std::make_exception_ptr(FormatError("x"))) == kExitValidation);
}

TEST_CASE("command line") {
  const auto dir = testing::scratch_dir("cli");
  const auto log = dir / "log.txt";
  testing::write_text(dir / "run.toml", kSynthRun);

  CHECK(run_cli("run " + (dir / "run.toml").string(), log) == 0);
  CHECK(fs::exists(dir / "out" / "score.json"));

  testing::write_text(dir / "bad.toml", "[score]\ncollar_s = 0.1\nspeed = 3\n");
  CHECK(run_cli("run " + (dir / "bad.toml").string(), log) == 2);
  CHECK(slurp(log).find("line 3") != std::string::npos);

  testing::write_text(dir / "missing.toml",
                      "[input]\nsamples = [\"gone.duqs\"]\n[output]\ndir = \"never\"\n");
  CHECK(run_cli("run " + (dir / "missing.toml").string(), log) == 2);
  CHECK(!fs::exists(dir / "never"));
  CHECK(run_cli("frobnicate", log) == 2);

  // synth -> aggregate -> smooth -> score, all through the binary.
  testing::write_text(dir / "synth.toml", kSynthRun);
  REQUIRE(run_cli("synth --spec " + (dir / "synth.toml").string() + " --out " +
                      (dir / "syn").string(),
                  log) == 0);
  CHECK(fs::exists(dir / "syn" / "truth.csv"));
  REQUIRE(fs::exists(dir / "syn" / "clean.duqs"));
  REQUIRE(run_cli("aggregate " + (dir / "syn" / "clean.duqs").string() + " -o " +
                      (dir / "agg.duqt").string() + " --csv " + (dir / "agg.csv").string(),
                  log) == 0);
  REQUIRE(run_cli("smooth " + (dir / "agg.duqt").string() + " --g 0 -o " +
                      (dir / "pred.duqt").string(),
                  log) == 0);
  REQUIRE(run_cli("score --truth " + (dir / "syn" / "truth.csv").string() + " --pred " +
                      (dir / "pred.duqt").string() + " -o " + (dir / "score.json").string(),
                  log) == 0);
  // Smoothing drops one-frame turns, so compare with the library on the same files.
  const LabelMatrix truth = read_labels(dir / "syn" / "truth.duqt");
  const LabelMatrix pred = read_labels(dir / "pred.duqt");
  const auto j = nlohmann::json::parse(slurp(dir / "score.json"));
  CHECK(j["frame"]["der_pct"].get<double>() ==
        doctest::Approx(frame_der(truth, pred.values).der_pct).epsilon(1e-12));
  CHECK(pred.values == simple_smooth(read_aggregate(dir / "agg.duqt").modal_preds(), 0));

  CHECK(run_cli("kalman " + (dir / "agg.duqt").string() + " -o " + (dir / "k.rttm").string(),
                log) == 0);
  CHECK(run_cli("stats " + (dir / "syn" / "truth.csv").string() + " --duration 20", log) == 0);
  CHECK(slurp(log).find("change_rate_hz") != std::string::npos);

  const AudioSignal tone = testing::tone(1.0, 1000.0);
  write_wav(dir / "tone.wav", tone);
  CHECK(run_cli("extract mfcc --delta " + (dir / "tone.wav").string() + " " +
                    (dir / "tone.mfcc.duqt").string(),
                log) == 0);
  CHECK(read_container(dir / "tone.mfcc.duqt").data.shape() ==
        std::vector<std::size_t>{4, 25, 38});
  CHECK(run_cli("extract modspec " + (dir / "tone.wav").string() + " " +
                    (dir / "tone.ms.duqt").string(),
                log) == 0);
  CHECK(read_container(dir / "tone.ms.duqt").data.shape() ==
        std::vector<std::size_t>{4, 25, 501, 2});
  CHECK(entries(dir / "never") == 0);
}
