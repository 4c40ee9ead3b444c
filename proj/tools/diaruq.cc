// diaruq/tools/diaruq.cc
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

// diaruq: batch front end for feature extraction, uncertainty aggregation,
// resegmentation and scoring.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "diaruq/cepstral.h"
#include "diaruq/config.h"
#include "diaruq/container.h"
#include "diaruq/modspec.h"
#include "diaruq/pipeline.h"
#include "diaruq/reseg.h"
#include "diaruq/score.h"
#include "diaruq/synth.h"
#include "diaruq/uq.h"

namespace fs = std::filesystem;
using namespace diaruq;

namespace {

std::ofstream open_output(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

void require_inputs(const std::vector<fs::path>& paths) {
  for (const auto& p : paths)
    if (!fs::is_regular_file(p)) throw InvalidArgument("input not found: " + p.string());
}

std::vector<Aggregate> load_models(const std::vector<fs::path>& inputs, double lambda) {
  require_inputs(inputs);
  AggregateOptions opts;
  opts.lambda = lambda;
  std::vector<Aggregate> out;
  for (const auto& p : inputs) out.push_back(read_aggregate(p, opts));
  return out;
}

// Predictions go to RTTM, or to a label container for a .duqt path.
void emit_predictions(const fs::path& out_path, const BinaryMatrix& preds,
                      const Aggregate& like, const std::string& file_id) {
  std::vector<std::string> speakers = like.speaker_order;
  if (speakers.empty()) speakers = synth_speaker_ids(like.speakers);
  if (out_path.extension() == ".duqt") {
    write_labels(out_path, {preds, speakers, like.frame_spec});
    return;
  }
  const SegmentList segs = frames_to_segments(preds, like.frame_spec, speakers);
  if (out_path.empty() || out_path == "-") {
    write_rttm(std::cout, segs, file_id);
  } else {
    auto out = open_output(out_path);
    write_rttm(out, segs, file_id);
  }
}

LabelMatrix truth_labels(const fs::path& truth, const Aggregate& like) {
  const auto utts = read_truth(truth);
  const double duration = static_cast<double>(like.frames) * like.frame_spec.mod_step_s;
  std::vector<std::string> speakers = like.speaker_order;
  if (speakers.empty()) speakers = speakers_of(utts);
  return utterances_to_labels(utts, like.frame_spec, duration, speakers);
}

FrameSpec frame_spec_from(const std::optional<fs::path>& config) {
  return config ? load_run_config(*config).frame_spec : FrameSpec{};
}

SegmentList read_segments(const fs::path& p) {
  if (p.extension() == ".rttm") return read_rttm(p);
  return segments_from_utterances(read_truth(p));
}

std::vector<Utterance> as_utterances(const SegmentList& segs) {
  std::vector<Utterance> out;
  for (const auto& s : segs) out.push_back({s.speaker_id, s.start_s, s.end_s});
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diaruq: diarization with uncertainty quantification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "diaruq 0.1.0");

  // extract
  auto* extract = app.add_subcommand("extract", "Compute modulation or cepstral features");
  std::string feature_kind;
  fs::path wav_in, feat_out;
  std::optional<fs::path> extract_cfg;
  int delta = 0;
  double snr_db = std::numeric_limits<double>::infinity();
  bool dither = false;
  std::uint64_t seed = 0;
  bool no_standardize = false;
  extract->add_option("kind", feature_kind, "modspec or mfcc")
      ->required()
      ->check(CLI::IsMember({"modspec", "mfcc"}));
  extract->add_option("input", wav_in, "16-bit PCM mono WAV")->required();
  extract->add_option("output,-o,--out", feat_out, "Output tensor (.duqt)")->required();
  extract->add_option("--config", extract_cfg, "TOML with a [frame] table");
  auto* delta_flag =
      extract->add_flag_callback("--delta", [&] { delta = 1; }, "Append MFCC deltas");
  extract->add_flag_callback("--delta-delta", [&] { delta = 2; }, "Append deltas and delta-deltas")
      ->excludes(delta_flag);
  extract->add_option("--snr-db", snr_db, "Add white noise at this SNR");
  extract->add_flag("--dither", dither, "Add +-4 LSB uniform dither");
  extract->add_option("--seed", seed, "Noise seed");
  extract->add_flag("--no-standardize", no_standardize, "Skip self-standardisation");

  // aggregate
  auto* agg_cmd = app.add_subcommand("aggregate", "Summarise Monte Carlo samples");
  fs::path agg_in, agg_out;
  std::optional<fs::path> agg_csv;
  double lambda = 0.5;
  agg_cmd->add_option("input", agg_in, "Sample tensor (.duqs or .csv)")->required();
  agg_cmd->add_option("-o,--out", agg_out, "Aggregate tensor (.duqt)")->required();
  agg_cmd->add_option("--csv", agg_csv, "Also write a per-cell CSV");
  agg_cmd->add_option("--lambda", lambda, "Decision threshold")->check(CLI::Range(0.0, 1.0));

  // smooth
  auto* smooth = app.add_subcommand("smooth", "Threshold and bridge/despike predictions");
  fs::path smooth_in, pred_out = "-";
  std::size_t gap = kDefaultGap;
  std::string file_id = "recording";
  smooth->add_option("input", smooth_in, "Samples or aggregate")->required();
  smooth->add_option("--g", gap, "Largest gap to bridge")->check(CLI::Range(0, 10));
  smooth->add_option("--lambda", lambda, "Decision threshold")->check(CLI::Range(0.0, 1.0));
  smooth->add_option("-o,--out", pred_out, "RTTM (default stdout) or .duqt labels");
  smooth->add_option("--file-id", file_id, "RTTM file field");

  // kalman / fuse
  std::vector<fs::path> kal_in;
  std::optional<fs::path> kal_cfg;
  bool forward_only_flag = false;
  auto* kalman = app.add_subcommand("kalman", "Kalman smoothing of one or more models");
  auto* fuse = app.add_subcommand("fuse", "Kalman fusion of several models");
  for (auto* c : {kalman, fuse}) {
    c->add_option("inputs", kal_in, "Samples or aggregates")->required();
    c->add_option("--config", kal_cfg, "TOML with a [smoother] table");
    c->add_flag("--forward-only", forward_only_flag, "Skip the backward sweep");
    c->add_option("-o,--out", pred_out, "RTTM (default stdout) or .duqt labels");
    c->add_option("--file-id", file_id, "RTTM file field");
  }

  // fit-kalman
  auto* fit = app.add_subcommand("fit-kalman", "Grid-fit smoother parameters");
  std::vector<fs::path> fit_in;
  fs::path val_labels, fit_out = "-";
  fit->add_option("inputs", fit_in, "Validation samples or aggregates")->required();
  fit->add_option("--val-labels", val_labels, "Validation truth (CSV or words XML)")
      ->required();
  fit->add_option("-o,--out", fit_out, "TOML output (default stdout)");
  fit->add_flag("--forward-only", forward_only_flag, "Fit the forward filter only");

  // score
  auto* score = app.add_subcommand("score", "Frame and time DER");
  fs::path truth_path, pred_path;
  std::optional<fs::path> sad_path, score_out;
  double collar = 0.0;
  bool permute = false;
  std::optional<double> duration;
  score->add_option("--truth", truth_path, "Truth CSV, words XML or RTTM")->required();
  score->add_option("--pred", pred_path, "Predicted RTTM or .duqt labels")->required();
  score->add_option("--sad", sad_path, "Speech mask CSV applied to predictions");
  score->add_option("--collar", collar, "Seconds excised around truth boundaries")
      ->check(CLI::NonNegativeNumber);
  score->add_flag("--permute", permute, "Optimal speaker mapping instead of identity");
  score->add_option("--duration", duration, "Recording length for frame scoring");
  score->add_option("-o,--out", score_out, "JSON report (default stdout)");

  // stats
  auto* stats = app.add_subcommand("stats", "Meeting statistics");
  std::vector<fs::path> stats_in;
  double stats_duration = 0.0;
  stats->add_option("inputs", stats_in, "Utterance CSV or words XML files")->required();
  stats->add_option("--duration", stats_duration, "Meeting length in seconds")
      ->required()
      ->check(CLI::PositiveNumber);

  // synth
  auto* synth = app.add_subcommand("synth", "Synthetic truth and sample streams");
  fs::path synth_spec, synth_out;
  synth->add_option("--spec", synth_spec, "TOML with [synth] and [[synth.model]]")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();
  bool synth_csv = false;
  synth->add_flag("--csv", synth_csv, "Write samples as CSV");

  // report
  auto* report = app.add_subcommand("report", "Entropy histograms and calibration");
  std::vector<fs::path> rep_in;
  fs::path rep_truth, rep_out;
  std::optional<fs::path> rep_pred;
  std::size_t bins = 40;
  bool svg = false;
  report->add_option("inputs", rep_in, "Samples or aggregates")->required();
  report->add_option("--truth", rep_truth, "Truth CSV or words XML")->required();
  report->add_option("--pred", rep_pred, "Predicted .duqt labels (default: thresholded mean)");
  report->add_option("--out", rep_out, "Output directory")->required();
  report->add_option("--bins", bins, "Entropy histogram bins")->check(CLI::PositiveNumber);
  report->add_flag("--svg", svg, "Also render entropy.svg");
  report->add_option("--lambda", lambda, "Decision threshold")->check(CLI::Range(0.0, 1.0));

  // run
  auto* run = app.add_subcommand("run", "Run a configured pipeline");
  fs::path run_cfg;
  run->add_option("config", run_cfg, "Run TOML")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*run) {
      PipelineResult r;
      const int code = run_pipeline_file(run_cfg, std::cerr, &r);
      if (code == kExitOk && r.frame)
        std::cout << score_report_json(r.frame, r.time) << '\n';
      return code;
    }

    if (*extract) {
      if (!fs::is_regular_file(wav_in)) throw InvalidArgument("input not found: " + wav_in.string());
      const FrameSpec spec = frame_spec_from(extract_cfg);
      AudioSignal sig = read_wav(wav_in);
      if (std::isfinite(snr_db)) sig = add_awgn(sig, snr_db, seed);
      if (dither) sig = add_dither(sig, seed + 1);
      if (feat_out.has_parent_path()) fs::create_directories(feat_out.parent_path());
      if (feature_kind == "modspec") {
        ModspecOptions opts;
        opts.standardize = !no_standardize;
        write_features(feat_out, extract_modspec(sig, spec, opts));
      } else {
        write_features(feat_out, extract_cepstral(sig, spec, delta));
      }
      return kExitOk;
    }

    if (*agg_cmd) {
      require_inputs({agg_in});
      AggregateOptions opts;
      opts.lambda = lambda;
      const Aggregate agg = aggregate(read_samples(agg_in), opts);
      if (agg_out.has_parent_path()) fs::create_directories(agg_out.parent_path());
      write_aggregate(agg_out, agg);
      if (agg_csv) {
        auto out = open_output(*agg_csv);
        write_aggregate_csv(out, agg);
      }
      return kExitOk;
    }

    if (*smooth) {
      const auto models = load_models({smooth_in}, lambda);
      const BinaryMatrix preds =
          simple_smooth(threshold_states(models.front().mean_probs(), lambda), gap);
      emit_predictions(pred_out, preds, models.front(), file_id);
      return kExitOk;
    }

    if (*kalman || *fuse) {
      SmootherConfig cfg;
      bool h_set = false;
      if (kal_cfg) {
        const RunConfig rc = load_run_config(*kal_cfg);
        cfg = rc.smoother;
        h_set = rc.smoother_h_set;
      }
      const auto models = load_models(kal_in, cfg.lambda);
      if (*fuse && models.size() < 2) throw InvalidArgument("fuse needs at least two models");
      if (!h_set) cfg.h.assign(models.size(), 1.0);
      if (cfg.validate(models.size()))
        std::cerr << "diaruq: warning: f1 < f0 in the smoother config\n";
      const FusionResult fr = fuse_models(models, cfg, !forward_only_flag);
      if (!fr.smoothed.regularized_frames.empty())
        std::cerr << "diaruq: warning: " << fr.smoothed.regularized_frames.size()
                  << " singular innovation matrices regularised\n";
      emit_predictions(pred_out, fr.preds, models.front(), file_id);
      return kExitOk;
    }

    if (*fit) {
      const auto models = load_models(fit_in, 0.5);
      require_inputs({val_labels});
      const LabelMatrix truth = truth_labels(val_labels, models.front());
      HyperGrid grid;
      grid.backward = !forward_only_flag;
      const FitResult fr = fit_hyperparams(observations_from(models), truth, grid);
      std::cerr << "diaruq: validation DER " << fr.der_pct << "%\n";
      if (fit_out == "-") {
        write_smoother_toml(std::cout, fr.config);
      } else {
        auto out = open_output(fit_out);
        write_smoother_toml(out, fr.config);
      }
      return kExitOk;
    }

    if (*score) {
      require_inputs({truth_path, pred_path});
      if (sad_path) require_inputs({*sad_path});
      const std::vector<Utterance> truth_utts = as_utterances(read_segments(truth_path));
      SegmentList pred;
      std::optional<LabelMatrix> pred_labels;
      if (pred_path.extension() == ".duqt") {
        pred_labels = read_labels(pred_path);
        pred = frames_to_segments(pred_labels->values, pred_labels->frame_spec,
                                  pred_labels->speaker_order);
      } else {
        pred = read_rttm(pred_path);
      }
      if (sad_path) pred = apply_gt_sad(pred, read_sad_csv(*sad_path));

      // Frame scoring needs a frame grid: the label file's, or the default
      // one when a duration is given.
      std::optional<FrameScore> fscore;
      const std::vector<Utterance> pred_utts = as_utterances(pred);
      if (pred_labels || duration) {
        const FrameSpec spec = pred_labels ? pred_labels->frame_spec : FrameSpec{};
        const double dur = duration.value_or(
            pred_labels ? static_cast<double>(pred_labels->frames()) * spec.mod_step_s : 0.0);
        std::vector<std::string> speakers;
        if (pred_labels) {
          speakers = pred_labels->speaker_order;
        } else {
          speakers = speakers_of(truth_utts);
          for (const auto& id : speakers_of(pred_utts))
            if (std::find(speakers.begin(), speakers.end(), id) == speakers.end())
              speakers.push_back(id);
        }
        fscore = frame_der(utterances_to_labels(truth_utts, spec, dur, speakers),
                           utterances_to_labels(pred_utts, spec, dur, speakers).values);
      }

      TimeDerOptions opts;
      opts.collar_s = collar;
      opts.permute = permute;
      if (!permute)
        opts.speakers = pred_labels ? pred_labels->speaker_order : speakers_of(truth_utts);
      const TimeScore tscore = time_der(segments_from_utterances(truth_utts), pred, opts);
      const std::string json = score_report_json(fscore, tscore);
      if (score_out) {
        auto out = open_output(*score_out);
        out << json << '\n';
      } else {
        std::cout << json << '\n';
      }
      return kExitOk;
    }

    if (*stats) {
      require_inputs(stats_in);
      std::vector<Utterance> utts;
      for (const auto& p : stats_in) {
        auto u = read_truth(p);
        utts.insert(utts.end(), u.begin(), u.end());
      }
      const MeetingStats st = meeting_stats(utts, stats_duration);
      nlohmann::ordered_json j = {{"duration_s", st.duration_s},
                                  {"total_speech_s", st.total_speech_s},
                                  {"utterances", st.utterances},
                                  {"combined_speech_s", st.combined_speech_s},
                                  {"segments", st.segments},
                                  {"overlap_pct", st.overlap_pct},
                                  {"multi_speaker_pct", st.multi_speaker_pct},
                                  {"change_rate_hz", st.change_rate_hz},
                                  {"asd_s", st.asd_s}};
      std::cout << j.dump(2) << '\n';
      return kExitOk;
    }

    if (*synth) {
      require_inputs({synth_spec});
      const RunConfig rc = load_run_config(synth_spec);
      if (!rc.synth) throw InvalidArgument(synth_spec.string() + " has no [synth] table");
      SynthSpec spec = rc.synth->spec;
      spec.frame_spec = rc.frame_spec;
      const LabelMatrix truth = gen_truth(spec);
      std::vector<SampleTensor> samples;
      for (const auto& skew : rc.synth->models) samples.push_back(gen_samples(truth, spec, skew));
      fs::create_directories(synth_out);
      {
        auto out = open_output(synth_out / "truth.csv");
        write_utterance_csv(out, labels_to_utterances(truth));
      }
      write_labels(synth_out / "truth.duqt", truth);
      for (const auto& s : samples)
        write_samples(synth_out / (s.model_id + (synth_csv ? ".csv" : ".duqs")), s);
      return kExitOk;
    }

    if (*report) {
      const auto models = load_models(rep_in, lambda);
      require_inputs({rep_truth});
      const LabelMatrix truth = truth_labels(rep_truth, models.front());
      NdArray<double> mean = models.front().mean_probs();
      for (std::size_t u = 1; u < models.size(); ++u) {
        const NdArray<double> m = models[u].mean_probs();
        for (std::size_t i = 0; i < mean.size(); ++i) mean.flat()[i] += m.flat()[i];
      }
      for (double& v : mean.flat()) v /= static_cast<double>(models.size());
      const BinaryMatrix preds =
          rep_pred ? read_labels(*rep_pred).values : threshold_states(mean, lambda);
      const EntropyReport rep = entropy_report(frame_entropy(mean), preds, truth, bins);
      fs::create_directories(rep_out);
      {
        auto out = open_output(rep_out / "entropy.csv");
        write_entropy_csv(out, rep);
      }
      if (svg) {
        auto out = open_output(rep_out / "entropy.svg");
        write_entropy_svg(out, rep);
      }
      auto out = open_output(rep_out / "calibration.csv");
      write_calibration_csv(out, calibration_curve(mean, truth, 20));
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "diaruq: " << e.what() << '\n';
    return exit_code_for(std::current_exception());
  }
  return kExitOk;
}
