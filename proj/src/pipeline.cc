// diaruq/src/pipeline.cc
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

#include "diaruq/pipeline.h"

#include <cmath>
#include <fstream>
#include <ostream>

#include "diaruq/cepstral.h"
#include "diaruq/container.h"
#include "diaruq/modspec.h"

namespace diaruq {

namespace {

void require_file(const std::filesystem::path& p, const char* what) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(p, ec))
    throw InvalidArgument(std::string(what) + " not found: " + p.string());
}

std::ofstream create(const std::filesystem::path& p, std::vector<std::filesystem::path>& log) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  log.push_back(p);
  return out;
}

struct Inputs {
  std::vector<SampleTensor> samples;
  std::optional<std::vector<Utterance>> truth;
  std::optional<SadMask> sad;
  std::optional<AudioSignal> audio;
};

Inputs load_inputs(const RunConfig& cfg) {
  Inputs in;
  for (const auto& p : cfg.samples) require_file(p, "sample tensor");
  if (cfg.truth) require_file(*cfg.truth, "truth");
  if (cfg.sad) require_file(*cfg.sad, "SAD file");
  if (cfg.audio) require_file(*cfg.audio, "audio");
  if (cfg.synth && !cfg.samples.empty())
    throw InvalidArgument("[synth] and [input] samples are mutually exclusive");

  if (cfg.synth) {
    SynthSpec spec = cfg.synth->spec;
    spec.frame_spec = cfg.frame_spec;
    const LabelMatrix labels = gen_truth(spec);
    for (const auto& skew : cfg.synth->models) in.samples.push_back(gen_samples(labels, spec, skew));
    if (!cfg.truth) in.truth = labels_to_utterances(labels);
  }
  for (const auto& p : cfg.samples) in.samples.push_back(read_samples(p));
  if (cfg.truth) in.truth = read_truth(*cfg.truth);
  if (cfg.sad) in.sad = read_sad_csv(*cfg.sad);
  if (cfg.audio) in.audio = read_wav(*cfg.audio);
  if (in.samples.empty() && !in.audio)
    throw InvalidArgument("nothing to do: no samples, [synth] or audio given");
  if (cfg.gt_sad && !in.truth)
    throw InvalidArgument("gt_sad needs a truth file");

  for (std::size_t i = 1; i < in.samples.size(); ++i) {
    const auto& a = in.samples.front();
    const auto& b = in.samples[i];
    if (a.frames() != b.frames() || a.speakers() != b.speakers())
      throw InvalidArgument("model '" + b.model_id + "' disagrees in shape with '" + a.model_id +
                            "'");
    if (!a.speaker_order.empty() && !b.speaker_order.empty() &&
        a.speaker_order != b.speaker_order)
      throw InvalidArgument("models disagree in speaker order");
  }
  for (const auto& s : in.samples)
    if (std::abs(s.frame_spec.mod_step_s - cfg.frame_spec.mod_step_s) > 1e-12)
      throw InvalidArgument("model '" + s.model_id + "' uses a different modulation step");
  return in;
}

}  // namespace

std::vector<Utterance> read_truth(const std::filesystem::path& path) {
  if (path.extension() == ".xml") return read_words_xml(path);
  return read_utterance_csv(path);
}

PipelineResult run_pipeline(const RunConfig& cfg) {
  cfg.frame_spec.validate();
  const Inputs in = load_inputs(cfg);
  PipelineResult result;

  // Features are written as-is; scoring below needs model outputs.
  std::optional<ModFeatureTensor> modspec;
  std::optional<CepstralTensor> ceps;
  if (in.audio) {
    if (cfg.features == "modspec")
      modspec = extract_modspec(*in.audio, cfg.frame_spec);
    else
      ceps = extract_cepstral(*in.audio, cfg.frame_spec, cfg.delta_order);
  }

  std::vector<Aggregate> aggs;
  std::optional<LabelMatrix> truth;
  std::optional<SegmentList> pred_segs;
  std::vector<std::string> speakers;
  if (!in.samples.empty()) {
    AggregateOptions agg_opts;
    agg_opts.lambda = cfg.smoother.lambda;
    for (const auto& s : in.samples) aggs.push_back(aggregate(s, agg_opts));

    const std::size_t U = aggs.size(), L = aggs.front().frames, S = aggs.front().speakers;
    speakers = aggs.front().speaker_order;
    if (speakers.empty()) {
      speakers = in.truth ? speakers_of(*in.truth) : synth_speaker_ids(S);
      if (speakers.size() != S)
        throw InvalidArgument("samples carry no speaker order and the truth has " +
                              std::to_string(speakers.size()) + " speakers, not " +
                              std::to_string(S));
    }

    const double duration = cfg.duration_s.value_or(static_cast<double>(L) *
                                                    cfg.frame_spec.mod_step_s);
    if (num_mod_frames(duration, cfg.frame_spec) != L)
      throw InvalidArgument("duration_s implies " +
                            std::to_string(num_mod_frames(duration, cfg.frame_spec)) +
                            " frames but the samples have " + std::to_string(L));
    if (in.truth)
      truth = utterances_to_labels(*in.truth, cfg.frame_spec, duration, speakers);

    SmootherConfig k = cfg.smoother;
    if (!cfg.smoother_h_set) k.h.assign(U, 1.0);
    if (k.h.size() != U)
      throw InvalidArgument("[smoother] h has " + std::to_string(k.h.size()) + " entries for " +
                            std::to_string(U) + " models");
    if (cfg.method != ResegMethod::kKalman && U != 1)
      throw InvalidArgument("only the kalman method fuses several models");

    switch (cfg.method) {
      case ResegMethod::kThreshold:
        result.preds = threshold_states(aggs.front().mean_probs(), k.lambda);
        break;
      case ResegMethod::kModal:
        result.preds = aggs.front().modal_preds();
        break;
      case ResegMethod::kSmooth:
        result.preds = simple_smooth(threshold_states(aggs.front().mean_probs(), k.lambda),
                                     cfg.gap);
        break;
      case ResegMethod::kKalman:
        result.preds = fuse_models(aggs, k, cfg.backward).preds;
        break;
    }
    pred_segs = frames_to_segments(result.preds, cfg.frame_spec, speakers);

    if (truth) {
      result.frame = frame_der(*truth, result.preds);
      SegmentList scored = *pred_segs;
      if (in.sad)
        scored = apply_gt_sad(scored, *in.sad);
      else if (cfg.gt_sad)
        scored = apply_gt_sad(scored, build_gt_sad(*in.truth));
      TimeDerOptions topts;
      topts.collar_s = cfg.collar_s;
      topts.permute = cfg.permute;
      if (!cfg.permute) topts.speakers = speakers;
      result.time = time_der(segments_from_utterances(*in.truth), scored, topts);
    }
  }

  // Everything is computed; only now touch the file system.
  std::filesystem::create_directories(cfg.output_dir);
  auto& written = result.written;
  auto path = [&](const std::string& name) { return cfg.output_dir / name; };
  if (modspec) {
    write_features(path(cfg.file_id + ".modspec.duqt"), *modspec);
    written.push_back(path(cfg.file_id + ".modspec.duqt"));
  }
  if (ceps) {
    write_features(path(cfg.file_id + ".mfcc.duqt"), *ceps);
    written.push_back(path(cfg.file_id + ".mfcc.duqt"));
  }
  if (!aggs.empty()) {
    for (std::size_t u = 0; u < aggs.size(); ++u) {
      const std::string id = aggs[u].model_id.empty() ? "model" + std::to_string(u)
                                                      : aggs[u].model_id;
      auto out = create(path(id + ".aggregate.csv"), written);
      write_aggregate_csv(out, aggs[u]);
    }
    {
      auto out = create(path(cfg.file_id + ".rttm"), written);
      write_rttm(out, *pred_segs, cfg.file_id);
    }
    LabelMatrix pred_labels{result.preds, speakers, cfg.frame_spec};
    write_labels(path(cfg.file_id + ".pred.duqt"), pred_labels);
    written.push_back(path(cfg.file_id + ".pred.duqt"));

    if (truth) {
      {
        auto out = create(path("score.json"), written);
        out << score_report_json(result.frame, result.time,
                                 classification_metrics(*truth, result.preds))
            << '\n';
      }
      // Entropy and calibration use the model-averaged mean probability.
      NdArray<double> mean = aggs.front().mean_probs();
      for (std::size_t u = 1; u < aggs.size(); ++u) {
        const NdArray<double> m = aggs[u].mean_probs();
        for (std::size_t i = 0; i < mean.size(); ++i) mean.flat()[i] += m.flat()[i];
      }
      for (double& v : mean.flat()) v /= static_cast<double>(aggs.size());
      const EntropyReport rep =
          entropy_report(frame_entropy(mean), result.preds, *truth, cfg.entropy_bins);
      {
        auto out = create(path("entropy.csv"), written);
        write_entropy_csv(out, rep);
      }
      if (cfg.entropy_svg) {
        auto out = create(path("entropy.svg"), written);
        write_entropy_svg(out, rep);
      }
      auto out = create(path("calibration.csv"), written);
      write_calibration_csv(out, calibration_curve(mean, *truth, cfg.calibration_bins));
    }
  }
  return result;
}

int exit_code_for(std::exception_ptr error) {
  try {
    std::rethrow_exception(error);
  } catch (const InvalidArgument&) {
    return kExitValidation;
  } catch (const ParseError&) {
    return kExitValidation;
  } catch (const FormatError&) {
    return kExitValidation;
  } catch (...) {
    return kExitRuntime;
  }
}

int run_pipeline_file(const std::filesystem::path& config, std::ostream& err,
                      PipelineResult* result) {
  try {
    PipelineResult r = run_pipeline(load_run_config(config));
    if (result) *result = std::move(r);
    return kExitOk;
  } catch (const std::exception& e) {
    err << "diaruq: " << e.what() << '\n';
    return exit_code_for(std::current_exception());
  }
}

}  // namespace diaruq
