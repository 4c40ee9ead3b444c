// diaruq/python/bindings.cc
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

#include <sstream>
#include <tuple>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "diaruq/cepstral.h"
#include "diaruq/labels.h"
#include "diaruq/modspec.h"
#include "diaruq/pipeline.h"
#include "diaruq/reseg.h"
#include "diaruq/score.h"
#include "diaruq/synth.h"
#include "diaruq/uq.h"

namespace py = pybind11;
using namespace diaruq;

namespace {

template <typename T>
using Array = py::array_t<T, py::array::c_style | py::array::forcecast>;

template <typename T>
NdArray<T> to_nd(const Array<T>& a, py::ssize_t rank, const char* what) {
  if (a.ndim() != rank)
    throw InvalidArgument(std::string(what) + ": expected " + std::to_string(rank) + " dims");
  std::vector<std::size_t> shape(a.shape(), a.shape() + a.ndim());
  NdArray<T> out(shape);
  std::copy(a.data(), a.data() + a.size(), out.flat().begin());
  return out;
}

template <typename T>
py::array_t<T> to_py(const NdArray<T>& a) {
  py::array_t<T> out(a.shape());
  std::copy(a.flat().begin(), a.flat().end(), out.mutable_data());
  return out;
}

using SegTuple = std::tuple<std::string, double, double>;

std::vector<Utterance> as_utts(const std::vector<SegTuple>& in) {
  std::vector<Utterance> out;
  for (const auto& [s, a, b] : in) out.push_back({s, a, b});
  return out;
}

std::vector<SegTuple> as_tuples(const SegmentList& in) {
  std::vector<SegTuple> out;
  for (const auto& s : in) out.emplace_back(s.speaker_id, s.start_s, s.end_s);
  return out;
}

LabelMatrix labels(const Array<unsigned char>& a) {
  LabelMatrix y;
  y.values = to_nd(a, 2, "truth");
  y.speaker_order = synth_speaker_ids(y.values.dim(1));
  return y;
}

AudioSignal audio(const Array<std::int16_t>& samples, int fs) {
  if (samples.ndim() != 1) throw InvalidArgument("samples must be one-dimensional");
  AudioSignal sig;
  sig.samples.assign(samples.data(), samples.data() + samples.size());
  sig.sample_rate_hz = fs;
  return sig;
}

SynthSpec synth_spec(std::size_t frames, std::size_t speakers, std::size_t passes,
                     double p_flip, double attenuation, double jitter, double spread,
                     std::uint64_t seed) {
  SynthSpec spec;
  spec.frames = frames;
  spec.speakers = speakers;
  spec.passes = passes;
  spec.noise = {p_flip, attenuation, jitter};
  spec.spread = spread;
  spec.seed = seed;
  return spec;
}

}  // namespace

PYBIND11_MODULE(_diaruq, m) {
  m.doc() = "Diarization with Monte Carlo dropout uncertainty and Kalman resegmentation";

  static py::exception<FormatError> format_error(m, "FormatError", PyExc_ValueError);
  static py::exception<ParseError> parse_error(m, "ParseError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ParseError& e) {
      std::ostringstream msg;
      msg << e.what() << " (line " << e.line() << ", column " << e.column() << ")";
      parse_error(msg.str().c_str());
    } catch (const FormatError& e) {
      format_error(e.what());
    } catch (const InvalidArgument& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("extract_modspec",
        [](const Array<std::int16_t>& samples, int fs, bool remove_dc, bool normalize,
           bool standardize) {
          ModspecOptions opts;
          opts.remove_dc = remove_dc;
          opts.normalize = normalize;
          opts.standardize = standardize;
          ModFeatureTensor t;
          {
            py::gil_scoped_release release;
            t = extract_modspec(audio(samples, fs), FrameSpec{}, opts);
          }
          return to_py(t.values);
        },
        py::arg("samples"), py::arg("sample_rate_hz") = 16000, py::arg("remove_dc") = true,
        py::arg("normalize") = true, py::arg("standardize") = true,
        "ENV/TFS modulation spectrum, shape (frames, bands, mod_bins, 2).");

  m.def("extract_cepstral",
        [](const Array<std::int16_t>& samples, int fs, int delta_order) {
          return to_py(extract_cepstral(audio(samples, fs), FrameSpec{}, delta_order).values);
        },
        py::arg("samples"), py::arg("sample_rate_hz") = 16000, py::arg("delta_order") = 0,
        "MFCCs grouped per modulation frame, shape (frames, group, coefficients).");

  m.def("aggregate",
        [](const Array<double>& probs, double lambda, bool fit_trunc) {
          SampleTensor t;
          t.probs = to_nd(probs, 3, "probs");
          t.speaker_order = synth_speaker_ids(t.speakers());
          Aggregate a;
          {
            py::gil_scoped_release release;
            a = aggregate(t, {.lambda = lambda, .fit_trunc = fit_trunc});
          }
          py::dict out;
          out["mean"] = to_py(a.mean_probs());
          out["variance"] = to_py(a.trunc_variances());
          out["modal"] = to_py(a.modal_preds());
          return out;
        },
        py::arg("probs"), py::arg("threshold") = 0.5, py::arg("fit_trunc") = true,
        "Per-(frame, speaker) mean, truncated-Gaussian variance and modal prediction.");

  m.def("fit_truncated_gaussian",
        [](const Array<double>& samples) {
          const auto f = fit_truncated_gaussian(
              std::span<const double>(samples.data(), static_cast<std::size_t>(samples.size())));
          py::dict out;
          out["mu"] = f.mu;
          out["sigma"] = f.sigma;
          out["variance"] = f.variance;
          out["converged"] = f.converged;
          out["degenerate"] = f.degenerate;
          return out;
        },
        py::arg("samples"));

  m.def("frame_entropy", [](const Array<double>& mean) { return frame_entropy(to_nd(mean, 2, "mean")); },
        py::arg("mean_probs"));

  m.def("simple_smooth",
        [](const Array<unsigned char>& preds, std::size_t gap) {
          return to_py(simple_smooth(to_nd(preds, 2, "preds"), gap));
        },
        py::arg("preds"), py::arg("gap") = kDefaultGap);

  m.def("kalman_smooth",
        [](const Array<double>& z, const Array<double>& r, double f, double q,
           std::vector<double> h, double threshold, bool backward) {
          ObservationSet obs{to_nd(z, 3, "z"), to_nd(r, 3, "r")};
          SmootherConfig cfg;
          cfg.f0 = cfg.f1 = cfg.f2 = f;
          cfg.q0 = cfg.q1 = q;
          cfg.h = h.empty() ? std::vector<double>(obs.models(), 1.0) : std::move(h);
          cfg.lambda = threshold;
          const SmoothResult s = backward ? kalman_smooth(obs, cfg) : forward_only(obs, cfg);
          return py::make_tuple(to_py(s.x), to_py(s.p));
        },
        py::arg("z"), py::arg("r"), py::arg("f") = 1.0, py::arg("q") = 1e-2,
        py::arg("h") = std::vector<double>{}, py::arg("threshold") = 0.5,
        py::arg("backward") = true,
        "Smoothed state and variance, each (frames, speakers), from (models, frames, speakers) inputs.");

  m.def("frame_der",
        [](const Array<unsigned char>& truth, const Array<unsigned char>& preds) {
          const FrameScore s = frame_der(labels(truth), to_nd(preds, 2, "preds"));
          py::dict out;
          out["miss"] = s.miss;
          out["false_alarm"] = s.false_alarm;
          out["speaker_error"] = s.speaker_error;
          out["total"] = s.total;
          out["der_pct"] = s.der_pct;
          return out;
        },
        py::arg("truth"), py::arg("preds"));

  m.def("time_der",
        [](const std::vector<SegTuple>& truth, const std::vector<SegTuple>& pred,
           double collar, bool permute) {
          TimeDerOptions opts;
          opts.collar_s = collar;
          opts.permute = permute;
          const TimeScore s = time_der(segments_from_utterances(as_utts(truth)),
                                       segments_from_utterances(as_utts(pred)), opts);
          py::dict out;
          out["miss_s"] = s.miss_s;
          out["fa_s"] = s.fa_s;
          out["se_s"] = s.se_s;
          out["total_s"] = s.total_s;
          out["der_pct"] = s.der_pct;
          return out;
        },
        py::arg("truth"), py::arg("pred"), py::arg("collar") = 0.0, py::arg("permute") = false,
        "Time-based DER over (speaker, start_s, end_s) segments.");

  m.def("frames_to_segments",
        [](const Array<unsigned char>& preds) {
          const auto p = to_nd(preds, 2, "preds");
          return as_tuples(frames_to_segments(p, FrameSpec{}, synth_speaker_ids(p.dim(1))));
        },
        py::arg("preds"));

  m.def("meeting_stats",
        [](const std::vector<SegTuple>& utts, double duration) {
          const MeetingStats s = meeting_stats(as_utts(utts), duration);
          py::dict out;
          out["total_speech_s"] = s.total_speech_s;
          out["combined_speech_s"] = s.combined_speech_s;
          out["utterances"] = s.utterances;
          out["segments"] = s.segments;
          out["overlap_pct"] = s.overlap_pct;
          out["multi_speaker_pct"] = s.multi_speaker_pct;
          out["change_rate_hz"] = s.change_rate_hz;
          out["asd_s"] = s.asd_s;
          return out;
        },
        py::arg("utterances"), py::arg("duration_s"));

  m.def("synth",
        [](std::size_t frames, std::size_t speakers, std::size_t passes, double p_flip,
           double attenuation, double jitter, double spread, std::uint64_t seed) {
          const SynthSpec spec =
              synth_spec(frames, speakers, passes, p_flip, attenuation, jitter, spread, seed);
          const LabelMatrix y = gen_truth(spec);
          return py::make_tuple(to_py(y.values), to_py(gen_samples(y, spec).probs));
        },
        py::arg("frames") = 100, py::arg("speakers") = 4, py::arg("passes") = 200,
        py::arg("p_flip") = 0.0, py::arg("attenuation") = 0.0, py::arg("jitter") = 0.0,
        py::arg("spread") = 0.0, py::arg("seed") = 0,
        "Seeded synthetic truth (frames, speakers) and dropout samples (passes, frames, speakers).");

  m.def("run",
        [](const std::filesystem::path& config) {
          std::ostringstream err;
          const int code = run_pipeline_file(config, err);
          return py::make_tuple(code, err.str());
        },
        py::arg("config"), "Runs a TOML-configured pipeline; returns (exit_code, messages).");
}
