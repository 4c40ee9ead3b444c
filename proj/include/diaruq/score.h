// diaruq/include/diaruq/score.h
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

#ifndef DIARUQ_SCORE_H_
#define DIARUQ_SCORE_H_

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "diaruq/common.h"
#include "diaruq/labels.h"

namespace diaruq {

/// Speaker-frame error counts. Percentages divide by `total`, the number of
/// active speaker-frames in the truth.
struct FrameScore {
  std::size_t miss = 0;
  std::size_t false_alarm = 0;
  std::size_t speaker_error = 0;
  std::size_t total = 0;
  double m_pct = 0.0;
  double fa_pct = 0.0;
  double se_pct = 0.0;
  double der_pct = 0.0;
};

struct TimeScore {
  double miss_s = 0.0;
  double fa_s = 0.0;
  double se_s = 0.0;
  double total_s = 0.0;
  double m_pct = 0.0;
  double fa_pct = 0.0;
  double se_pct = 0.0;
  double der_pct = 0.0;
};

struct Segment {
  std::string speaker_id;
  double start_s = 0.0;
  double end_s = 0.0;

  bool operator==(const Segment&) const = default;
};

/// Sorted by start time; one speaker's entries never overlap.
using SegmentList = std::vector<Segment>;

FrameScore frame_der(const LabelMatrix& truth, const BinaryMatrix& preds);

/// Runs of ones per speaker; frame l covers [l F_m, (l+1) F_m).
SegmentList frames_to_segments(const BinaryMatrix& preds, const FrameSpec& spec,
                               const std::vector<std::string>& speaker_order);

SegmentList segments_from_utterances(const std::vector<Utterance>& utts);

/// Intersects every segment with the speech mask.
SegmentList apply_gt_sad(const SegmentList& segs, const SadMask& sad);

struct TimeDerOptions {
  double collar_s = 0.0;
  /// Closed speaker set; empty means every id seen in the truth. Predicted ids
  /// outside the set are rejected.
  std::vector<std::string> speakers;
  /// Optimal one-to-one speaker mapping instead of identity.
  bool permute = false;
};

TimeScore time_der(const SegmentList& truth, const SegmentList& pred,
                   const TimeDerOptions& opts = {});

struct ClassificationMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

ClassificationMetrics classification_metrics(const LabelMatrix& truth,
                                             const BinaryMatrix& preds);

/// `SPEAKER <file> 1 <tbeg> <tdur> <NA> <NA> <spk> <NA> <NA>` lines.
void write_rttm(std::ostream& out, const SegmentList& segs, const std::string& file_id);
SegmentList parse_rttm(std::istream& in);
SegmentList read_rttm(const std::filesystem::path& path);

/// {"frame": {...}, "time": {...}, "classification": {...}}; absent parts omitted.
std::string score_report_json(const std::optional<FrameScore>& frame,
                              const std::optional<TimeScore>& time,
                              const std::optional<ClassificationMetrics>& cls = std::nullopt);

}  // namespace diaruq

#endif  // DIARUQ_SCORE_H_
