// diaruq/include/diaruq/labels.h
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

#ifndef DIARUQ_LABELS_H_
#define DIARUQ_LABELS_H_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "diaruq/common.h"
#include "diaruq/signal.h"

namespace diaruq {

struct Utterance {
  std::string speaker_id;
  double start_s = 0.0;
  double end_s = 0.0;

  bool operator==(const Utterance&) const = default;
};

struct Interval {
  double start_s = 0.0;
  double end_s = 0.0;

  double length() const { return end_s - start_s; }
  bool operator==(const Interval&) const = default;
};

/// Binary speaker activity, [frames, speakers].
struct LabelMatrix {
  BinaryMatrix values;
  std::vector<std::string> speaker_order;
  FrameSpec frame_spec;

  std::size_t frames() const { return values.empty() ? 0 : values.dim(0); }
  std::size_t speakers() const { return speaker_order.size(); }
};

/// Disjoint, sorted speech regions.
struct SadMask {
  std::vector<Interval> intervals;
};

struct MeetingStats {
  double duration_s = 0.0;
  double total_speech_s = 0.0;     // overlapping speakers counted separately
  double combined_speech_s = 0.0;  // union of all speech
  std::size_t utterances = 0;
  std::size_t segments = 0;        // maximal union intervals
  double overlap_pct = 0.0;        // 100 (total - combined) / combined
  double multi_speaker_pct = 0.0;  // 100 (time with >= 2 speakers) / combined
  double change_rate_hz = 0.0;     // 2 utterances / duration
  double asd_s = 0.0;              // total speech / utterances
};

inline constexpr double kDefaultMergeGap = 0.1;
inline constexpr double kDefaultOverlapFraction = 0.5;

/// Word intervals from an AMI-style words document, merged into utterances
/// when the gap between consecutive words is at most `merge_gap_s`. Only `w`
/// elements with start/end times count; punctuation (`punc="true"`) and
/// non-lexical elements are skipped. Malformed XML raises ParseError.
std::vector<Utterance> parse_words_xml(std::string_view xml, const std::string& speaker_id,
                                       double merge_gap_s = kDefaultMergeGap);

/// As parse_words_xml; an empty speaker id is taken from a
/// `<meeting>.<speaker>.words.xml` file name.
std::vector<Utterance> read_words_xml(const std::filesystem::path& path,
                                      std::string speaker_id = {},
                                      double merge_gap_s = kDefaultMergeGap);

/// `speaker,start_s,end_s` rows; a header line is optional, `#` comments allowed.
std::vector<Utterance> parse_utterance_csv(std::istream& in);
std::vector<Utterance> read_utterance_csv(const std::filesystem::path& path);
void write_utterance_csv(std::ostream& out, const std::vector<Utterance>& utts);

/// Sorted union of intervals; touching intervals are joined.
std::vector<Interval> merge_intervals(std::vector<Interval> intervals);

/// Sorted unique speaker ids.
std::vector<std::string> speakers_of(const std::vector<Utterance>& utts);

/// y[l, s] = 1 when speaker s covers at least `overlap_fraction` of
/// [l F_m, (l+1) F_m). An empty `speaker_order` means sorted unique ids.
LabelMatrix utterances_to_labels(const std::vector<Utterance>& utts, const FrameSpec& spec,
                                 double duration_s,
                                 std::vector<std::string> speaker_order = {},
                                 double overlap_fraction = kDefaultOverlapFraction);

SadMask build_gt_sad(const std::vector<Utterance>& utts);
SadMask read_sad_csv(const std::filesystem::path& path);
void write_sad_csv(std::ostream& out, const SadMask& sad);

MeetingStats meeting_stats(const std::vector<Utterance>& utts, double duration_s);

}  // namespace diaruq

#endif  // DIARUQ_LABELS_H_
