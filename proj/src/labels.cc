// diaruq/src/labels.cc
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

#include "diaruq/labels.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

namespace diaruq {

namespace {

namespace pt = boost::property_tree;

std::optional<double> to_number(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(trim(f));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::optional<double> attr_number(const pt::ptree& attrs, const char* a, const char* b) {
  for (const char* key : {a, b})
    if (auto v = attrs.get_optional<std::string>(key)) return to_number(*v);
  return std::nullopt;
}

void collect_words(const pt::ptree& node, std::vector<Interval>& words) {
  for (const auto& [name, child] : node) {
    if (name == "<xmlattr>" || name == "<xmlcomment>") continue;
    if (name == "w") {
      const auto attrs = child.get_child_optional("<xmlattr>");
      if (!attrs) continue;
      if (attrs->get<std::string>("punc", "") == "true") continue;
      auto start = attr_number(*attrs, "starttime", "start");
      auto end = attr_number(*attrs, "endtime", "end");
      if (start && end && *end > *start && *start >= 0.0) words.push_back({*start, *end});
      continue;
    }
    collect_words(child, words);
  }
}

// Per-speaker union of utterance intervals.
std::map<std::string, std::vector<Interval>> speaker_intervals(
    const std::vector<Utterance>& utts) {
  std::map<std::string, std::vector<Interval>> by_speaker;
  for (const auto& u : utts) by_speaker[u.speaker_id].push_back({u.start_s, u.end_s});
  for (auto& [spk, ivs] : by_speaker) ivs = merge_intervals(std::move(ivs));
  return by_speaker;
}

void check_utterance(const Utterance& u) {
  if (!(u.end_s > u.start_s) || !(u.start_s >= 0.0))
    throw InvalidArgument("utterance for '" + u.speaker_id + "' has bad times [" +
                          std::to_string(u.start_s) + ", " + std::to_string(u.end_s) + ")");
}

}  // namespace

std::vector<Interval> merge_intervals(std::vector<Interval> intervals) {
  std::sort(intervals.begin(), intervals.end(),
            [](const Interval& a, const Interval& b) {
              return a.start_s < b.start_s || (a.start_s == b.start_s && a.end_s < b.end_s);
            });
  std::vector<Interval> out;
  for (const auto& iv : intervals) {
    if (!(iv.end_s > iv.start_s)) continue;
    if (!out.empty() && iv.start_s <= out.back().end_s)
      out.back().end_s = std::max(out.back().end_s, iv.end_s);
    else
      out.push_back(iv);
  }
  return out;
}

std::vector<Utterance> parse_words_xml(std::string_view xml, const std::string& speaker_id,
                                       double merge_gap_s) {
  pt::ptree tree;
  std::istringstream in{std::string(xml)};
  try {
    pt::read_xml(in, tree, pt::xml_parser::no_concat_text);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError("words xml: line " + std::to_string(e.line()) + ": " + e.message(),
                     e.line());
  }
  std::vector<Interval> words;
  collect_words(tree, words);
  std::sort(words.begin(), words.end(),
            [](const Interval& a, const Interval& b) { return a.start_s < b.start_s; });

  std::vector<Utterance> utts;
  for (const auto& w : words) {
    if (!utts.empty() && w.start_s - utts.back().end_s <= merge_gap_s + 1e-9) {
      utts.back().end_s = std::max(utts.back().end_s, w.end_s);
    } else {
      utts.push_back({speaker_id, w.start_s, w.end_s});
    }
  }
  return utts;
}

std::vector<Utterance> read_words_xml(const std::filesystem::path& path,
                                      std::string speaker_id, double merge_gap_s) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  if (speaker_id.empty()) {
    // ES2008a.A.words.xml -> A
    const std::string name = path.filename().string();
    const auto first = name.find('.');
    const auto second = first == std::string::npos ? first : name.find('.', first + 1);
    speaker_id = second == std::string::npos ? path.stem().string()
                                             : name.substr(first + 1, second - first - 1);
  }
  return parse_words_xml(buf.str(), speaker_id, merge_gap_s);
}

std::vector<Utterance> parse_utterance_csv(std::istream& in) {
  std::vector<Utterance> utts;
  std::string line;
  std::size_t line_no = 0;
  bool seen_row = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_csv(line);
    if (fields.size() != 3)
      throw ParseError("utterance csv: line " + std::to_string(line_no) +
                           ": expected speaker,start_s,end_s",
                       line_no);
    auto start = to_number(fields[1]);
    auto end = to_number(fields[2]);
    if (!start || !end) {
      if (!seen_row) {  // header
        seen_row = true;
        continue;
      }
      throw ParseError("utterance csv: line " + std::to_string(line_no) + ": bad time value",
                       line_no);
    }
    seen_row = true;
    Utterance u{fields[0], *start, *end};
    if (u.speaker_id.empty() || !(u.end_s > u.start_s) || u.start_s < 0.0)
      throw ParseError("utterance csv: line " + std::to_string(line_no) +
                           ": need a speaker and 0 <= start < end",
                       line_no);
    utts.push_back(std::move(u));
  }
  return utts;
}

std::vector<Utterance> read_utterance_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return parse_utterance_csv(in);
}

void write_utterance_csv(std::ostream& out, const std::vector<Utterance>& utts) {
  out << "speaker,start_s,end_s\n" << std::setprecision(10);
  for (const auto& u : utts) out << u.speaker_id << ',' << u.start_s << ',' << u.end_s << '\n';
}

std::vector<std::string> speakers_of(const std::vector<Utterance>& utts) {
  std::set<std::string> ids;
  for (const auto& u : utts) ids.insert(u.speaker_id);
  return {ids.begin(), ids.end()};
}

LabelMatrix utterances_to_labels(const std::vector<Utterance>& utts, const FrameSpec& spec,
                                 double duration_s, std::vector<std::string> speaker_order,
                                 double overlap_fraction) {
  spec.validate();
  if (!(overlap_fraction > 0.0 && overlap_fraction <= 1.0))
    throw InvalidArgument("overlap_fraction must lie in (0, 1]");
  if (speaker_order.empty()) speaker_order = speakers_of(utts);
  {
    std::set<std::string> unique(speaker_order.begin(), speaker_order.end());
    if (unique.size() != speaker_order.size())
      throw InvalidArgument("speaker_order contains duplicates");
  }
  std::map<std::string, std::size_t> column;
  for (std::size_t s = 0; s < speaker_order.size(); ++s) column[speaker_order[s]] = s;
  for (const auto& u : utts) {
    check_utterance(u);
    if (!column.contains(u.speaker_id))
      throw InvalidArgument("speaker '" + u.speaker_id + "' missing from speaker_order");
    if (u.end_s > duration_s + 1e-9)
      throw InvalidArgument("utterance ends after the stated duration");
  }

  const std::size_t frames = num_mod_frames(duration_s, spec);
  const double step = spec.mod_step_s;
  LabelMatrix out;
  out.speaker_order = std::move(speaker_order);
  out.frame_spec = spec;
  out.values = BinaryMatrix({frames, out.speaker_order.size()});

  std::vector<double> cover(frames);
  for (const auto& [spk, ivs] : speaker_intervals(utts)) {
    const std::size_t s = column.at(spk);
    std::fill(cover.begin(), cover.end(), 0.0);
    for (const auto& iv : ivs) {
      auto l0 = static_cast<std::size_t>(std::max(0.0, std::floor(iv.start_s / step)));
      for (std::size_t l = l0; l < frames && l * step < iv.end_s; ++l) {
        const double lo = std::max(iv.start_s, l * step);
        const double hi = std::min(iv.end_s, (l + 1) * step);
        if (hi > lo) cover[l] += hi - lo;
      }
    }
    for (std::size_t l = 0; l < frames; ++l)
      out.values(l, s) = cover[l] + 1e-9 >= overlap_fraction * step ? 1 : 0;
  }
  return out;
}

SadMask build_gt_sad(const std::vector<Utterance>& utts) {
  std::vector<Interval> ivs;
  ivs.reserve(utts.size());
  for (const auto& u : utts) ivs.push_back({u.start_s, u.end_s});
  return {merge_intervals(std::move(ivs))};
}

SadMask read_sad_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<Interval> ivs;
  std::string line;
  std::size_t line_no = 0;
  bool seen_row = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_csv(line);
    auto start = fields.size() == 2 ? to_number(fields[0]) : std::nullopt;
    auto end = fields.size() == 2 ? to_number(fields[1]) : std::nullopt;
    if (!start || !end || !(*end > *start)) {
      if (!seen_row && fields.size() == 2) {
        seen_row = true;
        continue;
      }
      throw ParseError("sad csv: line " + std::to_string(line_no) + ": expected start_s,end_s",
                       line_no);
    }
    seen_row = true;
    ivs.push_back({*start, *end});
  }
  return {merge_intervals(std::move(ivs))};
}

void write_sad_csv(std::ostream& out, const SadMask& sad) {
  out << "start_s,end_s\n" << std::setprecision(10);
  for (const auto& iv : sad.intervals) out << iv.start_s << ',' << iv.end_s << '\n';
}

MeetingStats meeting_stats(const std::vector<Utterance>& utts, double duration_s) {
  MeetingStats st;
  st.duration_s = duration_s;
  st.utterances = utts.size();
  for (const auto& u : utts) {
    check_utterance(u);
    st.total_speech_s += u.end_s - u.start_s;
  }
  const SadMask sad = build_gt_sad(utts);
  st.segments = sad.intervals.size();
  for (const auto& iv : sad.intervals) st.combined_speech_s += iv.length();

  // Time with two or more distinct speakers active.
  std::vector<std::pair<double, int>> events;
  for (const auto& [spk, ivs] : speaker_intervals(utts))
    for (const auto& iv : ivs) {
      events.emplace_back(iv.start_s, +1);
      events.emplace_back(iv.end_s, -1);
    }
  std::sort(events.begin(), events.end());
  double multi = 0.0;
  int active = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    active += events[i].second;
    if (i + 1 < events.size() && active >= 2) multi += events[i + 1].first - events[i].first;
  }

  if (st.combined_speech_s > 0.0) {
    st.overlap_pct = 100.0 * (st.total_speech_s - st.combined_speech_s) / st.combined_speech_s;
    st.multi_speaker_pct = 100.0 * multi / st.combined_speech_s;
  }
  if (duration_s > 0.0) st.change_rate_hz = 2.0 * static_cast<double>(st.utterances) / duration_s;
  if (st.utterances > 0) st.asd_s = st.total_speech_s / static_cast<double>(st.utterances);
  return st;
}

}  // namespace diaruq
