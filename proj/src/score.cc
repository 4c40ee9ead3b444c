// diaruq/src/score.cc
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

#include "diaruq/score.h"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace diaruq {

namespace {

double pct(double part, double total) { return total > 0.0 ? 100.0 * part / total : 0.0; }

// Per-speaker unions, keyed by speaker id.
std::map<std::string, std::vector<Interval>> by_speaker(const SegmentList& segs) {
  std::map<std::string, std::vector<Interval>> out;
  for (const auto& s : segs) {
    if (!(s.end_s >= s.start_s))
      throw InvalidArgument("segment for '" + s.speaker_id + "' ends before it starts");
    out[s.speaker_id].push_back({s.start_s, s.end_s});
  }
  for (auto& [id, ivs] : out) ivs = merge_intervals(std::move(ivs));
  return out;
}

// Active-speaker bitmask on each elementary interval between boundaries.
struct Sweep {
  std::vector<double> cuts;
  std::vector<std::uint64_t> truth_mask, pred_mask;  // per [cuts[i], cuts[i+1])
};

Sweep sweep(const std::vector<std::vector<Interval>>& truth,
            const std::vector<std::vector<Interval>>& pred, const std::vector<double>& extra) {
  Sweep sw;
  for (const auto* side : {&truth, &pred})
    for (const auto& ivs : *side)
      for (const auto& iv : ivs) {
        sw.cuts.push_back(iv.start_s);
        sw.cuts.push_back(iv.end_s);
      }
  sw.cuts.insert(sw.cuts.end(), extra.begin(), extra.end());
  std::sort(sw.cuts.begin(), sw.cuts.end());
  sw.cuts.erase(std::unique(sw.cuts.begin(), sw.cuts.end()), sw.cuts.end());
  const std::size_t n = sw.cuts.size() < 2 ? 0 : sw.cuts.size() - 1;

  auto fill = [&](const std::vector<std::vector<Interval>>& side, std::vector<std::uint64_t>& m) {
    m.assign(n, 0);
    for (std::size_t k = 0; k < side.size(); ++k)
      for (const auto& iv : side[k]) {
        auto i = static_cast<std::size_t>(
            std::lower_bound(sw.cuts.begin(), sw.cuts.end(), iv.start_s) - sw.cuts.begin());
        for (; i < n && sw.cuts[i + 1] <= iv.end_s; ++i) m[i] |= std::uint64_t{1} << k;
      }
  };
  fill(truth, sw.truth_mask);
  fill(pred, sw.pred_mask);
  return sw;
}

// Maximum total overlap one-to-one mapping of reference to system speakers,
// as map[ref] = sys or -1. Bitmask DP over system speakers.
std::vector<int> best_mapping(const std::vector<std::vector<double>>& overlap,
                              std::size_t n_sys) {
  const std::size_t n_ref = overlap.size();
  if (n_sys > 20) throw InvalidArgument("--permute supports at most 20 predicted speakers");
  const std::size_t states = std::size_t{1} << n_sys;
  constexpr double kNone = -1.0;
  // dp[i][mask]: best overlap using refs [0, i) and system speakers in mask.
  std::vector<std::vector<double>> dp(n_ref + 1, std::vector<double>(states, kNone));
  std::vector<std::vector<int>> choice(n_ref + 1, std::vector<int>(states, -1));
  dp[0][0] = 0.0;
  for (std::size_t i = 0; i < n_ref; ++i)
    for (std::size_t mask = 0; mask < states; ++mask) {
      if (dp[i][mask] < 0.0) continue;
      if (dp[i][mask] > dp[i + 1][mask]) {
        dp[i + 1][mask] = dp[i][mask];
        choice[i + 1][mask] = -1;
      }
      for (std::size_t j = 0; j < n_sys; ++j) {
        if (mask & (std::size_t{1} << j)) continue;
        const std::size_t next = mask | (std::size_t{1} << j);
        const double v = dp[i][mask] + overlap[i][j];
        if (v > dp[i + 1][next]) {
          dp[i + 1][next] = v;
          choice[i + 1][next] = static_cast<int>(j);
        }
      }
    }
  std::size_t mask = 0;
  for (std::size_t m = 0; m < states; ++m)
    if (dp[n_ref][m] > dp[n_ref][mask]) mask = m;
  std::vector<int> map(n_ref, -1);
  for (std::size_t i = n_ref; i > 0; --i) {
    const int j = choice[i][mask];
    map[i - 1] = j;
    if (j >= 0) mask &= ~(std::size_t{1} << j);
  }
  return map;
}

}  // namespace

FrameScore frame_der(const LabelMatrix& truth, const BinaryMatrix& preds) {
  if (preds.rank() != 2 || preds.dim(0) != truth.frames() || preds.dim(1) != truth.speakers())
    throw InvalidArgument("frame_der: prediction shape does not match truth");
  FrameScore sc;
  const std::size_t L = truth.frames(), S = truth.speakers();
  for (std::size_t l = 0; l < L; ++l) {
    std::size_t ny = 0, np = 0, hit = 0;
    for (std::size_t s = 0; s < S; ++s) {
      const bool y = truth.values(l, s) != 0, p = preds(l, s) != 0;
      ny += y;
      np += p;
      hit += y && p;
    }
    sc.miss += ny > np ? ny - np : 0;
    sc.false_alarm += np > ny ? np - ny : 0;
    sc.speaker_error += std::min(ny, np) - hit;
    sc.total += ny;
  }
  const auto total = static_cast<double>(sc.total);
  sc.m_pct = pct(static_cast<double>(sc.miss), total);
  sc.fa_pct = pct(static_cast<double>(sc.false_alarm), total);
  sc.se_pct = pct(static_cast<double>(sc.speaker_error), total);
  sc.der_pct = sc.m_pct + sc.fa_pct + sc.se_pct;
  return sc;
}

SegmentList frames_to_segments(const BinaryMatrix& preds, const FrameSpec& spec,
                               const std::vector<std::string>& speaker_order) {
  if (preds.rank() != 2 || preds.dim(1) != speaker_order.size())
    throw InvalidArgument("frames_to_segments: speaker_order does not match predictions");
  const std::size_t L = preds.dim(0);
  const double step = spec.mod_step_s;
  SegmentList out;
  for (std::size_t s = 0; s < speaker_order.size(); ++s)
    for (std::size_t l = 0; l < L;) {
      if (preds(l, s) == 0) {
        ++l;
        continue;
      }
      std::size_t end = l;
      while (end < L && preds(end, s) != 0) ++end;
      out.push_back({speaker_order[s], static_cast<double>(l) * step,
                     static_cast<double>(end) * step});
      l = end;
    }
  std::stable_sort(out.begin(), out.end(),
                   [](const Segment& a, const Segment& b) { return a.start_s < b.start_s; });
  return out;
}

SegmentList segments_from_utterances(const std::vector<Utterance>& utts) {
  SegmentList out;
  for (const auto& [id, ivs] : [&] {
         SegmentList raw;
         for (const auto& u : utts) raw.push_back({u.speaker_id, u.start_s, u.end_s});
         return by_speaker(raw);
       }())
    for (const auto& iv : ivs) out.push_back({id, iv.start_s, iv.end_s});
  std::stable_sort(out.begin(), out.end(),
                   [](const Segment& a, const Segment& b) { return a.start_s < b.start_s; });
  return out;
}

SegmentList apply_gt_sad(const SegmentList& segs, const SadMask& sad) {
  SegmentList out;
  for (const auto& seg : segs) {
    auto it = std::lower_bound(sad.intervals.begin(), sad.intervals.end(), seg.start_s,
                               [](const Interval& iv, double t) { return iv.end_s <= t; });
    for (; it != sad.intervals.end() && it->start_s < seg.end_s; ++it) {
      const double lo = std::max(seg.start_s, it->start_s);
      const double hi = std::min(seg.end_s, it->end_s);
      if (hi > lo) out.push_back({seg.speaker_id, lo, hi});
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Segment& a, const Segment& b) { return a.start_s < b.start_s; });
  return out;
}

TimeScore time_der(const SegmentList& truth, const SegmentList& pred,
                   const TimeDerOptions& opts) {
  if (!(opts.collar_s >= 0.0)) throw InvalidArgument("collar must be >= 0");
  const auto t_map = by_speaker(truth);
  const auto p_map = by_speaker(pred);

  std::vector<std::string> ref_ids = opts.speakers;
  if (ref_ids.empty())
    for (const auto& [id, _] : t_map) ref_ids.push_back(id);
  std::map<std::string, std::size_t> ref_index;
  for (std::size_t i = 0; i < ref_ids.size(); ++i) ref_index[ref_ids[i]] = i;
  for (const auto& [id, _] : t_map)
    if (!ref_index.contains(id))
      throw InvalidArgument("truth speaker '" + id + "' missing from the speaker list");

  std::vector<std::string> sys_ids;
  if (opts.permute) {
    for (const auto& [id, _] : p_map) sys_ids.push_back(id);
  } else {
    for (const auto& [id, _] : p_map)
      if (!ref_index.contains(id))
        throw InvalidArgument("predicted speaker '" + id + "' is not a known speaker");
    sys_ids = ref_ids;
  }
  if (ref_ids.size() > 64 || sys_ids.size() > 64)
    throw InvalidArgument("time_der supports at most 64 speakers");

  auto lists = [](const std::map<std::string, std::vector<Interval>>& m,
                  const std::vector<std::string>& ids) {
    std::vector<std::vector<Interval>> out(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (auto it = m.find(ids[i]); it != m.end()) out[i] = it->second;
    return out;
  };
  const auto t_lists = lists(t_map, ref_ids);
  const auto p_lists = lists(p_map, sys_ids);

  // Collar: excise +-collar around every truth boundary.
  std::vector<Interval> excised;
  std::vector<double> extra;
  if (opts.collar_s > 0.0) {
    for (const auto& ivs : t_lists)
      for (const auto& iv : ivs)
        for (double b : {iv.start_s, iv.end_s})
          excised.push_back({b - opts.collar_s, b + opts.collar_s});
    excised = merge_intervals(std::move(excised));
    for (const auto& iv : excised) {
      extra.push_back(iv.start_s);
      extra.push_back(iv.end_s);
    }
  }
  const Sweep sw = sweep(t_lists, p_lists, extra);
  const std::size_t n = sw.truth_mask.size();
  std::vector<char> scored(n, 1);
  for (std::size_t i = 0, e = 0; i < n; ++i) {
    const double mid = 0.5 * (sw.cuts[i] + sw.cuts[i + 1]);
    while (e < excised.size() && excised[e].end_s <= mid) ++e;
    if (e < excised.size() && excised[e].start_s <= mid) scored[i] = 0;
  }

  // map[ref] -> sys bit, identity unless permuting.
  std::vector<int> map(ref_ids.size());
  if (opts.permute) {
    std::vector<std::vector<double>> overlap(ref_ids.size(), std::vector<double>(sys_ids.size()));
    for (std::size_t i = 0; i < n; ++i) {
      if (!scored[i]) continue;
      const double dur = sw.cuts[i + 1] - sw.cuts[i];
      for (std::size_t r = 0; r < ref_ids.size(); ++r)
        if (sw.truth_mask[i] >> r & 1)
          for (std::size_t s = 0; s < sys_ids.size(); ++s)
            if (sw.pred_mask[i] >> s & 1) overlap[r][s] += dur;
    }
    map = best_mapping(overlap, sys_ids.size());
  } else {
    for (std::size_t r = 0; r < map.size(); ++r) map[r] = static_cast<int>(r);
  }

  TimeScore sc;
  for (std::size_t i = 0; i < n; ++i) {
    if (!scored[i]) continue;
    const double dur = sw.cuts[i + 1] - sw.cuts[i];
    const auto nt = static_cast<std::size_t>(std::popcount(sw.truth_mask[i]));
    const auto np = static_cast<std::size_t>(std::popcount(sw.pred_mask[i]));
    std::size_t correct = 0;
    for (std::size_t r = 0; r < map.size(); ++r)
      if ((sw.truth_mask[i] >> r & 1) && map[r] >= 0 && (sw.pred_mask[i] >> map[r] & 1))
        ++correct;
    sc.miss_s += static_cast<double>(nt > np ? nt - np : 0) * dur;
    sc.fa_s += static_cast<double>(np > nt ? np - nt : 0) * dur;
    sc.se_s += static_cast<double>(std::min(nt, np) - correct) * dur;
    sc.total_s += static_cast<double>(nt) * dur;
  }
  sc.m_pct = pct(sc.miss_s, sc.total_s);
  sc.fa_pct = pct(sc.fa_s, sc.total_s);
  sc.se_pct = pct(sc.se_s, sc.total_s);
  sc.der_pct = sc.m_pct + sc.fa_pct + sc.se_pct;
  return sc;
}

ClassificationMetrics classification_metrics(const LabelMatrix& truth,
                                             const BinaryMatrix& preds) {
  if (preds.rank() != 2 || preds.dim(0) != truth.frames() || preds.dim(1) != truth.speakers())
    throw InvalidArgument("classification_metrics: prediction shape does not match truth");
  double tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool y = truth.values.flat()[i] != 0, p = preds.flat()[i] != 0;
    tp += y && p;
    fp += !y && p;
    fn += y && !p;
    tn += !y && !p;
  }
  ClassificationMetrics m;
  const double n = tp + fp + fn + tn;
  m.accuracy = n > 0 ? (tp + tn) / n : 0.0;
  m.precision_undefined = tp + fp == 0;
  m.recall_undefined = tp + fn == 0;
  m.precision = m.precision_undefined ? 0.0 : tp / (tp + fp);
  m.recall = m.recall_undefined ? 0.0 : tp / (tp + fn);
  m.f1_undefined = m.precision + m.recall == 0.0;
  m.f1 = m.f1_undefined ? 0.0 : 2 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

void write_rttm(std::ostream& out, const SegmentList& segs, const std::string& file_id) {
  out << std::fixed << std::setprecision(3);
  for (const auto& s : segs)
    out << "SPEAKER " << file_id << " 1 " << s.start_s << ' ' << s.end_s - s.start_s
        << " <NA> <NA> " << s.speaker_id << " <NA> <NA>\n";
}

SegmentList parse_rttm(std::istream& in) {
  SegmentList out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::vector<std::string> f;
    for (std::string tok; fields >> tok;) f.push_back(tok);
    if (f.empty() || f[0].starts_with("#")) continue;
    if (f[0] != "SPEAKER") continue;
    if (f.size() < 8)
      throw ParseError("rttm: line " + std::to_string(line_no) + ": too few fields", line_no);
    double beg = 0, dur = 0;
    try {
      std::size_t used = 0;
      beg = std::stod(f[3], &used);
      if (used != f[3].size()) throw std::invalid_argument("tbeg");
      dur = std::stod(f[4], &used);
      if (used != f[4].size()) throw std::invalid_argument("tdur");
    } catch (const std::exception&) {
      throw ParseError("rttm: line " + std::to_string(line_no) + ": bad time field", line_no);
    }
    if (dur < 0 || beg < 0)
      throw ParseError("rttm: line " + std::to_string(line_no) + ": negative time", line_no);
    out.push_back({f[7], beg, beg + dur});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Segment& a, const Segment& b) { return a.start_s < b.start_s; });
  return out;
}

SegmentList read_rttm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return parse_rttm(in);
}

std::string score_report_json(const std::optional<FrameScore>& frame,
                              const std::optional<TimeScore>& time,
                              const std::optional<ClassificationMetrics>& cls) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  if (frame)
    j["frame"] = {{"miss", frame->miss},     {"false_alarm", frame->false_alarm},
                  {"speaker_error", frame->speaker_error}, {"total", frame->total},
                  {"m_pct", frame->m_pct},   {"fa_pct", frame->fa_pct},
                  {"se_pct", frame->se_pct}, {"der_pct", frame->der_pct}};
  if (time)
    j["time"] = {{"miss_s", time->miss_s}, {"fa_s", time->fa_s},     {"se_s", time->se_s},
                 {"total_s", time->total_s}, {"m_pct", time->m_pct}, {"fa_pct", time->fa_pct},
                 {"se_pct", time->se_pct}, {"der_pct", time->der_pct}};
  if (cls)
    j["classification"] = {{"accuracy", cls->accuracy},
                           {"precision", cls->precision},
                           {"recall", cls->recall},
                           {"f1", cls->f1},
                           {"precision_undefined", cls->precision_undefined},
                           {"recall_undefined", cls->recall_undefined}};
  return j.dump(2);
}

}  // namespace diaruq
