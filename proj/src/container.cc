// diaruq/src/container.cc
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

#include "diaruq/container.h"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace diaruq {

namespace {

constexpr std::uint32_t kMaxDims = 4;
constexpr std::uint32_t kMaxMeta = 64u << 20;

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8 & 0xff),
                                 static_cast<char>(v >> 16 & 0xff),
                                 static_cast<char>(v >> 24 & 0xff)};
  out.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4))
    throw FormatError(std::string("tensor container truncated in ") + what);
  return std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 | std::uint32_t{b[2]} << 16 |
         std::uint32_t{b[3]} << 24;
}

nlohmann::json strings_json(const std::vector<std::string>& v) { return v; }

std::vector<std::string> strings_from(const nlohmann::json& meta, const char* key) {
  if (!meta.contains(key)) return {};
  return meta.at(key).get<std::vector<std::string>>();
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

template <typename T>
NdArray<float> to_f32(const NdArray<T>& a) {
  NdArray<float> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.flat()[i] = static_cast<float>(a.flat()[i]);
  return out;
}

NdArray<double> to_f64(const NdArray<float>& a) {
  NdArray<double> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.flat()[i] = a.flat()[i];
  return out;
}

}  // namespace

void write_container(std::ostream& out, const TensorFile& file) {
  if (file.magic != kTensorMagic && file.magic != kSampleMagic)
    throw InvalidArgument("unknown container magic '" + file.magic + "'");
  if (file.data.rank() < 1 || file.data.rank() > kMaxDims)
    throw InvalidArgument("containers hold 1 to 4 dimensions");
  out.write(file.magic.data(), 4);
  put_u32(out, kContainerVersion);
  put_u32(out, static_cast<std::uint32_t>(file.data.rank()));
  for (std::size_t d : file.data.shape()) {
    if (d > std::numeric_limits<std::uint32_t>::max())
      throw InvalidArgument("dimension too large for the container");
    put_u32(out, static_cast<std::uint32_t>(d));
  }
  put_u32(out, kDtypeF32);
  for (float v : file.data.flat()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  const std::string meta = file.meta.dump();
  put_u32(out, static_cast<std::uint32_t>(meta.size()));
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  if (!out) throw std::runtime_error("failed writing tensor container");
}

TensorFile read_container(std::istream& in) {
  TensorFile file;
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4)) throw FormatError("tensor container truncated in magic");
  file.magic.assign(magic.data(), 4);
  if (file.magic != kTensorMagic && file.magic != kSampleMagic)
    throw FormatError("not a tensor container (magic '" + file.magic + "')");
  if (const auto v = get_u32(in, "version"); v != kContainerVersion)
    throw FormatError("unsupported container version " + std::to_string(v));
  const std::uint32_t ndims = get_u32(in, "header");
  if (ndims < 1 || ndims > kMaxDims) throw FormatError("container rank must be 1 to 4");
  std::vector<std::size_t> shape(ndims);
  for (auto& d : shape) d = get_u32(in, "header");
  if (const auto dtype = get_u32(in, "header"); dtype != kDtypeF32)
    throw FormatError("unsupported container dtype " + std::to_string(dtype));

  // Check the stated payload against the stream before allocating.
  const std::size_t count = NdArray<float>::count(shape);
  const auto here = in.tellg();
  if (here != std::streampos(-1)) {
    in.seekg(0, std::ios::end);
    const auto end = in.tellg();
    in.seekg(here);
    if (static_cast<std::uint64_t>(end - here) < static_cast<std::uint64_t>(count) * 4 + 4)
      throw FormatError("tensor container truncated in payload");
  }
  file.data = NdArray<float>(shape);
  for (float& v : file.data.flat()) v = std::bit_cast<float>(get_u32(in, "payload"));
  const std::uint32_t meta_len = get_u32(in, "metadata length");
  if (meta_len > kMaxMeta) throw FormatError("container metadata too large");
  std::string meta(meta_len, '\0');
  if (!in.read(meta.data(), meta_len)) throw FormatError("tensor container truncated in metadata");
  try {
    file.meta = meta.empty() ? nlohmann::json::object() : nlohmann::json::parse(meta);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("container metadata is not JSON: ") + e.what());
  }
  return file;
}

void write_container(const std::filesystem::path& path, const TensorFile& file) {
  auto out = open_out(path);
  write_container(out, file);
}

TensorFile read_container(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_container(in);
}

std::string sniff_magic(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::array<char, 4> magic{};
  if (!in || !in.read(magic.data(), 4)) return {};
  return {magic.data(), 4};
}

nlohmann::json frame_spec_to_json(const FrameSpec& s) {
  return {{"acoustic_window_s", s.acoustic_window_s}, {"acoustic_step_s", s.acoustic_step_s},
          {"mod_window_s", s.mod_window_s},           {"mod_step_s", s.mod_step_s},
          {"cepstral_window_s", s.cepstral_window_s}, {"cepstral_step_s", s.cepstral_step_s}};
}

FrameSpec frame_spec_from_json(const nlohmann::json& j) {
  FrameSpec s;
  if (j.is_null()) return s;
  s.acoustic_window_s = j.value("acoustic_window_s", s.acoustic_window_s);
  s.acoustic_step_s = j.value("acoustic_step_s", s.acoustic_step_s);
  s.mod_window_s = j.value("mod_window_s", s.mod_window_s);
  s.mod_step_s = j.value("mod_step_s", s.mod_step_s);
  s.cepstral_window_s = j.value("cepstral_window_s", s.cepstral_window_s);
  s.cepstral_step_s = j.value("cepstral_step_s", s.cepstral_step_s);
  return s;
}

void write_samples(const std::filesystem::path& path, const SampleTensor& samples) {
  samples.validate();
  if (path.extension() == ".csv") {
    auto out = open_out(path);
    write_samples_csv(out, samples);
    return;
  }
  TensorFile f{kSampleMagic, to_f32(samples.probs),
               {{"kind", "samples"},
                {"model_id", samples.model_id},
                {"speaker_order", strings_json(samples.speaker_order)},
                {"frame_spec", frame_spec_to_json(samples.frame_spec)}}};
  write_container(path, f);
}

SampleTensor read_samples(const std::filesystem::path& path) {
  if (path.extension() == ".csv") {
    auto in = open_in(path);
    return read_samples_csv(in);
  }
  const TensorFile f = read_container(path);
  if (f.magic != kSampleMagic || f.data.rank() != 3)
    throw FormatError(path.string() + " is not a sample tensor");
  SampleTensor s;
  s.probs = to_f64(f.data);
  try {
    s.model_id = f.meta.value("model_id", path.stem().string());
    s.speaker_order = strings_from(f.meta, "speaker_order");
    s.frame_spec = frame_spec_from_json(f.meta.value("frame_spec", nlohmann::json()));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad metadata: " + e.what());
  }
  s.validate();
  return s;
}

void write_samples_csv(std::ostream& out, const SampleTensor& samples) {
  const nlohmann::json meta = {{"model_id", samples.model_id},
                               {"speaker_order", strings_json(samples.speaker_order)},
                               {"frame_spec", frame_spec_to_json(samples.frame_spec)}};
  out << "# meta " << meta.dump() << '\n'
      << "# shape " << samples.passes() << ',' << samples.frames() << ',' << samples.speakers()
      << '\n'
      << "n,l,s,prob\n"
      << std::setprecision(9);
  for (std::size_t n = 0; n < samples.passes(); ++n)
    for (std::size_t l = 0; l < samples.frames(); ++l)
      for (std::size_t s = 0; s < samples.speakers(); ++s)
        out << n << ',' << l << ',' << s << ',' << samples.probs(n, l, s) << '\n';
}

SampleTensor read_samples_csv(std::istream& in) {
  SampleTensor out;
  std::string line;
  std::size_t line_no = 0;
  bool have_shape = false;
  std::vector<char> seen;
  auto fail = [&](const std::string& msg) {
    throw ParseError("samples csv: line " + std::to_string(line_no) + ": " + msg, line_no);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.starts_with("# meta ")) {
      try {
        const auto meta = nlohmann::json::parse(line.substr(7));
        out.model_id = meta.value("model_id", "");
        out.speaker_order = strings_from(meta, "speaker_order");
        out.frame_spec = frame_spec_from_json(meta.value("frame_spec", nlohmann::json()));
      } catch (const nlohmann::json::exception& e) {
        fail(std::string("bad metadata: ") + e.what());
      }
      continue;
    }
    if (line.starts_with("# shape ")) {
      std::istringstream ss(line.substr(8));
      std::size_t n = 0, l = 0, s = 0;
      char c1 = 0, c2 = 0;
      if (!(ss >> n >> c1 >> l >> c2 >> s) || c1 != ',' || c2 != ',' || n == 0)
        fail("bad shape line");
      out.probs = NdArray<double>({n, l, s});
      seen.assign(out.probs.size(), 0);
      have_shape = true;
      continue;
    }
    if (line.front() == '#' || line.starts_with("n,")) continue;
    if (!have_shape) fail("data before '# shape' line");
    std::istringstream ss(line);
    std::size_t n = 0, l = 0, s = 0;
    double p = 0;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(ss >> n >> c1 >> l >> c2 >> s >> c3 >> p) || c1 != ',' || c2 != ',' || c3 != ',')
      fail("expected n,l,s,prob");
    if (n >= out.probs.dim(0) || l >= out.probs.dim(1) || s >= out.probs.dim(2))
      fail("index outside the declared shape");
    out.probs(n, l, s) = p;
    seen[(n * out.probs.dim(1) + l) * out.probs.dim(2) + s] = 1;
  }
  if (!have_shape) throw FormatError("samples csv: missing '# shape' line");
  if (std::find(seen.begin(), seen.end(), 0) != seen.end())
    throw FormatError("samples csv: some (n, l, s) entries are missing");
  out.validate();
  return out;
}

void write_features(const std::filesystem::path& path, const ModFeatureTensor& t) {
  write_container(path, {kTensorMagic, to_f32(t.values),
                         {{"kind", "modspec"},
                          {"frame_spec", frame_spec_to_json(t.frame_spec)},
                          {"band_centers_hz", t.band_centers_hz},
                          {"mod_freqs_hz", t.mod_freqs_hz},
                          {"channels", {"env", "tfs"}}}});
}

void write_features(const std::filesystem::path& path, const CepstralTensor& t) {
  write_container(path, {kTensorMagic, to_f32(t.values),
                         {{"kind", "mfcc"}, {"frame_spec", frame_spec_to_json(t.frame_spec)}}});
}

void write_labels(const std::filesystem::path& path, const LabelMatrix& labels) {
  write_container(path, {kTensorMagic, to_f32(labels.values),
                         {{"kind", "labels"},
                          {"speaker_order", strings_json(labels.speaker_order)},
                          {"frame_spec", frame_spec_to_json(labels.frame_spec)}}});
}

LabelMatrix read_labels(const std::filesystem::path& path) {
  const TensorFile f = read_container(path);
  if (f.magic != kTensorMagic || f.data.rank() != 2 || f.meta.value("kind", "") != "labels")
    throw FormatError(path.string() + " is not a label matrix");
  LabelMatrix out;
  out.values = BinaryMatrix(f.data.shape());
  for (std::size_t i = 0; i < f.data.size(); ++i) {
    const float v = f.data.flat()[i];
    if (v != 0.0f && v != 1.0f) throw FormatError("label matrix holds a non-binary value");
    out.values.flat()[i] = v != 0.0f;
  }
  out.speaker_order = strings_from(f.meta, "speaker_order");
  out.frame_spec = frame_spec_from_json(f.meta.value("frame_spec", nlohmann::json()));
  if (out.speaker_order.size() != out.values.dim(1))
    throw FormatError("label matrix speaker_order does not match its width");
  return out;
}

void write_aggregate(const std::filesystem::path& path, const Aggregate& agg) {
  NdArray<float> data({agg.frames, agg.speakers, 8});
  const float nan = std::numeric_limits<float>::quiet_NaN();
  for (std::size_t l = 0; l < agg.frames; ++l)
    for (std::size_t s = 0; s < agg.speakers; ++s) {
      const auto& c = agg.at(l, s);
      const std::array<float, 8> v = {
          static_cast<float>(c.mean_prob),       c.pct_lo ? static_cast<float>(*c.pct_lo) : nan,
          c.pct_hi ? static_cast<float>(*c.pct_hi) : nan, static_cast<float>(c.trunc.mu),
          static_cast<float>(c.trunc.sigma),     static_cast<float>(c.trunc.variance),
          static_cast<float>(c.mean_pred),       static_cast<float>(c.modal_pred)};
      for (std::size_t k = 0; k < 8; ++k) data(l, s, k) = v[k];
    }
  write_container(path, {kTensorMagic, std::move(data),
                         {{"kind", "aggregate"},
                          {"model_id", agg.model_id},
                          {"speaker_order", strings_json(agg.speaker_order)},
                          {"frame_spec", frame_spec_to_json(agg.frame_spec)},
                          {"fields",
                           {"mean_prob", "pct_lo", "pct_hi", "trunc_mu", "trunc_sigma",
                            "trunc_var", "mean_pred", "modal_pred"}}}});
}

Aggregate read_aggregate(const std::filesystem::path& path, const AggregateOptions& opts) {
  if (path.extension() == ".csv" || sniff_magic(path) == kSampleMagic)
    return aggregate(read_samples(path), opts);
  const TensorFile f = read_container(path);
  if (f.data.rank() != 3 || f.data.dim(2) != 8 || f.meta.value("kind", "") != "aggregate")
    throw FormatError(path.string() + " is neither samples nor an aggregate");
  Aggregate agg;
  agg.frames = f.data.dim(0);
  agg.speakers = f.data.dim(1);
  agg.model_id = f.meta.value("model_id", path.stem().string());
  agg.speaker_order = strings_from(f.meta, "speaker_order");
  agg.frame_spec = frame_spec_from_json(f.meta.value("frame_spec", nlohmann::json()));
  agg.cells.resize(agg.frames * agg.speakers);
  for (std::size_t l = 0; l < agg.frames; ++l)
    for (std::size_t s = 0; s < agg.speakers; ++s) {
      auto& c = agg.cells[l * agg.speakers + s];
      c.mean_prob = f.data(l, s, 0);
      if (!std::isnan(f.data(l, s, 1))) c.pct_lo = f.data(l, s, 1);
      if (!std::isnan(f.data(l, s, 2))) c.pct_hi = f.data(l, s, 2);
      c.trunc.mu = f.data(l, s, 3);
      c.trunc.sigma = f.data(l, s, 4);
      c.trunc.variance = f.data(l, s, 5);
      c.mean_pred = f.data(l, s, 6);
      c.modal_pred = f.data(l, s, 7) != 0.0f;
    }
  return agg;
}

void write_aggregate_csv(std::ostream& out, const Aggregate& agg) {
  out << "frame,speaker,mean_prob,pct_lo,pct_hi,trunc_mu,trunc_sigma,trunc_var,mean_pred,"
         "modal_pred,fit_converged\n"
      << std::setprecision(9);
  for (std::size_t l = 0; l < agg.frames; ++l)
    for (std::size_t s = 0; s < agg.speakers; ++s) {
      const auto& c = agg.at(l, s);
      out << l << ','
          << (s < agg.speaker_order.size() ? agg.speaker_order[s] : std::to_string(s)) << ','
          << c.mean_prob << ',';
      if (c.pct_lo) out << *c.pct_lo;
      out << ',';
      if (c.pct_hi) out << *c.pct_hi;
      out << ',' << c.trunc.mu << ',' << c.trunc.sigma << ',' << c.trunc.variance << ','
          << c.mean_pred << ',' << c.modal_pred << ',' << (c.trunc.converged ? 1 : 0) << '\n';
    }
}

}  // namespace diaruq
