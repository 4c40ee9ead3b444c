// diaruq/include/diaruq/container.h
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

#ifndef DIARUQ_CONTAINER_H_
#define DIARUQ_CONTAINER_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "diaruq/cepstral.h"
#include "diaruq/labels.h"
#include "diaruq/modspec.h"
#include "diaruq/uq.h"

namespace diaruq {

// On-disk layout, all integers little-endian u32:
//   magic[4] version ndims dims[ndims] dtype payload[f32 LE] meta_len meta[json]
inline constexpr char kTensorMagic[] = "DUQT";
inline constexpr char kSampleMagic[] = "DUQS";
inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr std::uint32_t kDtypeF32 = 1;

struct TensorFile {
  std::string magic = kTensorMagic;
  NdArray<float> data;
  nlohmann::json meta = nlohmann::json::object();
};

void write_container(std::ostream& out, const TensorFile& file);
TensorFile read_container(std::istream& in);
void write_container(const std::filesystem::path& path, const TensorFile& file);
TensorFile read_container(const std::filesystem::path& path);

/// First four bytes of a file, or "" when shorter.
std::string sniff_magic(const std::filesystem::path& path);

nlohmann::json frame_spec_to_json(const FrameSpec& spec);
FrameSpec frame_spec_from_json(const nlohmann::json& j);

void write_samples(const std::filesystem::path& path, const SampleTensor& samples);
/// Binary container or, for a `.csv` path, the CSV fallback.
SampleTensor read_samples(const std::filesystem::path& path);

/// `n,l,s,prob` rows behind `# meta {json}` and `# shape N,L,S` comment lines.
void write_samples_csv(std::ostream& out, const SampleTensor& samples);
SampleTensor read_samples_csv(std::istream& in);

void write_features(const std::filesystem::path& path, const ModFeatureTensor& t);
void write_features(const std::filesystem::path& path, const CepstralTensor& t);

void write_labels(const std::filesystem::path& path, const LabelMatrix& labels);
LabelMatrix read_labels(const std::filesystem::path& path);

/// Aggregates as [L, S, 8]: mean_prob, pct_lo, pct_hi, mu, sigma, variance,
/// mean_pred, modal_pred. Missing percentiles are stored as NaN.
void write_aggregate(const std::filesystem::path& path, const Aggregate& agg);
/// Reads an aggregate, or aggregates a sample tensor on the fly.
Aggregate read_aggregate(const std::filesystem::path& path, const AggregateOptions& opts = {});

void write_aggregate_csv(std::ostream& out, const Aggregate& agg);

}  // namespace diaruq

#endif  // DIARUQ_CONTAINER_H_
