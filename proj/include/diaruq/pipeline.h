// diaruq/include/diaruq/pipeline.h
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

#ifndef DIARUQ_PIPELINE_H_
#define DIARUQ_PIPELINE_H_

#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "diaruq/config.h"
#include "diaruq/score.h"

namespace diaruq {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitValidation = 2;

struct PipelineResult {
  BinaryMatrix preds;
  std::optional<FrameScore> frame;
  std::optional<TimeScore> time;
  std::vector<std::filesystem::path> written;
};

/// extract -> aggregate -> resegment -> score. Every input is loaded and
/// checked before the output directory is touched.
PipelineResult run_pipeline(const RunConfig& cfg);

/// 2 for validation, parse and format errors, 1 for anything else.
int exit_code_for(std::exception_ptr error);

/// Loads the config, runs, reports errors on `err`, returns the exit code.
int run_pipeline_file(const std::filesystem::path& config, std::ostream& err,
                      PipelineResult* result = nullptr);

/// Utterances from a `speaker,start_s,end_s` CSV or a single words XML file.
std::vector<Utterance> read_truth(const std::filesystem::path& path);

}  // namespace diaruq

#endif  // DIARUQ_PIPELINE_H_
