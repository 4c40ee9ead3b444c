# diaruq/python/diaruq/__init__.py
#
# Copyright (c) 2026 The diaruq Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

from ._diaruq import (
    FormatError,
    ParseError,
    aggregate,
    extract_cepstral,
    extract_modspec,
    fit_truncated_gaussian,
    frame_der,
    frame_entropy,
    frames_to_segments,
    kalman_smooth,
    meeting_stats,
    run,
    simple_smooth,
    synth,
    time_der,
)

__all__ = [
    "FormatError",
    "ParseError",
    "aggregate",
    "extract_cepstral",
    "extract_modspec",
    "fit_truncated_gaussian",
    "frame_der",
    "frame_entropy",
    "frames_to_segments",
    "kalman_smooth",
    "meeting_stats",
    "run",
    "simple_smooth",
    "synth",
    "time_der",
]
