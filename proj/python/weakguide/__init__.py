# Copyright 2026 The weakguide Authors.
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
"""Gaussian-mixture lab for attribute guidance in conditional diffusion."""

from ._core import (
    CadsParams,
    ConfigError,
    Embedding,
    Error,
    Prompt,
    Schedule,
    World,
    cads_gamma,
    cfg_combine,
    clopper_pearson,
    energy_distance,
    experiment_kinds,
    run_experiment,
    sign_test,
)

__all__ = [
    "CadsParams",
    "ConfigError",
    "Embedding",
    "Error",
    "Prompt",
    "Schedule",
    "World",
    "cads_gamma",
    "cfg_combine",
    "clopper_pearson",
    "energy_distance",
    "experiment_kinds",
    "run_experiment",
    "sign_test",
]
