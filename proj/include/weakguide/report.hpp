// Copyright 2026 The weakguide Authors.
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

#ifndef WEAKGUIDE_REPORT_HPP_
#define WEAKGUIDE_REPORT_HPP_

#include <cstdint>
#include <ostream>
#include <span>
#include <string>

#include "weakguide/experiments.hpp"

namespace weakguide {

inline constexpr int kResultsSchemaVersion = 1;

std::string results_csv_header();
void write_results_csv(std::ostream& out, std::span<const ResultRow> rows);

struct RunInfo {
  std::uint64_t seed = 0;
  std::string world_hash;
  std::string schedule_hash;
  int steps = 0;
};

// One JSON object per cell with the resolved guidance, hashes, per-chain
// targets and wall time.
void write_records_jsonl(std::ostream& out, const ExperimentResult& result, const RunInfo& info);

void write_summary(std::ostream& out, const ExperimentResult& result, const RunInfo& info);

}  // namespace weakguide

#endif  // WEAKGUIDE_REPORT_HPP_
