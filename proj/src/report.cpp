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

#include "weakguide/report.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace weakguide {

namespace {

// Quotes a CSV field when it holds a separator, quote or newline.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::string results_csv_header() {
  return "schema_version,experiment,context,method,param_name,param_value,metric,value,n,"
         "ci_low,ci_high";
}

void write_results_csv(std::ostream& out, std::span<const ResultRow> rows) {
  out << results_csv_header() << '\n';
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{},{},{},{:.17g},{},{:.17g},{:.17g}\n", kResultsSchemaVersion,
                       csv_field(r.experiment), csv_field(r.context), csv_field(r.method),
                       csv_field(r.param_name), csv_field(r.param_value), csv_field(r.metric),
                       r.value, r.n, r.ci_low, r.ci_high);
  }
}

void write_records_jsonl(std::ostream& out, const ExperimentResult& result, const RunInfo& info) {
  for (const auto& cell : result.cells) {
    nlohmann::ordered_json j;
    j["experiment"] = result.kind;
    j["context"] = cell.context;
    j["method"] = cell.method;
    j["param_name"] = cell.param_name;
    j["param_value"] = cell.param_label;
    j["prompt"] = cell.prompt.text();
    j["guidance"] = nlohmann::json::parse(describe(cell.guidance));
    j["seed"] = info.seed;
    j["world_hash"] = info.world_hash;
    j["schedule_hash"] = info.schedule_hash;
    j["steps"] = info.steps;
    j["n"] = cell.samples.rows();
    nlohmann::ordered_json metrics;
    for (const auto& r : cell.ratios) {
      for (std::size_t a = 0; a < r.attributes.size(); ++a) {
        metrics["ratio:" + r.attributes[a]] = r.ratios[a];
      }
    }
    metrics["alignment"] = cell.alignment_mean();
    j["metrics"] = metrics;
    if (!cell.targets.empty() && !cell.targets.front().empty()) j["targets"] = cell.targets;
    j["wall_seconds"] = cell.wall_seconds;
    out << j.dump() << '\n';
  }
  for (const auto& check : result.checks) {
    nlohmann::ordered_json j;
    j["experiment"] = result.kind;
    j["check"] = check.name;
    j["pass"] = check.pass;
    j["detail"] = check.detail;
    j["world_hash"] = info.world_hash;
    j["schedule_hash"] = info.schedule_hash;
    out << j.dump() << '\n';
  }
}

void write_summary(std::ostream& out, const ExperimentResult& result, const RunInfo& info) {
  out << fmt::format("experiment: {}\nseed: {}\nworld: {}\nschedule: {} ({} steps)\n\n",
                     result.kind, info.seed, info.world_hash, info.schedule_hash, info.steps);
  for (const auto& line : result.summary) out << line << '\n';
}

}  // namespace weakguide
