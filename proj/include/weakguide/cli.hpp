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

#ifndef WEAKGUIDE_CLI_HPP_
#define WEAKGUIDE_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace weakguide {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitRuntimeError = 2;

// argv[0] is the program name. Returns the process exit code.
int main_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace weakguide

#endif  // WEAKGUIDE_CLI_HPP_
