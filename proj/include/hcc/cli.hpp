// Copyright 2026 The hcc Authors
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


#pragma once

#include <ostream>
#include <span>
#include <string>

namespace hcc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCodecError = 1;
inline constexpr int kExitUsage = 2;

/// Runs the command line `args` (without the program name). Data goes to
/// `out`, diagnostics to `err`. Returns 0 on success, 1 on codec or I/O
/// errors and 2 on usage errors.
int dispatch(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace hcc
