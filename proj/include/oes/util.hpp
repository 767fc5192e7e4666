// Copyright 2026 The OES Authors
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

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace oes {

/// FNV-1a 64-bit hash, used to fingerprint architectures and configs.
std::uint64_t fnv1a64(std::string_view data);

/// Shortest text form of a double that round-trips bit exactly (%.17g).
std::string format_g17(double value);

/// Runs fn(i) for i in [0, n) on `workers` threads. Work items are claimed
/// from a shared counter; callers that need determinism must write results
/// into per-index slots and reduce in index order afterwards.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

}  // namespace oes
