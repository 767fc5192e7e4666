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
#include <stdexcept>
#include <string>
#include <vector>

#include "oes/optimize.hpp"

namespace oes {

/// Invalid or malformed experiment configuration; the message carries the
/// file, the JSON path of the offending key and, for parse errors, the
/// line and column.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Everything one experiment needs: the training setup, the evaluation
/// tolerances, sweep lists and output location. Parsed from a JSON file
/// with strict validation (unknown keys are rejected).
struct ExperimentConfig {
  TrainConfig train;
  SolverConfig eval_solver;  ///< tight tolerances for evaluation commands
  int eval_batch = 256;
  std::uint64_t eval_seed = 90210;
  std::string output_dir = "runs/out";
  std::vector<double> pareto_gammas;
  std::vector<std::uint64_t> pareto_seeds;

  /// Hash of the raw config text; recorded in run manifests.
  std::uint64_t config_hash = 0;

  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_text(const std::string& text, const std::string& name);
};

}  // namespace oes
