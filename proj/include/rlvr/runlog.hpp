/*
 * Copyright 2026 the rlvr-lab authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace rlvr {

inline constexpr const char* kRunLogSchema = "rlvr-runlog/1";

struct StepRecord {
  int step = 0;
  double mean_reward = 0.0;
  std::map<int, double> per_prompt;  // question id -> mean reward this step
};

struct EvalRecord {
  int step = 0;
  std::string metric;
  double value = 0.0;
};

// Line-delimited training log: one header line, then step / eval /
// diagnostic records. The same schema is consumed by the analytics module,
// including logs produced elsewhere.
struct RunLog {
  std::string run_id;
  int n_prompts = 0;
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
  std::vector<std::string> diagnostics;

  bool aborted() const { return !diagnostics.empty(); }

  void save(const std::string& path) const;
  static RunLog load(const std::string& path);
};

}  // namespace rlvr
