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

#include "rlvr/policy.hpp"
#include "rlvr/task_env.hpp"

namespace rlvr {

inline constexpr int kSolveSamples = 16;

struct DifficultyProfile {
  std::map<int, int> solve16;  // question id -> correct count in [0, 16]
  std::uint64_t probe_seed = 0;

  void save(const std::string& path) const;
  static DifficultyProfile load(const std::string& path);
};

struct StratifiedSample {
  std::vector<int> ids;            // selection order preserved
  std::map<int, int> bin_of;       // id -> solve@16 bin (1..15)

  void save(const std::string& path) const;
  static StratifiedSample load(const std::string& path);
};

// 16 temperature-1 rollouts per instance, verifier-scored.
DifficultyProfile estimate_solve16(const Policy& policy, const TaskPool& pool,
                                   std::uint64_t seed);

// Retains instances with solve@16 in [1, 15], partitions them into bins
// B_1..B_15 by count, then round-robins bins in order drawing one uniform
// instance without replacement from each nonempty bin until N are selected.
StratifiedSample filter_and_sample(const DifficultyProfile& profile, int n,
                                   std::uint64_t seed);

// Sub-pool holding the sampled instances in selection order.
TaskPool subset_pool(const TaskPool& pool, const StratifiedSample& sample);

}  // namespace rlvr
