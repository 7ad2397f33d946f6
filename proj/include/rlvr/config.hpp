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
#include <string>

#include "rlvr/grpo.hpp"
#include "rlvr/policy.hpp"
#include "rlvr/rewards.hpp"
#include "rlvr/task_env.hpp"

namespace rlvr {

// Everything a run needs; a config file plus a seed determines a run
// bit-exactly under the mock judge backend. Serialized as JSON with a
// versioned schema; absent fields keep the defaults below.
struct ExperimentConfig {
  // task pool
  std::string family = "parity";
  int pool_count = 256;
  int levels = 5;
  Vocab vocab;
  std::uint64_t pool_seed = 1;

  // held-out evaluation pool
  int eval_pool_count = 32;
  std::uint64_t eval_pool_seed = 9090;

  // policy
  PolicyMode policy_mode = PolicyMode::kShared;
  int max_len = 8;

  UpdateConfig update;
  RewardSource reward;

  int dataset_n = 8;  // stratified sample size

  int eval_interval = 31;
  int eval_samples = 16;

  std::string judge_backend = "mock";  // mock | remote
  int judge_prompts = 8;
  int judge_samples = 16;

  static ExperimentConfig load(const std::string& path);
  void save(const std::string& path) const;
};

}  // namespace rlvr
