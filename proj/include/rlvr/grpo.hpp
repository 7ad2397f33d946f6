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
#include <span>
#include <vector>

#include "rlvr/policy.hpp"
#include "rlvr/rewards.hpp"
#include "rlvr/runlog.hpp"
#include "rlvr/task_env.hpp"

namespace rlvr {

enum class BaselineMode { kGroupMean, kConst0, kConst1 };

struct UpdateConfig {
  double clip_eps = 0.2;
  double kl_beta = 0.001;
  double learning_rate = 0.05;  // toy-scale gradient-ascent step
  int group_size = 8;
  BaselineMode baseline = BaselineMode::kGroupMean;
  bool length_norm = true;
  int batch_prompts = 64;
  int total_steps = 496;
  double std_floor = 1e-8;
  double temperature = 1.0;
  bool use_adam = false;  // plain ascent by default; Adam behind this flag
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

// Group-mean mode: (r - mean) / max(std_pop, std_floor); all zeros when the
// population std vanishes. Constant baselines: r - b with no std division.
std::vector<double> compute_advantages(std::span<const double> rewards,
                                       BaselineMode mode,
                                       double std_floor = 1e-8);

// One prompt's contribution to the surrogate: sampled group, its advantages,
// and the instance the policy conditions on.
struct SurrogateItem {
  const TaskInstance* instance = nullptr;
  const GroupBatch* batch = nullptr;
  std::vector<double> advantages;
};

struct SurrogateResult {
  double objective = 0.0;
  std::vector<double> grad;  // d(objective)/d(theta); ascend to maximize
  double mean_kl = 0.0;      // token-weighted exact KL(theta || ref)
};

// Clipped surrogate averaged 1/B over prompts and 1/G over rollouts, with
// 1/|o_i| token weighting when length_norm, minus kl_beta times the exact
// per-token categorical KL to the reference policy under the same weighting.
// Every batch must carry the digest of theta_old; anything else is a
// contract error.
SurrogateResult surrogate_loss(const Policy& theta, const Policy& theta_old,
                               const Policy& ref,
                               std::span<const SurrogateItem> items,
                               const UpdateConfig& config);

// Deterministic prompt schedule. Pools no larger than the batch repeat
// round-robin, so each prompt appears exactly batch/n times per step when n
// divides the batch; larger pools cycle through seeded epoch shuffles
// without replacement.
class PromptScheduler {
 public:
  PromptScheduler(int pool_size, int batch_prompts, std::uint64_t seed);
  std::vector<int> next_batch();

 private:
  void reshuffle();

  int n_;
  int batch_;
  std::uint64_t seed_;
  std::vector<int> order_;
  int cursor_ = 0;
  int epoch_ = 0;
};

struct TrainOptions {
  RewardSource source;
  LabelSet labels;  // required for corrupted rewards
  UpdateConfig config;
  const TaskPool* eval_pool = nullptr;  // held-out avg@16 / pass@k when set
  int eval_interval = 31;
  int eval_samples = 16;
};

struct TrainResult {
  RunLog log;
  Policy policy;
};

// Runs the strictly on-policy loop: per step, snapshot theta_old, assemble
// batch_prompts prompts (repeating uniformly when the pool is smaller),
// sample one group per prompt, assign rewards, take exactly one gradient
// update. NaN in parameters or gradient stops the run with a diagnostic
// record in the log.
TrainResult train(const TaskPool& pool, Policy policy,
                  const TrainOptions& options, std::uint64_t seed);

}  // namespace rlvr
