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
#include <optional>
#include <span>
#include <string>

#include "rlvr/policy.hpp"
#include "rlvr/task_env.hpp"

namespace rlvr {

enum class RewardKind { kVerifier, kCorrupted, kMajorityVote, kSelfCertainty };

struct RewardSource {
  RewardKind kind = RewardKind::kVerifier;
  double gamma = 0.0;            // corrupted
  int probe_samples = 96;        // corrupted
  int vote_samples = 16;         // majority vote
  int advantage_subset = 8;      // majority vote
};

// Effective answer labels per question; a round(γ·N) subset carries a
// verifier-incorrect label installed by probing the policy.
struct LabelSet {
  std::map<int, int> effective;        // question id -> label token
  std::map<int, bool> corrupted;       // question id -> flag
  double gamma = 0.0;
  std::uint64_t seed = 0;
  int fallback_count = 0;  // prompts whose probe produced no incorrect answer

  int label_for(int question_id) const;
  bool is_corrupted(int question_id) const;

  void save(const std::string& path) const;
  static LabelSet load(const std::string& path);
};

// Selects round(γ·N) prompts uniformly without replacement; for each, probes
// the policy with probe_samples temperature-1 rollouts and installs the most
// frequent verifier-incorrect final answer as the label (tie-break: smallest
// token id; probe without any incorrect answer falls back to a uniformly
// random incorrect answer token and is counted in fallback_count).
LabelSet corrupt_labels(const TaskPool& pool, const Policy& policy,
                        double gamma, int probe_samples, std::uint64_t seed);

// Fills batch.rewards in place per the source kind. Verifier/corrupted score
// each rollout against the effective label; the proxy kinds are handled by
// the dedicated operations below and rejected here.
void assign_rewards(GroupBatch& batch, const RewardSource& source,
                    const LabelSet& labels, const TaskPool& pool);

struct PluralityResult {
  std::optional<int> label;
  bool tie = false;
};

// Most frequent non-null answer; ties broken by smallest token id and
// flagged. Depends only on the multiset of answers.
PluralityResult plurality_answer(std::span<const std::optional<int>> answers);

struct MajorityVoteResult {
  std::optional<int> pseudo_label;
  bool tie = false;
  GroupBatch batch;  // first advantage_subset rollouts, rewards filled
};

// TTRL-style proxy: pseudo-label = plurality answer among vote_samples fresh
// rollouts; reward 1 iff a rollout's extracted answer equals it; the first
// advantage_subset rollouts form the training group.
MajorityVoteResult majority_vote_rewards(const Policy& policy,
                                         const TaskInstance& inst,
                                         const Vocab& vocab, int vote_samples,
                                         int advantage_subset,
                                         std::uint64_t seed);

// Average over positions of KL(U || p_t) where U is uniform over the
// vocabulary and p_t the stored next-token distribution. Nonnegative; 0 for
// a uniform policy.
double self_certainty(const Rollout& rollout, int vocab_size);

}  // namespace rlvr
