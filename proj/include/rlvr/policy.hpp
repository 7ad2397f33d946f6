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
#include <string>
#include <vector>

#include "rlvr/task_env.hpp"

namespace rlvr {

enum class PolicyMode { kShared, kTabular };

struct PolicySpec {
  PolicyMode mode = PolicyMode::kShared;
  int vocab_size = 8;
  int max_len = 8;
  int feature_dim = 0;            // shared mode: question feature length
  std::vector<int> question_ids;  // tabular mode: the trainable universe

  int input_dim() const;  // shared conditioning vector length
};

// One sampled token sequence with everything the learner needs recorded at
// sampling time: per-token log-probabilities under the sampling policy and
// the full next-token distributions (used for self-certainty and exact KL).
struct Rollout {
  int question_id = 0;
  std::vector<int> tokens;
  std::vector<double> logprob_old;
  std::vector<std::vector<double>> dist_old;
};

struct GroupBatch {
  int question_id = 0;
  std::vector<Rollout> rollouts;
  std::vector<double> rewards;
  std::uint64_t sampling_digest = 0;  // digest of the policy that sampled it
};

// Explicit autoregressive categorical policy over a small vocabulary.
//
// Shared mode: one weight matrix maps (features ⊕ position one-hot ⊕
// previous-token one-hot ⊕ bias) to vocab logits, shared across questions.
// Tabular mode: an independent logit row per (question, position); questions
// outside the trainable universe see zero logits (uniform) and reject
// gradient accumulation.
//
// Copies are deep; a snapshot is just a copy held const.
class Policy {
 public:
  explicit Policy(PolicySpec spec);

  const PolicySpec& spec() const { return spec_; }
  std::span<double> params() { return theta_; }
  std::span<const double> params() const { return theta_; }

  // Hash of spec + parameters; stamps GroupBatches at sampling time.
  std::uint64_t digest() const;

  // Temperature-1 next-token distribution / log-probabilities for the
  // context (instance, position, previous token). prev = -1 at position 0.
  std::vector<double> next_token_probs(const TaskInstance& inst, int pos,
                                       int prev) const;
  std::vector<double> next_token_logprobs(const TaskInstance& inst, int pos,
                                          int prev) const;

  // G independent ancestral samples; generation stops at eos or max_len.
  // Deterministic given (seed, question id, sample index). Stored logprobs
  // and distributions are temperature-1; temperature shapes the draw only.
  GroupBatch sample_group(const TaskInstance& inst, const Vocab& vocab, int G,
                          double temperature, int max_len,
                          std::uint64_t seed) const;

  // Exact per-token log-probabilities of a given token sequence.
  std::vector<double> logprob(const TaskInstance& inst,
                              std::span<const int> tokens) const;

  Policy snapshot() const { return *this; }

  // Maps d(objective)/d(logits) at one context into d/d(parameters),
  // accumulating into grad (same length as params()).
  void accumulate_context_grad(const TaskInstance& inst, int pos, int prev,
                               std::span<const double> dlogits,
                               std::span<double> grad) const;

  void save(const std::string& path) const;
  static Policy load(const std::string& path);

 private:
  std::vector<double> context_logits(const TaskInstance& inst, int pos,
                                     int prev) const;

  PolicySpec spec_;
  std::vector<double> theta_;
};

}  // namespace rlvr
