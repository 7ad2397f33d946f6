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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rlvr/policy.hpp"
#include "rlvr/task_env.hpp"

namespace rlvr {

// A rollout rendered for judging. The strategy key is the hash of the
// pre-answer token sequence; together with the extracted answer it drives
// the mock judge's published verdict rules.
struct ResponseText {
  int id = 0;
  std::string text;
  std::vector<int> tokens;
  std::optional<int> answer;
  std::uint64_t strategy_key = 0;
};

struct PromptContext {
  std::string text;
  int truth_token = -1;
};

ResponseText render_response(const Rollout& rollout, const Vocab& vocab,
                             int id);
PromptContext render_prompt(const TaskInstance& inst, const Vocab& vocab);

struct SimilarityJudgment {
  int id_a = 0;
  int id_b = 0;
  bool same_strategy = false;
  std::string raw;
};

enum class FaithLabel { kMisaligned, kPartial, kAligned, kInvalid };

struct FaithfulnessLabel {
  int response_id = 0;
  FaithLabel label = FaithLabel::kInvalid;
  std::string raw;
};

// Verdict parsing: the last marker occurrence in the judge text wins;
// absence means invalid. Similarity markers are ||yes|| (different
// strategies) and ||no|| (same strategy).
std::optional<bool> parse_similarity_verdict(const std::string& raw);
std::optional<FaithLabel> parse_faithfulness_verdict(const std::string& raw);

// Rubric templates sent to remote judges, with {prompt} / {generation0} /
// {generation1} / {response} placeholders.
const std::string& similarity_rubric();
const std::string& faithfulness_rubric();

class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  virtual std::string similarity_raw(const PromptContext& prompt,
                                     const ResponseText& a,
                                     const ResponseText& b) = 0;
  virtual std::string faithfulness_raw(const PromptContext& prompt,
                                       const ResponseText& response) = 0;
};

// Hermetic judge with published rules: two responses share a strategy iff
// they have equal extracted answers and equal strategy keys; a response is
// aligned if its trace contains the truth token, partially aligned if it
// contains some answer token but not the truth, misaligned otherwise.
class MockJudge : public JudgeBackend {
 public:
  std::string similarity_raw(const PromptContext& prompt,
                             const ResponseText& a,
                             const ResponseText& b) override;
  std::string faithfulness_raw(const PromptContext& prompt,
                               const ResponseText& response) override;
};

struct RemoteJudgeConfig {
  std::string endpoint;  // http(s)://host[:port]
  std::string model;
  std::string api_key;
  std::string audit_log_path;
  int timeout_seconds = 60;
  int max_retries = 3;

  // Reads RLVR_JUDGE_ENDPOINT, RLVR_JUDGE_MODEL, RLVR_JUDGE_API_KEY.
  static RemoteJudgeConfig from_env();
};

// Chat-completions client with per-request caching (same pair always yields
// the same cached verdict within a session) and an audit log of every
// request/response for replay.
class RemoteJudge : public JudgeBackend {
 public:
  explicit RemoteJudge(RemoteJudgeConfig config);
  ~RemoteJudge() override;

  std::string similarity_raw(const PromptContext& prompt,
                             const ResponseText& a,
                             const ResponseText& b) override;
  std::string faithfulness_raw(const PromptContext& prompt,
                               const ResponseText& response) override;

  int request_count() const;  // network calls actually made (cache misses)

 private:
  std::string complete(const std::string& user_message);

  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct Clustering {
  struct Cluster {
    int representative = 0;      // response id of the first member
    std::vector<int> members;    // response ids
  };
  std::vector<Cluster> clusters;
  int total = 0;
};

// Greedy single-pass clustering in input order: each response is compared
// against the representative of each existing cluster and joins the first
// similar one, else opens a new cluster.
Clustering cluster_responses(const PromptContext& prompt,
                             std::span<const ResponseText> responses,
                             JudgeBackend& backend,
                             std::vector<SimilarityJudgment>* audit = nullptr);

// Audit-mode alternative: judges every pair and unions similar ones. Equal
// to the greedy partition whenever the judged relation is transitive.
Clustering cluster_responses_pairwise(const PromptContext& prompt,
                                      std::span<const ResponseText> responses,
                                      JudgeBackend& backend);

// (N_eff - 1) / (K - 1) with N_eff = exp(Shannon entropy of cluster
// proportions); 0 for a single cluster.
double diversity_score(const Clustering& clustering);

// Mean per-prompt diversity over the first n_prompts pool instances,
// samples_per_prompt rollouts each.
double dataset_diversity(const Policy& policy, const TaskPool& pool,
                         int n_prompts, int samples_per_prompt,
                         JudgeBackend& backend, std::uint64_t seed);

enum class FaithFilter { kAll, kCorrectOnly };

struct FaithfulnessReport {
  double rate_aligned = 0.0;
  double rate_partial = 0.0;
  double rate_misaligned = 0.0;
  int valid_count = 0;
  int invalid_count = 0;
  std::vector<std::vector<FaithfulnessLabel>> per_prompt;
};

FaithfulnessReport faithfulness_rates(
    const Policy& policy, const TaskPool& pool, int n_prompts,
    int rollouts_per_prompt, JudgeBackend& backend, std::uint64_t seed,
    FaithFilter filter = FaithFilter::kCorrectOnly);

// Rates over an already-labeled response set (hermetic-test entry point).
FaithfulnessReport rates_from_labels(
    std::span<const std::vector<FaithfulnessLabel>> per_prompt);

// Diversity restricted per prompt to responses labeled aligned; prompts with
// fewer than two faithful responses score 0.
double faithful_diversity(const Policy& policy, const TaskPool& pool,
                          int n_prompts, int samples_per_prompt,
                          JudgeBackend& backend, std::uint64_t seed);

}  // namespace rlvr
