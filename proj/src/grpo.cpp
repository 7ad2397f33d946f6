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

#include "rlvr/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "rlvr/analytics.hpp"
#include "rlvr/rng.hpp"

namespace rlvr {

std::vector<double> compute_advantages(std::span<const double> rewards,
                                       BaselineMode mode, double std_floor) {
  if (rewards.size() < 2) throw InputError("group size must be >= 2");
  const auto g = static_cast<double>(rewards.size());
  std::vector<double> adv(rewards.begin(), rewards.end());

  if (mode == BaselineMode::kConst0) return adv;
  if (mode == BaselineMode::kConst1) {
    for (double& a : adv) a -= 1.0;
    return adv;
  }

  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / g;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / g);  // population std
  if (sd <= std_floor) {
    std::fill(adv.begin(), adv.end(), 0.0);
    return adv;
  }
  for (double& a : adv) a = (a - mean) / sd;
  return adv;
}

SurrogateResult surrogate_loss(const Policy& theta, const Policy& theta_old,
                               const Policy& ref,
                               std::span<const SurrogateItem> items,
                               const UpdateConfig& config) {
  if (items.empty()) throw InputError("no surrogate items");
  const std::uint64_t old_digest = theta_old.digest();
  const int vocab_size = theta.spec().vocab_size;
  const double eps = config.clip_eps;
  const double beta = config.kl_beta;

  SurrogateResult result;
  result.grad.assign(theta.params().size(), 0.0);
  double kl_weight_total = 0.0;

  const double per_item = 1.0 / static_cast<double>(items.size());
  std::vector<double> dlogits(static_cast<std::size_t>(vocab_size));

  for (const auto& item : items) {
    if (item.batch == nullptr || item.instance == nullptr) {
      throw InputError("surrogate item missing batch or instance");
    }
    const GroupBatch& batch = *item.batch;
    if (batch.sampling_digest != old_digest) {
      throw ContractError("batch was not sampled from the given theta_old");
    }
    if (item.advantages.size() != batch.rollouts.size()) {
      throw InputError("advantage count does not match group size");
    }
    const double per_rollout =
        per_item / static_cast<double>(batch.rollouts.size());

    for (std::size_t i = 0; i < batch.rollouts.size(); ++i) {
      const Rollout& ro = batch.rollouts[i];
      const double adv = item.advantages[i];
      const double token_w =
          config.length_norm
              ? per_rollout / static_cast<double>(ro.tokens.size())
              : per_rollout;

      int prev = -1;
      for (std::size_t t = 0; t < ro.tokens.size(); ++t) {
        const int tok = ro.tokens[t];
        const int pos = static_cast<int>(t);
        const auto lp_new =
            theta.next_token_logprobs(*item.instance, pos, prev);
        const auto lp_ref = ref.next_token_logprobs(*item.instance, pos, prev);
        const double lp_old = ro.logprob_old[t];
        const double rho = std::exp(lp_new[static_cast<std::size_t>(tok)] - lp_old);
        const double rho_clipped = std::clamp(rho, 1.0 - eps, 1.0 + eps);
        const double surrogate = std::min(rho * adv, rho_clipped * adv);
        // Gradient flows only while the unclipped branch is the active min.
        const bool active =
            (adv >= 0.0) ? (rho <= 1.0 + eps) : (rho >= 1.0 - eps);

        double kl = 0.0;
        for (int v = 0; v < vocab_size; ++v) {
          const double p = std::exp(lp_new[static_cast<std::size_t>(v)]);
          kl += p * (lp_new[static_cast<std::size_t>(v)] -
                     lp_ref[static_cast<std::size_t>(v)]);
        }
        kl = std::max(kl, 0.0);

        result.objective += token_w * (surrogate - beta * kl);
        result.mean_kl += token_w * kl;
        kl_weight_total += token_w;

        // d/dlogits of [surrogate - beta * KL] at this context.
        for (int v = 0; v < vocab_size; ++v) {
          const double p = std::exp(lp_new[static_cast<std::size_t>(v)]);
          double d = 0.0;
          if (active) {
            const double ind = (v == tok) ? 1.0 : 0.0;
            d += adv * rho * (ind - p);
          }
          d -= beta * p *
               ((lp_new[static_cast<std::size_t>(v)] -
                 lp_ref[static_cast<std::size_t>(v)]) -
                kl);
          dlogits[static_cast<std::size_t>(v)] = token_w * d;
        }
        theta.accumulate_context_grad(*item.instance, pos, prev, dlogits,
                                      result.grad);
        prev = tok;
      }
    }
  }
  if (kl_weight_total > 0.0) result.mean_kl /= kl_weight_total;
  return result;
}

PromptScheduler::PromptScheduler(int pool_size, int batch_prompts,
                                 std::uint64_t seed)
    : n_(pool_size), batch_(batch_prompts), seed_(seed) {
  if (pool_size < 1) throw ConfigError("pool_size must be >= 1");
  if (batch_prompts < 1) throw ConfigError("batch_prompts must be >= 1");
  order_.resize(static_cast<std::size_t>(n_));
  std::iota(order_.begin(), order_.end(), 0);
}

void PromptScheduler::reshuffle() {
  RngStream rng = RngStream::derive(seed_, 0x73687566ULL,
                                    static_cast<std::uint64_t>(epoch_));
  for (int i = n_ - 1; i > 0; --i) {
    const auto j =
        static_cast<int>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(order_[static_cast<std::size_t>(i)],
              order_[static_cast<std::size_t>(j)]);
  }
  ++epoch_;
}

std::vector<int> PromptScheduler::next_batch() {
  std::vector<int> batch;
  batch.reserve(static_cast<std::size_t>(batch_));
  for (int slot = 0; slot < batch_; ++slot) {
    if (n_ <= batch_) {
      // round-robin without shuffling keeps each prompt's repeat count
      // exact (e.g. n=8 appears 8 times per 64-prompt batch)
      batch.push_back(cursor_ % n_);
      ++cursor_;
    } else {
      if (cursor_ == 0 || cursor_ >= n_) {
        reshuffle();
        cursor_ = 0;
      }
      batch.push_back(order_[static_cast<std::size_t>(cursor_++)]);
    }
  }
  return batch;
}

namespace {

bool has_nan(std::span<const double> xs) {
  return std::any_of(xs.begin(), xs.end(),
                     [](double x) { return !std::isfinite(x); });
}

std::string make_run_id(const UpdateConfig& c, const RewardSource& s,
                        std::uint64_t seed, std::size_t n) {
  std::uint64_t h = mix64(seed);
  auto feed = [&h](std::uint64_t v) { h = mix64(h ^ mix64(v)); };
  feed(static_cast<std::uint64_t>(s.kind));
  feed(static_cast<std::uint64_t>(n));
  feed(static_cast<std::uint64_t>(c.group_size));
  feed(static_cast<std::uint64_t>(c.total_steps));
  feed(static_cast<std::uint64_t>(c.batch_prompts));
  feed(static_cast<std::uint64_t>(c.baseline));
  std::uint64_t bits;
  std::memcpy(&bits, &c.learning_rate, sizeof(bits));
  feed(bits);
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

void run_eval(const Policy& policy, const TaskPool& eval_pool, int step,
              int eval_samples, std::uint64_t seed, RunLog& log) {
  double avg16 = 0.0;
  std::vector<int> counts;
  counts.reserve(eval_pool.instances.size());
  for (const auto& inst : eval_pool.instances) {
    GroupBatch batch = policy.sample_group(
        inst, eval_pool.vocab, eval_samples, 1.0, policy.spec().max_len,
        derive_seed(seed, 0x6576616cULL, static_cast<std::uint64_t>(step),
                    static_cast<std::uint64_t>(inst.id)));
    int c = 0;
    for (const auto& ro : batch.rollouts) {
      c += verify(inst, ro.tokens, eval_pool.vocab);
    }
    counts.push_back(c);
    avg16 += static_cast<double>(c) / static_cast<double>(eval_samples);
  }
  avg16 /= static_cast<double>(eval_pool.instances.size());
  log.evals.push_back({step, "avg16", avg16});
  if (eval_samples == 16) {
    for (int k : {4, 8, 16}) {
      double pk = 0.0;
      for (int c : counts) pk += pass_at_k_unbiased(c, 16, k);
      pk /= static_cast<double>(counts.size());
      log.evals.push_back({step, "pass@" + std::to_string(k), pk});
    }
  }
}

}  // namespace

TrainResult train(const TaskPool& pool, Policy policy,
                  const TrainOptions& options, std::uint64_t seed) {
  if (pool.instances.empty()) throw ConfigError("training pool is empty");
  const UpdateConfig& cfg = options.config;
  const int n = static_cast<int>(pool.instances.size());
  const int batch_prompts = cfg.batch_prompts;

  RunLog log;
  log.run_id = make_run_id(cfg, options.source, seed, pool.instances.size());
  log.n_prompts = n;
  log.seed = seed;

  PromptScheduler scheduler(n, batch_prompts, seed);

  const Policy ref = policy.snapshot();  // fixed reference for the KL term

  // Adam state (used only when cfg.use_adam).
  std::vector<double> m(policy.params().size(), 0.0);
  std::vector<double> v(policy.params().size(), 0.0);

  if (options.eval_pool != nullptr) {
    run_eval(policy, *options.eval_pool, 0, options.eval_samples, seed, log);
  }

  for (int step = 1; step <= cfg.total_steps; ++step) {
    const Policy theta_old = policy.snapshot();

    std::vector<GroupBatch> batches;
    std::vector<const TaskInstance*> instances;
    batches.reserve(static_cast<std::size_t>(batch_prompts));
    instances.reserve(static_cast<std::size_t>(batch_prompts));

    const std::vector<int> schedule = scheduler.next_batch();
    for (int slot = 0; slot < batch_prompts; ++slot) {
      const TaskInstance& inst =
          pool.instances[static_cast<std::size_t>(
              schedule[static_cast<std::size_t>(slot)])];
      const std::uint64_t slot_seed =
          derive_seed(seed, 0x73616d70ULL, static_cast<std::uint64_t>(step),
                      static_cast<std::uint64_t>(slot));
      GroupBatch batch;
      switch (options.source.kind) {
        case RewardKind::kVerifier:
        case RewardKind::kCorrupted:
          batch = theta_old.sample_group(inst, pool.vocab, cfg.group_size,
                                         cfg.temperature,
                                         policy.spec().max_len, slot_seed);
          assign_rewards(batch, options.source, options.labels, pool);
          break;
        case RewardKind::kMajorityVote: {
          auto mv = majority_vote_rewards(
              theta_old, inst, pool.vocab, options.source.vote_samples,
              options.source.advantage_subset, slot_seed);
          batch = std::move(mv.batch);
          break;
        }
        case RewardKind::kSelfCertainty:
          batch = theta_old.sample_group(inst, pool.vocab, cfg.group_size,
                                         cfg.temperature,
                                         policy.spec().max_len, slot_seed);
          for (const auto& ro : batch.rollouts) {
            batch.rewards.push_back(
                self_certainty(ro, pool.vocab.size));
          }
          break;
      }
      batches.push_back(std::move(batch));
      instances.push_back(&inst);
    }

    std::vector<SurrogateItem> items;
    items.reserve(batches.size());
    StepRecord record;
    record.step = step;
    std::map<int, std::pair<double, int>> per_prompt_acc;
    double reward_sum = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      SurrogateItem item;
      item.instance = instances[b];
      item.batch = &batches[b];
      item.advantages = compute_advantages(batches[b].rewards, cfg.baseline,
                                           cfg.std_floor);
      items.push_back(std::move(item));
      const double group_mean =
          std::accumulate(batches[b].rewards.begin(),
                          batches[b].rewards.end(), 0.0) /
          static_cast<double>(batches[b].rewards.size());
      reward_sum += group_mean;
      auto& acc = per_prompt_acc[batches[b].question_id];
      acc.first += group_mean;
      acc.second += 1;
    }
    record.mean_reward = reward_sum / static_cast<double>(batches.size());
    for (const auto& [qid, acc] : per_prompt_acc) {
      record.per_prompt[qid] = acc.first / static_cast<double>(acc.second);
    }

    const SurrogateResult sr = surrogate_loss(policy, theta_old, ref, items, cfg);
    log.steps.push_back(std::move(record));

    if (has_nan(sr.grad)) {
      log.diagnostics.push_back("non-finite gradient at step " +
                                std::to_string(step));
      break;
    }

    auto params = policy.params();
    if (cfg.use_adam) {
      const double t = static_cast<double>(step);
      const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t);
      const double bc2 = 1.0 - std::pow(cfg.adam_beta2, t);
      for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * sr.grad[i];
        v[i] = cfg.adam_beta2 * v[i] +
               (1.0 - cfg.adam_beta2) * sr.grad[i] * sr.grad[i];
        params[i] += cfg.learning_rate * (m[i] / bc1) /
                     (std::sqrt(v[i] / bc2) + cfg.adam_eps);
      }
    } else {
      for (std::size_t i = 0; i < params.size(); ++i) {
        params[i] += cfg.learning_rate * sr.grad[i];
      }
    }

    if (has_nan(params)) {
      log.diagnostics.push_back("non-finite parameters at step " +
                                std::to_string(step));
      break;
    }

    if (options.eval_pool != nullptr &&
        (step % options.eval_interval == 0 || step == cfg.total_steps)) {
      run_eval(policy, *options.eval_pool, step, options.eval_samples, seed,
               log);
    }
  }

  return {std::move(log), std::move(policy)};
}

}  // namespace rlvr
