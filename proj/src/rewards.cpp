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

#include "rlvr/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlvr/rng.hpp"

namespace rlvr {

int LabelSet::label_for(int question_id) const {
  const auto it = effective.find(question_id);
  if (it == effective.end()) {
    throw ConfigError("no label for question " + std::to_string(question_id));
  }
  return it->second;
}

bool LabelSet::is_corrupted(int question_id) const {
  const auto it = corrupted.find(question_id);
  return it != corrupted.end() && it->second;
}

void LabelSet::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for write: " + path);
  nlohmann::json header;
  header["schema"] = "rlvr-labels/1";
  header["gamma"] = gamma;
  header["seed"] = seed;
  header["fallback_count"] = fallback_count;
  out << header.dump() << "\n";
  for (const auto& [qid, label] : effective) {
    nlohmann::json rec;
    rec["id"] = qid;
    rec["label"] = label;
    rec["corrupted"] = is_corrupted(qid);
    out << rec.dump() << "\n";
  }
}

LabelSet LabelSet::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty label file: " + path);
  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("schema", "") != "rlvr-labels/1") {
    throw FormatError("bad label header in " + path);
  }
  LabelSet labels;
  labels.gamma = header.at("gamma").get<double>();
  labels.seed = header.at("seed").get<std::uint64_t>();
  labels.fallback_count = header.value("fallback_count", 0);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded()) {
      throw FormatError(path + ":" + std::to_string(lineno) +
                        ": malformed record");
    }
    const int qid = rec.at("id").get<int>();
    labels.effective[qid] = rec.at("label").get<int>();
    labels.corrupted[qid] = rec.at("corrupted").get<bool>();
  }
  return labels;
}

LabelSet corrupt_labels(const TaskPool& pool, const Policy& policy,
                        double gamma, int probe_samples, std::uint64_t seed) {
  if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must be in [0,1]");
  if (probe_samples < 1) throw ConfigError("probe_samples must be >= 1");

  const auto& vocab = pool.vocab;
  const int n = static_cast<int>(pool.instances.size());
  const int n_flag = static_cast<int>(std::lround(gamma * n));

  LabelSet labels;
  labels.gamma = gamma;
  labels.seed = seed;
  for (const auto& inst : pool.instances) {
    labels.effective[inst.id] = inst.truth;
    labels.corrupted[inst.id] = false;
  }

  // Uniform selection without replacement: partial Fisher-Yates.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  RngStream pick = RngStream::derive(seed, 0x70696b63ULL);
  for (int i = 0; i < n_flag; ++i) {
    const auto j = i + static_cast<int>(pick.below(static_cast<std::uint64_t>(n - i)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }

  for (int i = 0; i < n_flag; ++i) {
    const auto& inst = pool.instances[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    const std::uint64_t probe_seed =
        derive_seed(seed, 0x70726f62ULL, static_cast<std::uint64_t>(inst.id));
    const int g = std::max(probe_samples, 2);
    GroupBatch probe = policy.sample_group(inst, vocab, g, 1.0,
                                           policy.spec().max_len, probe_seed);

    std::map<int, int> tally;  // incorrect answer token -> count
    for (int r = 0; r < probe_samples; ++r) {
      const auto ans = extract_answer(probe.rollouts[static_cast<std::size_t>(r)].tokens, vocab);
      if (ans && *ans != inst.truth) ++tally[*ans];
    }

    int label = -1;
    int best = 0;
    for (const auto& [tok, cnt] : tally) {  // ascending token id: smallest wins ties
      if (cnt > best) {
        best = cnt;
        label = tok;
      }
    }
    if (label < 0) {
      // Probe never produced an incorrect answer; small-vocabulary fallback.
      std::vector<int> wrong;
      for (int a : vocab.answer_tokens) {
        if (a != inst.truth) wrong.push_back(a);
      }
      if (wrong.empty()) {
        throw ConfigError("no incorrect answer token exists in the vocabulary");
      }
      RngStream fb = RngStream::derive(seed, 0x66616c6cULL,
                                       static_cast<std::uint64_t>(inst.id));
      label = wrong[fb.below(wrong.size())];
      ++labels.fallback_count;
    }
    labels.effective[inst.id] = label;
    labels.corrupted[inst.id] = true;
  }
  return labels;
}

void assign_rewards(GroupBatch& batch, const RewardSource& source,
                    const LabelSet& labels, const TaskPool& pool) {
  const auto& inst = pool.by_id(batch.question_id);
  int label;
  switch (source.kind) {
    case RewardKind::kVerifier:
      label = inst.truth;
      break;
    case RewardKind::kCorrupted:
      label = labels.label_for(batch.question_id);
      break;
    default:
      throw ConfigError(
          "proxy reward kinds are assigned by their dedicated operations");
  }
  batch.rewards.clear();
  batch.rewards.reserve(batch.rollouts.size());
  for (const auto& ro : batch.rollouts) {
    const auto ans = extract_answer(ro.tokens, pool.vocab);
    batch.rewards.push_back((ans && *ans == label) ? 1.0 : 0.0);
  }
}

PluralityResult plurality_answer(std::span<const std::optional<int>> answers) {
  std::map<int, int> tally;
  for (const auto& a : answers) {
    if (a) ++tally[*a];
  }
  PluralityResult result;
  int best = 0;
  for (const auto& [tok, cnt] : tally) best = std::max(best, cnt);
  int holders = 0;
  for (const auto& [tok, cnt] : tally) {  // ascending: smallest token id wins ties
    if (cnt == best && best > 0) {
      if (++holders == 1) result.label = tok;
    }
  }
  result.tie = holders > 1;
  return result;
}

MajorityVoteResult majority_vote_rewards(const Policy& policy,
                                         const TaskInstance& inst,
                                         const Vocab& vocab, int vote_samples,
                                         int advantage_subset,
                                         std::uint64_t seed) {
  if (advantage_subset < 2 || advantage_subset > vote_samples) {
    throw ConfigError("advantage_subset must be in [2, vote_samples]");
  }
  GroupBatch votes = policy.sample_group(inst, vocab, vote_samples, 1.0,
                                         policy.spec().max_len, seed);

  std::vector<std::optional<int>> answers;
  answers.reserve(votes.rollouts.size());
  for (const auto& ro : votes.rollouts) {
    answers.push_back(extract_answer(ro.tokens, vocab));
  }
  const PluralityResult vote = plurality_answer(answers);

  MajorityVoteResult result;
  result.pseudo_label = vote.label;
  result.tie = vote.tie;

  result.batch.question_id = inst.id;
  result.batch.sampling_digest = votes.sampling_digest;
  result.batch.rollouts.assign(
      votes.rollouts.begin(),
      votes.rollouts.begin() + advantage_subset);
  for (const auto& ro : result.batch.rollouts) {
    const auto ans = extract_answer(ro.tokens, vocab);
    const bool hit =
        result.pseudo_label && ans && *ans == *result.pseudo_label;
    result.batch.rewards.push_back(hit ? 1.0 : 0.0);
  }
  return result;
}

double self_certainty(const Rollout& rollout, int vocab_size) {
  if (rollout.dist_old.empty() ||
      rollout.dist_old.size() != rollout.tokens.size()) {
    throw InputError("rollout lacks stored per-token distributions");
  }
  const double v = static_cast<double>(vocab_size);
  const double u = 1.0 / v;
  double total = 0.0;
  for (const auto& dist : rollout.dist_old) {
    if (static_cast<int>(dist.size()) != vocab_size) {
      throw InputError("stored distribution size mismatch");
    }
    double kl = 0.0;
    for (double p : dist) kl += u * std::log(u / p);
    total += std::max(kl, 0.0);  // clamp -0.0 from rounding at uniform
  }
  return total / static_cast<double>(rollout.dist_old.size());
}

}  // namespace rlvr
