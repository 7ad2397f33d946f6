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

#include "rlvr/config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace rlvr {

namespace {

BaselineMode baseline_from_string(const std::string& s) {
  if (s == "mean") return BaselineMode::kGroupMean;
  if (s == "pos") return BaselineMode::kConst0;
  if (s == "neg") return BaselineMode::kConst1;
  throw ConfigError("unknown baseline mode: " + s);
}

std::string baseline_to_string(BaselineMode m) {
  switch (m) {
    case BaselineMode::kGroupMean: return "mean";
    case BaselineMode::kConst0: return "pos";
    case BaselineMode::kConst1: return "neg";
  }
  throw ConfigError("bad baseline mode");
}

RewardKind reward_from_string(const std::string& s) {
  if (s == "verifier") return RewardKind::kVerifier;
  if (s == "corrupted") return RewardKind::kCorrupted;
  if (s == "majority") return RewardKind::kMajorityVote;
  if (s == "certainty") return RewardKind::kSelfCertainty;
  throw ConfigError("unknown reward kind: " + s);
}

std::string reward_to_string(RewardKind k) {
  switch (k) {
    case RewardKind::kVerifier: return "verifier";
    case RewardKind::kCorrupted: return "corrupted";
    case RewardKind::kMajorityVote: return "majority";
    case RewardKind::kSelfCertainty: return "certainty";
  }
  throw ConfigError("bad reward kind");
}

}  // namespace

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config: " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw FormatError("malformed config: " + path);
  if (j.value("schema", "") != "rlvr-config/1") {
    throw FormatError("config schema version mismatch in " + path);
  }

  ExperimentConfig c;
  if (j.contains("task")) {
    const auto& t = j["task"];
    c.family = t.value("family", c.family);
    c.pool_count = t.value("count", c.pool_count);
    c.levels = t.value("levels", c.levels);
    c.pool_seed = t.value("pool_seed", c.pool_seed);
    c.vocab.size = t.value("vocab_size", c.vocab.size);
    c.vocab.eos = t.value("eos", c.vocab.eos);
    if (t.contains("answer_tokens")) {
      c.vocab.answer_tokens = t["answer_tokens"].get<std::vector<int>>();
    }
  }
  if (j.contains("eval_pool")) {
    const auto& e = j["eval_pool"];
    c.eval_pool_count = e.value("count", c.eval_pool_count);
    c.eval_pool_seed = e.value("pool_seed", c.eval_pool_seed);
  }
  if (j.contains("policy")) {
    const auto& p = j["policy"];
    const std::string mode = p.value("mode", std::string("shared"));
    if (mode != "shared" && mode != "tabular") {
      throw ConfigError("unknown policy mode: " + mode);
    }
    c.policy_mode = mode == "shared" ? PolicyMode::kShared : PolicyMode::kTabular;
    c.max_len = p.value("max_len", c.max_len);
  }
  if (j.contains("update")) {
    const auto& u = j["update"];
    c.update.clip_eps = u.value("clip_eps", c.update.clip_eps);
    c.update.kl_beta = u.value("kl_beta", c.update.kl_beta);
    c.update.learning_rate = u.value("learning_rate", c.update.learning_rate);
    c.update.group_size = u.value("group_size", c.update.group_size);
    if (u.contains("baseline")) {
      c.update.baseline = baseline_from_string(u["baseline"].get<std::string>());
    }
    c.update.length_norm = u.value("length_norm", c.update.length_norm);
    c.update.batch_prompts = u.value("batch_prompts", c.update.batch_prompts);
    c.update.total_steps = u.value("total_steps", c.update.total_steps);
    c.update.std_floor = u.value("std_floor", c.update.std_floor);
    c.update.temperature = u.value("temperature", c.update.temperature);
    c.update.use_adam = u.value("use_adam", c.update.use_adam);
  }
  if (j.contains("reward")) {
    const auto& r = j["reward"];
    if (r.contains("kind")) {
      c.reward.kind = reward_from_string(r["kind"].get<std::string>());
    }
    c.reward.gamma = r.value("gamma", c.reward.gamma);
    c.reward.probe_samples = r.value("probe_samples", c.reward.probe_samples);
    c.reward.vote_samples = r.value("vote_samples", c.reward.vote_samples);
    c.reward.advantage_subset =
        r.value("advantage_subset", c.reward.advantage_subset);
  }
  if (j.contains("dataset")) {
    c.dataset_n = j["dataset"].value("n", c.dataset_n);
  }
  if (j.contains("eval")) {
    c.eval_interval = j["eval"].value("interval", c.eval_interval);
    c.eval_samples = j["eval"].value("samples", c.eval_samples);
  }
  if (j.contains("judge")) {
    c.judge_backend = j["judge"].value("backend", c.judge_backend);
    c.judge_prompts = j["judge"].value("prompts", c.judge_prompts);
    c.judge_samples = j["judge"].value("samples", c.judge_samples);
  }
  c.vocab.validate();
  return c;
}

void ExperimentConfig::save(const std::string& path) const {
  nlohmann::json j;
  j["schema"] = "rlvr-config/1";
  j["task"] = {{"family", family},
               {"count", pool_count},
               {"levels", levels},
               {"pool_seed", pool_seed},
               {"vocab_size", vocab.size},
               {"eos", vocab.eos},
               {"answer_tokens", vocab.answer_tokens}};
  j["eval_pool"] = {{"count", eval_pool_count},
                    {"pool_seed", eval_pool_seed}};
  j["policy"] = {
      {"mode", policy_mode == PolicyMode::kShared ? "shared" : "tabular"},
      {"max_len", max_len}};
  j["update"] = {{"clip_eps", update.clip_eps},
                 {"kl_beta", update.kl_beta},
                 {"learning_rate", update.learning_rate},
                 {"group_size", update.group_size},
                 {"baseline", baseline_to_string(update.baseline)},
                 {"length_norm", update.length_norm},
                 {"batch_prompts", update.batch_prompts},
                 {"total_steps", update.total_steps},
                 {"std_floor", update.std_floor},
                 {"temperature", update.temperature},
                 {"use_adam", update.use_adam}};
  j["reward"] = {{"kind", reward_to_string(reward.kind)},
                 {"gamma", reward.gamma},
                 {"probe_samples", reward.probe_samples},
                 {"vote_samples", reward.vote_samples},
                 {"advantage_subset", reward.advantage_subset}};
  j["dataset"] = {{"n", dataset_n}};
  j["eval"] = {{"interval", eval_interval}, {"samples", eval_samples}};
  j["judge"] = {{"backend", judge_backend},
                {"prompts", judge_prompts},
                {"samples", judge_samples}};
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for write: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace rlvr
