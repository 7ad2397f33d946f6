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

// Command-line driver wiring the lab modules into reproducible pipelines:
//   gen-tasks -> probe -> filter -> [corrupt] -> train -> eval/analyze
//   diversity / faithfulness score checkpoints through a judge backend
//   report emits the saturation-metrics CSV and curve SVG

#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rlvr/analytics.hpp"
#include "rlvr/config.hpp"
#include "rlvr/dataset.hpp"
#include "rlvr/grpo.hpp"
#include "rlvr/judge.hpp"
#include "rlvr/policy.hpp"
#include "rlvr/rewards.hpp"
#include "rlvr/rng.hpp"
#include "rlvr/task_env.hpp"

namespace fs = std::filesystem;
using namespace rlvr;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  std::optional<std::string> reward;
  std::optional<double> gamma;
  std::optional<std::string> baseline;
  std::optional<int> n;
  std::optional<std::string> backend;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config file");
  cmd->add_option("--out", args.out_dir, "artifact directory");
  cmd->add_option("--seed", args.seed, "run seed");
  cmd->add_option("--reward", args.reward,
                  "reward source: verifier|corrupted|majority|certainty");
  cmd->add_option("--gamma", args.gamma, "label corruption fraction");
  cmd->add_option("--baseline", args.baseline, "baseline: mean|pos|neg");
  cmd->add_option("--n", args.n, "training dataset size");
  cmd->add_option("--backend", args.backend, "judge backend: mock|remote");
}

ExperimentConfig resolve_config(const CommonArgs& args) {
  ExperimentConfig cfg;
  if (!args.config_path.empty()) cfg = ExperimentConfig::load(args.config_path);
  if (args.reward) {
    if (*args.reward == "verifier") cfg.reward.kind = RewardKind::kVerifier;
    else if (*args.reward == "corrupted") cfg.reward.kind = RewardKind::kCorrupted;
    else if (*args.reward == "majority") cfg.reward.kind = RewardKind::kMajorityVote;
    else if (*args.reward == "certainty") cfg.reward.kind = RewardKind::kSelfCertainty;
    else throw ConfigError("unknown reward source: " + *args.reward);
  }
  if (args.gamma) cfg.reward.gamma = *args.gamma;
  if (args.baseline) {
    if (*args.baseline == "mean") cfg.update.baseline = BaselineMode::kGroupMean;
    else if (*args.baseline == "pos") cfg.update.baseline = BaselineMode::kConst0;
    else if (*args.baseline == "neg") cfg.update.baseline = BaselineMode::kConst1;
    else throw ConfigError("unknown baseline: " + *args.baseline);
  }
  if (args.n) cfg.dataset_n = *args.n;
  if (args.backend) cfg.judge_backend = *args.backend;
  return cfg;
}

std::string artifact(const CommonArgs& args, const std::string& name) {
  return (fs::path(args.out_dir) / name).string();
}

void require_artifact(const CommonArgs& args, const std::string& name,
                      const std::string& producer) {
  if (!fs::exists(artifact(args, name))) {
    throw ConfigError("missing " + name + "; run `rlvr " + producer +
                      "` first");
  }
}

Policy make_policy(const ExperimentConfig& cfg, const TaskPool& train_pool) {
  PolicySpec spec;
  spec.mode = cfg.policy_mode;
  spec.vocab_size = cfg.vocab.size;
  spec.max_len = cfg.max_len;
  if (cfg.policy_mode == PolicyMode::kShared) {
    spec.feature_dim = train_pool.instances.empty()
                           ? cfg.levels
                           : static_cast<int>(
                                 train_pool.instances.front().features.size());
  } else {
    for (const auto& inst : train_pool.instances) {
      spec.question_ids.push_back(inst.id);
    }
  }
  return Policy(spec);
}

std::unique_ptr<JudgeBackend> make_backend(const ExperimentConfig& cfg,
                                           const CommonArgs& args) {
  if (cfg.judge_backend == "mock") return std::make_unique<MockJudge>();
  if (cfg.judge_backend == "remote") {
    auto remote_cfg = RemoteJudgeConfig::from_env();
    remote_cfg.audit_log_path = artifact(args, "judge_audit.jsonl");
    return std::make_unique<RemoteJudge>(std::move(remote_cfg));
  }
  throw ConfigError("unknown judge backend: " + cfg.judge_backend);
}

TaskPool training_pool(const ExperimentConfig& cfg, const CommonArgs& args) {
  require_artifact(args, "tasks.jsonl", "gen-tasks");
  TaskPool pool = load_pool(artifact(args, "tasks.jsonl"));
  if (fs::exists(artifact(args, "sample.jsonl"))) {
    const auto sample = StratifiedSample::load(artifact(args, "sample.jsonl"));
    return subset_pool(pool, sample);
  }
  return pool;
}

int cmd_gen_tasks(const CommonArgs& args) {
  const ExperimentConfig cfg = resolve_config(args);
  fs::create_directories(args.out_dir);
  const TaskPool pool = generate_pool(cfg.family, cfg.pool_count, cfg.levels,
                                      cfg.pool_seed, cfg.vocab);
  save_pool(pool, artifact(args, "tasks.jsonl"));
  const TaskPool eval_pool = generate_pool(
      cfg.family, cfg.eval_pool_count, cfg.levels, cfg.eval_pool_seed,
      cfg.vocab);
  save_pool(eval_pool, artifact(args, "eval_tasks.jsonl"));
  std::cout << "wrote " << pool.instances.size() << " training and "
            << eval_pool.instances.size() << " eval tasks to " << args.out_dir
            << "\n";
  return 0;
}

int cmd_probe(const CommonArgs& args) {
  const ExperimentConfig cfg = resolve_config(args);
  require_artifact(args, "tasks.jsonl", "gen-tasks");
  const TaskPool pool = load_pool(artifact(args, "tasks.jsonl"));
  const Policy policy = make_policy(cfg, pool);
  const DifficultyProfile profile = estimate_solve16(policy, pool, args.seed);
  profile.save(artifact(args, "profile.jsonl"));
  std::cout << "probed " << profile.solve16.size() << " instances\n";
  return 0;
}

int cmd_filter(const CommonArgs& args) {
  const ExperimentConfig cfg = resolve_config(args);
  require_artifact(args, "profile.jsonl", "probe");
  const auto profile = DifficultyProfile::load(artifact(args, "profile.jsonl"));
  const auto sample = filter_and_sample(profile, cfg.dataset_n, args.seed);
  sample.save(artifact(args, "sample.jsonl"));
  std::cout << "sampled " << sample.ids.size() << " instances\n";
  return 0;
}

int cmd_corrupt(const CommonArgs& args) {
  const ExperimentConfig cfg = resolve_config(args);
  const TaskPool pool = training_pool(cfg, args);
  const Policy policy = make_policy(cfg, pool);
  const LabelSet labels = corrupt_labels(pool, policy, cfg.reward.gamma,
                                         cfg.reward.probe_samples, args.seed);
  labels.save(artifact(args, "labels.jsonl"));
  int flagged = 0;
  for (const auto& [qid, f] : labels.corrupted) flagged += f ? 1 : 0;
  std::cout << "flagged " << flagged << " of " << pool.instances.size()
            << " prompts (gamma=" << cfg.reward.gamma << ")\n";
  return 0;
}

int cmd_train(const CommonArgs& args) {
  const ExperimentConfig cfg = resolve_config(args);
  const TaskPool pool = training_pool(cfg, args);

  TrainOptions options;
  options.source = cfg.reward;
  options.config = cfg.update;
  options.eval_interval = cfg.eval_interval;
  options.eval_samples = cfg.eval_samples;
  if (cfg.reward.kind == RewardKind::kCorrupted) {
    require_artifact(args, "labels.jsonl", "corrupt");
    options.labels = LabelSet::load(artifact(args, "labels.jsonl"));
  }
  TaskPool eval_pool;
  if (fs::exists(artifact(args, "eval_tasks.jsonl"))) {
    eval_pool = load_pool(artifact(args, "eval_tasks.jsonl"));
    options.eval_pool = &eval_pool;
  }

  TrainResult result = train(pool, make_policy(cfg, pool), options, args.seed);
  result.log.save(artifact(args, "run.log"));
  result.policy.save(artifact(args, "policy.json"));
  if (result.log.aborted()) {
    std::cerr << "training aborted: " << result.log.diagnostics.front()
              << "\n";
    return 1;
  }
  std::cout << "run " << result.log.run_id << ": "
            << result.log.steps.size() << " steps, final mean reward "
            << result.log.steps.back().mean_reward << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& args) {
  const ExperimentConfig cfg = resolve_config(args);
  require_artifact(args, "policy.json", "train");
  require_artifact(args, "eval_tasks.jsonl", "gen-tasks");
  const Policy policy = Policy::load(artifact(args, "policy.json"));
  const TaskPool pool = load_pool(artifact(args, "eval_tasks.jsonl"));

  double avg16 = 0.0;
  std::map<int, double> pass_k;
  for (const auto& inst : pool.instances) {
    const GroupBatch batch = policy.sample_group(
        inst, pool.vocab, 16, 1.0, policy.spec().max_len,
        derive_seed(args.seed, 0x6576616cULL,
                    static_cast<std::uint64_t>(inst.id)));
    std::array<bool, 16> flags{};
    for (std::size_t i = 0; i < batch.rollouts.size(); ++i) {
      flags[i] = verify(inst, batch.rollouts[i].tokens, pool.vocab) == 1;
    }
    const int ks[] = {1, 4, 8, 16};
    const auto m = eval_metrics(flags, ks);
    avg16 += m.avg16;
    for (const auto& [k, v] : m.pass_at) pass_k[k] += v;
  }
  const double count = static_cast<double>(pool.instances.size());
  nlohmann::json out;
  out["avg16"] = avg16 / count;
  for (auto& [k, v] : pass_k) out["pass@" + std::to_string(k)] = v / count;
  std::ofstream f(artifact(args, "eval.json"));
  f << out.dump(2) << "\n";
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_analysis(const CommonArgs& args, std::vector<std::string> logs,
                 bool with_svg) {
  if (logs.empty()) {
    require_artifact(args, "run.log", "train");
    logs.push_back(artifact(args, "run.log"));
  }
  const auto curves = ingest(logs);

  // saturation step per run from its training-reward curve
  std::map<std::string, std::optional<int>> t_sat_of;
  std::map<std::string, int> n_of;
  for (const auto& c : curves) {
    if (c.metric == "train_reward") {
      t_sat_of[c.run_id] = saturation_step(c);
      n_of[c.run_id] = c.n;
    }
  }

  std::vector<ReportRow> rows;
  for (const auto& c : curves) {
    if (c.metric == "train_reward") {
      ReportRow row;
      row.run_id = c.run_id;
      row.metric = c.metric;
      row.t_sat = t_sat_of[c.run_id];
      rows.push_back(row);
      continue;
    }
    const auto t_sat = t_sat_of.count(c.run_id) ? t_sat_of[c.run_id]
                                                : std::optional<int>{};
    // companion for G_sat: same metric from the run with the larger n
    const Curve* companion = nullptr;
    for (const auto& other : curves) {
      if (other.metric == c.metric && other.run_id != c.run_id &&
          other.n > c.n) {
        companion = &other;
        break;
      }
    }
    ReportRow row;
    row.run_id = c.run_id;
    row.metric = c.metric;
    row.t_sat = t_sat;
    row.metrics = efficiency_metrics(c, t_sat, companion);
    rows.push_back(row);
  }
  write_report_csv(rows, artifact(args, "report.csv"));
  std::cout << "wrote " << artifact(args, "report.csv") << "\n";

  if (with_svg) {
    std::optional<int> marker;
    if (!t_sat_of.empty()) marker = t_sat_of.begin()->second;
    write_curve_svg(curves, marker, artifact(args, "curves.svg"));
    std::cout << "wrote " << artifact(args, "curves.svg") << "\n";
  }
  return 0;
}

int cmd_diversity(const CommonArgs& args) {
  const ExperimentConfig cfg = resolve_config(args);
  require_artifact(args, "policy.json", "train");
  const Policy policy = Policy::load(artifact(args, "policy.json"));
  const TaskPool pool = training_pool(cfg, args);
  auto backend = make_backend(cfg, args);
  const int prompts =
      std::min(cfg.judge_prompts, static_cast<int>(pool.instances.size()));
  const double div = dataset_diversity(policy, pool, prompts,
                                       cfg.judge_samples, *backend, args.seed);
  const double faithful = faithful_diversity(
      policy, pool, prompts, cfg.judge_samples, *backend, args.seed);
  nlohmann::json out;
  out["diversity"] = div;
  out["faithful_diversity"] = faithful;
  std::ofstream f(artifact(args, "diversity.json"));
  f << out.dump(2) << "\n";
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_faithfulness(const CommonArgs& args) {
  const ExperimentConfig cfg = resolve_config(args);
  require_artifact(args, "policy.json", "train");
  const Policy policy = Policy::load(artifact(args, "policy.json"));
  const TaskPool pool = training_pool(cfg, args);
  auto backend = make_backend(cfg, args);
  const int prompts =
      std::min(cfg.judge_prompts, static_cast<int>(pool.instances.size()));
  const auto report =
      faithfulness_rates(policy, pool, prompts, cfg.judge_samples, *backend,
                         args.seed, FaithFilter::kAll);
  nlohmann::json out;
  out["aligned"] = report.rate_aligned;
  out["partial"] = report.rate_partial;
  out["misaligned"] = report.rate_misaligned;
  out["invalid"] = report.invalid_count;
  std::ofstream f(artifact(args, "faithfulness.json"));
  f << out.dump(2) << "\n";
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale RLVR laboratory"};
  app.require_subcommand(1);

  CommonArgs args;
  std::vector<std::string> logs;

  auto* gen = app.add_subcommand("gen-tasks", "generate task pools");
  add_common(gen, args);
  auto* probe = app.add_subcommand("probe", "estimate solve@16 difficulty");
  add_common(probe, args);
  auto* filter = app.add_subcommand("filter", "stratified round-robin sample");
  add_common(filter, args);
  auto* corrupt = app.add_subcommand("corrupt", "install corrupted labels");
  add_common(corrupt, args);
  auto* train_cmd = app.add_subcommand("train", "run the GRPO loop");
  add_common(train_cmd, args);
  auto* eval_cmd = app.add_subcommand("eval", "avg@16 / pass@k on eval pool");
  add_common(eval_cmd, args);
  auto* analyze = app.add_subcommand("analyze", "saturation metrics CSV");
  add_common(analyze, args);
  analyze->add_option("--log", logs, "run log files (default: <out>/run.log)");
  auto* diversity = app.add_subcommand("diversity", "semantic diversity");
  add_common(diversity, args);
  auto* faith = app.add_subcommand("faithfulness", "faithfulness rates");
  add_common(faith, args);
  auto* report = app.add_subcommand("report", "CSV + SVG curve report");
  add_common(report, args);
  report->add_option("--log", logs, "run log files (default: <out>/run.log)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_tasks(args);
    if (probe->parsed()) return cmd_probe(args);
    if (filter->parsed()) return cmd_filter(args);
    if (corrupt->parsed()) return cmd_corrupt(args);
    if (train_cmd->parsed()) return cmd_train(args);
    if (eval_cmd->parsed()) return cmd_eval(args);
    if (analyze->parsed()) return run_analysis(args, logs, false);
    if (diversity->parsed()) return cmd_diversity(args);
    if (faith->parsed()) return cmd_faithfulness(args);
    if (report->parsed()) return run_analysis(args, logs, true);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
