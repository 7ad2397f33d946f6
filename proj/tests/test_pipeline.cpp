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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "rlvr/config.hpp"
#include "rlvr/dataset.hpp"
#include "rlvr/rewards.hpp"
#include "rlvr/runlog.hpp"
#include "rlvr/task_env.hpp"

#include <sys/wait.h>

namespace fs = std::filesystem;
using namespace rlvr;

namespace {

int run_cli(const std::string& args, const std::string& stderr_file = "") {
  std::string cmd = std::string(RLVR_CLI_PATH) + " " + args + " >/dev/null";
  cmd += stderr_file.empty() ? " 2>/dev/null" : " 2>" + stderr_file;
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small but complete experiment; 60 steps clears the 50-step guard window
// the analysis stage requires.
fs::path write_config(const fs::path& dir) {
  ExperimentConfig cfg;
  cfg.family = "parity";
  cfg.pool_count = 24;
  cfg.levels = 3;
  cfg.pool_seed = 11;
  cfg.vocab.size = 4;
  cfg.vocab.answer_tokens = {0, 1};
  cfg.vocab.eos = 3;
  cfg.eval_pool_count = 8;
  cfg.eval_pool_seed = 909;
  cfg.max_len = 2;
  cfg.update.total_steps = 60;
  cfg.update.batch_prompts = 8;
  cfg.update.group_size = 4;
  cfg.update.learning_rate = 0.2;
  cfg.reward.probe_samples = 8;
  cfg.dataset_n = 6;
  cfg.eval_interval = 30;
  cfg.judge_prompts = 4;
  cfg.judge_samples = 8;
  const fs::path path = dir / "config.json";
  cfg.save(path.string());
  return path;
}

}  // namespace

TEST_CASE("the full pipeline runs end to end and its artifacts parse") {
  const fs::path dir = fresh_dir("rlvr_pipeline_a");
  const fs::path cfg = write_config(dir);
  const std::string base = "--config " + cfg.string() + " --out " + dir.string();

  REQUIRE(run_cli("gen-tasks " + base) == 0);
  const TaskPool pool = load_pool((dir / "tasks.jsonl").string());
  CHECK(pool.instances.size() == 24);
  const TaskPool eval_pool = load_pool((dir / "eval_tasks.jsonl").string());
  CHECK(eval_pool.instances.size() == 8);

  REQUIRE(run_cli("probe " + base + " --seed 3") == 0);
  const auto profile = DifficultyProfile::load((dir / "profile.jsonl").string());
  CHECK(profile.solve16.size() == 24);

  REQUIRE(run_cli("filter " + base + " --seed 3") == 0);
  const auto sample = StratifiedSample::load((dir / "sample.jsonl").string());
  CHECK(sample.ids.size() == 6);
  for (int id : sample.ids) {
    CHECK(profile.solve16.at(id) >= 1);
    CHECK(profile.solve16.at(id) <= 15);
  }

  REQUIRE(run_cli("corrupt " + base + " --gamma 0.5 --seed 3") == 0);
  const LabelSet labels = LabelSet::load((dir / "labels.jsonl").string());
  int flagged = 0;
  for (const auto& [qid, f] : labels.corrupted) flagged += f ? 1 : 0;
  CHECK(flagged == 3);  // round(0.5 * 6) of the sampled subset

  REQUIRE(run_cli("train " + base + " --seed 4") == 0);
  const RunLog log = RunLog::load((dir / "run.log").string());
  CHECK(log.steps.size() == 60);
  CHECK(!log.aborted());
  CHECK(log.n_prompts == 6);
  // avg16 at step 0, each interval multiple, and the final step.
  int avg16_evals = 0;
  for (const auto& ev : log.evals) {
    if (ev.metric == "avg16") ++avg16_evals;
  }
  CHECK(avg16_evals == 3);  // steps 0, 30, 60

  REQUIRE(run_cli("eval " + base + " --seed 4") == 0);
  const auto eval_json =
      nlohmann::json::parse(slurp(dir / "eval.json"));
  CHECK(eval_json.contains("avg16"));
  CHECK(eval_json.contains("pass@16"));
  const double avg16 = eval_json["avg16"].get<double>();
  CHECK(avg16 >= 0.0);
  CHECK(avg16 <= 1.0);
  CHECK(eval_json["pass@16"].get<double>() >= avg16);

  REQUIRE(run_cli("analyze " + base) == 0);
  const std::string report = slurp(dir / "report.csv");
  CHECK(report.find("run_id,metric,t_sat,delta_sat,delta_post,g_sat") == 0);
  CHECK(report.find(log.run_id) != std::string::npos);

  REQUIRE(run_cli("report " + base) == 0);
  CHECK(fs::exists(dir / "curves.svg"));
  CHECK(slurp(dir / "curves.svg").find("<svg") == 0);

  REQUIRE(run_cli("diversity " + base + " --seed 4") == 0);
  const auto div_json = nlohmann::json::parse(slurp(dir / "diversity.json"));
  CHECK(div_json["diversity"].get<double>() >= 0.0);
  CHECK(div_json["diversity"].get<double>() <= 1.0);
  CHECK(div_json["faithful_diversity"].get<double>() >= 0.0);

  REQUIRE(run_cli("faithfulness " + base + " --seed 4") == 0);
  const auto faith_json =
      nlohmann::json::parse(slurp(dir / "faithfulness.json"));
  const double total = faith_json["aligned"].get<double>() +
                       faith_json["partial"].get<double>() +
                       faith_json["misaligned"].get<double>();
  CHECK(total == doctest::Approx(1.0));

  fs::remove_all(dir);
}

TEST_CASE("repeated runs from one config and seed are byte-identical") {
  const fs::path a = fresh_dir("rlvr_pipeline_b1");
  const fs::path b = fresh_dir("rlvr_pipeline_b2");
  const fs::path c = fresh_dir("rlvr_pipeline_b3");
  for (const auto& dir : {a, b, c}) {
    const fs::path cfg = write_config(dir);
    const std::string base =
        "--config " + cfg.string() + " --out " + dir.string();
    const std::string seed = (dir == c) ? "9" : "5";
    REQUIRE(run_cli("gen-tasks " + base) == 0);
    REQUIRE(run_cli("probe " + base + " --seed " + seed) == 0);
    REQUIRE(run_cli("filter " + base + " --seed " + seed) == 0);
    REQUIRE(run_cli("train " + base + " --seed " + seed) == 0);
    REQUIRE(run_cli("eval " + base + " --seed " + seed) == 0);
  }
  CHECK(slurp(a / "tasks.jsonl") == slurp(b / "tasks.jsonl"));
  CHECK(slurp(a / "sample.jsonl") == slurp(b / "sample.jsonl"));
  CHECK(slurp(a / "run.log") == slurp(b / "run.log"));
  CHECK(slurp(a / "policy.json") == slurp(b / "policy.json"));
  CHECK(slurp(a / "eval.json") == slurp(b / "eval.json"));

  // A different seed must change the trajectory but not the task pool.
  CHECK(slurp(a / "tasks.jsonl") == slurp(c / "tasks.jsonl"));
  CHECK(slurp(a / "run.log") != slurp(c / "run.log"));
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(c);
}

TEST_CASE("missing artifacts fail fast and name the producing command") {
  const fs::path dir = fresh_dir("rlvr_pipeline_c");
  const fs::path cfg = write_config(dir);
  const std::string base = "--config " + cfg.string() + " --out " + dir.string();
  const fs::path err = dir / "stderr.txt";

  CHECK(run_cli("train " + base, err.string()) == 1);
  CHECK(slurp(err).find("gen-tasks") != std::string::npos);

  CHECK(run_cli("filter " + base, err.string()) == 1);
  CHECK(slurp(err).find("probe") != std::string::npos);

  CHECK(run_cli("eval " + base, err.string()) == 1);
  CHECK(slurp(err).find("train") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("corrupted-reward training requires the label artifact") {
  const fs::path dir = fresh_dir("rlvr_pipeline_d");
  const fs::path cfg = write_config(dir);
  const std::string base = "--config " + cfg.string() + " --out " + dir.string();
  REQUIRE(run_cli("gen-tasks " + base) == 0);
  const fs::path err = dir / "stderr.txt";
  CHECK(run_cli("train " + base + " --reward corrupted", err.string()) == 1);
  CHECK(slurp(err).find("corrupt") != std::string::npos);

  REQUIRE(run_cli("corrupt " + base + " --gamma 0.25 --seed 2") == 0);
  CHECK(run_cli("train " + base + " --reward corrupted --seed 2") == 0);
  fs::remove_all(dir);
}

TEST_CASE("unknown options and subcommands are rejected") {
  CHECK(run_cli("no-such-command") != 0);
  CHECK(run_cli("train --bogus-flag 1") != 0);
  CHECK(run_cli("") != 0);  // a subcommand is required
}
