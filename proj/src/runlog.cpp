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

#include "rlvr/runlog.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "rlvr/errors.hpp"

namespace rlvr {

void RunLog::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for write: " + path);
  nlohmann::json header;
  header["schema"] = kRunLogSchema;
  header["run_id"] = run_id;
  header["n"] = n_prompts;
  header["seed"] = seed;
  out << header.dump() << "\n";
  for (const auto& s : steps) {
    nlohmann::json rec;
    rec["type"] = "step";
    rec["step"] = s.step;
    rec["mean_reward"] = s.mean_reward;
    nlohmann::json pp = nlohmann::json::object();
    for (const auto& [qid, r] : s.per_prompt) pp[std::to_string(qid)] = r;
    rec["per_prompt"] = pp;
    out << rec.dump() << "\n";
  }
  for (const auto& e : evals) {
    nlohmann::json rec;
    rec["type"] = "eval";
    rec["step"] = e.step;
    rec["metric"] = e.metric;
    rec["value"] = e.value;
    out << rec.dump() << "\n";
  }
  for (const auto& d : diagnostics) {
    nlohmann::json rec;
    rec["type"] = "diagnostic";
    rec["message"] = d;
    out << rec.dump() << "\n";
  }
}

RunLog RunLog::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty run log: " + path);
  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded()) throw FormatError(path + ":1: malformed header");
  if (header.value("schema", "") != kRunLogSchema) {
    throw FormatError(path + ": schema version mismatch (want " +
                      std::string(kRunLogSchema) + ", got '" +
                      header.value("schema", "") + "')");
  }
  RunLog log;
  try {
    log.run_id = header.at("run_id").get<std::string>();
    log.n_prompts = header.at("n").get<int>();
    log.seed = header.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ":1: malformed header (" + e.what() + ")");
  }

  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.contains("type")) {
      throw FormatError(path + ":" + std::to_string(lineno) +
                        ": malformed record");
    }
    const std::string type = rec.at("type").get<std::string>();
    if (type == "step") {
      StepRecord s;
      s.step = rec.at("step").get<int>();
      s.mean_reward = rec.at("mean_reward").get<double>();
      for (const auto& [key, val] : rec.at("per_prompt").items()) {
        s.per_prompt[std::stoi(key)] = val.get<double>();
      }
      log.steps.push_back(std::move(s));
    } else if (type == "eval") {
      EvalRecord e;
      e.step = rec.at("step").get<int>();
      e.metric = rec.at("metric").get<std::string>();
      e.value = rec.at("value").get<double>();
      log.evals.push_back(std::move(e));
    } else if (type == "diagnostic") {
      log.diagnostics.push_back(rec.at("message").get<std::string>());
    } else {
      throw FormatError(path + ":" + std::to_string(lineno) +
                        ": unknown record type '" + type + "'");
    }
  }
  return log;
}

}  // namespace rlvr
