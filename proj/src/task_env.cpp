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

#include "rlvr/task_env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "rlvr/rng.hpp"

namespace rlvr {

void Vocab::validate() const {
  if (size < 4) throw ConfigError("vocab size must be >= 4");
  if (answer_tokens.empty()) throw ConfigError("answer_tokens must be nonempty");
  if (eos < 0 || eos >= size) throw ConfigError("eos out of range");
  for (int a : answer_tokens) {
    if (a < 0 || a >= size) throw ConfigError("answer token out of range");
    if (a == eos) throw ConfigError("answer_tokens must exclude eos");
  }
}

bool Vocab::is_answer(int token) const {
  return std::find(answer_tokens.begin(), answer_tokens.end(), token) !=
         answer_tokens.end();
}

const TaskInstance& TaskPool::by_id(int id) const {
  for (const auto& inst : instances) {
    if (inst.id == id) return inst;
  }
  throw InputError("unknown task id " + std::to_string(id));
}

TaskPool generate_pool(const std::string& family, int count, int levels,
                       std::uint64_t seed, const Vocab& vocab) {
  if (count < 1) throw ConfigError("count must be >= 1");
  if (levels < 1) throw ConfigError("levels must be >= 1");
  vocab.validate();
  if (family != "parity") {
    throw ConfigError("unknown task family: " + family);
  }

  TaskPool pool;
  pool.vocab = vocab;
  pool.generator_seed = seed;
  pool.family = family;
  pool.instances.reserve(count);

  for (int i = 0; i < count; ++i) {
    TaskInstance inst;
    inst.id = i;
    inst.difficulty_level = i % levels + 1;

    RngStream rng = RngStream::derive(seed, 0x7461736bULL, i);
    int parity = 0;
    std::vector<double> feats(static_cast<std::size_t>(levels), 0.0);
    for (int k = 0; k < inst.difficulty_level; ++k) {
      const int bit = static_cast<int>(rng.below(2));
      parity ^= bit;
      feats[static_cast<std::size_t>(k)] = parity ? -1.0 : 1.0;
    }
    for (int k = inst.difficulty_level; k < levels; ++k) {
      feats[static_cast<std::size_t>(k)] =
          feats[static_cast<std::size_t>(inst.difficulty_level - 1)];
    }
    inst.features = std::move(feats);
    inst.truth = vocab.answer_tokens[static_cast<std::size_t>(parity) %
                                     vocab.answer_tokens.size()];
    pool.instances.push_back(std::move(inst));
  }
  return pool;
}

std::optional<int> extract_answer(std::span<const int> tokens,
                                  const Vocab& vocab) {
  for (auto it = tokens.rbegin(); it != tokens.rend(); ++it) {
    if (vocab.is_answer(*it)) return *it;
  }
  return std::nullopt;
}

int verify(const TaskInstance& instance, std::span<const int> tokens,
           const Vocab& vocab) {
  const auto answer = extract_answer(tokens, vocab);
  return (answer && *answer == instance.truth) ? 1 : 0;
}

void save_pool(const TaskPool& pool, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for write: " + path);
  nlohmann::json header;
  header["schema"] = "rlvr-pool/1";
  header["family"] = pool.family;
  header["seed"] = pool.generator_seed;
  header["vocab"] = {{"size", pool.vocab.size},
                     {"answer_tokens", pool.vocab.answer_tokens},
                     {"eos", pool.vocab.eos}};
  out << header.dump() << "\n";
  for (const auto& inst : pool.instances) {
    nlohmann::json rec;
    rec["id"] = inst.id;
    rec["features"] = inst.features;
    rec["truth"] = inst.truth;
    rec["level"] = inst.difficulty_level;
    out << rec.dump() << "\n";
  }
}

TaskPool load_pool(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty pool file: " + path);
  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("schema", "") != "rlvr-pool/1") {
    throw FormatError("bad pool header in " + path);
  }
  TaskPool pool;
  pool.family = header.at("family").get<std::string>();
  pool.generator_seed = header.at("seed").get<std::uint64_t>();
  pool.vocab.size = header.at("vocab").at("size").get<int>();
  pool.vocab.answer_tokens =
      header.at("vocab").at("answer_tokens").get<std::vector<int>>();
  pool.vocab.eos = header.at("vocab").at("eos").get<int>();
  pool.vocab.validate();
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded()) {
      throw FormatError(path + ":" + std::to_string(lineno) +
                        ": malformed record");
    }
    TaskInstance inst;
    inst.id = rec.at("id").get<int>();
    inst.features = rec.at("features").get<std::vector<double>>();
    inst.truth = rec.at("truth").get<int>();
    inst.difficulty_level = rec.at("level").get<int>();
    pool.instances.push_back(std::move(inst));
  }
  return pool;
}

}  // namespace rlvr
