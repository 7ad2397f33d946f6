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

#include "rlvr/dataset.hpp"

#include <array>
#include <fstream>

#include <nlohmann/json.hpp>

#include "rlvr/rng.hpp"

namespace rlvr {

void DifficultyProfile::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for write: " + path);
  nlohmann::json header;
  header["schema"] = "rlvr-profile/1";
  header["probe_seed"] = probe_seed;
  out << header.dump() << "\n";
  for (const auto& [qid, count] : solve16) {
    nlohmann::json rec;
    rec["id"] = qid;
    rec["solve16"] = count;
    out << rec.dump() << "\n";
  }
}

DifficultyProfile DifficultyProfile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty profile: " + path);
  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("schema", "") != "rlvr-profile/1") {
    throw FormatError("bad profile header in " + path);
  }
  DifficultyProfile profile;
  profile.probe_seed = header.at("probe_seed").get<std::uint64_t>();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line);
    profile.solve16[rec.at("id").get<int>()] = rec.at("solve16").get<int>();
  }
  return profile;
}

void StratifiedSample::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for write: " + path);
  nlohmann::json header;
  header["schema"] = "rlvr-sample/1";
  out << header.dump() << "\n";
  for (int id : ids) {
    nlohmann::json rec;
    rec["id"] = id;
    rec["bin"] = bin_of.at(id);
    out << rec.dump() << "\n";
  }
}

StratifiedSample StratifiedSample::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty sample: " + path);
  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("schema", "") != "rlvr-sample/1") {
    throw FormatError("bad sample header in " + path);
  }
  StratifiedSample sample;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line);
    const int id = rec.at("id").get<int>();
    sample.ids.push_back(id);
    sample.bin_of[id] = rec.at("bin").get<int>();
  }
  return sample;
}

DifficultyProfile estimate_solve16(const Policy& policy, const TaskPool& pool,
                                   std::uint64_t seed) {
  DifficultyProfile profile;
  profile.probe_seed = seed;
  for (const auto& inst : pool.instances) {
    const GroupBatch batch = policy.sample_group(
        inst, pool.vocab, kSolveSamples, 1.0, policy.spec().max_len,
        derive_seed(seed, 0x736f6c76ULL, static_cast<std::uint64_t>(inst.id)));
    int c = 0;
    for (const auto& ro : batch.rollouts) {
      c += verify(inst, ro.tokens, pool.vocab);
    }
    profile.solve16[inst.id] = c;
  }
  return profile;
}

StratifiedSample filter_and_sample(const DifficultyProfile& profile, int n,
                                   std::uint64_t seed) {
  if (n < 1) throw ConfigError("sample size must be >= 1");
  std::array<std::vector<int>, 16> bins;  // bins[1..15] used
  int retained = 0;
  for (const auto& [qid, count] : profile.solve16) {
    if (count >= 1 && count <= 15) {
      bins[static_cast<std::size_t>(count)].push_back(qid);
      ++retained;
    }
  }
  if (retained < n) {
    throw ConfigError("only " + std::to_string(retained) +
                      " retained instances for requested sample of " +
                      std::to_string(n));
  }

  RngStream rng = RngStream::derive(seed, 0x73747261ULL);
  StratifiedSample sample;
  int n_total = 0;
  while (n_total < n) {
    for (int bin = 1; bin <= 15 && n_total < n; ++bin) {
      auto& stock = bins[static_cast<std::size_t>(bin)];
      if (stock.empty()) continue;
      const auto pick = static_cast<std::size_t>(rng.below(stock.size()));
      const int qid = stock[pick];
      stock[pick] = stock.back();
      stock.pop_back();
      sample.ids.push_back(qid);
      sample.bin_of[qid] = bin;
      ++n_total;
    }
  }
  return sample;
}

TaskPool subset_pool(const TaskPool& pool, const StratifiedSample& sample) {
  TaskPool sub;
  sub.vocab = pool.vocab;
  sub.generator_seed = pool.generator_seed;
  sub.family = pool.family;
  sub.instances.reserve(sample.ids.size());
  for (int id : sample.ids) sub.instances.push_back(pool.by_id(id));
  return sub;
}

}  // namespace rlvr
