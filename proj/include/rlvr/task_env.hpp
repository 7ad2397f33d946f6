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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rlvr/errors.hpp"

namespace rlvr {

// Token alphabet. A subset of ids is designated as final-answer tokens; one
// reserved id terminates generation.
struct Vocab {
  int size = 8;
  std::vector<int> answer_tokens = {0, 1};
  int eos = 7;

  void validate() const;
  bool is_answer(int token) const;
};

// One synthetic verifiable question: a fixed-length feature vector the policy
// conditions on, a ground-truth answer token, and a difficulty level.
struct TaskInstance {
  int id = 0;
  std::vector<double> features;
  int truth = 0;
  int difficulty_level = 1;
};

struct TaskPool {
  Vocab vocab;
  std::vector<TaskInstance> instances;
  std::uint64_t generator_seed = 0;
  std::string family;

  const TaskInstance& by_id(int id) const;
};

// Generates `count` instances of the named task family with difficulty
// levels cycling 1..levels. Bit-identical for identical arguments.
//
// Family "parity": features hold the signed prefix-parity encoding of a
// random bit-string of length = difficulty_level (trailing positions repeat
// the final prefix value); truth is the string's parity mapped into
// answer_tokens. The encoding is invertible, and total parity is exposed at
// the last coordinate so a linear shared-feature policy can generalize while
// a tabular policy can only memorize.
TaskPool generate_pool(const std::string& family, int count, int levels,
                       std::uint64_t seed, const Vocab& vocab = Vocab{});

// Last token in the sequence that is an answer token; nullopt if none.
std::optional<int> extract_answer(std::span<const int> tokens,
                                  const Vocab& vocab);

// 1 iff the extracted final answer equals the instance's ground truth.
// Malformed responses score 0; never throws.
int verify(const TaskInstance& instance, std::span<const int> tokens,
           const Vocab& vocab);

// Line-delimited record file {id, features, truth, level}; lossless
// round-trip.
void save_pool(const TaskPool& pool, const std::string& path);
TaskPool load_pool(const std::string& path);

}  // namespace rlvr
