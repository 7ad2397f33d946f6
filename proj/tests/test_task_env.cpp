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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "rlvr/task_env.hpp"

using namespace rlvr;

namespace {

// Independent decoder: recovers the bit string from the signed prefix-parity
// features and recomputes the parity from scratch.
std::vector<int> decode_bits(const TaskInstance& inst) {
  std::vector<int> bits;
  double prev = 1.0;  // empty prefix has even parity
  for (int k = 0; k < inst.difficulty_level; ++k) {
    const double f = inst.features[static_cast<std::size_t>(k)];
    bits.push_back(f == prev ? 0 : 1);
    prev = f;
  }
  return bits;
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("vocab validation rejects malformed alphabets") {
  Vocab v;
  CHECK_NOTHROW(v.validate());

  v.size = 3;
  CHECK_THROWS_AS(v.validate(), ConfigError);

  v = Vocab{};
  v.answer_tokens.clear();
  CHECK_THROWS_AS(v.validate(), ConfigError);

  v = Vocab{};
  v.eos = 8;
  CHECK_THROWS_AS(v.validate(), ConfigError);

  v = Vocab{};
  v.answer_tokens = {0, 7};  // collides with eos
  CHECK_THROWS_AS(v.validate(), ConfigError);

  v = Vocab{};
  v.answer_tokens = {0, 9};
  CHECK_THROWS_AS(v.validate(), ConfigError);
}

TEST_CASE("generate_pool rejects bad arguments") {
  CHECK_THROWS_AS(generate_pool("parity", 0, 5, 1), ConfigError);
  CHECK_THROWS_AS(generate_pool("parity", 8, 0, 1), ConfigError);
  CHECK_THROWS_AS(generate_pool("unknown-family", 8, 5, 1), ConfigError);
}

TEST_CASE("parity truth matches an independent parity recomputation") {
  const TaskPool pool = generate_pool("parity", 200, 5, 42);
  REQUIRE(pool.instances.size() == 200);
  for (const auto& inst : pool.instances) {
    const auto bits = decode_bits(inst);
    int parity = 0;
    for (int b : bits) parity ^= b;
    const int expected = pool.vocab.answer_tokens[static_cast<std::size_t>(
        parity % static_cast<int>(pool.vocab.answer_tokens.size()))];
    CHECK(inst.truth == expected);
  }
}

TEST_CASE("parity features expose total parity at the last coordinate") {
  const TaskPool pool = generate_pool("parity", 128, 6, 7);
  for (const auto& inst : pool.instances) {
    REQUIRE(inst.features.size() == 6);
    // Trailing pad repeats the final prefix value.
    for (std::size_t k = static_cast<std::size_t>(inst.difficulty_level);
         k < inst.features.size(); ++k) {
      CHECK(inst.features[k] ==
            inst.features[static_cast<std::size_t>(inst.difficulty_level) - 1]);
    }
    const bool even = inst.features.back() > 0.0;
    CHECK(inst.truth == pool.vocab.answer_tokens[even ? 0 : 1]);
  }
}

TEST_CASE("difficulty levels cycle and cover 1..levels") {
  const TaskPool pool = generate_pool("parity", 25, 5, 3);
  for (const auto& inst : pool.instances) {
    CHECK(inst.difficulty_level == inst.id % 5 + 1);
  }
}

TEST_CASE("pool generation is deterministic in the seed") {
  const TaskPool a = generate_pool("parity", 64, 5, 99);
  const TaskPool b = generate_pool("parity", 64, 5, 99);
  const TaskPool c = generate_pool("parity", 64, 5, 100);
  REQUIRE(a.instances.size() == b.instances.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < a.instances.size(); ++i) {
    CHECK(a.instances[i].features == b.instances[i].features);
    CHECK(a.instances[i].truth == b.instances[i].truth);
    if (a.instances[i].features != c.instances[i].features) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("level-1 instances depend only on one bit") {
  // With one random bit the feature vector is constant +-1 and the truth
  // follows it exactly; a large pool must see both signs.
  const TaskPool pool = generate_pool("parity", 500, 1, 5);
  int pos = 0;
  int neg = 0;
  for (const auto& inst : pool.instances) {
    REQUIRE(inst.difficulty_level == 1);
    if (inst.features[0] > 0) {
      ++pos;
      CHECK(inst.truth == 0);
    } else {
      ++neg;
      CHECK(inst.truth == 1);
    }
  }
  // Binomial(500, 1/2): 3 sigma is ~33.5 around 250.
  CHECK(pos > 250 - 34);
  CHECK(pos < 250 + 34);
  CHECK(pos + neg == 500);
}

TEST_CASE("extract_answer takes the last answer token") {
  const Vocab v;
  CHECK(extract_answer(std::vector<int>{2, 0, 3, 1, 7}, v) == 1);
  CHECK(extract_answer(std::vector<int>{1, 0}, v) == 0);
  CHECK(extract_answer(std::vector<int>{2, 3, 7}, v) == std::nullopt);
  CHECK(extract_answer(std::vector<int>{}, v) == std::nullopt);
}

TEST_CASE("verify scores malformed responses 0 and never throws") {
  const Vocab v;
  TaskInstance inst;
  inst.truth = 1;
  CHECK(verify(inst, std::vector<int>{2, 1}, v) == 1);
  CHECK(verify(inst, std::vector<int>{2, 0}, v) == 0);
  CHECK(verify(inst, std::vector<int>{2, 3}, v) == 0);
  CHECK(verify(inst, std::vector<int>{}, v) == 0);
  CHECK(verify(inst, std::vector<int>{0, 1, 0}, v) == 0);  // last answer wins
}

TEST_CASE("exhaustive verify oracle over all short sequences (V=4)") {
  Vocab v;
  v.size = 4;
  v.answer_tokens = {0, 1};
  v.eos = 3;
  TaskInstance inst;
  inst.truth = 1;
  // Enumerate every token sequence of length <= 4 and compare against a
  // direct forward-scan oracle.
  std::vector<int> seq;
  auto oracle = [&](const std::vector<int>& s) {
    int last = -1;
    for (int t : s) {
      if (t == 0 || t == 1) last = t;
    }
    return last == inst.truth ? 1 : 0;
  };
  for (int len = 0; len <= 4; ++len) {
    const int total = 1 << (2 * len);  // 4^len
    for (int code = 0; code < total; ++code) {
      seq.clear();
      int c = code;
      for (int p = 0; p < len; ++p) {
        seq.push_back(c % 4);
        c /= 4;
      }
      CHECK(verify(inst, seq, v) == oracle(seq));
    }
  }
}

TEST_CASE("pool save/load round-trips losslessly") {
  const auto path = temp_file("rlvr_test_pool.jsonl");
  const TaskPool pool = generate_pool("parity", 30, 4, 1234);
  save_pool(pool, path.string());
  const TaskPool loaded = load_pool(path.string());

  CHECK(loaded.family == pool.family);
  CHECK(loaded.generator_seed == pool.generator_seed);
  CHECK(loaded.vocab.size == pool.vocab.size);
  CHECK(loaded.vocab.answer_tokens == pool.vocab.answer_tokens);
  CHECK(loaded.vocab.eos == pool.vocab.eos);
  REQUIRE(loaded.instances.size() == pool.instances.size());
  for (std::size_t i = 0; i < pool.instances.size(); ++i) {
    CHECK(loaded.instances[i].id == pool.instances[i].id);
    CHECK(loaded.instances[i].features == pool.instances[i].features);
    CHECK(loaded.instances[i].truth == pool.instances[i].truth);
    CHECK(loaded.instances[i].difficulty_level ==
          pool.instances[i].difficulty_level);
  }
  std::filesystem::remove(path);
}

TEST_CASE("load_pool reports malformed input with a line number") {
  const auto path = temp_file("rlvr_test_pool_bad.jsonl");
  {
    std::ofstream out(path);
    out << R"({"schema":"rlvr-pool/1","family":"parity","seed":1,)"
        << R"("vocab":{"size":8,"answer_tokens":[0,1],"eos":7}})" << "\n";
    out << "{not json}\n";
  }
  CHECK_THROWS_WITH_AS(load_pool(path.string()),
                       doctest::Contains(":2"), FormatError);
  std::filesystem::remove(path);

  {
    std::ofstream out(path);
    out << R"({"schema":"rlvr-pool/0"})" << "\n";
  }
  CHECK_THROWS_AS(load_pool(path.string()), FormatError);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(load_pool("/nonexistent/rlvr/pool.jsonl"), InputError);
}

TEST_CASE("by_id finds instances and rejects unknown ids") {
  const TaskPool pool = generate_pool("parity", 10, 5, 5);
  CHECK(pool.by_id(3).id == 3);
  CHECK_THROWS_AS(pool.by_id(10), InputError);
}
