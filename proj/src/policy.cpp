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

#include "rlvr/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "rlvr/rng.hpp"

namespace rlvr {

namespace {

// log-sum-exp with max subtraction
double logsumexp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

std::vector<double> softmax(std::span<const double> z) {
  const double lse = logsumexp(z);
  std::vector<double> p(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) p[i] = std::exp(z[i] - lse);
  return p;
}

}  // namespace

int PolicySpec::input_dim() const {
  // features + position one-hot + previous-token one-hot (slot V = BOS) + bias
  return feature_dim + max_len + (vocab_size + 1) + 1;
}

Policy::Policy(PolicySpec spec) : spec_(std::move(spec)) {
  if (spec_.vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
  if (spec_.max_len < 1) throw ConfigError("max_len must be >= 1");
  std::size_t n = 0;
  if (spec_.mode == PolicyMode::kShared) {
    if (spec_.feature_dim < 0) throw ConfigError("feature_dim must be >= 0");
    n = static_cast<std::size_t>(spec_.input_dim()) *
        static_cast<std::size_t>(spec_.vocab_size);
  } else {
    n = spec_.question_ids.size() * static_cast<std::size_t>(spec_.max_len) *
        static_cast<std::size_t>(spec_.vocab_size);
  }
  theta_.assign(n, 0.0);  // uniform policy at init
}

std::uint64_t Policy::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ULL;
  };
  feed(static_cast<std::uint64_t>(spec_.mode));
  feed(static_cast<std::uint64_t>(spec_.vocab_size));
  feed(static_cast<std::uint64_t>(spec_.max_len));
  feed(static_cast<std::uint64_t>(spec_.feature_dim));
  for (int q : spec_.question_ids) feed(static_cast<std::uint64_t>(q));
  for (double x : theta_) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof(bits));
    feed(bits);
  }
  return h;
}

std::vector<double> Policy::context_logits(const TaskInstance& inst, int pos,
                                           int prev) const {
  const int V = spec_.vocab_size;
  if (pos < 0 || pos >= spec_.max_len) throw InputError("position out of range");
  if (prev < -1 || prev >= V) throw InputError("previous token out of range");
  std::vector<double> z(static_cast<std::size_t>(V), 0.0);

  if (spec_.mode == PolicyMode::kTabular) {
    const auto it = std::find(spec_.question_ids.begin(),
                              spec_.question_ids.end(), inst.id);
    if (it == spec_.question_ids.end()) return z;  // uniform for unseen ids
    const std::size_t qidx =
        static_cast<std::size_t>(it - spec_.question_ids.begin());
    const std::size_t base =
        (qidx * static_cast<std::size_t>(spec_.max_len) +
         static_cast<std::size_t>(pos)) *
        static_cast<std::size_t>(V);
    for (int v = 0; v < V; ++v) z[static_cast<std::size_t>(v)] = theta_[base + v];
    return z;
  }

  if (static_cast<int>(inst.features.size()) != spec_.feature_dim) {
    throw InputError("feature length mismatch");
  }
  // logits = W^T x; x is sparse except for the feature block.
  auto add_row = [&](int input, double x) {
    const std::size_t base =
        static_cast<std::size_t>(input) * static_cast<std::size_t>(V);
    for (int v = 0; v < V; ++v) z[static_cast<std::size_t>(v)] += x * theta_[base + v];
  };
  for (int j = 0; j < spec_.feature_dim; ++j) {
    if (inst.features[static_cast<std::size_t>(j)] != 0.0) {
      add_row(j, inst.features[static_cast<std::size_t>(j)]);
    }
  }
  add_row(spec_.feature_dim + pos, 1.0);
  const int prev_slot = (prev < 0) ? V : prev;
  add_row(spec_.feature_dim + spec_.max_len + prev_slot, 1.0);
  add_row(spec_.input_dim() - 1, 1.0);  // bias
  return z;
}

std::vector<double> Policy::next_token_probs(const TaskInstance& inst, int pos,
                                             int prev) const {
  return softmax(context_logits(inst, pos, prev));
}

std::vector<double> Policy::next_token_logprobs(const TaskInstance& inst,
                                                int pos, int prev) const {
  auto z = context_logits(inst, pos, prev);
  const double lse = logsumexp(z);
  for (double& v : z) v -= lse;
  return z;
}

GroupBatch Policy::sample_group(const TaskInstance& inst, const Vocab& vocab,
                                int G, double temperature, int max_len,
                                std::uint64_t seed) const {
  if (G < 2) throw InputError("group size must be >= 2");
  if (temperature <= 0.0) throw InputError("temperature must be > 0");
  if (max_len < 1 || max_len > spec_.max_len) {
    throw InputError("max_len outside policy horizon");
  }
  GroupBatch batch;
  batch.question_id = inst.id;
  batch.sampling_digest = digest();
  batch.rollouts.reserve(static_cast<std::size_t>(G));

  for (int i = 0; i < G; ++i) {
    RngStream rng = RngStream::derive(seed, 0x726f6c6cULL,
                                      static_cast<std::uint64_t>(inst.id),
                                      static_cast<std::uint64_t>(i));
    Rollout ro;
    ro.question_id = inst.id;
    int prev = -1;
    for (int pos = 0; pos < max_len; ++pos) {
      auto z = context_logits(inst, pos, prev);
      const double lse1 = logsumexp(z);
      std::vector<double> dist1(z.size());
      for (std::size_t v = 0; v < z.size(); ++v) {
        dist1[v] = std::exp(z[v] - lse1);
      }
      int tok;
      if (temperature == 1.0) {
        tok = rng.categorical(dist1);
      } else {
        std::vector<double> zt(z);
        for (double& v : zt) v /= temperature;
        tok = rng.categorical(softmax(zt));
      }
      ro.tokens.push_back(tok);
      ro.logprob_old.push_back(z[static_cast<std::size_t>(tok)] - lse1);
      ro.dist_old.push_back(std::move(dist1));
      prev = tok;
      if (tok == vocab.eos) break;
    }
    batch.rollouts.push_back(std::move(ro));
  }
  return batch;
}

std::vector<double> Policy::logprob(const TaskInstance& inst,
                                    std::span<const int> tokens) const {
  std::vector<double> out;
  out.reserve(tokens.size());
  int prev = -1;
  for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
    const int tok = tokens[pos];
    if (tok < 0 || tok >= spec_.vocab_size) {
      throw InputError("token id out of range");
    }
    const auto lp = next_token_logprobs(inst, static_cast<int>(pos), prev);
    out.push_back(lp[static_cast<std::size_t>(tok)]);
    prev = tok;
  }
  return out;
}

void Policy::accumulate_context_grad(const TaskInstance& inst, int pos,
                                     int prev, std::span<const double> dlogits,
                                     std::span<double> grad) const {
  const int V = spec_.vocab_size;
  if (static_cast<int>(dlogits.size()) != V) throw InputError("dlogits size");
  if (grad.size() != theta_.size()) throw InputError("grad size");

  if (spec_.mode == PolicyMode::kTabular) {
    const auto it = std::find(spec_.question_ids.begin(),
                              spec_.question_ids.end(), inst.id);
    if (it == spec_.question_ids.end()) {
      throw ContractError("gradient for question outside tabular universe");
    }
    const std::size_t qidx =
        static_cast<std::size_t>(it - spec_.question_ids.begin());
    const std::size_t base =
        (qidx * static_cast<std::size_t>(spec_.max_len) +
         static_cast<std::size_t>(pos)) *
        static_cast<std::size_t>(V);
    for (int v = 0; v < V; ++v) grad[base + v] += dlogits[static_cast<std::size_t>(v)];
    return;
  }

  auto add_row = [&](int input, double x) {
    const std::size_t base =
        static_cast<std::size_t>(input) * static_cast<std::size_t>(V);
    for (int v = 0; v < V; ++v) {
      grad[base + v] += x * dlogits[static_cast<std::size_t>(v)];
    }
  };
  for (int j = 0; j < spec_.feature_dim; ++j) {
    if (inst.features[static_cast<std::size_t>(j)] != 0.0) {
      add_row(j, inst.features[static_cast<std::size_t>(j)]);
    }
  }
  add_row(spec_.feature_dim + pos, 1.0);
  const int prev_slot = (prev < 0) ? spec_.vocab_size : prev;
  add_row(spec_.feature_dim + spec_.max_len + prev_slot, 1.0);
  add_row(spec_.input_dim() - 1, 1.0);
}

void Policy::save(const std::string& path) const {
  nlohmann::json j;
  j["schema"] = "rlvr-policy/1";
  j["mode"] = spec_.mode == PolicyMode::kShared ? "shared" : "tabular";
  j["vocab_size"] = spec_.vocab_size;
  j["max_len"] = spec_.max_len;
  j["feature_dim"] = spec_.feature_dim;
  j["question_ids"] = spec_.question_ids;
  j["theta"] = theta_;
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for write: " + path);
  out << j.dump() << "\n";
}

Policy Policy::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open: " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || j.value("schema", "") != "rlvr-policy/1") {
    throw FormatError("bad policy checkpoint: " + path);
  }
  PolicySpec spec;
  spec.mode = j.at("mode").get<std::string>() == "shared" ? PolicyMode::kShared
                                                          : PolicyMode::kTabular;
  spec.vocab_size = j.at("vocab_size").get<int>();
  spec.max_len = j.at("max_len").get<int>();
  spec.feature_dim = j.at("feature_dim").get<int>();
  spec.question_ids = j.at("question_ids").get<std::vector<int>>();
  Policy p(spec);
  auto theta = j.at("theta").get<std::vector<double>>();
  if (theta.size() != p.theta_.size()) {
    throw FormatError("checkpoint parameter count mismatch");
  }
  p.theta_ = std::move(theta);
  return p;
}

}  // namespace rlvr
