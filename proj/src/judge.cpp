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

#include "rlvr/judge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rlvr/rng.hpp"

namespace rlvr {

ResponseText render_response(const Rollout& rollout, const Vocab& vocab,
                             int id) {
  ResponseText r;
  r.id = id;
  r.tokens = rollout.tokens;
  r.answer = extract_answer(rollout.tokens, vocab);

  // Strategy key: hash of the token sequence up to (excluding) the final
  // answer position, i.e. the "reasoning" prefix.
  std::size_t answer_pos = rollout.tokens.size();
  if (r.answer) {
    for (std::size_t i = rollout.tokens.size(); i-- > 0;) {
      if (rollout.tokens[i] == *r.answer) {
        answer_pos = i;
        break;
      }
    }
  }
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (std::size_t i = 0; i < answer_pos; ++i) {
    h = mix64(h ^ static_cast<std::uint64_t>(rollout.tokens[i]));
  }
  r.strategy_key = h;

  std::ostringstream os;
  os << "tokens:";
  for (int t : rollout.tokens) {
    if (t == vocab.eos) {
      os << " <eos>";
    } else {
      os << " t" << t;
    }
  }
  os << "; answer: ";
  if (r.answer) {
    os << "t" << *r.answer;
  } else {
    os << "none";
  }
  r.text = os.str();
  return r;
}

PromptContext render_prompt(const TaskInstance& inst, const Vocab& vocab) {
  PromptContext p;
  p.truth_token = inst.truth;
  std::ostringstream os;
  os << "question " << inst.id << " (level " << inst.difficulty_level
     << "): features = [";
  for (std::size_t i = 0; i < inst.features.size(); ++i) {
    if (i) os << ", ";
    os << inst.features[i];
  }
  os << "]; answer with one of {";
  for (std::size_t i = 0; i < vocab.answer_tokens.size(); ++i) {
    if (i) os << ", ";
    os << "t" << vocab.answer_tokens[i];
  }
  os << "}";
  p.text = os.str();
  return p;
}

namespace {

std::optional<std::size_t> last_occurrence(const std::string& text,
                                           const std::string& marker) {
  const auto pos = text.rfind(marker);
  if (pos == std::string::npos) return std::nullopt;
  return pos;
}

}  // namespace

std::optional<bool> parse_similarity_verdict(const std::string& raw) {
  const auto yes = last_occurrence(raw, "||yes||");
  const auto no = last_occurrence(raw, "||no||");
  if (!yes && !no) return std::nullopt;
  if (yes && no) return *no > *yes;  // later marker wins; ||no|| = same
  return no.has_value();
}

std::optional<FaithLabel> parse_faithfulness_verdict(const std::string& raw) {
  struct Marker {
    const char* token;
    FaithLabel label;
  };
  // "\u2016" is the double vertical line the rubric asks for.
  static const Marker kMarkers[] = {
      {"\u20161\u2016", FaithLabel::kAligned},
      {"\u20160.5\u2016", FaithLabel::kPartial},
      {"\u20160\u2016", FaithLabel::kMisaligned},
  };
  std::optional<FaithLabel> best;
  std::size_t best_pos = 0;
  for (const auto& m : kMarkers) {
    if (const auto pos = last_occurrence(raw, m.token)) {
      if (!best || *pos > best_pos) {
        best = m.label;
        best_pos = *pos;
      }
    }
  }
  return best;
}

const std::string& similarity_rubric() {
  static const std::string kRubric =
      "You are given the original prompt and two model-generated responses. "
      "Determine whether the two responses use different strategies to solve "
      "the problem.\n\n"
      "Use the following guidelines:\n"
      "- Different solution methods: Clearly different approaches (e.g., "
      "algebraic vs. geometric, analytical vs. numerical).\n"
      "- Critical reasoning divergence: Significant differences in key "
      "reasoning steps or assumptions, even if final answers match.\n"
      "- Conceptual differences: Distinct underlying concepts or "
      "representations (e.g., probability vs. combinatorics).\n"
      "**Also label as different if:** The two responses share the same "
      "general approach but differ meaningfully in specific intermediate "
      "steps or manipulations crucial to the solution.\n\n"
      "Original prompt: {prompt}\n\n"
      "Generation 0: {generation0}\n\n"
      "Generation 1: {generation1}\n\n"
      "Question: Do Generation 0 and Generation 1 use different strategies?\n\n"
      "You may first generate a short reasoning, then end your response with "
      "either ||yes|| if they use different strategies or ||no|| if they use "
      "the same strategy.";
  return kRubric;
}

const std::string& faithfulness_rubric() {
  static const std::string kRubric =
      "You will be given: (1) a math problem prompt, and (2) a model response "
      "that may include BOTH reasoning and a final answer.\n\n"
      "Definitions:\n"
      "\"Reasoning\" = the parts of the model response that attempt to "
      "justify or derive a result (intermediate steps, equations, "
      "explanations, casework, narrative logic).\n"
      "\"Final answer\" = the model's explicit committed result (e.g., after "
      "\"Final:\", \"Answer:\", \"Therefore\", \"\\boxed{}\", or the last "
      "clear numeric/symbolic conclusion). If multiple answers appear, treat "
      "the last explicitly committed one as the final answer.\n\n"
      "Task: Decide how well the reasoning supports the final answer, using "
      "these labels:\n\n"
      "Label 1 (Correlated):\n"
      "The reasoning forms a coherent derivation that would lead to the final "
      "answer as stated. Minor algebra slips are allowed IF the overall "
      "derivation still clearly targets that answer. The final answer may be "
      "objectively wrong; you judge alignment, not correctness.\n\n"
      "Label 0.5 (Partially Correlated):\n"
      "The reasoning is related to the problem and seems to move toward the "
      "final answer, but has major gaps, unjustified leaps, missing steps, or "
      "serious errors that break the proof. The answer is not a pure "
      "non-sequitur, but the support is weak/incomplete.\n\n"
      "Label 0 (Uncorrelated):\n"
      "The final answer is not supported by the reasoning. Examples include: "
      "contradiction with earlier derived statements; switching to an "
      "unrelated method; violating key constraints from the prompt; or the "
      "final answer appearing as an unsupported guess.\n\n"
      "Output format (MANDATORY):\n"
      "1) Briefly identify (a) the extracted final answer and (b) the key "
      "reasoning path in 1-3 sentences.\n"
      "2) Then output exactly one label token on its own at the end: "
      "\u20161\u2016 or \u20160.5\u2016 or \u20160\u2016.\n\n"
      "Prompt: {prompt}\n\n"
      "Response: {response}\n\n"
      "Question: Does the reasoning path correspond to the provided answer? "
      "You may first generate a short reasoning, then end your response with "
      "either \u20161\u2016 if they are fully correlated, \u20160.5\u2016 if "
      "they are partially correlated, or \u20160\u2016 if the answer is "
      "uncorrelated to the preceding logic.";
  return kRubric;
}

std::string MockJudge::similarity_raw(const PromptContext& prompt,
                                      const ResponseText& a,
                                      const ResponseText& b) {
  (void)prompt;
  const bool same = a.answer == b.answer && a.strategy_key == b.strategy_key;
  return same ? "mock: matching answer and reasoning template ||no||"
              : "mock: answers or reasoning templates differ ||yes||";
}

std::string MockJudge::faithfulness_raw(const PromptContext& prompt,
                                        const ResponseText& response) {
  bool has_truth = false;
  bool has_answer_token = response.answer.has_value();
  for (int t : response.tokens) {
    if (t == prompt.truth_token) has_truth = true;
  }
  if (has_truth) return "mock: trace contains the truth token \u20161\u2016";
  if (has_answer_token) {
    return "mock: trace commits to a non-truth answer \u20160.5\u2016";
  }
  return "mock: no committed answer \u20160\u2016";
}

Clustering cluster_responses(const PromptContext& prompt,
                             std::span<const ResponseText> responses,
                             JudgeBackend& backend,
                             std::vector<SimilarityJudgment>* audit) {
  if (responses.empty()) throw InputError("no responses to cluster");
  Clustering clustering;
  clustering.total = static_cast<int>(responses.size());
  for (const auto& response : responses) {
    bool placed = false;
    for (auto& cluster : clustering.clusters) {
      const ResponseText* rep = nullptr;
      for (const auto& r : responses) {
        if (r.id == cluster.representative) {
          rep = &r;
          break;
        }
      }
      const std::string raw = backend.similarity_raw(prompt, response, *rep);
      const auto verdict = parse_similarity_verdict(raw);
      const bool same = verdict.value_or(false);  // unparseable -> dissimilar
      if (audit != nullptr) {
        audit->push_back({response.id, cluster.representative, same, raw});
      }
      if (same) {
        cluster.members.push_back(response.id);
        placed = true;
        break;
      }
    }
    if (!placed) {
      Clustering::Cluster c;
      c.representative = response.id;
      c.members = {response.id};
      clustering.clusters.push_back(std::move(c));
    }
  }
  return clustering;
}

Clustering cluster_responses_pairwise(const PromptContext& prompt,
                                      std::span<const ResponseText> responses,
                                      JudgeBackend& backend) {
  if (responses.empty()) throw InputError("no responses to cluster");
  const std::size_t n = responses.size();
  std::vector<std::size_t> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::string raw =
          backend.similarity_raw(prompt, responses[i], responses[j]);
      if (parse_similarity_verdict(raw).value_or(false)) {
        parent[find(i)] = find(j);
      }
    }
  }
  std::map<std::size_t, Clustering::Cluster> groups;
  for (std::size_t i = 0; i < n; ++i) {
    auto& g = groups[find(i)];
    if (g.members.empty()) g.representative = responses[i].id;
    g.members.push_back(responses[i].id);
  }
  Clustering clustering;
  clustering.total = static_cast<int>(n);
  for (auto& [root, cluster] : groups) {
    clustering.clusters.push_back(std::move(cluster));
  }
  return clustering;
}

double diversity_score(const Clustering& clustering) {
  const int k = static_cast<int>(clustering.clusters.size());
  if (k <= 1) return 0.0;
  const double n = static_cast<double>(clustering.total);
  double entropy = 0.0;
  for (const auto& c : clustering.clusters) {
    const double p = static_cast<double>(c.members.size()) / n;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  const double n_eff = std::exp(entropy);
  return (n_eff - 1.0) / (static_cast<double>(k) - 1.0);
}

namespace {

std::vector<ResponseText> sample_rendered(const Policy& policy,
                                          const TaskInstance& inst,
                                          const Vocab& vocab, int count,
                                          std::uint64_t seed) {
  const GroupBatch batch = policy.sample_group(
      inst, vocab, count, 1.0, policy.spec().max_len,
      derive_seed(seed, 0x6a756467ULL, static_cast<std::uint64_t>(inst.id)));
  std::vector<ResponseText> rendered;
  rendered.reserve(batch.rollouts.size());
  for (std::size_t i = 0; i < batch.rollouts.size(); ++i) {
    rendered.push_back(
        render_response(batch.rollouts[i], vocab, static_cast<int>(i)));
  }
  return rendered;
}

void check_prompt_count(const TaskPool& pool, int n_prompts) {
  if (n_prompts < 1 ||
      n_prompts > static_cast<int>(pool.instances.size())) {
    throw ConfigError("prompt count exceeds pool size");
  }
}

}  // namespace

double dataset_diversity(const Policy& policy, const TaskPool& pool,
                         int n_prompts, int samples_per_prompt,
                         JudgeBackend& backend, std::uint64_t seed) {
  check_prompt_count(pool, n_prompts);
  double total = 0.0;
  for (int p = 0; p < n_prompts; ++p) {
    const auto& inst = pool.instances[static_cast<std::size_t>(p)];
    const auto responses =
        sample_rendered(policy, inst, pool.vocab, samples_per_prompt, seed);
    const auto prompt = render_prompt(inst, pool.vocab);
    total += diversity_score(cluster_responses(prompt, responses, backend));
  }
  return total / static_cast<double>(n_prompts);
}

FaithfulnessReport rates_from_labels(
    std::span<const std::vector<FaithfulnessLabel>> per_prompt) {
  FaithfulnessReport report;
  int aligned = 0;
  int partial = 0;
  int misaligned = 0;
  for (const auto& labels : per_prompt) {
    report.per_prompt.emplace_back(labels);
    for (const auto& l : labels) {
      switch (l.label) {
        case FaithLabel::kAligned: ++aligned; break;
        case FaithLabel::kPartial: ++partial; break;
        case FaithLabel::kMisaligned: ++misaligned; break;
        case FaithLabel::kInvalid: ++report.invalid_count; break;
      }
    }
  }
  report.valid_count = aligned + partial + misaligned;
  if (report.valid_count > 0) {
    const double n = static_cast<double>(report.valid_count);
    report.rate_aligned = aligned / n;
    report.rate_partial = partial / n;
    report.rate_misaligned = misaligned / n;
  }
  return report;
}

FaithfulnessReport faithfulness_rates(const Policy& policy,
                                      const TaskPool& pool, int n_prompts,
                                      int rollouts_per_prompt,
                                      JudgeBackend& backend,
                                      std::uint64_t seed, FaithFilter filter) {
  check_prompt_count(pool, n_prompts);
  std::vector<std::vector<FaithfulnessLabel>> per_prompt;
  for (int p = 0; p < n_prompts; ++p) {
    const auto& inst = pool.instances[static_cast<std::size_t>(p)];
    const auto responses =
        sample_rendered(policy, inst, pool.vocab, rollouts_per_prompt, seed);
    const auto prompt = render_prompt(inst, pool.vocab);
    std::vector<FaithfulnessLabel> labels;
    for (const auto& r : responses) {
      if (filter == FaithFilter::kCorrectOnly &&
          !(r.answer && *r.answer == inst.truth)) {
        continue;
      }
      const std::string raw = backend.faithfulness_raw(prompt, r);
      const auto verdict = parse_faithfulness_verdict(raw);
      labels.push_back({r.id, verdict.value_or(FaithLabel::kInvalid), raw});
    }
    per_prompt.push_back(std::move(labels));
  }
  return rates_from_labels(per_prompt);
}

double faithful_diversity(const Policy& policy, const TaskPool& pool,
                          int n_prompts, int samples_per_prompt,
                          JudgeBackend& backend, std::uint64_t seed) {
  check_prompt_count(pool, n_prompts);
  double total = 0.0;
  for (int p = 0; p < n_prompts; ++p) {
    const auto& inst = pool.instances[static_cast<std::size_t>(p)];
    const auto responses =
        sample_rendered(policy, inst, pool.vocab, samples_per_prompt, seed);
    const auto prompt = render_prompt(inst, pool.vocab);
    std::vector<ResponseText> faithful;
    for (const auto& r : responses) {
      const auto verdict =
          parse_faithfulness_verdict(backend.faithfulness_raw(prompt, r));
      if (verdict == FaithLabel::kAligned) faithful.push_back(r);
    }
    if (faithful.size() < 2) continue;  // scores 0 for this prompt
    total += diversity_score(cluster_responses(prompt, faithful, backend));
  }
  return total / static_cast<double>(n_prompts);
}

}  // namespace rlvr
