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

#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "rlvr/judge.hpp"
#include "rlvr/rng.hpp"

namespace rlvr {

namespace {

std::string substitute(std::string text, const std::string& key,
                       const std::string& value) {
  const std::string placeholder = "{" + key + "}";
  std::size_t pos = 0;
  while ((pos = text.find(placeholder, pos)) != std::string::npos) {
    text.replace(pos, placeholder.size(), value);
    pos += value.size();
  }
  return text;
}

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

}  // namespace

RemoteJudgeConfig RemoteJudgeConfig::from_env() {
  RemoteJudgeConfig cfg;
  cfg.endpoint = env_or_empty("RLVR_JUDGE_ENDPOINT");
  cfg.model = env_or_empty("RLVR_JUDGE_MODEL");
  cfg.api_key = env_or_empty("RLVR_JUDGE_API_KEY");
  return cfg;
}

struct RemoteJudge::Impl {
  RemoteJudgeConfig config;
  httplib::Client client;
  std::map<std::string, std::string> cache;  // user message -> raw verdict
  std::mutex mutex;
  int request_count = 0;

  explicit Impl(RemoteJudgeConfig cfg)
      : config(std::move(cfg)), client(config.endpoint) {
    client.set_connection_timeout(config.timeout_seconds);
    client.set_read_timeout(config.timeout_seconds);
  }
};

RemoteJudge::RemoteJudge(RemoteJudgeConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {
  if (impl_->config.endpoint.empty()) {
    throw ConfigError("remote judge endpoint not configured "
                      "(set RLVR_JUDGE_ENDPOINT)");
  }
}

RemoteJudge::~RemoteJudge() = default;

int RemoteJudge::request_count() const { return impl_->request_count; }

std::string RemoteJudge::complete(const std::string& user_message) {
  std::lock_guard<std::mutex> lock(impl_->mutex);
  if (const auto it = impl_->cache.find(user_message);
      it != impl_->cache.end()) {
    return it->second;
  }

  nlohmann::json body;
  body["model"] = impl_->config.model;
  body["temperature"] = 0.0;
  body["messages"] = nlohmann::json::array(
      {{{"role", "user"}, {"content", user_message}}});

  httplib::Headers headers;
  if (!impl_->config.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + impl_->config.api_key);
  }

  std::string content;
  std::string last_error;
  for (int attempt = 0; attempt <= impl_->config.max_retries; ++attempt) {
    ++impl_->request_count;
    auto res = impl_->client.Post("/v1/chat/completions", headers,
                                  body.dump(), "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "status " + std::to_string(res->status);
      continue;
    }
    nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded()) {
      last_error = "unparseable reply body";
      continue;
    }
    try {
      content = reply.at("choices").at(0).at("message").at("content")
                    .get<std::string>();
    } catch (const nlohmann::json::exception&) {
      last_error = "reply missing choices[0].message.content";
      continue;
    }
    break;
  }
  if (content.empty() && !last_error.empty()) {
    throw ContractError("judge request failed after retries: " + last_error);
  }

  if (!impl_->config.audit_log_path.empty()) {
    std::ofstream audit(impl_->config.audit_log_path, std::ios::app);
    nlohmann::json rec;
    rec["request"] = user_message;
    rec["response"] = content;
    audit << rec.dump() << "\n";
  }

  impl_->cache[user_message] = content;
  return content;
}

std::string RemoteJudge::similarity_raw(const PromptContext& prompt,
                                        const ResponseText& a,
                                        const ResponseText& b) {
  std::string msg = similarity_rubric();
  msg = substitute(std::move(msg), "prompt", prompt.text);
  msg = substitute(std::move(msg), "generation0", a.text);
  msg = substitute(std::move(msg), "generation1", b.text);
  return complete(msg);
}

std::string RemoteJudge::faithfulness_raw(const PromptContext& prompt,
                                          const ResponseText& response) {
  std::string msg = faithfulness_rubric();
  msg = substitute(std::move(msg), "prompt", prompt.text);
  msg = substitute(std::move(msg), "response", response.text);
  return complete(msg);
}

}  // namespace rlvr
