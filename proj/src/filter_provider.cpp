// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "conceptlm/conceptset.hpp"

#include <algorithm>
#include <cctype>
#include <thread>

// After Eigen: <resolv.h> defines a _res macro.
#include <httplib.h>
#include <json.hpp>

#include "conceptlm/error.hpp"

namespace conceptlm {

namespace {

constexpr std::string_view kPromptTemplate =
    "Find contextual synonyms for the word {target} in this text: {input_sequence}\n"
    "\n"
    "Available tokens: {decoded_tokens}\n"
    "\n"
    "Instructions:\n"
    "- Find ALL possible synonyms from the available tokens that could replace {target} in this context\n"
    "- Return ONLY a comma-separated list of synonyms from the available tokens, surrounded by square brackets\n"
    "- Include every relevant synonym\n"
    "- NO duplicates allowed\n"
    "- NO explanations or extra text\n"
    "- If no synonyms found, return: []\n"
    "\n"
    "Example format: [word1, word2, word3]\n"
    "\n"
    "Synonyms for {target}:";

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t at = s.find(from); at != std::string::npos; at = s.find(from, at + to.size()))
    s.replace(at, from.size(), to);
}

bool retryable(int status) { return status < 0 || status == 429 || status >= 500; }

}  // namespace

std::string_view synonym_prompt_template() { return kPromptTemplate; }

std::string format_synonym_prompt(std::string_view target, std::string_view input_sequence,
                                  std::string_view decoded_tokens) {
  std::string out(kPromptTemplate);
  // Substitute the token list first so a literal "{target}" inside the text
  // or candidates is never expanded.
  std::string marker_seq = "\x01seq\x01", marker_tok = "\x01tok\x01";
  replace_all(out, "{input_sequence}", marker_seq);
  replace_all(out, "{decoded_tokens}", marker_tok);
  replace_all(out, "{target}", target);
  replace_all(out, marker_seq, input_sequence);
  replace_all(out, marker_tok, decoded_tokens);
  return out;
}

std::vector<std::string> parse_synonym_reply(std::string_view reply) {
  const std::string_view body = trim(reply);
  if (body.size() < 2 || body.front() != '[' || body.back() != ']')
    throw ParseError("provider reply is not a bracketed list: '" + std::string(reply) + "'");
  const std::string_view inner = trim(body.substr(1, body.size() - 2));
  std::vector<std::string> words;
  if (inner.empty()) return words;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = inner.find(',', start);
    const std::string_view item = trim(inner.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (item.empty()) throw ParseError("provider reply has an empty list item: '" + std::string(reply) + "'");
    for (char ch : item)
      if (std::isspace(static_cast<unsigned char>(ch)) || ch == '[' || ch == ']')
        throw ParseError("provider reply item '" + std::string(item) + "' is not a single token");
    words.emplace_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return words;
}

std::string completion_text(const std::string& response_body) {
  try {
    const auto j = nlohmann::json::parse(response_body);
    const auto& choice = j.at("choices").at(0);
    if (choice.contains("text")) return choice.at("text").get<std::string>();
    return choice.at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("provider response is not a completion: ") + e.what());
  }
}

HttpTransport make_http_transport(const ExternalProviderConfig& cfg) {
  return [cfg](const std::string& body) {
    httplib::Client client(cfg.base_url);
    const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(cfg.timeout_seconds));
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(usec).count(),
                                  static_cast<long>(usec.count() % 1000000));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(usec).count(),
                            static_cast<long>(usec.count() % 1000000));
    auto res = client.Post(cfg.path, body, "application/json");
    if (!res) return HttpReply{-1, httplib::to_string(res.error())};
    return HttpReply{res->status, res->body};
  };
}

ExternalProvider::ExternalProvider(ExternalProviderConfig cfg)
    : ExternalProvider(cfg, make_http_transport(cfg)) {}

ExternalProvider::ExternalProvider(ExternalProviderConfig cfg, HttpTransport transport)
    : cfg_(std::move(cfg)), transport_(std::move(transport)) {
  if (cfg_.concurrency < 1) throw ConfigError("provider concurrency must be >= 1");
  if (cfg_.max_retries < 0) throw ConfigError("provider max_retries must be >= 0");
  slots_ = std::make_unique<std::counting_semaphore<>>(cfg_.concurrency);
}

std::string ExternalProvider::request_body(const FilterRequest& request) const {
  std::string decoded;
  for (TokenId c : request.candidates) {
    if (!decoded.empty()) decoded += ", ";
    decoded += request.vocab.token(c);
  }
  const std::string target = request.vocab.token(request.sequence.token_ids.at(request.position));
  nlohmann::ordered_json j;
  j["model"] = cfg_.model;
  j["prompt"] = format_synonym_prompt(target, render(request.sequence, request.vocab), decoded);
  j["max_tokens"] = cfg_.max_tokens;
  j["temperature"] = 0.0;
  j["top_k"] = 1;
  j["repetition_penalty"] = cfg_.repetition_penalty;
  j["stream"] = false;
  return j.dump();
}

std::vector<TokenId> ExternalProvider::select(const FilterRequest& request) const {
  const std::string body = request_body(request);
  HttpReply reply;
  int attempts = 0;
  {
    // One slot per request; its retries run serially inside the slot.
    slots_->acquire();
    struct Release {
      std::counting_semaphore<>* s;
      ~Release() { s->release(); }
    } release{slots_.get()};
    for (;;) {
      ++attempts;
      reply = transport_(body);
      if (reply.status >= 200 && reply.status < 300) break;
      if (!retryable(reply.status) || attempts > cfg_.max_retries)
        throw TransportError("synonym provider failed after " + std::to_string(attempts) + " attempt(s): status " +
                                 std::to_string(reply.status) + " " + reply.body.substr(0, 200),
                             attempts, reply.status);
      std::this_thread::sleep_for(cfg_.retry_backoff * attempts);
    }
  }
  std::vector<TokenId> out;
  for (const auto& word : parse_synonym_reply(completion_text(reply.body))) {
    // Unknown words cannot be candidates; -1 lets the caller count them.
    const auto id = request.vocab.find(word);
    out.push_back(id ? *id : TokenId{-1});
  }
  return out;
}

}  // namespace conceptlm
