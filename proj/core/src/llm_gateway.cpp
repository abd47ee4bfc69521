#include "miti/llm_gateway.hpp"

#include <cstdlib>

#include "miti/error.hpp"
#include "miti/util.hpp"

namespace miti {

std::string_view to_string(ChatRole role) noexcept {
    switch (role) {
    case ChatRole::System: return "system";
    case ChatRole::User: return "user";
    case ChatRole::Assistant: return "assistant";
    }
    return "user";
}

LlmBackend parse_llm_backend(std::string_view text) {
    if (text == "remote") return LlmBackend::Remote;
    if (text == "mock") return LlmBackend::Mock;
    throw Error(ErrorCode::InvalidConfig, "unknown LLM backend '" + std::string(text) + "'");
}

void LlmConfig::validate() const {
    if (temperature < 0.0) throw Error(ErrorCode::InvalidConfig, "temperature must be >= 0");
    if (max_tokens <= 0) throw Error(ErrorCode::InvalidConfig, "max_tokens must be > 0");
    if (max_concurrent_requests == 0) throw Error(ErrorCode::InvalidConfig, "max_concurrent_requests must be > 0");
    if (backend == LlmBackend::Remote && endpoint.empty()) {
        throw Error(ErrorCode::InvalidConfig, "remote LLM backend requires an endpoint");
    }
}

nlohmann::json to_json(const LlmConfig& c) {
    return {{"backend", c.backend == LlmBackend::Remote ? "remote" : "mock"},
            {"endpoint", c.endpoint},
            {"model_id", c.model_id},
            {"temperature", c.temperature},
            {"max_tokens", c.max_tokens},
            {"timeout_s", c.timeout_s},
            {"max_retries", c.max_retries},
            {"max_concurrent_requests", c.max_concurrent_requests}};
}

LlmConfig llm_config_from_json(const nlohmann::json& j) {
    LlmConfig c;
    try {
        c.backend = parse_llm_backend(j.value("backend", std::string("mock")));
        c.endpoint = j.value("endpoint", c.endpoint);
        c.model_id = j.value("model_id", c.model_id);
        c.temperature = j.value("temperature", c.temperature);
        c.max_tokens = j.value("max_tokens", c.max_tokens);
        c.timeout_s = j.value("timeout_s", c.timeout_s);
        c.max_retries = j.value("max_retries", c.max_retries);
        c.max_concurrent_requests = j.value("max_concurrent_requests", c.max_concurrent_requests);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("LLM config: ") + e.what());
    }
    return c;
}

MockScript mock_script_from_json(std::string_view json_text) {
    const auto doc = parse_json(json_text, "mock script");
    MockScript script;
    auto entries = doc.is_object() ? doc.find("entries") : doc.end();
    if (!doc.is_object() || entries == doc.end() || !entries->is_array()) {
        throw Error(ErrorCode::SchemaViolation, "$.entries must be an array");
    }
    for (std::size_t i = 0; i < entries->size(); ++i) {
        const auto& e = (*entries)[i];
        const auto path = "$.entries[" + std::to_string(i) + "]";
        if (!e.is_object() || !e.contains("match") || !e["match"].is_string() || !e.contains("response") ||
            !e["response"].is_string()) {
            throw Error(ErrorCode::SchemaViolation, path + " needs string 'match' and 'response'");
        }
        script.entries.push_back({e["match"].get<std::string>(), e["response"].get<std::string>()});
    }
    if (auto d = doc.find("default_response"); d != doc.end() && !d->is_null()) {
        if (!d->is_string()) throw Error(ErrorCode::SchemaViolation, "$.default_response must be a string");
        script.default_response = d->get<std::string>();
    }
    return script;
}

nlohmann::json to_json(const MockScript& script) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : script.entries) entries.push_back({{"match", e.match}, {"response", e.response}});
    nlohmann::json doc = {{"entries", entries}};
    if (script.default_response) doc["default_response"] = *script.default_response;
    return doc;
}

LlmGateway::LlmGateway(LlmConfig config, std::shared_ptr<HttpTransport> transport, std::optional<MockScript> script)
    : config_(std::move(config)), transport_(std::move(transport)), script_(std::move(script)) {
    config_.validate();
    if (config_.backend == LlmBackend::Mock && !script_) script_ = MockScript{};
    if (config_.backend == LlmBackend::Remote && !transport_) transport_ = make_default_transport();
    slots_ = std::make_unique<std::counting_semaphore<>>(static_cast<std::ptrdiff_t>(config_.max_concurrent_requests));
}

std::string LlmGateway::complete(std::span<const ChatMessage> messages) const {
    if (messages.empty()) throw Error(ErrorCode::InvalidArgument, "complete() needs at least one message");
    if (messages.back().role != ChatRole::User) {
        throw Error(ErrorCode::InvalidArgument, "the last message must come from the user");
    }
    for (const auto& m : messages) {
        if (m.role != ChatRole::Assistant && m.content.empty()) {
            throw Error(ErrorCode::InvalidArgument, "system and user messages must be non-empty");
        }
    }
    if (config_.backend == LlmBackend::Mock) return complete_mock(messages);

    slots_->acquire();
    struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
    } release{*slots_};
    return complete_remote(messages);
}

std::string LlmGateway::complete_mock(std::span<const ChatMessage> messages) const {
    const auto& last = messages.back().content;
    for (const auto& e : script_->entries) {
        if (last.find(e.match) != std::string::npos) return e.response;
    }
    if (script_->default_response) return *script_->default_response;
    throw Error(ErrorCode::ScriptMiss, "no mock entry matches: " + last.substr(0, 120));
}

std::string LlmGateway::complete_remote(std::span<const ChatMessage> messages) const {
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : messages) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    const nlohmann::json body = {{"model", config_.model_id},
                                 {"messages", msgs},
                                 {"temperature", config_.temperature},
                                 {"max_tokens", config_.max_tokens}};
    HttpRequest req;
    req.url = join_url(config_.endpoint, "/v1/chat/completions");
    req.body = body.dump();
    req.timeout = std::chrono::seconds(config_.timeout_s);
    req.headers.emplace_back("Content-Type", "application/json");
    if (const char* key = std::getenv("MITI_LLM_API_KEY"); key && *key) {
        req.headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }
    RetryPolicy retry;
    retry.max_retries = config_.max_retries;
    const auto res = post_with_retries(*transport_, req, retry, "chat/completions");
    const auto doc = parse_json(res.body, "chat completion response");
    try {
        const auto& content = doc.at("choices").at(0).at("message").at("content");
        return content.is_string() ? content.get<std::string>() : std::string{};
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::SchemaViolation, "chat completion response lacks choices[0].message.content");
    }
}

std::string complete(std::span<const ChatMessage> messages, const LlmConfig& config) {
    return LlmGateway(config).complete(messages);
}

}  // namespace miti
