#pragma once

#include <memory>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "miti/http.hpp"
#include "miti/policy.hpp"
#include "miti/retrieval.hpp"
#include "miti/task.hpp"

namespace miti {

enum class ChatRole { System, User, Assistant };

std::string_view to_string(ChatRole role) noexcept;

struct ChatMessage {
    ChatRole role = ChatRole::User;
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

enum class LlmBackend { Remote, Mock };

struct LlmConfig {
    LlmBackend backend = LlmBackend::Mock;
    std::string endpoint;
    std::string model_id;
    double temperature = 0.0;
    int max_tokens = 1024;
    int timeout_s = 120;
    int max_retries = 3;
    std::size_t max_concurrent_requests = 4;

    void validate() const;
};

nlohmann::json to_json(const LlmConfig& config);
LlmConfig llm_config_from_json(const nlohmann::json& j);
LlmBackend parse_llm_backend(std::string_view text);

/// Scripted responses keyed by substrings of the last user message; the
/// first matching entry wins.
struct MockScript {
    struct Entry {
        std::string match;
        std::string response;
    };
    std::vector<Entry> entries;
    std::optional<std::string> default_response;
};

/// {"entries":[{"match":..,"response":..}], "default_response": ..?}
MockScript mock_script_from_json(std::string_view json_text);
nlohmann::json to_json(const MockScript& script);

/// Chat-completion client. The mock backend never touches the transport.
/// Concurrent calls are allowed and capped at config.max_concurrent_requests.
class LlmGateway {
public:
    LlmGateway(LlmConfig config, std::shared_ptr<HttpTransport> transport = nullptr,
               std::optional<MockScript> script = std::nullopt);

    /// Throws InvalidArgument when `messages` is empty or does not end with a
    /// user message, ScriptMiss, BackendUnreachable, or HttpStatusError.
    std::string complete(std::span<const ChatMessage> messages) const;

    const LlmConfig& config() const noexcept { return config_; }

private:
    std::string complete_mock(std::span<const ChatMessage> messages) const;
    std::string complete_remote(std::span<const ChatMessage> messages) const;

    LlmConfig config_;
    std::shared_ptr<HttpTransport> transport_;
    std::optional<MockScript> script_;
    std::unique_ptr<std::counting_semaphore<>> slots_;
};

std::string complete(std::span<const ChatMessage> messages, const LlmConfig& config);

// ---- prompt templates ------------------------------------------------------

std::vector<ChatMessage> build_decomposition_prompt(const MitigationPolicy& policy);

/// The user message opens with "Task: <text>"; in rag mode the retrieved
/// documentation follows in rank order. Throws ContextModeMismatch when the
/// context presence disagrees with the mode.
std::vector<ChatMessage> build_generation_prompt(const Task& task, std::span<const RetrievalHit> context,
                                                 GenerationMode mode);

// ---- output parsers --------------------------------------------------------

/// Numbered ("1." / "2)") or bulleted ("-", "*") lines, markers stripped.
/// Throws NoTasksFound.
std::vector<std::string> parse_task_list(std::string_view llm_output);

/// First JSON array of strings anywhere in the text (code fences included);
/// otherwise one identifier per line. Throws NoCallsFound.
std::vector<std::string> parse_api_calls(std::string_view llm_output);

}  // namespace miti
