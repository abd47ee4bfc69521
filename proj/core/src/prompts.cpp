#include <algorithm>
#include <cctype>

#include "miti/error.hpp"
#include "miti/llm_gateway.hpp"
#include "miti/util.hpp"

namespace miti {

std::string_view to_string(GenerationMode mode) noexcept { return mode == GenerationMode::Rag ? "rag" : "baseline"; }

GenerationMode parse_generation_mode(std::string_view text) {
    if (text == "rag") return GenerationMode::Rag;
    if (text == "baseline" || text == "non-rag") return GenerationMode::Baseline;
    throw Error(ErrorCode::InvalidConfig, "unknown mode '" + std::string(text) + "'");
}

namespace {

constexpr std::string_view kDecompositionSystem =
    "You are a security automation engineer. Decompose the following attack mitigation policy into a numbered "
    "list of discrete, machine-executable tasks; one task per line; no prose. Each task must be something an "
    "operating-system or security-tool API can carry out. Leave out steps that require people to act.";

constexpr std::string_view kGenerationSystem =
    "You translate one security task into the API function calls that carry it out.\n"
    "Output only a JSON array of API function names, in execution order. Do not include arguments, "
    "explanations, or code fences.\n"
    "If API documentation is provided, choose functions from it.\n"
    "\n"
    "Example:\n"
    "Task: terminate a running process given its process identifier\n"
    "[\"OpenProcess\", \"TerminateProcess\", \"CloseHandle\"]";

}  // namespace

std::vector<ChatMessage> build_decomposition_prompt(const MitigationPolicy& policy) {
    std::string user;
    if (!trim(policy.name).empty()) user = trim(policy.name) + "\n\n";
    user += policy.description;
    return {{ChatRole::System, std::string(kDecompositionSystem)}, {ChatRole::User, std::move(user)}};
}

std::vector<ChatMessage> build_generation_prompt(const Task& task, std::span<const RetrievalHit> context,
                                                 GenerationMode mode) {
    if (mode == GenerationMode::Rag && context.empty()) {
        throw Error(ErrorCode::ContextModeMismatch, "rag mode requires retrieved context");
    }
    if (mode == GenerationMode::Baseline && !context.empty()) {
        throw Error(ErrorCode::ContextModeMismatch, "baseline mode must not carry retrieved context");
    }
    std::string user = "Task: " + task.text;
    if (mode == GenerationMode::Rag) {
        user += "\n\nRetrieved API documentation:";
        for (std::size_t i = 0; i < context.size(); ++i) {
            user += "\n\n[" + std::to_string(i + 1) + "] " + context[i].text;
        }
    }
    return {{ChatRole::System, std::string(kGenerationSystem)}, {ChatRole::User, std::move(user)}};
}

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

// Length of a leading list marker ("12." "3)" "-" "*" "•") plus following spaces; 0 if none.
std::size_t list_marker_length(std::string_view line) {
    std::size_t i = 0;
    if (line.starts_with("\xE2\x80\xA2")) {
        i = 3;
    } else if (!line.empty() && (line[0] == '-' || line[0] == '*')) {
        i = 1;
    } else {
        while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
        if (i == 0 || i >= line.size() || (line[i] != '.' && line[i] != ')')) return 0;
        ++i;
    }
    const auto marker_end = i;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    // "1.5" or "-x" without a space is not a marker
    if (i == marker_end && i < line.size()) return 0;
    return i;
}

bool is_identifier(std::string_view s) {
    if (s.empty()) return false;
    bool expect_start = true;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto c = static_cast<unsigned char>(s[i]);
        if (expect_start) {
            if (!(std::isalpha(c) || c == '_')) return false;
            expect_start = false;
        } else if (c == '.') {
            expect_start = true;
        } else if (c == ':' && i + 1 < s.size() && s[i + 1] == ':') {
            ++i;
            expect_start = true;
        } else if (!(std::isalnum(c) || c == '_')) {
            return false;
        }
    }
    return !expect_start;
}

// End of a bracketed span starting at `open`, honoring JSON string escapes.
std::size_t matching_bracket(std::string_view text, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '[') ++depth;
        else if (c == ']' && --depth == 0) return i;
    }
    return std::string_view::npos;
}

}  // namespace

std::vector<std::string> parse_task_list(std::string_view llm_output) {
    std::vector<std::string> tasks;
    for (auto raw : split_lines(llm_output)) {
        const auto line = trim(raw);
        const auto marker = list_marker_length(line);
        if (marker == 0) continue;
        auto text = trim(std::string_view(line).substr(marker));
        if (!text.empty()) tasks.push_back(std::move(text));
    }
    if (tasks.empty()) throw Error(ErrorCode::NoTasksFound, "no numbered or bulleted task lines in LLM output");
    return tasks;
}

std::vector<std::string> parse_api_calls(std::string_view llm_output) {
    for (auto open = llm_output.find('['); open != std::string_view::npos; open = llm_output.find('[', open + 1)) {
        const auto close = matching_bracket(llm_output, open);
        if (close == std::string_view::npos) continue;
        const auto doc = nlohmann::json::parse(llm_output.substr(open, close - open + 1), nullptr, false);
        if (doc.is_discarded() || !doc.is_array() || doc.empty()) continue;
        if (!std::all_of(doc.begin(), doc.end(), [](const auto& v) { return v.is_string(); })) continue;
        std::vector<std::string> calls;
        for (const auto& v : doc) calls.push_back(v.get<std::string>());
        return calls;
    }

    std::vector<std::string> calls;
    for (auto raw : split_lines(llm_output)) {
        auto line = trim(raw);
        if (line.starts_with("```")) continue;
        line = trim(std::string_view(line).substr(list_marker_length(line)));
        auto strip = [&](std::string_view chars) {
            while (!line.empty() && chars.find(line.front()) != std::string_view::npos) line.erase(0, 1);
            while (!line.empty() && chars.find(line.back()) != std::string_view::npos) line.pop_back();
        };
        strip("`\"',; ");
        if (auto paren = line.find('('); paren != std::string::npos && line.back() == ')') line.resize(paren);
        strip("` ");
        if (is_identifier(line)) calls.push_back(std::move(line));
    }
    if (calls.empty()) throw Error(ErrorCode::NoCallsFound, "no API call names in LLM output");
    return calls;
}

}  // namespace miti
