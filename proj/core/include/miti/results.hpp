#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "miti/task.hpp"

namespace miti {

inline constexpr int kResultsSchemaVersion = 1;

/// LLM2 output for one task in one mode, with everything needed to rescore offline.
struct GenerationResult {
    std::string run_id;
    Task task;
    GenerationMode mode = GenerationMode::Rag;
    std::size_t k_used = 0;  // 0 in baseline mode
    std::vector<std::string> retrieved_api_ids;  // rank order
    std::vector<std::string> api_calls;  // execution order, as generated
    std::string raw_output;
    std::string model_id;
    std::optional<std::string> error;  // parse failure marker, e.g. "NoCallsFound"

    friend bool operator==(const GenerationResult&, const GenerationResult&) = default;
};

nlohmann::json to_json(const GenerationResult& result);

/// Throws SchemaViolation (including unsupported schema_version).
GenerationResult generation_result_from_json(const nlohmann::json& j);

/// One compact JSON object per line.
std::string results_to_jsonl(std::span<const GenerationResult> results);

/// Parses JSON lines. With `tolerate_partial_tail`, a final line lacking its
/// newline that fails to parse (an interrupted append) is ignored.
std::vector<GenerationResult> results_from_jsonl(std::string_view text, bool tolerate_partial_tail = false);

}  // namespace miti
