#include "miti/results.hpp"

#include "miti/error.hpp"
#include "miti/util.hpp"

namespace miti {

nlohmann::json to_json(const GenerationResult& r) {
    return {{"schema_version", kResultsSchemaVersion},
            {"run_id", r.run_id},
            {"policy_id", r.task.policy_id},
            {"task_index", r.task.index},
            {"task_text", r.task.text},
            {"mode", to_string(r.mode)},
            {"k_used", r.k_used},
            {"retrieved_api_ids", r.retrieved_api_ids},
            {"api_calls", r.api_calls},
            {"raw_output", r.raw_output},
            {"model_id", r.model_id},
            {"error", r.error ? nlohmann::json(*r.error) : nlohmann::json(nullptr)}};
}

GenerationResult generation_result_from_json(const nlohmann::json& j) {
    try {
        const int version = j.at("schema_version").get<int>();
        if (version != kResultsSchemaVersion) {
            throw Error(ErrorCode::SchemaViolation, "unsupported results schema_version " + std::to_string(version));
        }
        GenerationResult r;
        r.run_id = j.at("run_id").get<std::string>();
        r.task.policy_id = j.at("policy_id").get<std::string>();
        r.task.index = j.at("task_index").get<std::size_t>();
        r.task.text = j.at("task_text").get<std::string>();
        r.mode = parse_generation_mode(j.at("mode").get<std::string>());
        r.k_used = j.at("k_used").get<std::size_t>();
        r.retrieved_api_ids = j.at("retrieved_api_ids").get<std::vector<std::string>>();
        r.api_calls = j.at("api_calls").get<std::vector<std::string>>();
        r.raw_output = j.at("raw_output").get<std::string>();
        r.model_id = j.at("model_id").get<std::string>();
        if (const auto& e = j.at("error"); !e.is_null()) r.error = e.get<std::string>();
        if (r.mode == GenerationMode::Baseline && (r.k_used != 0 || !r.retrieved_api_ids.empty())) {
            throw Error(ErrorCode::SchemaViolation, "baseline result carries retrieval data");
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("generation result: ") + e.what());
    }
}

std::string results_to_jsonl(std::span<const GenerationResult> results) {
    std::string out;
    for (const auto& r : results) {
        out += to_json(r).dump();
        out += '\n';
    }
    return out;
}

std::vector<GenerationResult> results_from_jsonl(std::string_view text, bool tolerate_partial_tail) {
    std::vector<GenerationResult> out;
    std::size_t start = 0;
    std::size_t line_no = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        const bool terminated = end != std::string_view::npos;
        if (!terminated) end = text.size();
        const auto line = text.substr(start, end - start);
        ++line_no;
        start = end + 1;
        if (trim(line).empty()) continue;
        auto doc = nlohmann::json::parse(line, nullptr, false);
        if (doc.is_discarded()) {
            if (!terminated && tolerate_partial_tail) break;
            throw Error(ErrorCode::MalformedJson, "results line " + std::to_string(line_no) + " is not valid JSON");
        }
        out.push_back(generation_result_from_json(doc));
    }
    return out;
}

}  // namespace miti
