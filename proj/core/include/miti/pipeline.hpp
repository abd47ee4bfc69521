#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "miti/corpus.hpp"
#include "miti/embedder.hpp"
#include "miti/evaluation.hpp"
#include "miti/llm_gateway.hpp"
#include "miti/policy.hpp"
#include "miti/results.hpp"
#include "miti/retrieval.hpp"
#include "miti/task.hpp"

namespace miti {

struct KStrategy {
    enum class Kind { Fixed, PerTaskOptimal };
    Kind kind = Kind::Fixed;
    std::size_t k = 5;  // Fixed only

    static KStrategy fixed(std::size_t k) { return {Kind::Fixed, k}; }
    static KStrategy per_task_optimal() { return {Kind::PerTaskOptimal, 0}; }
};

nlohmann::json to_json(const KStrategy& strategy);

struct RunManifest {
    std::string run_id;
    std::string timestamp;  // ISO-8601 UTC
    nlohmann::json llm1_config;
    nlohmann::json llm2_config;
    nlohmann::json embedder_config;
    nlohmann::json chunking_config;
    std::string corpus_label;
    std::string index_checksum;
    std::vector<GenerationMode> modes;
    KStrategy k_strategy;
};

nlohmann::json to_json(const RunManifest& manifest);

/// Runs LLM1 on one policy. Tasks are indexed 0..n-1 in output order.
/// Throws NoTasksFound and gateway errors.
std::vector<Task> decompose(const MitigationPolicy& policy, const LlmGateway& llm1);

/// Retrieval context and model handles for LLM2. `retriever` and `embedder`
/// are only touched in rag mode. With `corpus`, each hit's text is replaced
/// by the full rendered spec of its function.
struct GenerationContext {
    const LlmGateway& llm2;
    const Retriever* retriever = nullptr;
    const Embedder* embedder = nullptr;
    const Corpus* corpus = nullptr;
};

/// A NoCallsFound parse failure yields empty api_calls and error
/// "NoCallsFound"; every other failure propagates.
GenerationResult generate_for_task(const Task& task, GenerationMode mode, std::size_t k, const GenerationContext& ctx,
                                   std::string_view run_id = {});

struct PipelineOptions {
    std::vector<GenerationMode> modes{GenerationMode::Rag};
    KStrategy k_strategy{};
    std::filesystem::path out_dir{};  // empty: keep everything in memory
    std::string run_id{};  // empty: derived from the configuration
    std::size_t parallelism = 4;
};

struct PipelineResources {
    const LlmGateway& llm1;
    const LlmGateway& llm2;
    const Retriever* retriever = nullptr;
    const Embedder* embedder = nullptr;
    const Corpus* corpus = nullptr;
    const VectorIndex* index = nullptr;  // needed for per-task optimal K
    const GroundTruthDataset* truth = nullptr;  // needed for per-task optimal K
    nlohmann::json embedder_config = nlohmann::json::object();
    nlohmann::json chunking_config = nlohmann::json::object();
    std::string corpus_label{};
    std::string index_checksum{};
};

struct PipelineOutput {
    RunManifest manifest;
    std::vector<Task> tasks;
    std::vector<GenerationResult> results;  // (policy order, task index, mode order)
    std::size_t resumed = 0;  // results reused from an earlier attempt
};

/// With an out_dir, writes manifest.json, tasks.jsonl and results.jsonl.
/// Results are appended as they complete; a rerun with the same run_id
/// reuses stored tasks and skips completed (policy, task, mode) triples.
/// On success results.jsonl is rewritten in sorted order.
PipelineOutput run_pipeline(std::span<const MitigationPolicy> policies, const PipelineResources& resources,
                            const PipelineOptions& options);

/// Calls fn(i) for i in [0, n) on up to `workers` threads. The first
/// exception stops new work and is rethrown after all threads finish.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace miti
