#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "miti/embedder.hpp"
#include "miti/results.hpp"
#include "miti/retrieval.hpp"

namespace miti {

struct TaskKey {
    std::string policy_id;
    std::size_t task_index = 0;

    friend auto operator<=>(const TaskKey&, const TaskKey&) = default;
};

std::string to_string(const TaskKey& key);

struct GroundTruthEntry {
    std::string policy_id;
    std::size_t task_index = 0;
    std::string task_text;
    std::vector<std::string> api_calls;  // order as authored

    TaskKey key() const { return {policy_id, task_index}; }

    friend bool operator==(const GroundTruthEntry&, const GroundTruthEntry&) = default;
};

class GroundTruthDataset {
public:
    GroundTruthDataset() = default;

    /// Rejects empty call lists and duplicate (policy_id, task_index) keys.
    explicit GroundTruthDataset(std::vector<GroundTruthEntry> entries);

    const std::vector<GroundTruthEntry>& entries() const noexcept { return entries_; }
    std::size_t task_count() const noexcept { return entries_.size(); }
    std::size_t policy_count() const noexcept { return policy_count_; }

    const GroundTruthEntry* find(const TaskKey& key) const;

private:
    std::vector<GroundTruthEntry> entries_;
    std::size_t policy_count_ = 0;
    std::map<TaskKey, std::size_t> by_key_;
};

/// {"policies":[{"policy_id":..,"tasks":[{"index":..,"text":..,"api_calls":[..]}]}]}
GroundTruthDataset load_ground_truth(std::string_view json_text);
std::string serialize_ground_truth(const GroundTruthDataset& dataset);

/// Trim, drop surrounding backticks/quotes and a trailing "()", lowercase.
/// A/W suffixes are deliberately kept.
std::string normalize_call_name(std::string_view raw);

struct MetricsReport {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t correct = 0;
    std::size_t output_size = 0;
    std::size_t truth_size = 0;

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Set-based precision/recall/F1 over normalized names; order and duplicates
/// are ignored. Precision is 0 for empty output, F1 is 0 when P+R is 0.
/// Throws EmptyTruth.
MetricsReport score_task(std::span<const std::string> output_calls, std::span<const std::string> truth_calls);

/// Index api_ids for the truth calls, matched after normalization.
/// Throws TruthNotInCorpus naming every unresolved call.
std::vector<std::string> resolve_truth_ids(std::span<const std::string> truth_calls, const VectorIndex& index);

/// Smallest K whose function-level top-K covers every truth function: the
/// worst rank among truth functions in one full ranking of the task text.
std::size_t optimal_k(std::string_view task_text, std::span<const std::string> truth_calls, const VectorIndex& index,
                      const Embedder& embedder);

std::size_t optimal_k(const Task& task, const GroundTruthEntry& truth, const VectorIndex& index,
                      const Embedder& embedder);

/// Fraction of `targets` whose api_id appears among the first k hits.
double recall_at_k(std::span<const RetrievalHit> ranking, std::span<const std::string> target_api_ids, std::size_t k);

struct TaskEval {
    TaskKey key;
    std::string task_text;
    std::size_t k_used = 0;
    std::vector<std::string> api_calls;
    std::vector<std::string> truth_calls;
    std::optional<std::string> error;
    MetricsReport metrics;

    friend bool operator==(const TaskEval&, const TaskEval&) = default;
};

struct MetricMeans {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    friend bool operator==(const MetricMeans&, const MetricMeans&) = default;
};

struct EvalRun {
    std::string run_id;
    std::string model_id;
    GenerationMode mode = GenerationMode::Rag;
    std::vector<TaskEval> per_task;  // sorted by key
    MetricMeans aggregate;  // unweighted mean over tasks
    std::vector<TaskKey> coverage_gaps;  // truth tasks without a result

    friend bool operator==(const EvalRun&, const EvalRun&) = default;
};

/// Scores results that share one (run_id, model_id, mode). Throws
/// UnknownTask for results absent from the truth and InvalidArgument for
/// mixed groups.
EvalRun evaluate_run(std::span<const GenerationResult> results, const GroundTruthDataset& truth);

/// Groups by (model_id, mode) and evaluates each group; rag before baseline.
std::vector<EvalRun> evaluate_runs(std::span<const GenerationResult> results, const GroundTruthDataset& truth);

struct ComparisonRow {
    TaskKey key;
    std::string task_text;
    std::vector<std::string> truth_calls;
    std::size_t k_used = 0;  // retrieval depth of the rag result
    std::vector<std::string> rag_calls;
    std::vector<std::string> baseline_calls;
    MetricsReport rag;
    MetricsReport baseline;
    MetricMeans delta;  // rag - baseline

    friend bool operator==(const ComparisonRow&, const ComparisonRow&) = default;
};

struct ComparisonReport {
    std::string model_id;
    std::vector<ComparisonRow> rows;
    MetricMeans rag_mean;
    MetricMeans baseline_mean;
    MetricMeans mean_delta_over_tasks;
    MetricMeans mean_delta_over_policies;  // mean of per-policy mean deltas

    friend bool operator==(const ComparisonReport&, const ComparisonReport&) = default;
};

/// Throws KeyMismatch unless both runs cover the same tasks.
ComparisonReport compare_runs(const EvalRun& rag, const EvalRun& baseline);

/// Mean of each model's task-averaged delta.
MetricMeans mean_delta_over_models(std::span<const ComparisonReport> reports);

struct FigureRow {
    std::string model_id;
    GenerationMode mode = GenerationMode::Rag;
    double mean_f1 = 0.0;
};

/// Grouped-bar data: one rag and one baseline bar per model.
std::vector<FigureRow> figure_series(std::span<const ComparisonReport> reports);
std::string figure_csv(std::span<const FigureRow> rows);

enum class ReportFormat { Json, Csv, Markdown };

std::string emit_report(std::span<const EvalRun> runs, ReportFormat format);
std::string emit_report(std::span<const ComparisonReport> reports, ReportFormat format);
inline std::string emit_report(const EvalRun& run, ReportFormat format) { return emit_report(std::span(&run, 1), format); }
inline std::string emit_report(const ComparisonReport& report, ReportFormat format) {
    return emit_report(std::span(&report, 1), format);
}

std::vector<EvalRun> eval_runs_from_json(std::string_view json_text);
std::vector<ComparisonReport> comparisons_from_json(std::string_view json_text);

}  // namespace miti
