#include "miti/evaluation.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "miti/error.hpp"
#include "miti/util.hpp"

namespace miti {

std::string to_string(const TaskKey& key) { return key.policy_id + "#" + std::to_string(key.task_index); }

GroundTruthDataset::GroundTruthDataset(std::vector<GroundTruthEntry> entries) : entries_(std::move(entries)) {
    std::set<std::string> policies;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (e.api_calls.empty()) {
            throw Error(ErrorCode::SchemaViolation, "ground truth for " + to_string(e.key()) + " has no API calls");
        }
        if (!by_key_.emplace(e.key(), i).second) {
            throw Error(ErrorCode::DuplicateId, "duplicate ground truth task " + to_string(e.key()));
        }
        policies.insert(e.policy_id);
    }
    policy_count_ = policies.size();
}

const GroundTruthEntry* GroundTruthDataset::find(const TaskKey& key) const {
    auto it = by_key_.find(key);
    return it == by_key_.end() ? nullptr : &entries_[it->second];
}

GroundTruthDataset load_ground_truth(std::string_view json_text) {
    const auto doc = parse_json(json_text, "ground truth");
    auto policies = doc.is_object() ? doc.find("policies") : doc.end();
    if (!doc.is_object() || policies == doc.end() || !policies->is_array()) {
        throw Error(ErrorCode::SchemaViolation, "$.policies must be an array");
    }
    std::vector<GroundTruthEntry> entries;
    for (std::size_t p = 0; p < policies->size(); ++p) {
        const auto& pol = (*policies)[p];
        const auto ppath = "$.policies[" + std::to_string(p) + "]";
        try {
            const auto policy_id = pol.at("policy_id").get<std::string>();
            const auto& tasks = pol.at("tasks");
            if (!tasks.is_array()) throw Error(ErrorCode::SchemaViolation, ppath + ".tasks must be an array");
            for (const auto& t : tasks) {
                entries.push_back({policy_id, t.at("index").get<std::size_t>(), t.value("text", std::string{}),
                                   t.at("api_calls").get<std::vector<std::string>>()});
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::SchemaViolation, ppath + ": " + e.what());
        }
    }
    return GroundTruthDataset(std::move(entries));
}

std::string serialize_ground_truth(const GroundTruthDataset& dataset) {
    // ordered so the file reads policy_id, tasks / index, text, api_calls
    nlohmann::ordered_json policies = nlohmann::ordered_json::array();
    std::unordered_map<std::string, std::size_t> slot;
    for (const auto& e : dataset.entries()) {
        auto [it, inserted] = slot.try_emplace(e.policy_id, policies.size());
        if (inserted) policies.push_back({{"policy_id", e.policy_id}, {"tasks", nlohmann::ordered_json::array()}});
        policies[it->second]["tasks"].push_back({{"index", e.task_index}, {"text", e.task_text}, {"api_calls", e.api_calls}});
    }
    return nlohmann::ordered_json{{"policies", policies}}.dump(2) + "\n";
}

std::string normalize_call_name(std::string_view raw) {
    auto s = trim(raw);
    constexpr std::string_view kQuotes = "`\"'";
    while (s.size() >= 1 && (kQuotes.find(s.front()) != std::string_view::npos || kQuotes.find(s.back()) != std::string_view::npos)) {
        if (kQuotes.find(s.front()) != std::string_view::npos) s.erase(0, 1);
        if (!s.empty() && kQuotes.find(s.back()) != std::string_view::npos) s.pop_back();
        s = trim(s);
    }
    if (s.ends_with("()")) s = trim(std::string_view(s).substr(0, s.size() - 2));
    return to_lower(s);
}

MetricsReport score_task(std::span<const std::string> output_calls, std::span<const std::string> truth_calls) {
    std::unordered_set<std::string> truth;
    for (const auto& t : truth_calls) {
        auto n = normalize_call_name(t);
        if (!n.empty()) truth.insert(std::move(n));
    }
    if (truth.empty()) throw Error(ErrorCode::EmptyTruth, "ground truth has no API calls");
    std::unordered_set<std::string> output;
    for (const auto& o : output_calls) output.insert(normalize_call_name(o));

    MetricsReport m;
    m.output_size = output.size();
    m.truth_size = truth.size();
    m.correct = static_cast<std::size_t>(std::count_if(output.begin(), output.end(), [&](const std::string& o) {
        return !o.empty() && truth.contains(o);
    }));
    m.precision = m.output_size ? static_cast<double>(m.correct) / static_cast<double>(m.output_size) : 0.0;
    m.recall = static_cast<double>(m.correct) / static_cast<double>(m.truth_size);
    const double denom = m.precision + m.recall;
    m.f1 = denom > 0.0 ? 2.0 * m.precision * m.recall / denom : 0.0;
    return m;
}

std::vector<std::string> resolve_truth_ids(std::span<const std::string> truth_calls, const VectorIndex& index) {
    std::unordered_map<std::string, std::string> by_normalized;
    for (const auto& e : index.entries()) by_normalized.try_emplace(normalize_call_name(e.api_id), e.api_id);
    std::vector<std::string> ids;
    std::vector<std::string> missing;
    for (const auto& call : truth_calls) {
        auto it = by_normalized.find(normalize_call_name(call));
        if (it == by_normalized.end()) {
            missing.push_back(call);
        } else if (std::find(ids.begin(), ids.end(), it->second) == ids.end()) {
            ids.push_back(it->second);
        }
    }
    if (!missing.empty()) {
        std::string names;
        for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
        throw Error(ErrorCode::TruthNotInCorpus, "ground-truth calls missing from the index: " + names);
    }
    return ids;
}

std::size_t optimal_k(std::string_view task_text, std::span<const std::string> truth_calls, const VectorIndex& index,
                      const Embedder& embedder) {
    const auto ids = resolve_truth_ids(truth_calls, index);
    if (ids.empty()) throw Error(ErrorCode::EmptyTruth, "ground truth has no API calls");
    const auto ranking = rank_api_level(index, embedder.embed(task_text));
    std::size_t worst = 0;
    for (const auto& id : ids) {
        auto it = std::find_if(ranking.begin(), ranking.end(), [&](const RetrievalHit& h) { return h.api_id == id; });
        worst = std::max(worst, it->rank);
    }
    return worst;
}

std::size_t optimal_k(const Task& task, const GroundTruthEntry& truth, const VectorIndex& index,
                      const Embedder& embedder) {
    return optimal_k(task.text, truth.api_calls, index, embedder);
}

double recall_at_k(std::span<const RetrievalHit> ranking, std::span<const std::string> target_api_ids, std::size_t k) {
    if (target_api_ids.empty()) return 0.0;
    const auto depth = std::min(k, ranking.size());
    std::size_t found = 0;
    for (const auto& t : target_api_ids) {
        if (std::any_of(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(depth),
                        [&](const RetrievalHit& h) { return h.api_id == t; })) {
            ++found;
        }
    }
    return static_cast<double>(found) / static_cast<double>(target_api_ids.size());
}

namespace {

MetricMeans mean_of(std::span<const MetricsReport> reports) {
    MetricMeans m;
    if (reports.empty()) return m;
    for (const auto& r : reports) {
        m.precision += r.precision;
        m.recall += r.recall;
        m.f1 += r.f1;
    }
    const auto n = static_cast<double>(reports.size());
    m.precision /= n;
    m.recall /= n;
    m.f1 /= n;
    return m;
}

MetricMeans mean_of(std::span<const MetricMeans> values) {
    MetricMeans m;
    if (values.empty()) return m;
    for (const auto& v : values) {
        m.precision += v.precision;
        m.recall += v.recall;
        m.f1 += v.f1;
    }
    const auto n = static_cast<double>(values.size());
    m.precision /= n;
    m.recall /= n;
    m.f1 /= n;
    return m;
}

}  // namespace

EvalRun evaluate_run(std::span<const GenerationResult> results, const GroundTruthDataset& truth) {
    EvalRun run;
    if (!results.empty()) {
        run.run_id = results.front().run_id;
        run.model_id = results.front().model_id;
        run.mode = results.front().mode;
    }
    std::set<TaskKey> seen;
    std::vector<MetricsReport> reports;
    for (const auto& r : results) {
        if (r.model_id != run.model_id || r.mode != run.mode) {
            throw Error(ErrorCode::InvalidArgument, "evaluate_run needs results from one model and mode");
        }
        const TaskKey key{r.task.policy_id, r.task.index};
        const auto* entry = truth.find(key);
        if (!entry) throw Error(ErrorCode::UnknownTask, "no ground truth for task " + to_string(key));
        if (!seen.insert(key).second) {
            throw Error(ErrorCode::InvalidArgument, "duplicate result for task " + to_string(key));
        }
        TaskEval te{key, r.task.text, r.k_used, r.api_calls, entry->api_calls, r.error, score_task(r.api_calls, entry->api_calls)};
        reports.push_back(te.metrics);
        run.per_task.push_back(std::move(te));
    }
    std::sort(run.per_task.begin(), run.per_task.end(), [](const TaskEval& a, const TaskEval& b) { return a.key < b.key; });
    run.aggregate = mean_of(reports);
    for (const auto& e : truth.entries()) {
        if (!seen.contains(e.key())) run.coverage_gaps.push_back(e.key());
    }
    std::sort(run.coverage_gaps.begin(), run.coverage_gaps.end());
    return run;
}

std::vector<EvalRun> evaluate_runs(std::span<const GenerationResult> results, const GroundTruthDataset& truth) {
    std::map<std::pair<std::string, int>, std::vector<GenerationResult>> groups;
    for (const auto& r : results) {
        groups[{r.model_id, r.mode == GenerationMode::Rag ? 0 : 1}].push_back(r);
    }
    std::vector<EvalRun> runs;
    for (const auto& [key, group] : groups) runs.push_back(evaluate_run(group, truth));
    return runs;
}

ComparisonReport compare_runs(const EvalRun& rag, const EvalRun& baseline) {
    if (rag.per_task.size() != baseline.per_task.size()) {
        throw Error(ErrorCode::KeyMismatch, "runs cover " + std::to_string(rag.per_task.size()) + " vs " +
                                                std::to_string(baseline.per_task.size()) + " tasks");
    }
    std::map<TaskKey, const TaskEval*> base_by_key;
    for (const auto& t : baseline.per_task) base_by_key[t.key] = &t;

    ComparisonReport report;
    report.model_id = rag.model_id;
    std::vector<MetricsReport> rag_reports, base_reports;
    std::vector<MetricMeans> deltas;
    std::map<std::string, std::vector<MetricMeans>> by_policy;
    for (const auto& r : rag.per_task) {
        auto it = base_by_key.find(r.key);
        if (it == base_by_key.end()) throw Error(ErrorCode::KeyMismatch, "baseline run lacks task " + to_string(r.key));
        const auto& b = *it->second;
        ComparisonRow row{r.key, r.task_text, r.truth_calls, r.k_used, r.api_calls, b.api_calls, r.metrics, b.metrics, {}};
        row.delta = {r.metrics.precision - b.metrics.precision, r.metrics.recall - b.metrics.recall,
                     r.metrics.f1 - b.metrics.f1};
        rag_reports.push_back(r.metrics);
        base_reports.push_back(b.metrics);
        deltas.push_back(row.delta);
        by_policy[r.key.policy_id].push_back(row.delta);
        report.rows.push_back(std::move(row));
    }
    report.rag_mean = mean_of(rag_reports);
    report.baseline_mean = mean_of(base_reports);
    report.mean_delta_over_tasks = mean_of(deltas);
    std::vector<MetricMeans> policy_means;
    for (const auto& [policy, ds] : by_policy) policy_means.push_back(mean_of(ds));
    report.mean_delta_over_policies = mean_of(policy_means);
    return report;
}

MetricMeans mean_delta_over_models(std::span<const ComparisonReport> reports) {
    std::vector<MetricMeans> per_model;
    for (const auto& r : reports) per_model.push_back(r.mean_delta_over_tasks);
    return mean_of(per_model);
}

std::vector<FigureRow> figure_series(std::span<const ComparisonReport> reports) {
    std::vector<FigureRow> rows;
    for (const auto& r : reports) {
        rows.push_back({r.model_id, GenerationMode::Rag, r.rag_mean.f1});
        rows.push_back({r.model_id, GenerationMode::Baseline, r.baseline_mean.f1});
    }
    return rows;
}

}  // namespace miti
