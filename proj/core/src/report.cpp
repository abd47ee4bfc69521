#include <cmath>
#include <cstdio>

#include "miti/error.hpp"
#include "miti/evaluation.hpp"
#include "miti/util.hpp"

namespace miti {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string join(std::span<const std::string> items, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

std::string md_cell(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '|') out += "\\|";
        else if (c == '\n') out += "<br>";
        else if (c != '\r') out += c;
    }
    return out;
}

std::string md_list(std::span<const std::string> items) {
    std::vector<std::string> cells;
    for (const auto& i : items) cells.push_back(md_cell(i));
    return join(cells, "<br>");
}

std::string pct(double v) { return std::to_string(std::lround(v * 100.0)) + "%"; }

std::string md_metrics(const MetricsReport& m) {
    return "Precision = " + pct(m.precision) + "<br>Recall = " + pct(m.recall) + "<br>F1-score = " + pct(m.f1);
}

json to_json(const TaskKey& k) { return {{"policy_id", k.policy_id}, {"task_index", k.task_index}}; }

TaskKey task_key_from_json(const json& j) {
    return {j.at("policy_id").get<std::string>(), j.at("task_index").get<std::size_t>()};
}

json to_json(const MetricsReport& m) {
    return {{"precision", m.precision}, {"recall", m.recall},           {"f1", m.f1},
            {"correct", m.correct},     {"output_size", m.output_size}, {"truth_size", m.truth_size}};
}

MetricsReport metrics_from_json(const json& j) {
    return {j.at("precision").get<double>(),     j.at("recall").get<double>(),
            j.at("f1").get<double>(),            j.at("correct").get<std::size_t>(),
            j.at("output_size").get<std::size_t>(), j.at("truth_size").get<std::size_t>()};
}

json to_json(const MetricMeans& m) { return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}}; }

MetricMeans means_from_json(const json& j) {
    return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>()};
}

json to_json(const EvalRun& run) {
    json tasks = json::array();
    for (const auto& t : run.per_task) {
        tasks.push_back({{"key", to_json(t.key)},
                         {"task_text", t.task_text},
                         {"k_used", t.k_used},
                         {"api_calls", t.api_calls},
                         {"truth_calls", t.truth_calls},
                         {"error", t.error ? json(*t.error) : json(nullptr)},
                         {"metrics", to_json(t.metrics)}});
    }
    json gaps = json::array();
    for (const auto& g : run.coverage_gaps) gaps.push_back(to_json(g));
    return {{"run_id", run.run_id},
            {"model_id", run.model_id},
            {"mode", to_string(run.mode)},
            {"per_task", tasks},
            {"aggregate", to_json(run.aggregate)},
            {"coverage_gaps", gaps}};
}

EvalRun eval_run_from_json(const json& j) {
    EvalRun run;
    run.run_id = j.at("run_id").get<std::string>();
    run.model_id = j.at("model_id").get<std::string>();
    run.mode = parse_generation_mode(j.at("mode").get<std::string>());
    for (const auto& t : j.at("per_task")) {
        TaskEval te;
        te.key = task_key_from_json(t.at("key"));
        te.task_text = t.at("task_text").get<std::string>();
        te.k_used = t.at("k_used").get<std::size_t>();
        te.api_calls = t.at("api_calls").get<std::vector<std::string>>();
        te.truth_calls = t.at("truth_calls").get<std::vector<std::string>>();
        if (const auto& e = t.at("error"); !e.is_null()) te.error = e.get<std::string>();
        te.metrics = metrics_from_json(t.at("metrics"));
        run.per_task.push_back(std::move(te));
    }
    run.aggregate = means_from_json(j.at("aggregate"));
    for (const auto& g : j.at("coverage_gaps")) run.coverage_gaps.push_back(task_key_from_json(g));
    return run;
}

json to_json(const ComparisonReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"key", to_json(row.key)},
                        {"task_text", row.task_text},
                        {"truth_calls", row.truth_calls},
                        {"k_used", row.k_used},
                        {"rag_calls", row.rag_calls},
                        {"baseline_calls", row.baseline_calls},
                        {"rag", to_json(row.rag)},
                        {"baseline", to_json(row.baseline)},
                        {"delta", to_json(row.delta)}});
    }
    return {{"model_id", r.model_id},
            {"rows", rows},
            {"rag_mean", to_json(r.rag_mean)},
            {"baseline_mean", to_json(r.baseline_mean)},
            {"mean_delta_over_tasks", to_json(r.mean_delta_over_tasks)},
            {"mean_delta_over_policies", to_json(r.mean_delta_over_policies)}};
}

ComparisonReport comparison_from_json(const json& j) {
    ComparisonReport r;
    r.model_id = j.at("model_id").get<std::string>();
    for (const auto& row : j.at("rows")) {
        ComparisonRow c;
        c.key = task_key_from_json(row.at("key"));
        c.task_text = row.at("task_text").get<std::string>();
        c.truth_calls = row.at("truth_calls").get<std::vector<std::string>>();
        c.k_used = row.at("k_used").get<std::size_t>();
        c.rag_calls = row.at("rag_calls").get<std::vector<std::string>>();
        c.baseline_calls = row.at("baseline_calls").get<std::vector<std::string>>();
        c.rag = metrics_from_json(row.at("rag"));
        c.baseline = metrics_from_json(row.at("baseline"));
        c.delta = means_from_json(row.at("delta"));
        r.rows.push_back(std::move(c));
    }
    r.rag_mean = means_from_json(j.at("rag_mean"));
    r.baseline_mean = means_from_json(j.at("baseline_mean"));
    r.mean_delta_over_tasks = means_from_json(j.at("mean_delta_over_tasks"));
    r.mean_delta_over_policies = means_from_json(j.at("mean_delta_over_policies"));
    return r;
}

}  // namespace

std::string figure_csv(std::span<const FigureRow> rows) {
    std::string out = "model_id,mode,mean_f1\n";
    for (const auto& r : rows) {
        out += csv_field(r.model_id) + "," + std::string(to_string(r.mode)) + "," + fmt_double(r.mean_f1) + "\n";
    }
    return out;
}

std::string emit_report(std::span<const EvalRun> runs, ReportFormat format) {
    switch (format) {
        case ReportFormat::Json: {
            json arr = json::array();
            for (const auto& r : runs) arr.push_back(to_json(r));
            return json{{"runs", arr}}.dump(2) + "\n";
        }
        case ReportFormat::Csv: {
            std::string out = "run_id,model_id,mode,policy_id,task_index,k_used,precision,recall,f1,correct,output_size,"
                              "truth_size,error\n";
            for (const auto& r : runs) {
                for (const auto& t : r.per_task) {
                    out += csv_field(r.run_id) + "," + csv_field(r.model_id) + "," + std::string(to_string(r.mode)) +
                           "," + csv_field(t.key.policy_id) + "," + std::to_string(t.key.task_index) + "," +
                           std::to_string(t.k_used) + "," + fmt_double(t.metrics.precision) + "," +
                           fmt_double(t.metrics.recall) + "," + fmt_double(t.metrics.f1) + "," +
                           std::to_string(t.metrics.correct) + "," + std::to_string(t.metrics.output_size) + "," +
                           std::to_string(t.metrics.truth_size) + "," + csv_field(t.error.value_or("")) + "\n";
                }
            }
            return out;
        }
        case ReportFormat::Markdown: {
            std::string out;
            if (runs.empty()) {
                return "| Task | Ground Truth | K | API Calls Returned | Metrics |\n|---|---|---|---|---|\n";
            }
            for (const auto& r : runs) {
                out += "## " + md_cell(r.model_id) + " (" + std::string(to_string(r.mode)) + ")\n\n";
                out += "| Task | Ground Truth | K | API Calls Returned | Metrics |\n|---|---|---|---|---|\n";
                for (const auto& t : r.per_task) {
                    out += "| " + md_cell(t.task_text) + " | " + md_list(t.truth_calls) + " | " +
                           std::to_string(t.k_used) + " | " + md_list(t.api_calls) + " | " + md_metrics(t.metrics) +
                           " |\n";
                }
                out += "\nMean: Precision = " + pct(r.aggregate.precision) + ", Recall = " + pct(r.aggregate.recall) +
                       ", F1-score = " + pct(r.aggregate.f1) + " over " + std::to_string(r.per_task.size()) +
                       " tasks\n";
                if (!r.coverage_gaps.empty()) {
                    out += "\nMissing results:";
                    for (const auto& g : r.coverage_gaps) out += " " + to_string(g);
                    out += "\n";
                }
                out += "\n";
            }
            return out;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown report format");
}

std::string emit_report(std::span<const ComparisonReport> reports, ReportFormat format) {
    constexpr std::string_view kHeader =
        "| Task | Ground Truth | Max K | API Calls Returned (RAG) | API Calls Returned (non-RAG) | Metrics (RAG) | "
        "Metrics (non-RAG) |\n|---|---|---|---|---|---|---|\n";
    switch (format) {
        case ReportFormat::Json: {
            json arr = json::array();
            for (const auto& r : reports) arr.push_back(to_json(r));
            return json{{"comparisons", arr}, {"mean_delta_over_models", to_json(mean_delta_over_models(reports))}}
                       .dump(2) +
                   "\n";
        }
        case ReportFormat::Csv: {
            std::string out =
                "model_id,policy_id,task_index,k_used,rag_precision,rag_recall,rag_f1,baseline_precision,"
                "baseline_recall,baseline_f1,delta_precision,delta_recall,delta_f1\n";
            for (const auto& r : reports) {
                for (const auto& row : r.rows) {
                    out += csv_field(r.model_id) + "," + csv_field(row.key.policy_id) + "," +
                           std::to_string(row.key.task_index) + "," + std::to_string(row.k_used) + "," +
                           fmt_double(row.rag.precision) + "," + fmt_double(row.rag.recall) + "," +
                           fmt_double(row.rag.f1) + "," + fmt_double(row.baseline.precision) + "," +
                           fmt_double(row.baseline.recall) + "," + fmt_double(row.baseline.f1) + "," +
                           fmt_double(row.delta.precision) + "," + fmt_double(row.delta.recall) + "," +
                           fmt_double(row.delta.f1) + "\n";
                }
            }
            return out;
        }
        case ReportFormat::Markdown: {
            if (reports.empty()) return std::string(kHeader);
            std::string out;
            for (const auto& r : reports) {
                out += "## " + md_cell(r.model_id) + "\n\n" + std::string(kHeader);
                for (const auto& row : r.rows) {
                    out += "| " + md_cell(row.task_text) + " | " + md_list(row.truth_calls) + " | " +
                           std::to_string(row.k_used) + " | " + md_list(row.rag_calls) + " | " +
                           md_list(row.baseline_calls) + " | " + md_metrics(row.rag) + " | " +
                           md_metrics(row.baseline) + " |\n";
                }
                out += "\nMean F1: RAG = " + pct(r.rag_mean.f1) + ", non-RAG = " + pct(r.baseline_mean.f1) +
                       ", delta = " + fmt_double(r.mean_delta_over_tasks.f1) + "\n\n";
            }
            const auto overall = mean_delta_over_models(reports);
            out += "Mean F1 delta over models: " + fmt_double(overall.f1) + "\n";
            return out;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown report format");
}

std::vector<EvalRun> eval_runs_from_json(std::string_view json_text) {
    const auto doc = parse_json(json_text, "evaluation report");
    try {
        std::vector<EvalRun> runs;
        for (const auto& r : doc.at("runs")) runs.push_back(eval_run_from_json(r));
        return runs;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("evaluation report: ") + e.what());
    }
}

std::vector<ComparisonReport> comparisons_from_json(std::string_view json_text) {
    const auto doc = parse_json(json_text, "comparison report");
    try {
        std::vector<ComparisonReport> out;
        for (const auto& r : doc.at("comparisons")) out.push_back(comparison_from_json(r));
        return out;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("comparison report: ") + e.what());
    }
}

}  // namespace miti
