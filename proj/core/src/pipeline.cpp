#include "miti/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>
#include <tuple>

#include "miti/error.hpp"
#include "miti/util.hpp"

namespace miti {

namespace fs = std::filesystem;
using nlohmann::json;

json to_json(const KStrategy& s) {
    if (s.kind == KStrategy::Kind::PerTaskOptimal) return {{"kind", "per_task_optimal"}};
    return {{"kind", "fixed"}, {"k", s.k}};
}

json to_json(const RunManifest& m) {
    json modes = json::array();
    for (auto mode : m.modes) modes.push_back(to_string(mode));
    return {{"run_id", m.run_id},
            {"timestamp", m.timestamp},
            {"llm1_config", m.llm1_config},
            {"llm2_config", m.llm2_config},
            {"embedder_config", m.embedder_config},
            {"chunking_config", m.chunking_config},
            {"corpus_label", m.corpus_label},
            {"index_checksum", m.index_checksum},
            {"modes", modes},
            {"k_strategy", to_json(m.k_strategy)}};
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first;
    std::mutex mu;
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                while (!failed.load()) {
                    const auto i = next.fetch_add(1);
                    if (i >= n) return;
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(mu);
                        if (!first) first = std::current_exception();
                        failed = true;
                    }
                }
            });
        }
    }
    if (first) std::rethrow_exception(first);
}

std::vector<Task> decompose(const MitigationPolicy& policy, const LlmGateway& llm1) {
    const auto prompt = build_decomposition_prompt(policy);
    const auto output = llm1.complete(prompt);
    const auto lines = parse_task_list(output);
    std::vector<Task> tasks;
    tasks.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) tasks.push_back({policy.id, i, lines[i]});
    return tasks;
}

GenerationResult generate_for_task(const Task& task, GenerationMode mode, std::size_t k, const GenerationContext& ctx,
                                   std::string_view run_id) {
    GenerationResult r;
    r.run_id = std::string(run_id);
    r.task = task;
    r.mode = mode;
    const auto& model = ctx.llm2.config().model_id;
    r.model_id = model.empty() ? "mock" : model;

    std::vector<RetrievalHit> hits;
    if (mode == GenerationMode::Rag) {
        if (k == 0) throw Error(ErrorCode::InvalidArgument, "rag mode needs k >= 1");
        if (!ctx.retriever || !ctx.embedder) throw Error(ErrorCode::InvalidConfig, "rag mode needs an index and an embedder");
        hits = ctx.retriever->search_api_level(ctx.embedder->embed(task.text), k);
        if (hits.empty()) throw Error(ErrorCode::EmptyInput, "retrieval returned nothing for " + task.policy_id);
        for (auto& h : hits) {
            r.retrieved_api_ids.push_back(h.api_id);
            if (ctx.corpus) {
                if (const auto* spec = ctx.corpus->find(h.api_id)) h.text = render_spec_document(*spec);
            }
        }
        r.k_used = k;
    }
    const auto prompt = build_generation_prompt(task, hits, mode);
    r.raw_output = ctx.llm2.complete(prompt);
    try {
        r.api_calls = parse_api_calls(r.raw_output);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NoCallsFound) throw;
        r.error = std::string(to_string(ErrorCode::NoCallsFound));
        log::warn("pipeline.no_calls", {{"policy_id", task.policy_id}, {"task_index", task.index}, {"mode", to_string(mode)}});
    }
    return r;
}

namespace {

std::string derive_run_id(const RunManifest& m, std::span<const MitigationPolicy> policies) {
    auto key = to_json(m);
    key.erase("run_id");
    key.erase("timestamp");
    json ids = json::array();
    for (const auto& p : policies) ids.push_back(p.id);
    key["policies"] = ids;
    return "run-" + sha256_hex(key.dump()).substr(0, 16);
}

json tasks_line(const std::string& policy_id, std::span<const Task> tasks) {
    json texts = json::array();
    for (const auto& t : tasks) texts.push_back(t.text);
    return {{"policy_id", policy_id}, {"tasks", texts}};
}

// policy_id -> tasks, from one-line-per-policy JSONL; a torn final line is dropped.
std::map<std::string, std::vector<Task>> read_tasks_file(const fs::path& path) {
    std::map<std::string, std::vector<Task>> out;
    if (!fs::exists(path)) return out;
    const auto text = read_file(path);
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        const bool terminated = end != std::string::npos;
        if (!terminated) end = text.size();
        const auto line = std::string_view(text).substr(start, end - start);
        start = end + 1;
        if (trim(line).empty()) continue;
        auto doc = json::parse(line, nullptr, false);
        if (doc.is_discarded()) {
            if (!terminated) break;
            throw Error(ErrorCode::MalformedJson, "corrupt line in " + path.string());
        }
        try {
            const auto policy_id = doc.at("policy_id").get<std::string>();
            const auto texts = doc.at("tasks").get<std::vector<std::string>>();
            auto& tasks = out[policy_id];
            tasks.clear();
            for (std::size_t i = 0; i < texts.size(); ++i) tasks.push_back({policy_id, i, texts[i]});
        } catch (const json::exception& e) {
            throw Error(ErrorCode::SchemaViolation, path.string() + ": " + e.what());
        }
    }
    return out;
}

class Appender {
public:
    explicit Appender(fs::path path) : path_(std::move(path)) {}

    void append(const std::string& line) {
        if (path_.empty()) return;
        std::lock_guard lock(mu_);
        std::ofstream out(path_, std::ios::binary | std::ios::app);
        out << line << '\n';
        out.flush();
        if (!out) throw Error(ErrorCode::IoError, "cannot append to " + path_.string());
    }

private:
    fs::path path_;
    std::mutex mu_;
};

}  // namespace

PipelineOutput run_pipeline(std::span<const MitigationPolicy> policies, const PipelineResources& res,
                            const PipelineOptions& options) {
    if (options.modes.empty()) throw Error(ErrorCode::InvalidConfig, "no generation mode requested");
    const bool want_rag = std::find(options.modes.begin(), options.modes.end(), GenerationMode::Rag) != options.modes.end();
    const bool optimal = options.k_strategy.kind == KStrategy::Kind::PerTaskOptimal;
    if (want_rag) {
        if (!res.retriever || !res.embedder) throw Error(ErrorCode::InvalidConfig, "rag mode needs an index and an embedder");
        if (optimal && (!res.truth || !res.index)) {
            throw Error(ErrorCode::InvalidConfig, "per-task optimal K needs a ground-truth dataset and the index");
        }
        if (!optimal && options.k_strategy.k == 0) throw Error(ErrorCode::InvalidConfig, "k must be >= 1");
    }

    PipelineOutput out;
    auto& m = out.manifest;
    m.timestamp = utc_timestamp_now();
    m.llm1_config = to_json(res.llm1.config());
    m.llm2_config = to_json(res.llm2.config());
    m.embedder_config = res.embedder_config;
    m.chunking_config = res.chunking_config;
    m.corpus_label = res.corpus_label;
    m.index_checksum = res.index_checksum;
    m.modes = options.modes;
    m.k_strategy = options.k_strategy;
    m.run_id = options.run_id.empty() ? derive_run_id(m, policies) : options.run_id;

    const bool durable = !options.out_dir.empty();
    const auto manifest_path = options.out_dir / "manifest.json";
    const auto tasks_path = options.out_dir / "tasks.jsonl";
    const auto results_path = options.out_dir / "results.jsonl";

    std::map<std::string, std::vector<Task>> stored_tasks;
    std::vector<GenerationResult> previous;
    if (durable) {
        fs::create_directories(options.out_dir);
        if (fs::exists(manifest_path)) {
            const auto old = parse_json(read_file(manifest_path), "manifest");
            const auto old_id = old.value("run_id", std::string{});
            if (old_id != m.run_id) {
                throw Error(ErrorCode::InvalidConfig, options.out_dir.string() + " holds run " + old_id + ", not " + m.run_id);
            }
            m.timestamp = old.value("timestamp", m.timestamp);
        }
        write_file_atomic(manifest_path, to_json(m).dump(2) + "\n");

        stored_tasks = read_tasks_file(tasks_path);
        std::string rewritten;
        for (const auto& [pid, tasks] : stored_tasks) rewritten += tasks_line(pid, tasks).dump() + "\n";
        write_file_atomic(tasks_path, rewritten);

        if (fs::exists(results_path)) {
            for (auto& r : results_from_jsonl(read_file(results_path), true)) {
                if (r.run_id == m.run_id) previous.push_back(std::move(r));
            }
        }
        write_file_atomic(results_path, results_to_jsonl(previous));
    }

    // Stage 1: decomposition, once per policy regardless of mode count.
    std::set<std::string> seen_ids;
    for (const auto& p : policies) {
        if (!seen_ids.insert(p.id).second) throw Error(ErrorCode::DuplicateId, "policy " + p.id + " listed twice");
    }
    std::vector<std::vector<Task>> per_policy(policies.size());
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < policies.size(); ++i) {
        if (auto it = stored_tasks.find(policies[i].id); it != stored_tasks.end()) {
            per_policy[i] = it->second;
        } else {
            todo.push_back(i);
        }
    }
    Appender task_log(durable ? tasks_path : fs::path{});
    parallel_for(todo.size(), options.parallelism, [&](std::size_t j) {
        const auto i = todo[j];
        per_policy[i] = decompose(policies[i], res.llm1);
        task_log.append(tasks_line(policies[i].id, per_policy[i]).dump());
        log::info("pipeline.decomposed", {{"policy_id", policies[i].id}, {"tasks", per_policy[i].size()}});
    });
    if (durable) {
        // arrival order depends on scheduling; settle on policy order
        std::string canonical;
        for (std::size_t i = 0; i < policies.size(); ++i) {
            canonical += tasks_line(policies[i].id, per_policy[i]).dump() + "\n";
            stored_tasks.erase(policies[i].id);
        }
        for (const auto& [pid, tasks] : stored_tasks) canonical += tasks_line(pid, tasks).dump() + "\n";
        write_file_atomic(tasks_path, canonical);
    }

    // Stage 2: generation per (task, mode).
    using Key = std::tuple<std::string, std::size_t, GenerationMode>;
    std::set<Key> done;
    for (const auto& r : previous) done.insert({r.task.policy_id, r.task.index, r.mode});
    out.resumed = previous.size();

    struct Item {
        const Task* task;
        GenerationMode mode;
    };
    std::vector<Item> items;
    for (const auto& tasks : per_policy) {
        for (const auto& t : tasks) {
            out.tasks.push_back(t);
            for (auto mode : options.modes) {
                if (!done.contains({t.policy_id, t.index, mode})) items.push_back({&t, mode});
            }
        }
    }

    const GenerationContext ctx{res.llm2, res.retriever, res.embedder, res.corpus};
    Appender result_log(durable ? results_path : fs::path{});
    std::vector<GenerationResult> fresh(items.size());
    parallel_for(items.size(), options.parallelism, [&](std::size_t i) {
        const auto& [task, mode] = items[i];
        std::size_t k = 0;
        if (mode == GenerationMode::Rag) {
            if (optimal) {
                const auto* truth = res.truth->find({task->policy_id, task->index});
                if (!truth) throw Error(ErrorCode::UnknownTask, "no ground truth for task " + to_string(TaskKey{task->policy_id, task->index}));
                k = optimal_k(*task, *truth, *res.index, *res.embedder);
            } else {
                k = options.k_strategy.k;
            }
        }
        fresh[i] = generate_for_task(*task, mode, k, ctx, m.run_id);
        result_log.append(to_json(fresh[i]).dump());
    });

    std::map<std::string, std::size_t> policy_order;
    for (std::size_t i = 0; i < policies.size(); ++i) policy_order[policies[i].id] = i;
    auto mode_order = [&](GenerationMode mode) {
        return static_cast<std::size_t>(std::find(options.modes.begin(), options.modes.end(), mode) - options.modes.begin());
    };
    out.results = std::move(previous);
    std::move(fresh.begin(), fresh.end(), std::back_inserter(out.results));
    std::erase_if(out.results, [&](const GenerationResult& r) { return !policy_order.contains(r.task.policy_id); });
    std::sort(out.results.begin(), out.results.end(), [&](const GenerationResult& a, const GenerationResult& b) {
        return std::tuple(policy_order[a.task.policy_id], a.task.index, mode_order(a.mode)) <
               std::tuple(policy_order[b.task.policy_id], b.task.index, mode_order(b.mode));
    });
    if (durable) write_file_atomic(results_path, results_to_jsonl(out.results));
    return out;
}

}  // namespace miti
