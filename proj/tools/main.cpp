#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "miti/corpus.hpp"
#include "miti/embedder.hpp"
#include "miti/error.hpp"
#include "miti/evaluation.hpp"
#include "miti/html.hpp"
#include "miti/llm_gateway.hpp"
#include "miti/pipeline.hpp"
#include "miti/policy.hpp"
#include "miti/results.hpp"
#include "miti/retrieval.hpp"
#include "miti/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitBackend = 3;

// ---- layered settings: flags > MITI_* environment > config file ----------

using Settings = std::map<std::string, std::vector<std::string>>;

std::vector<std::string> json_values(const json& v) {
    std::vector<std::string> out;
    auto one = [](const json& x) { return x.is_string() ? x.get<std::string>() : x.dump(); };
    if (v.is_array()) {
        for (const auto& x : v) out.push_back(one(x));
    } else {
        out.push_back(one(v));
    }
    return out;
}

// Top-level keys apply to every subcommand; a section named after the
// subcommand overrides them.
Settings load_config_file(const fs::path& path, const std::string& subcommand) {
    Settings base, section;
    const auto text = miti::read_file(path);
    if (path.extension() == ".json") {
        const auto doc = miti::parse_json(text, path.string());
        if (!doc.is_object()) throw miti::Error(miti::ErrorCode::InvalidConfig, path.string() + " must hold a JSON object");
        for (const auto& [k, v] : doc.items()) {
            if (v.is_object()) {
                if (k != subcommand) continue;
                for (const auto& [sk, sv] : v.items()) section[sk] = json_values(sv);
            } else {
                base[k] = json_values(v);
            }
        }
    } else {
        std::istringstream in(text);
        std::vector<CLI::ConfigItem> items;
        try {
            items = CLI::ConfigTOML().from_config(in);
        } catch (const CLI::ParseError& e) {
            throw miti::Error(miti::ErrorCode::InvalidConfig, path.string() + ": " + e.what());
        }
        for (const auto& item : items) {
            if (item.name == "++" || item.name == "--") continue;
            if (item.parents.empty() || (item.parents.size() == 1 && item.parents[0] == "default")) {
                base[item.name] = item.inputs;
            } else if (item.parents.size() == 1 && item.parents[0] == subcommand) {
                section[item.name] = item.inputs;
            }
        }
    }
    for (auto& [k, v] : section) base[k] = std::move(v);
    return base;
}

std::string env_name(const std::string& option) {
    std::string out = "MITI_";
    for (char c : option) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

void apply_layers(CLI::App& app, const Settings& config) {
    for (auto* opt : app.get_options()) {
        if (opt->count() > 0 || opt->get_lnames().empty()) continue;
        const auto& name = opt->get_lnames().front();
        if (name == "help" || name == "config") continue;
        std::vector<std::string> values;
        if (const char* env = std::getenv(env_name(name).c_str()); env && *env) {
            values.push_back(env);
        } else if (auto it = config.find(name); it != config.end()) {
            values = it->second;
        } else {
            continue;
        }
        for (const auto& v : values) opt->add_result(v);
        try {
            opt->run_callback();
        } catch (const CLI::ParseError& e) {
            throw miti::Error(miti::ErrorCode::InvalidConfig, "--" + name + ": " + e.what());
        }
    }
}

void require(bool present, const std::string& what) {
    if (!present) throw miti::Error(miti::ErrorCode::InvalidArgument, what + " is required");
}

// ---- shared helpers ---------------------------------------------------------

struct LlmFlags {
    std::string backend = "mock";
    std::string endpoint;
    std::string model;
    std::string script;
    int max_concurrent = 4;
    int timeout_s = 120;
    int max_retries = 3;
};

void add_llm_flags(CLI::App* cmd, const std::string& prefix, LlmFlags& f) {
    cmd->add_option("--" + prefix + "-backend", f.backend, "mock or remote")->check(CLI::IsMember({"mock", "remote"}));
    cmd->add_option("--" + prefix + "-endpoint", f.endpoint, "OpenAI-compatible base URL");
    cmd->add_option("--" + prefix + "-model", f.model, "Model identifier");
    cmd->add_option("--" + prefix + "-script", f.script, "Mock response script (JSON)");
    cmd->add_option("--" + prefix + "-max-concurrent", f.max_concurrent, "Concurrent request cap");
    cmd->add_option("--" + prefix + "-timeout", f.timeout_s, "Request timeout in seconds");
    cmd->add_option("--" + prefix + "-retries", f.max_retries, "Retries on transient failures");
}

miti::LlmGateway make_gateway(const LlmFlags& f, const std::string& prefix) {
    miti::LlmConfig cfg;
    cfg.backend = miti::parse_llm_backend(f.backend);
    cfg.endpoint = f.endpoint;
    cfg.model_id = f.model;
    cfg.max_concurrent_requests = static_cast<std::size_t>(std::max(1, f.max_concurrent));
    cfg.timeout_s = f.timeout_s;
    cfg.max_retries = f.max_retries;
    cfg.validate();
    std::optional<miti::MockScript> script;
    if (cfg.backend == miti::LlmBackend::Mock) {
        require(!f.script.empty(), "--" + prefix + "-script (mock backend)");
        script = miti::mock_script_from_json(miti::read_file(f.script));
    }
    return miti::LlmGateway(cfg, cfg.backend == miti::LlmBackend::Remote ? miti::make_default_transport() : nullptr,
                            std::move(script));
}

struct PolicyLoad {
    std::vector<miti::MitigationPolicy> kept;
    std::vector<miti::SkipEntry> skipped;
    std::size_t excluded = 0;
};

PolicyLoad load_bundles(const std::vector<std::string>& files, const std::vector<std::string>& types,
                        const std::vector<std::string>& deny) {
    PolicyLoad out;
    std::vector<miti::MitigationPolicy> all;
    std::set<std::string> ids;
    for (const auto& file : files) {
        const auto bundle = miti::parse_stix_bundle(miti::read_file(file));
        auto ex = miti::extract_policies(bundle, fs::path(file).filename().string(), types);
        for (auto& p : ex.policies) {
            if (!ids.insert(p.id).second) {
                out.skipped.push_back({p.id, "duplicate id in " + file});
                continue;
            }
            all.push_back(std::move(p));
        }
        std::move(ex.skipped.begin(), ex.skipped.end(), std::back_inserter(out.skipped));
    }
    auto split = miti::filter_automatable(all, deny);
    out.excluded = split.excluded.size();
    for (const auto& p : split.excluded) out.skipped.push_back({p.id, "requires human action"});
    out.kept = std::move(split.kept);
    return out;
}

void print(const json& summary) { std::cout << summary.dump() << '\n'; }

// ---- ingest ----------------------------------------------------------------

struct IngestArgs {
    std::vector<std::string> stix;
    std::string corpus;
    std::string html_dir;
    std::string rules;
    std::string out_dir = ".";
    std::vector<std::string> policy_types = miti::default_policy_types();
    std::vector<std::string> deny_phrases = miti::default_deny_phrases();
};

int cmd_ingest(const IngestArgs& a) {
    require(!a.stix.empty() || !a.corpus.empty() || !a.html_dir.empty(), "--stix, --corpus or --html-dir");
    const fs::path out(a.out_dir);
    fs::create_directories(out);
    json summary = json::object();

    if (!a.stix.empty()) {
        const auto load = load_bundles(a.stix, a.policy_types, a.deny_phrases);
        miti::write_file_atomic(out / "policies.json", miti::policies_to_json(load.kept).dump(2) + "\n");
        miti::write_file_atomic(out / "skip_report.jsonl", miti::skip_report_jsonl(load.skipped));
        summary["policies"] = load.kept.size();
        summary["excluded"] = load.excluded;
        summary["skipped"] = load.skipped.size() - load.excluded;
    }

    if (!a.corpus.empty() || !a.html_dir.empty()) {
        std::string label;
        std::vector<miti::ApiSpec> specs;
        if (!a.corpus.empty()) {
            auto base = miti::load_corpus(miti::read_file(a.corpus));
            label = base.source_label();
            specs = base.specs();
        }
        if (!a.html_dir.empty()) {
            const auto rules = a.rules.empty() ? miti::default_extraction_rules()
                                               : miti::extraction_rules_from_json(miti::read_file(a.rules));
            std::vector<fs::path> pages;
            for (const auto& entry : fs::directory_iterator(a.html_dir)) {
                const auto ext = miti::to_lower(entry.path().extension().string());
                if (entry.is_regular_file() && (ext == ".html" || ext == ".htm")) pages.push_back(entry.path());
            }
            std::sort(pages.begin(), pages.end());
            for (const auto& page : pages) {
                try {
                    specs.push_back(miti::extract_spec_from_html(miti::read_file(page), rules));
                } catch (const miti::Error& e) {
                    throw miti::Error(e.code(), page.filename().string() + ": " + e.detail());
                }
            }
            if (label.empty()) label = fs::path(a.html_dir).filename().string();
        }
        const miti::Corpus corpus(label, std::move(specs));
        miti::write_file_atomic(out / "corpus.json", miti::serialize_corpus(corpus));
        summary["specs"] = corpus.spec_count();
    }
    miti::log::info("ingest.done", summary);
    print(summary);
    return kExitOk;
}

// ---- index -----------------------------------------------------------------

struct EmbedFlags {
    std::string backend = "test";
    std::string endpoint;
    std::string model;
    std::size_t dims = 768;
    std::size_t batch_size = 64;
    std::size_t parallelism = 4;
    int timeout_s = 60;
    int max_retries = 3;
};

struct IndexArgs {
    std::string corpus;
    std::string out;
    EmbedFlags embed;
    std::size_t max_chunk_chars = 1000;
    std::size_t overlap_chars = 100;
};

miti::EmbedderConfig embedder_config(const EmbedFlags& f) {
    miti::EmbedderConfig cfg;
    cfg.backend = miti::parse_embed_backend(f.backend);
    cfg.endpoint = f.endpoint;
    cfg.model_id = f.model;
    cfg.dims = f.dims;
    cfg.batch_size = f.batch_size;
    cfg.parallelism = f.parallelism;
    cfg.timeout_s = f.timeout_s;
    cfg.max_retries = f.max_retries;
    cfg.validate();
    return cfg;
}

int cmd_index(const IndexArgs& a) {
    require(!a.corpus.empty(), "--corpus");
    require(!a.out.empty(), "--out");
    const auto corpus = miti::load_corpus(miti::read_file(a.corpus));
    miti::ChunkingConfig chunking;
    chunking.max_chunk_chars = a.max_chunk_chars;
    chunking.overlap_chars = a.overlap_chars;
    chunking.validate();
    const auto ecfg = embedder_config(a.embed);
    const auto embedder = miti::make_embedder(ecfg);

    const auto chunks = miti::chunk_corpus(corpus, chunking);
    auto index = miti::index_build(chunks, *embedder);
    index.set_metadata({{"corpus_label", corpus.source_label()},
                        {"spec_count", corpus.spec_count()},
                        {"chunking", miti::to_json(chunking)},
                        {"embedder", miti::to_json(ecfg)}});
    miti::index_save(index, a.out);
    const json summary{{"chunks", index.size()}, {"dims", index.dims()}, {"checksum", miti::index_checksum(index)}};
    miti::log::info("index.done", summary);
    print(summary);
    return kExitOk;
}

// ---- run -------------------------------------------------------------------

struct RunArgs {
    std::vector<std::string> bundles;
    std::string policies;
    std::string index;
    std::string corpus;
    std::string mode = "rag";
    std::size_t k = 0;
    bool k_optimal = false;
    std::string truth;
    LlmFlags llm1;
    LlmFlags llm2;
    std::string embed_endpoint;
    std::string out;
    std::string run_id;
    std::size_t parallel = 4;
    std::vector<std::string> policy_types = miti::default_policy_types();
    std::vector<std::string> deny_phrases = miti::default_deny_phrases();
};

int cmd_run(const RunArgs& a) {
    require(!a.bundles.empty() || !a.policies.empty(), "--bundle or --policies");
    if (!a.bundles.empty() && !a.policies.empty()) {
        throw miti::Error(miti::ErrorCode::InvalidArgument, "--bundle and --policies are mutually exclusive");
    }
    if (a.k_optimal && a.k != 0) throw miti::Error(miti::ErrorCode::InvalidArgument, "--k and --k-optimal are mutually exclusive");
    require(!a.out.empty(), "--out");

    std::vector<miti::GenerationMode> modes;
    if (a.mode == "both") {
        modes = {miti::GenerationMode::Rag, miti::GenerationMode::Baseline};
    } else {
        modes = {miti::parse_generation_mode(a.mode)};
    }
    const bool rag = modes.front() == miti::GenerationMode::Rag;
    if (rag) {
        require(!a.index.empty(), "--index (rag mode)");
        require(a.k_optimal || a.k > 0, "--k or --k-optimal (rag mode)");
        if (a.k_optimal) require(!a.truth.empty(), "--truth (with --k-optimal)");
    }

    std::vector<miti::MitigationPolicy> policies;
    if (!a.policies.empty()) {
        policies = miti::policies_from_json(miti::parse_json(miti::read_file(a.policies), a.policies));
    } else {
        policies = load_bundles(a.bundles, a.policy_types, a.deny_phrases).kept;
    }

    std::optional<miti::GroundTruthDataset> truth;
    if (!a.truth.empty()) truth = miti::load_ground_truth(miti::read_file(a.truth));
    std::optional<miti::Corpus> corpus;
    if (!a.corpus.empty()) corpus = miti::load_corpus(miti::read_file(a.corpus));

    std::optional<miti::VectorIndex> index;
    std::unique_ptr<miti::Embedder> embedder;
    std::optional<miti::IndexRetriever> retriever;
    const auto llm1 = make_gateway(a.llm1, "llm1");
    const auto llm2 = make_gateway(a.llm2, "llm2");
    miti::PipelineResources res{.llm1 = llm1, .llm2 = llm2};
    if (rag) {
        index = miti::index_load(a.index);
        const auto& meta = index->metadata();
        if (!meta.contains("embedder")) {
            throw miti::Error(miti::ErrorCode::SchemaViolation, a.index + " carries no embedder configuration");
        }
        auto ecfg = miti::embedder_config_from_json(meta.at("embedder"));
        if (!a.embed_endpoint.empty()) ecfg.endpoint = a.embed_endpoint;
        embedder = miti::make_embedder(ecfg);
        retriever.emplace(*index);
        res.retriever = &*retriever;
        res.embedder = embedder.get();
        res.index = &*index;
        res.embedder_config = miti::to_json(ecfg);
        res.chunking_config = meta.value("chunking", json::object());
        res.corpus_label = meta.value("corpus_label", std::string{});
        res.index_checksum = miti::index_checksum(*index);
    }
    if (corpus) res.corpus = &*corpus;
    if (truth) res.truth = &*truth;

    miti::PipelineOptions opts;
    opts.modes = modes;
    opts.k_strategy = a.k_optimal ? miti::KStrategy::per_task_optimal() : miti::KStrategy::fixed(a.k);
    opts.out_dir = a.out;
    opts.run_id = a.run_id;
    opts.parallelism = std::max<std::size_t>(1, a.parallel);

    const auto result = miti::run_pipeline(policies, res, opts);
    std::size_t failures = 0;
    for (const auto& r : result.results) failures += r.error.has_value();
    const json summary{{"run_id", result.manifest.run_id},
                       {"policies", policies.size()},
                       {"tasks", result.tasks.size()},
                       {"results", result.results.size()},
                       {"resumed", result.resumed},
                       {"parse_failures", failures},
                       {"out", a.out}};
    miti::log::info("run.done", summary);
    print(summary);
    return kExitOk;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
    std::vector<std::string> results;
    std::string truth;
    std::string out;
    bool compare = false;
};

void write_reports(const fs::path& dir, const std::string& stem, auto&& items) {
    miti::write_file_atomic(dir / (stem + ".json"), miti::emit_report(items, miti::ReportFormat::Json));
    miti::write_file_atomic(dir / (stem + ".csv"), miti::emit_report(items, miti::ReportFormat::Csv));
    miti::write_file_atomic(dir / (stem + ".md"), miti::emit_report(items, miti::ReportFormat::Markdown));
}

int cmd_eval(const EvalArgs& a) {
    require(!a.results.empty(), "--results");
    require(!a.truth.empty(), "--truth");
    require(!a.out.empty(), "--out");
    const auto truth = miti::load_ground_truth(miti::read_file(a.truth));

    std::vector<miti::GenerationResult> all;
    for (const auto& dir : a.results) {
        fs::path file = dir;
        if (fs::is_directory(file)) file /= "results.jsonl";
        auto rs = miti::results_from_jsonl(miti::read_file(file));
        std::move(rs.begin(), rs.end(), std::back_inserter(all));
    }
    const auto runs = miti::evaluate_runs(all, truth);
    const fs::path out(a.out);
    fs::create_directories(out);
    write_reports(out, "report", std::span<const miti::EvalRun>(runs));
    for (const auto& r : runs) {
        if (!r.coverage_gaps.empty()) {
            miti::log::warn("eval.coverage_gap",
                            {{"model_id", r.model_id}, {"mode", miti::to_string(r.mode)}, {"missing", r.coverage_gaps.size()}});
        }
    }

    json summary{{"runs", runs.size()}, {"results", all.size()}};
    if (a.compare) {
        std::map<std::string, std::pair<const miti::EvalRun*, const miti::EvalRun*>> by_model;
        for (const auto& r : runs) {
            auto& slot = by_model[r.model_id];
            (r.mode == miti::GenerationMode::Rag ? slot.first : slot.second) = &r;
        }
        std::vector<miti::ComparisonReport> reports;
        for (const auto& [model, pair] : by_model) {
            if (!pair.first || !pair.second) {
                throw miti::Error(miti::ErrorCode::InvalidArgument,
                                  "--compare needs rag and baseline results for model " + model);
            }
            reports.push_back(miti::compare_runs(*pair.first, *pair.second));
        }
        write_reports(out, "comparison", std::span<const miti::ComparisonReport>(reports));
        miti::write_file_atomic(out / "figure.csv", miti::figure_csv(miti::figure_series(reports)));
        summary["models"] = reports.size();
        summary["mean_f1_delta"] = miti::mean_delta_over_models(reports).f1;
    }
    miti::log::info("eval.done", summary);
    print(summary);
    return kExitOk;
}

int exit_code_for(const miti::Error& e) { return miti::is_backend_error(e.code()) ? kExitBackend : kExitInput; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Translate mitigation policies into API call sequences and score them."};
    app.require_subcommand(1);
    std::string config_path;
    std::string log_level = "info";
    app.add_option("--config", config_path, "JSON or TOML settings file");
    app.add_option("--log-level", log_level, "debug, info, warn or error");

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Normalize STIX bundles and API documentation");
    c_ingest->add_option("--stix", ingest.stix, "STIX 2.x bundle files");
    c_ingest->add_option("--corpus", ingest.corpus, "API spec corpus (JSON)");
    c_ingest->add_option("--html-dir", ingest.html_dir, "Directory of API reference pages");
    c_ingest->add_option("--rules", ingest.rules, "Extraction rules (JSON)");
    c_ingest->add_option("--out-dir", ingest.out_dir, "Output directory");
    c_ingest->add_option("--policy-types", ingest.policy_types, "STIX object types treated as policies");
    c_ingest->add_option("--deny-phrases", ingest.deny_phrases, "Phrases marking non-automatable policies");

    IndexArgs idx;
    auto* c_index = app.add_subcommand("index", "Chunk, embed and persist the corpus");
    c_index->add_option("--corpus", idx.corpus, "API spec corpus (JSON)");
    c_index->add_option("--out", idx.out, "Index file to write");
    c_index->add_option("--embed-backend", idx.embed.backend, "remote or test")->check(CLI::IsMember({"remote", "test"}));
    c_index->add_option("--embed-endpoint", idx.embed.endpoint, "Embedding service base URL");
    c_index->add_option("--embed-model", idx.embed.model, "Embedding model identifier");
    c_index->add_option("--dims", idx.embed.dims, "Embedding dimensionality");
    c_index->add_option("--embed-batch-size", idx.embed.batch_size, "Texts per embedding request");
    c_index->add_option("--parallel", idx.embed.parallelism, "Concurrent embedding requests");
    c_index->add_option("--embed-timeout", idx.embed.timeout_s, "Request timeout in seconds");
    c_index->add_option("--embed-retries", idx.embed.max_retries, "Retries on transient failures");
    c_index->add_option("--max-chunk-chars", idx.max_chunk_chars, "Chunk size limit in bytes");
    c_index->add_option("--overlap-chars", idx.overlap_chars, "Overlap between consecutive chunks");

    RunArgs run;
    auto* c_run = app.add_subcommand("run", "Decompose policies and generate API calls");
    c_run->add_option("--bundle", run.bundles, "STIX bundle files");
    c_run->add_option("--policies", run.policies, "policies.json written by ingest");
    c_run->add_option("--index", run.index, "Index file");
    c_run->add_option("--corpus", run.corpus, "Corpus; prompts then carry whole spec documents");
    c_run->add_option("--mode", run.mode, "rag, baseline or both")->check(CLI::IsMember({"rag", "baseline", "both"}));
    c_run->add_option("--k", run.k, "Functions retrieved per task");
    c_run->add_flag("--k-optimal", run.k_optimal, "Use each task's optimal K from the ground truth");
    c_run->add_option("--truth", run.truth, "Ground-truth dataset (JSON)");
    add_llm_flags(c_run, "llm1", run.llm1);
    add_llm_flags(c_run, "llm2", run.llm2);
    c_run->add_option("--embed-endpoint", run.embed_endpoint, "Override the index's embedding endpoint");
    c_run->add_option("--out", run.out, "Run directory");
    c_run->add_option("--run-id", run.run_id, "Run identifier (default: derived from inputs)");
    c_run->add_option("--parallel", run.parallel, "Concurrent work items");
    c_run->add_option("--policy-types", run.policy_types, "STIX object types treated as policies");
    c_run->add_option("--deny-phrases", run.deny_phrases, "Phrases marking non-automatable policies");

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "Score results against ground truth");
    c_eval->add_option("--results", ev.results, "Run directories or results.jsonl files");
    c_eval->add_option("--truth", ev.truth, "Ground-truth dataset (JSON)");
    c_eval->add_option("--out", ev.out, "Report directory");
    c_eval->add_flag("--compare", ev.compare, "Compare rag against baseline per model");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        Settings config;
        if (!config_path.empty()) config = load_config_file(config_path, sub->get_name());
        apply_layers(app, config);
        apply_layers(*sub, config);

        miti::log::Level level{};
        if (!miti::log::parse_level(log_level, level)) {
            throw miti::Error(miti::ErrorCode::InvalidConfig, "unknown log level '" + log_level + "'");
        }
        miti::log::set_level(level);

        if (sub == c_ingest) return cmd_ingest(ingest);
        if (sub == c_index) return cmd_index(idx);
        if (sub == c_run) return cmd_run(run);
        return cmd_eval(ev);
    } catch (const miti::Error& e) {
        miti::log::error("command.failed", {{"code", miti::to_string(e.code())}, {"message", e.detail()}});
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
