#include "miti/embedder.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "miti/error.hpp"
#include "miti/util.hpp"

namespace miti {

std::string_view to_string(EmbedBackend backend) noexcept {
    return backend == EmbedBackend::Remote ? "remote" : "deterministic_test";
}

EmbedBackend parse_embed_backend(std::string_view text) {
    if (text == "remote") return EmbedBackend::Remote;
    if (text == "deterministic_test" || text == "test") return EmbedBackend::DeterministicTest;
    throw Error(ErrorCode::InvalidConfig, "unknown embedding backend '" + std::string(text) + "'");
}

void EmbedderConfig::validate() const {
    if (dims == 0) throw Error(ErrorCode::InvalidConfig, "embedding dims must be > 0");
    if (backend == EmbedBackend::Remote && endpoint.empty()) {
        throw Error(ErrorCode::InvalidConfig, "remote embedder requires an endpoint");
    }
    if (batch_size == 0) throw Error(ErrorCode::InvalidConfig, "embedding batch_size must be > 0");
}

nlohmann::json to_json(const EmbedderConfig& c) {
    return {{"backend", to_string(c.backend)}, {"endpoint", c.endpoint}, {"model_id", c.model_id},
            {"dims", c.dims},                  {"timeout_s", c.timeout_s}, {"max_retries", c.max_retries},
            {"batch_size", c.batch_size},      {"parallelism", c.parallelism}};
}

EmbedderConfig embedder_config_from_json(const nlohmann::json& j) {
    EmbedderConfig c;
    try {
        c.backend = parse_embed_backend(j.value("backend", std::string(to_string(c.backend))));
        c.endpoint = j.value("endpoint", c.endpoint);
        c.model_id = j.value("model_id", c.model_id);
        c.dims = j.value("dims", c.dims);
        c.timeout_s = j.value("timeout_s", c.timeout_s);
        c.max_retries = j.value("max_retries", c.max_retries);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.parallelism = j.value("parallelism", c.parallelism);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("embedder config: ") + e.what());
    }
    return c;
}

std::vector<EmbeddingVector> Embedder::embed_batch(std::span<const std::string> texts) const {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed(t));
    return out;
}

DeterministicEmbedder::DeterministicEmbedder(std::size_t dims) : dims_(dims) {
    if (dims_ == 0) throw Error(ErrorCode::InvalidConfig, "embedding dims must be > 0");
}

EmbeddingVector DeterministicEmbedder::embed(std::string_view text) const {
    if (text.empty()) throw Error(ErrorCode::EmptyText, "cannot embed empty text");
    std::uint64_t state = fnv1a64(text);
    auto next = [&state]() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    EmbeddingVector v;
    v.values.resize(dims_);
    double norm2 = 0.0;
    for (auto& x : v.values) {
        x = static_cast<double>(next() >> 11) * 0x1.0p-52 - 1.0;  // [-1, 1)
        norm2 += x * x;
    }
    if (norm2 == 0.0) {
        v.values[0] = 1.0;
        return v;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& x : v.values) x *= inv;
    return v;
}

RemoteEmbedder::RemoteEmbedder(EmbedderConfig config, std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
    config_.validate();
    if (!transport_) transport_ = make_default_transport();
}

EmbeddingVector RemoteEmbedder::embed(std::string_view text) const {
    if (text.empty()) throw Error(ErrorCode::EmptyText, "cannot embed empty text");
    const std::string owned(text);
    return std::move(request(std::span(&owned, 1)).front());
}

std::vector<EmbeddingVector> RemoteEmbedder::request(std::span<const std::string> texts) const {
    nlohmann::json body = {{"model", config_.model_id}, {"input", nlohmann::json::array()}};
    for (const auto& t : texts) body["input"].push_back(t);

    HttpRequest req;
    req.url = join_url(config_.endpoint, "/v1/embeddings");
    req.body = body.dump();
    req.timeout = std::chrono::seconds(config_.timeout_s);
    req.headers.emplace_back("Content-Type", "application/json");
    if (const char* key = std::getenv("MITI_EMBED_API_KEY"); key && *key) {
        req.headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }
    RetryPolicy retry;
    retry.max_retries = config_.max_retries;
    const auto res = post_with_retries(*transport_, req, retry, "embeddings");

    const auto doc = parse_json(res.body, "embeddings response");
    auto data = doc.find("data");
    if (data == doc.end() || !data->is_array() || data->size() != texts.size()) {
        throw Error(ErrorCode::SchemaViolation, "embeddings response: expected data[] with one item per input");
    }
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<bool> filled(texts.size(), false);
    for (std::size_t i = 0; i < data->size(); ++i) {
        const auto& item = (*data)[i];
        const auto idx = item.value("index", i);
        auto emb = item.find("embedding");
        if (idx >= texts.size() || filled[idx] || emb == item.end() || !emb->is_array()) {
            throw Error(ErrorCode::SchemaViolation, "embeddings response: malformed data[" + std::to_string(i) + "]");
        }
        EmbeddingVector v;
        v.values.reserve(emb->size());
        for (const auto& x : *emb) {
            if (!x.is_number()) throw Error(ErrorCode::SchemaViolation, "embeddings response: non-numeric value");
            v.values.push_back(x.get<double>());
        }
        if (v.dims() != config_.dims) {
            throw Error(ErrorCode::DimensionMismatch, "embedding service returned " + std::to_string(v.dims()) +
                                                          " dims, expected " + std::to_string(config_.dims));
        }
        if (!std::all_of(v.values.begin(), v.values.end(), [](double x) { return std::isfinite(x); })) {
            throw Error(ErrorCode::InvalidArgument, "embedding service returned non-finite values");
        }
        out[idx] = std::move(v);
        filled[idx] = true;
    }
    return out;
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(std::span<const std::string> texts) const {
    for (const auto& t : texts) {
        if (t.empty()) throw Error(ErrorCode::EmptyText, "cannot embed empty text");
    }
    std::vector<EmbeddingVector> out(texts.size());
    const std::size_t batches = (texts.size() + config_.batch_size - 1) / config_.batch_size;
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
        for (std::size_t b; (b = next.fetch_add(1)) < batches;) {
            {
                std::lock_guard lock(failure_mu);
                if (failure) return;
            }
            const auto begin = b * config_.batch_size;
            const auto count = std::min(config_.batch_size, texts.size() - begin);
            try {
                auto vecs = request(texts.subspan(begin, count));
                std::move(vecs.begin(), vecs.end(), out.begin() + static_cast<std::ptrdiff_t>(begin));
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const auto threads = std::clamp<std::size_t>(config_.parallelism, 1, std::max<std::size_t>(batches, 1));
    {
        std::vector<std::jthread> pool;
        for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
        worker();
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config, std::shared_ptr<HttpTransport> transport) {
    config.validate();
    if (config.backend == EmbedBackend::DeterministicTest) return std::make_unique<DeterministicEmbedder>(config.dims);
    return std::make_unique<RemoteEmbedder>(config, std::move(transport));
}

EmbeddingVector embed(std::string_view text, const EmbedderConfig& config) {
    return make_embedder(config)->embed(text);
}

}  // namespace miti
