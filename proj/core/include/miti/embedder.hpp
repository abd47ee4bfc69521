#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "miti/http.hpp"

namespace miti {

/// Dense embedding. All values are finite; the length is the dimensionality.
struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dims() const noexcept { return values.size(); }

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

enum class EmbedBackend { Remote, DeterministicTest };

struct EmbedderConfig {
    EmbedBackend backend = EmbedBackend::DeterministicTest;
    std::string endpoint;  // remote only
    std::string model_id;  // remote only, e.g. "sentence-transformers/all-mpnet-base-v2"
    std::size_t dims = 768;
    int timeout_s = 60;
    int max_retries = 3;
    std::size_t batch_size = 64;
    std::size_t parallelism = 4;  // concurrent remote batches

    void validate() const;
};

nlohmann::json to_json(const EmbedderConfig& config);
EmbedderConfig embedder_config_from_json(const nlohmann::json& j);
std::string_view to_string(EmbedBackend backend) noexcept;
EmbedBackend parse_embed_backend(std::string_view text);

class Embedder {
public:
    virtual ~Embedder() = default;

    virtual std::size_t dims() const = 0;

    /// Throws EmptyText for empty input.
    virtual EmbeddingVector embed(std::string_view text) const = 0;

    /// Results follow input order.
    virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const;
};

/// Unit vector drawn from a SplitMix64 stream seeded by FNV-1a(text).
/// A pure function of (text, dims).
class DeterministicEmbedder final : public Embedder {
public:
    explicit DeterministicEmbedder(std::size_t dims);

    std::size_t dims() const override { return dims_; }
    EmbeddingVector embed(std::string_view text) const override;

private:
    std::size_t dims_;
};

/// OpenAI-compatible embeddings client: POST {endpoint}/v1/embeddings with
/// {"model", "input": [..]}, bearer token from MITI_EMBED_API_KEY.
class RemoteEmbedder final : public Embedder {
public:
    RemoteEmbedder(EmbedderConfig config, std::shared_ptr<HttpTransport> transport);

    std::size_t dims() const override { return config_.dims; }
    EmbeddingVector embed(std::string_view text) const override;
    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const override;

private:
    std::vector<EmbeddingVector> request(std::span<const std::string> texts) const;

    EmbedderConfig config_;
    std::shared_ptr<HttpTransport> transport_;
};

/// `transport` defaults to the httplib transport for remote backends.
std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config, std::shared_ptr<HttpTransport> transport = nullptr);

EmbeddingVector embed(std::string_view text, const EmbedderConfig& config);

}  // namespace miti
