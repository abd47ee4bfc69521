#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "miti/corpus.hpp"
#include "miti/embedder.hpp"

namespace miti {

inline constexpr std::string_view kIndexFormatVersion = "1";

struct IndexEntry {
    std::string chunk_id;
    std::string api_id;
    EmbeddingVector vector;
    std::string text;

    friend bool operator==(const IndexEntry&, const IndexEntry&) = default;
};

struct RetrievalHit {
    std::string chunk_id;
    std::string api_id;
    double score = 0.0;  // cosine similarity
    std::size_t rank = 0;  // 1-based
    std::string text;

    friend bool operator==(const RetrievalHit&, const RetrievalHit&) = default;
};

/// Exact cosine-similarity index. Append-only: entries never change once
/// added. Safe for concurrent reads; `add` needs exclusive access.
class VectorIndex {
public:
    explicit VectorIndex(std::size_t dims = 0);

    std::size_t dims() const noexcept { return dims_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const std::vector<IndexEntry>& entries() const noexcept { return entries_; }
    std::size_t api_count() const noexcept { return api_ids_.size(); }
    bool contains_api(std::string_view api_id) const { return api_ids_.find(api_id) != api_ids_.end(); }

    /// Free-form provenance (corpus label, chunking and embedder configs).
    const nlohmann::json& metadata() const noexcept { return metadata_; }
    void set_metadata(nlohmann::json metadata) { metadata_ = std::move(metadata); }

    /// Throws DimensionMismatch, DuplicateChunkId, or InvalidArgument (non-finite values).
    void add(IndexEntry entry);

    friend bool operator==(const VectorIndex& a, const VectorIndex& b) {
        return a.dims_ == b.dims_ && a.entries_ == b.entries_ && a.metadata_ == b.metadata_;
    }

private:
    std::size_t dims_;
    std::vector<IndexEntry> entries_;
    std::map<std::string, std::size_t, std::less<>> chunk_ids_;
    std::map<std::string, std::size_t, std::less<>> api_ids_;  // api_id -> chunk count
    nlohmann::json metadata_ = nlohmann::json::object();
};

/// dot(a,b) / (|a||b|), clamped to [-1, 1]. Throws DimensionMismatch or ZeroVector.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

/// Throws EmptyInput for no chunks.
VectorIndex index_build(std::span<const Chunk> chunks, const Embedder& embedder);
void index_add(VectorIndex& index, std::span<const Chunk> chunks, const Embedder& embedder);

/// Top-k chunks by score descending, ties broken by ascending chunk_id.
std::vector<RetrievalHit> search(const VectorIndex& index, const EmbeddingVector& query, std::size_t k);

/// Like search, but one hit per api_id (its best chunk); k counts functions.
std::vector<RetrievalHit> search_api_level(const VectorIndex& index, const EmbeddingVector& query, std::size_t k);

/// Every function in the index, ranked as search_api_level would.
std::vector<RetrievalHit> rank_api_level(const VectorIndex& index, const EmbeddingVector& query);

/// Binary layout: "MITIVIDX" | u32 LE header length | JSON header (dims,
/// metric, count, format_version, entry ids/texts, metadata) | count*dims
/// little-endian float64 | 64 hex chars of SHA-256 over everything before.
std::string serialize_index(const VectorIndex& index, std::string_view format_version = kIndexFormatVersion);

/// Throws ChecksumMismatch, FormatVersionMismatch, or SchemaViolation.
VectorIndex deserialize_index(std::string_view bytes);

void index_save(const VectorIndex& index, const std::filesystem::path& path);
VectorIndex index_load(const std::filesystem::path& path);

/// SHA-256 hex of the serialized index.
std::string index_checksum(const VectorIndex& index);

/// Query surface the pipeline depends on, so callers can instrument it.
class Retriever {
public:
    virtual ~Retriever() = default;
    virtual std::size_t dims() const = 0;
    virtual std::size_t api_count() const = 0;
    virtual std::vector<RetrievalHit> search_api_level(const EmbeddingVector& query, std::size_t k) const = 0;
};

class IndexRetriever final : public Retriever {
public:
    explicit IndexRetriever(const VectorIndex& index) : index_(index) {}

    std::size_t dims() const override { return index_.dims(); }
    std::size_t api_count() const override { return index_.api_count(); }
    std::vector<RetrievalHit> search_api_level(const EmbeddingVector& query, std::size_t k) const override {
        return miti::search_api_level(index_, query, k);
    }

    const VectorIndex& index() const noexcept { return index_; }

private:
    const VectorIndex& index_;
};

/// Counts queries passing through to another retriever.
class CountingRetriever final : public Retriever {
public:
    explicit CountingRetriever(const Retriever& inner) : inner_(inner) {}

    std::size_t dims() const override { return inner_.dims(); }
    std::size_t api_count() const override { return inner_.api_count(); }
    std::vector<RetrievalHit> search_api_level(const EmbeddingVector& query, std::size_t k) const override {
        queries_.fetch_add(1, std::memory_order_relaxed);
        return inner_.search_api_level(query, k);
    }

    std::size_t queries() const noexcept { return queries_.load(); }

private:
    const Retriever& inner_;
    mutable std::atomic<std::size_t> queries_{0};
};

}  // namespace miti
