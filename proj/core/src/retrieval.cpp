#include "miti/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <unordered_map>

#include "miti/error.hpp"
#include "miti/util.hpp"

namespace miti {

VectorIndex::VectorIndex(std::size_t dims) : dims_(dims) {}

void VectorIndex::add(IndexEntry entry) {
    if (dims_ == 0) dims_ = entry.vector.dims();
    if (entry.vector.dims() != dims_) {
        throw Error(ErrorCode::DimensionMismatch, "entry '" + entry.chunk_id + "' has " +
                                                      std::to_string(entry.vector.dims()) + " dims, index has " +
                                                      std::to_string(dims_));
    }
    if (!std::all_of(entry.vector.values.begin(), entry.vector.values.end(), [](double x) { return std::isfinite(x); })) {
        throw Error(ErrorCode::InvalidArgument, "entry '" + entry.chunk_id + "' has non-finite values");
    }
    if (chunk_ids_.contains(entry.chunk_id)) {
        throw Error(ErrorCode::DuplicateChunkId, "duplicate chunk id '" + entry.chunk_id + "'");
    }
    chunk_ids_.emplace(entry.chunk_id, entries_.size());
    ++api_ids_[entry.api_id];
    entries_.push_back(std::move(entry));
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dims() != b.dims()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "cosine of " + std::to_string(a.dims()) + " vs " + std::to_string(b.dims()) + " dims");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::ZeroVector, "cosine similarity of a zero vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

void index_add(VectorIndex& index, std::span<const Chunk> chunks, const Embedder& embedder) {
    if (index.dims() != 0 && embedder.dims() != index.dims()) {
        throw Error(ErrorCode::DimensionMismatch, "embedder dims differ from index dims");
    }
    // validate ids before spending embedding calls
    std::unordered_map<std::string_view, int> fresh;
    for (const auto& c : chunks) {
        if (++fresh[c.chunk_id] > 1) throw Error(ErrorCode::DuplicateChunkId, "duplicate chunk id '" + c.chunk_id + "'");
    }
    std::vector<std::string> texts;
    texts.reserve(chunks.size());
    for (const auto& c : chunks) texts.push_back(c.text);
    auto vectors = embedder.embed_batch(texts);
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        index.add({chunks[i].chunk_id, chunks[i].api_id, std::move(vectors[i]), chunks[i].text});
    }
}

VectorIndex index_build(std::span<const Chunk> chunks, const Embedder& embedder) {
    if (chunks.empty()) throw Error(ErrorCode::EmptyInput, "cannot build an index from zero chunks");
    VectorIndex index(embedder.dims());
    index_add(index, chunks, embedder);
    return index;
}

namespace {

struct Scored {
    double score;
    const IndexEntry* entry;
};

bool ranks_before(const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entry->chunk_id < b.entry->chunk_id;
}

void check_query(const VectorIndex& index, const EmbeddingVector& query, std::size_t k) {
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    if (query.dims() != index.dims()) {
        throw Error(ErrorCode::DimensionMismatch, "query has " + std::to_string(query.dims()) + " dims, index has " +
                                                      std::to_string(index.dims()));
    }
}

std::vector<Scored> score_all(const VectorIndex& index, const EmbeddingVector& query) {
    std::vector<Scored> scored;
    scored.reserve(index.size());
    for (const auto& e : index.entries()) scored.push_back({cosine_similarity(query, e.vector), &e});
    return scored;
}

std::vector<RetrievalHit> to_hits(const std::vector<Scored>& top) {
    std::vector<RetrievalHit> hits;
    hits.reserve(top.size());
    for (std::size_t i = 0; i < top.size(); ++i) {
        hits.push_back({top[i].entry->chunk_id, top[i].entry->api_id, top[i].score, i + 1, top[i].entry->text});
    }
    return hits;
}

std::vector<Scored> best_per_api(const std::vector<Scored>& scored) {
    std::unordered_map<std::string_view, std::size_t> slot;
    std::vector<Scored> best;
    for (const auto& s : scored) {
        auto [it, inserted] = slot.try_emplace(s.entry->api_id, best.size());
        if (inserted) {
            best.push_back(s);
        } else if (ranks_before(s, best[it->second])) {
            best[it->second] = s;
        }
    }
    return best;
}

std::vector<Scored> top_k(std::vector<Scored> scored, std::size_t k) {
    k = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), ranks_before);
    scored.resize(k);
    return scored;
}

}  // namespace

std::vector<RetrievalHit> search(const VectorIndex& index, const EmbeddingVector& query, std::size_t k) {
    check_query(index, query, k);
    return to_hits(top_k(score_all(index, query), k));
}

std::vector<RetrievalHit> search_api_level(const VectorIndex& index, const EmbeddingVector& query, std::size_t k) {
    check_query(index, query, k);
    return to_hits(top_k(best_per_api(score_all(index, query)), k));
}

std::vector<RetrievalHit> rank_api_level(const VectorIndex& index, const EmbeddingVector& query) {
    return search_api_level(index, query, std::max<std::size_t>(index.api_count(), 1));
}

// ---- persistence -----------------------------------------------------------

namespace {

constexpr std::string_view kMagic = "MITIVIDX";
constexpr std::size_t kDigestChars = 64;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

std::uint64_t get_le(std::string_view bytes, std::size_t pos, int width) {
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    return v;
}

VectorIndex index_from_parts(const nlohmann::json& header, std::string_view body, std::size_t payload_start);

}  // namespace

std::string serialize_index(const VectorIndex& index, std::string_view format_version) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : index.entries()) {
        entries.push_back({{"chunk_id", e.chunk_id}, {"api_id", e.api_id}, {"text", e.text}});
    }
    const nlohmann::json header = {{"format_version", std::string(format_version)},
                                   {"dims", index.dims()},
                                   {"metric", "cosine"},
                                   {"count", index.size()},
                                   {"entries", entries},
                                   {"metadata", index.metadata()}};
    const auto header_text = header.dump();

    std::string out;
    out.reserve(kMagic.size() + 4 + header_text.size() + index.size() * index.dims() * 8 + kDigestChars);
    out += kMagic;
    put_u32(out, static_cast<std::uint32_t>(header_text.size()));
    out += header_text;
    for (const auto& e : index.entries()) {
        for (double d : e.vector.values) put_f64(out, d);
    }
    out += sha256_hex(out);
    return out;
}

VectorIndex deserialize_index(std::string_view bytes) {
    if (bytes.size() < kMagic.size() + 4 + kDigestChars) {
        throw Error(ErrorCode::ChecksumMismatch, "index file truncated");
    }
    const auto body = bytes.substr(0, bytes.size() - kDigestChars);
    if (sha256_hex(body) != bytes.substr(body.size())) {
        throw Error(ErrorCode::ChecksumMismatch, "index checksum does not match contents");
    }
    if (body.substr(0, kMagic.size()) != kMagic) throw Error(ErrorCode::SchemaViolation, "not an index file");
    const auto header_len = static_cast<std::size_t>(get_le(body, kMagic.size(), 4));
    const auto header_start = kMagic.size() + 4;
    if (header_start + header_len > body.size()) throw Error(ErrorCode::SchemaViolation, "index header overruns file");
    const auto header = parse_json(body.substr(header_start, header_len), "index header");
    try {
        return index_from_parts(header, body, header_start + header_len);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("index header: ") + e.what());
    }
}

namespace {

VectorIndex index_from_parts(const nlohmann::json& header, std::string_view body, std::size_t payload_start) {

    const auto version = header.value("format_version", std::string{});
    if (version != kIndexFormatVersion) {
        throw Error(ErrorCode::FormatVersionMismatch, "index format version '" + version + "', reader supports '" +
                                                          std::string(kIndexFormatVersion) + "'");
    }
    if (header.value("metric", std::string{}) != "cosine") {
        throw Error(ErrorCode::SchemaViolation, "unsupported index metric");
    }
    const auto dims = header.value("dims", std::size_t{0});
    const auto count = header.value("count", std::size_t{0});
    const auto& entries = header.at("entries");
    if (!entries.is_array() || entries.size() != count) throw Error(ErrorCode::SchemaViolation, "index entry count mismatch");
    if (body.size() - payload_start != count * dims * 8) {
        throw Error(ErrorCode::SchemaViolation, "index vector payload has wrong length");
    }

    VectorIndex index(dims);
    if (auto meta = header.find("metadata"); meta != header.end()) index.set_metadata(*meta);
    std::size_t pos = payload_start;
    for (const auto& e : entries) {
        IndexEntry entry{e.at("chunk_id").get<std::string>(), e.at("api_id").get<std::string>(), {}, e.at("text").get<std::string>()};
        entry.vector.values.resize(dims);
        for (auto& d : entry.vector.values) {
            d = std::bit_cast<double>(get_le(body, pos, 8));
            pos += 8;
        }
        index.add(std::move(entry));
    }
    return index;
}

}  // namespace

void index_save(const VectorIndex& index, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_index(index));
}

VectorIndex index_load(const std::filesystem::path& path) { return deserialize_index(read_file(path)); }

std::string index_checksum(const VectorIndex& index) { return sha256_hex(serialize_index(index)); }

}  // namespace miti
