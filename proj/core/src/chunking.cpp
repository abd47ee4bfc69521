#include <algorithm>

#include "miti/corpus.hpp"
#include "miti/error.hpp"

namespace miti {

void ChunkingConfig::validate() const {
    if (max_chunk_chars == 0) throw Error(ErrorCode::InvalidConfig, "max_chunk_chars must be > 0");
    if (overlap_chars >= max_chunk_chars) {
        throw Error(ErrorCode::InvalidConfig, "overlap_chars must be < max_chunk_chars");
    }
    for (const auto& sep : boundary_preference) {
        if (sep.empty()) throw Error(ErrorCode::InvalidConfig, "boundary separators must be non-empty");
    }
}

nlohmann::json to_json(const ChunkingConfig& c) {
    return {{"max_chunk_chars", c.max_chunk_chars},
            {"overlap_chars", c.overlap_chars},
            {"boundary_preference", c.boundary_preference}};
}

ChunkingConfig chunking_config_from_json(const nlohmann::json& j) {
    ChunkingConfig c;
    try {
        c.max_chunk_chars = j.value("max_chunk_chars", c.max_chunk_chars);
        c.overlap_chars = j.value("overlap_chars", c.overlap_chars);
        c.boundary_preference = j.value("boundary_preference", c.boundary_preference);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("chunking config: ") + e.what());
    }
    c.validate();
    return c;
}

namespace {

bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

// End of the window starting at `start`. Candidate ends must leave room for the
// overlap (so the next window starts strictly later) and fill at least half
// the window.
std::size_t choose_end(std::string_view doc, std::size_t start, const ChunkingConfig& cfg) {
    const std::size_t limit = start + cfg.max_chunk_chars;
    const std::size_t lo = start + std::max(cfg.overlap_chars + 1, (cfg.max_chunk_chars + 1) / 2);
    for (const auto& sep : cfg.boundary_preference) {
        if (sep.size() > cfg.max_chunk_chars) continue;
        const auto pos = doc.rfind(sep, limit - sep.size());
        if (pos == std::string_view::npos || pos < start) continue;
        const auto end = pos + sep.size();
        if (end >= lo && end <= limit) return end;
    }
    std::size_t end = limit;
    while (end > start + cfg.overlap_chars + 1 && is_continuation(static_cast<unsigned char>(doc[end]))) --end;
    return end;
}

std::size_t choose_next_start(std::string_view doc, std::size_t end, const ChunkingConfig& cfg) {
    std::size_t next = end - cfg.overlap_chars;
    if (cfg.overlap_chars > 0) {
        for (const auto& sep : cfg.boundary_preference) {
            const auto pos = doc.find(sep, next);
            if (pos != std::string_view::npos && pos + sep.size() <= end) {
                next = pos + sep.size();
                break;
            }
        }
    }
    while (next < end && is_continuation(static_cast<unsigned char>(doc[next]))) ++next;
    return next;
}

}  // namespace

std::vector<Chunk> chunk_text(std::string_view api_id, std::string_view doc, const ChunkingConfig& cfg) {
    cfg.validate();
    std::vector<Chunk> out;
    std::size_t start = 0;
    auto emit = [&](std::size_t b, std::size_t e) {
        Chunk c;
        c.api_id = std::string(api_id);
        c.seq = out.size();
        c.chunk_id = c.api_id + "#" + std::to_string(c.seq);
        c.start_offset = b;
        c.text = std::string(doc.substr(b, e - b));
        out.push_back(std::move(c));
    };
    while (true) {
        if (doc.size() - start <= cfg.max_chunk_chars) {
            emit(start, doc.size());
            break;
        }
        const auto end = choose_end(doc, start, cfg);
        emit(start, end);
        start = choose_next_start(doc, end, cfg);
    }
    return out;
}

std::vector<Chunk> chunk_spec(const ApiSpec& spec, const ChunkingConfig& config) {
    return chunk_text(spec.id, render_spec_document(spec), config);
}

std::vector<Chunk> chunk_corpus(const Corpus& corpus, const ChunkingConfig& config) {
    std::vector<const ApiSpec*> ordered;
    ordered.reserve(corpus.spec_count());
    for (const auto& s : corpus.specs()) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(), [](const ApiSpec* a, const ApiSpec* b) { return a->id < b->id; });
    std::vector<Chunk> out;
    for (const auto* s : ordered) {
        auto chunks = chunk_spec(*s, config);
        std::move(chunks.begin(), chunks.end(), std::back_inserter(out));
    }
    return out;
}

std::string reconstruct_document(const std::vector<Chunk>& chunks) {
    std::string out;
    std::size_t covered = 0;
    for (const auto& c : chunks) {
        if (c.start_offset > covered) {
            throw Error(ErrorCode::InvalidArgument, "gap before chunk " + c.chunk_id);
        }
        const auto skip = covered - c.start_offset;
        if (skip < c.text.size()) out.append(c.text, skip, std::string::npos);
        covered = std::max(covered, c.start_offset + c.text.size());
    }
    return out;
}

}  // namespace miti
