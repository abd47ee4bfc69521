#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace miti {

struct ApiParameter {
    std::string name;
    std::string type_text;
    std::string description;

    friend bool operator==(const ApiParameter&, const ApiParameter&) = default;
};

/// One documented API function.
struct ApiSpec {
    std::string id;  // stable slug, conventionally the lowercased function name
    std::string name;
    std::string signature;
    std::string description;
    std::vector<ApiParameter> parameters;
    std::string returns;
    std::string constraints;
    std::vector<std::string> examples;

    friend bool operator==(const ApiSpec&, const ApiSpec&) = default;
};

class Corpus {
public:
    Corpus() = default;

    /// Validates names, descriptions and id uniqueness.
    Corpus(std::string source_label, std::vector<ApiSpec> specs);

    const std::string& source_label() const noexcept { return source_label_; }
    const std::vector<ApiSpec>& specs() const noexcept { return specs_; }
    std::size_t spec_count() const noexcept { return specs_.size(); }

    const ApiSpec* find(std::string_view id) const;

    friend bool operator==(const Corpus&, const Corpus&) = default;

private:
    std::string source_label_;
    std::vector<ApiSpec> specs_;
    std::map<std::string, std::size_t, std::less<>> by_id_;
};

/// Throws MalformedJson, SchemaViolation (with JSON path) or DuplicateId.
Corpus load_corpus(std::string_view json_text);
std::string serialize_corpus(const Corpus& corpus);

ApiSpec spec_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::json spec_to_json(const ApiSpec& spec);

/// Plain-text document for embedding and prompting. Sections appear in a
/// fixed order (name, signature, description, parameters, returns,
/// constraints, examples), separated by blank lines; empty sections are omitted.
std::string render_spec_document(const ApiSpec& spec);

struct ChunkingConfig {
    std::size_t max_chunk_chars = 1000;
    std::size_t overlap_chars = 100;
    std::vector<std::string> boundary_preference{"\n\n", "\n", " "};

    void validate() const;

    friend bool operator==(const ChunkingConfig&, const ChunkingConfig&) = default;
};

nlohmann::json to_json(const ChunkingConfig& config);
ChunkingConfig chunking_config_from_json(const nlohmann::json& j);

struct Chunk {
    std::string chunk_id;  // api_id + "#" + seq
    std::string api_id;
    std::size_t seq = 0;
    std::size_t start_offset = 0;  // byte offset of `text` within the rendered document
    std::string text;

    friend bool operator==(const Chunk&, const Chunk&) = default;
};

/// Splits a document into windows of at most max_chunk_chars bytes. Each
/// window prefers to end just after a boundary separator (tried in
/// preference order) and the next one starts overlap_chars before that end,
/// moved forward to a separator when one lies inside the overlap. Cuts never
/// split a UTF-8 sequence.
std::vector<Chunk> chunk_text(std::string_view api_id, std::string_view document, const ChunkingConfig& config);

std::vector<Chunk> chunk_spec(const ApiSpec& spec, const ChunkingConfig& config);

/// Chunks every spec; output is ordered by (api_id, seq).
std::vector<Chunk> chunk_corpus(const Corpus& corpus, const ChunkingConfig& config);

/// Rebuilds a document from its chunks (given in seq order) by dropping the
/// overlapping prefix of every chunk after the first.
std::string reconstruct_document(const std::vector<Chunk>& chunks);

}  // namespace miti
