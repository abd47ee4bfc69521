#include "miti/corpus.hpp"

#include <algorithm>

#include "miti/error.hpp"
#include "miti/util.hpp"

namespace miti {

Corpus::Corpus(std::string source_label, std::vector<ApiSpec> specs)
    : source_label_(std::move(source_label)), specs_(std::move(specs)) {
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        const auto& s = specs_[i];
        if (s.id.empty()) throw Error(ErrorCode::SchemaViolation, "spec " + std::to_string(i) + " has empty id");
        if (s.name.empty()) throw Error(ErrorCode::SchemaViolation, "spec '" + s.id + "' has empty name");
        if (trim(s.description).empty()) {
            throw Error(ErrorCode::SchemaViolation, "spec '" + s.id + "' has empty description");
        }
        if (!by_id_.emplace(s.id, i).second) {
            throw Error(ErrorCode::DuplicateId, "duplicate spec id '" + s.id + "'");
        }
    }
}

const ApiSpec* Corpus::find(std::string_view id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &specs_[it->second];
}

namespace {

std::string required_string(const nlohmann::json& j, const char* key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
        throw Error(ErrorCode::SchemaViolation, path + "." + key + " must be a string");
    }
    return it->get<std::string>();
}

std::string optional_string(const nlohmann::json& j, const char* key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return {};
    if (!it->is_string()) throw Error(ErrorCode::SchemaViolation, path + "." + key + " must be a string");
    return it->get<std::string>();
}

}  // namespace

ApiSpec spec_from_json(const nlohmann::json& j, const std::string& path) {
    if (!j.is_object()) throw Error(ErrorCode::SchemaViolation, path + " must be an object");
    ApiSpec s;
    s.id = required_string(j, "id", path);
    s.name = required_string(j, "name", path);
    s.description = required_string(j, "description", path);
    if (s.id.empty()) throw Error(ErrorCode::SchemaViolation, path + ".id must be non-empty");
    if (s.name.empty()) throw Error(ErrorCode::SchemaViolation, path + ".name must be non-empty");
    if (trim(s.description).empty()) {
        throw Error(ErrorCode::SchemaViolation, path + ".description must be non-empty");
    }
    s.signature = optional_string(j, "signature", path);
    s.returns = optional_string(j, "returns", path);
    s.constraints = optional_string(j, "constraints", path);

    if (auto params = j.find("parameters"); params != j.end() && !params->is_null()) {
        if (!params->is_array()) throw Error(ErrorCode::SchemaViolation, path + ".parameters must be an array");
        for (std::size_t i = 0; i < params->size(); ++i) {
            const auto ppath = path + ".parameters[" + std::to_string(i) + "]";
            const auto& p = (*params)[i];
            if (!p.is_object()) throw Error(ErrorCode::SchemaViolation, ppath + " must be an object");
            s.parameters.push_back({required_string(p, "name", ppath), optional_string(p, "type_text", ppath),
                                    optional_string(p, "description", ppath)});
        }
    }
    if (auto ex = j.find("examples"); ex != j.end() && !ex->is_null()) {
        if (!ex->is_array()) throw Error(ErrorCode::SchemaViolation, path + ".examples must be an array");
        for (std::size_t i = 0; i < ex->size(); ++i) {
            if (!(*ex)[i].is_string()) {
                throw Error(ErrorCode::SchemaViolation, path + ".examples[" + std::to_string(i) + "] must be a string");
            }
            s.examples.push_back((*ex)[i].get<std::string>());
        }
    }
    return s;
}

nlohmann::json spec_to_json(const ApiSpec& s) {
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : s.parameters) {
        params.push_back({{"name", p.name}, {"type_text", p.type_text}, {"description", p.description}});
    }
    return {{"id", s.id},
            {"name", s.name},
            {"signature", s.signature},
            {"description", s.description},
            {"parameters", params},
            {"returns", s.returns},
            {"constraints", s.constraints},
            {"examples", s.examples}};
}

Corpus load_corpus(std::string_view json_text) {
    const auto doc = parse_json(json_text, "corpus");
    if (!doc.is_object()) throw Error(ErrorCode::SchemaViolation, "$ must be an object");
    const auto label = optional_string(doc, "source_label", "$");
    auto specs_it = doc.find("specs");
    if (specs_it == doc.end() || !specs_it->is_array()) {
        throw Error(ErrorCode::SchemaViolation, "$.specs must be an array");
    }
    std::vector<ApiSpec> specs;
    specs.reserve(specs_it->size());
    for (std::size_t i = 0; i < specs_it->size(); ++i) {
        specs.push_back(spec_from_json((*specs_it)[i], "$.specs[" + std::to_string(i) + "]"));
    }
    return Corpus(label, std::move(specs));
}

std::string serialize_corpus(const Corpus& corpus) {
    nlohmann::json specs = nlohmann::json::array();
    for (const auto& s : corpus.specs()) specs.push_back(spec_to_json(s));
    nlohmann::json doc = {{"source_label", corpus.source_label()}, {"specs", specs}};
    return doc.dump(2) + "\n";
}

std::string render_spec_document(const ApiSpec& spec) {
    std::vector<std::string> sections;
    std::string head = spec.name;
    if (!spec.signature.empty()) head += "\n" + spec.signature;
    sections.push_back(head);
    sections.push_back(spec.description);
    if (!spec.parameters.empty()) {
        std::string block = "Parameters:";
        for (const auto& p : spec.parameters) {
            block += "\n- " + p.name;
            if (!p.type_text.empty()) block += " (" + p.type_text + ")";
            if (!p.description.empty()) block += ": " + p.description;
        }
        sections.push_back(block);
    }
    if (!spec.returns.empty()) sections.push_back("Returns: " + spec.returns);
    if (!spec.constraints.empty()) sections.push_back("Constraints: " + spec.constraints);
    if (!spec.examples.empty()) {
        std::string block = "Examples:";
        for (const auto& e : spec.examples) block += "\n" + e;
        sections.push_back(block);
    }
    std::string out;
    for (std::size_t i = 0; i < sections.size(); ++i) {
        if (i) out += "\n\n";
        out += sections[i];
    }
    return out;
}

}  // namespace miti
