#include "miti/policy.hpp"

#include <algorithm>
#include <unordered_set>

#include "miti/error.hpp"
#include "miti/util.hpp"

namespace miti {

namespace {

std::string string_field(const nlohmann::json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) return {};
    return it->get<std::string>();
}

}  // namespace

StixBundle parse_stix_bundle(std::string_view json_text) {
    auto doc = parse_json(json_text, "STIX bundle");
    if (!doc.is_object() || string_field(doc, "type") != "bundle") {
        throw Error(ErrorCode::NotABundle, "top-level type is not \"bundle\"");
    }
    StixBundle bundle;
    bundle.bundle_id = string_field(doc, "id");
    bundle.spec_version = string_field(doc, "spec_version");

    auto objects = doc.find("objects");
    if (objects == doc.end()) return bundle;
    if (!objects->is_array()) {
        throw Error(ErrorCode::MissingField, "bundle \"objects\" is not an array");
    }
    bundle.objects.reserve(objects->size());
    for (std::size_t i = 0; i < objects->size(); ++i) {
        auto& obj = (*objects)[i];
        if (!obj.is_object()) {
            throw Error(ErrorCode::MissingField, "object " + std::to_string(i) + " is not a JSON object");
        }
        for (const char* key : {"type", "id"}) {
            if (string_field(obj, key).empty()) {
                throw Error(ErrorCode::MissingField,
                            "object " + std::to_string(i) + " lacks \"" + key + "\"");
            }
        }
        bundle.objects.push_back(std::move(obj));
    }
    return bundle;
}

std::string serialize_stix_bundle(const StixBundle& bundle) {
    nlohmann::json doc = nlohmann::json::object();
    doc["type"] = "bundle";
    doc["id"] = bundle.bundle_id;
    if (!bundle.spec_version.empty()) doc["spec_version"] = bundle.spec_version;
    doc["objects"] = nlohmann::json::array();
    for (const auto& obj : bundle.objects) doc["objects"].push_back(obj);
    return doc.dump(2);
}

bool is_known_stix_version(std::string_view version) {
    return version == "2.0" || version == "2.1";
}

PolicyExtraction extract_policies(const StixBundle& bundle, std::string_view source_ref,
                                  std::span<const std::string> allowed_types) {
    PolicyExtraction out;
    std::unordered_set<std::string> seen;
    for (const auto& obj : bundle.objects) {
        const auto type = string_field(obj, "type");
        const auto id = string_field(obj, "id");
        if (std::find(allowed_types.begin(), allowed_types.end(), type) == allowed_types.end()) {
            continue;
        }
        // object-level spec_version is a 2.1 feature; 2.0 declares it on the bundle
        const auto version = string_field(obj, "spec_version");
        if (!version.empty() && !is_known_stix_version(version)) {
            log::warn("stix.unknown_version", {{"object_id", id}, {"spec_version", version}});
        }
        MitigationPolicy policy;
        policy.id = id;
        policy.name = trim(string_field(obj, "name"));
        policy.description = trim(string_field(obj, "description"));
        policy.source_ref = std::string(source_ref);
        if (auto labels = obj.find("labels"); labels != obj.end() && labels->is_array()) {
            for (const auto& l : *labels) {
                if (l.is_string()) policy.labels.push_back(l.get<std::string>());
            }
        }
        if (policy.description.empty()) {
            out.skipped.push_back({id, "empty description"});
            continue;
        }
        if (!seen.insert(id).second) {
            out.skipped.push_back({id, "duplicate id"});
            continue;
        }
        out.policies.push_back(std::move(policy));
    }
    return out;
}

AutomatableSplit filter_automatable(std::span<const MitigationPolicy> policies,
                                    std::span<const std::string> deny_phrases) {
    if (deny_phrases.empty()) {
        throw Error(ErrorCode::InvalidConfig, "deny phrase list must not be empty");
    }
    AutomatableSplit split;
    for (const auto& p : policies) {
        const bool denied = std::any_of(deny_phrases.begin(), deny_phrases.end(), [&](const std::string& phrase) {
            return !phrase.empty() && contains_icase(p.description, phrase);
        });
        (denied ? split.excluded : split.kept).push_back(p);
    }
    return split;
}

std::string skip_report_jsonl(std::span<const SkipEntry> skipped) {
    std::string out;
    for (const auto& s : skipped) {
        nlohmann::json line = {{"policy_id", s.policy_id}, {"reason", s.reason}};
        out += line.dump();
        out += '\n';
    }
    return out;
}

nlohmann::json policies_to_json(std::span<const MitigationPolicy> policies) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : policies) {
        arr.push_back({{"id", p.id},
                       {"name", p.name},
                       {"description", p.description},
                       {"source_ref", p.source_ref},
                       {"labels", p.labels}});
    }
    return {{"policies", arr}};
}

std::vector<MitigationPolicy> policies_from_json(const nlohmann::json& doc) {
    auto arr = doc.find("policies");
    if (!doc.is_object() || arr == doc.end() || !arr->is_array()) {
        throw Error(ErrorCode::SchemaViolation, "$.policies must be an array");
    }
    std::vector<MitigationPolicy> out;
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < arr->size(); ++i) {
        const auto& p = (*arr)[i];
        const auto path = "$.policies[" + std::to_string(i) + "]";
        MitigationPolicy policy;
        policy.id = p.is_object() ? string_field(p, "id") : std::string{};
        policy.description = p.is_object() ? trim(string_field(p, "description")) : std::string{};
        if (policy.id.empty()) throw Error(ErrorCode::SchemaViolation, path + ".id is required");
        if (policy.description.empty()) {
            throw Error(ErrorCode::SchemaViolation, path + ".description is required");
        }
        if (!seen.insert(policy.id).second) throw Error(ErrorCode::DuplicateId, policy.id);
        policy.name = string_field(p, "name");
        policy.source_ref = string_field(p, "source_ref");
        if (auto labels = p.find("labels"); labels != p.end() && labels->is_array()) {
            for (const auto& l : *labels) {
                if (l.is_string()) policy.labels.push_back(l.get<std::string>());
            }
        }
        out.push_back(std::move(policy));
    }
    return out;
}

}  // namespace miti
