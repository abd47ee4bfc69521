#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace miti {

/// A STIX 2.x bundle. Objects are kept verbatim (including unknown types);
/// only `type` and `id` are validated at parse time.
struct StixBundle {
    std::string bundle_id;
    std::string spec_version;  // empty when the bundle does not declare one
    std::vector<nlohmann::json> objects;

    friend bool operator==(const StixBundle&, const StixBundle&) = default;
};

struct MitigationPolicy {
    std::string id;
    std::string name;
    std::string description;
    std::string source_ref;
    std::vector<std::string> labels;

    friend bool operator==(const MitigationPolicy&, const MitigationPolicy&) = default;
};

struct SkipEntry {
    std::string policy_id;
    std::string reason;

    friend bool operator==(const SkipEntry&, const SkipEntry&) = default;
};

struct PolicyExtraction {
    std::vector<MitigationPolicy> policies;
    std::vector<SkipEntry> skipped;
};

struct AutomatableSplit {
    std::vector<MitigationPolicy> kept;
    std::vector<MitigationPolicy> excluded;
};

/// Throws MalformedJson (byte offset), NotABundle, or MissingField (object index).
StixBundle parse_stix_bundle(std::string_view json_text);

/// Inverse of parse_stix_bundle on the retained fields.
std::string serialize_stix_bundle(const StixBundle& bundle);

/// STIX versions whose semantics this library knows; others parse with a warning.
bool is_known_stix_version(std::string_view version);

inline const std::vector<std::string>& default_policy_types() {
    static const std::vector<std::string> types{"course-of-action"};
    return types;
}

/// Selects objects whose type is in `allowed_types` and whose description is
/// non-empty. Everything rejected lands in `skipped` with a reason.
PolicyExtraction extract_policies(const StixBundle& bundle,
                                  std::string_view source_ref = {},
                                  std::span<const std::string> allowed_types = default_policy_types());

inline const std::vector<std::string>& default_deny_phrases() {
    static const std::vector<std::string> phrases{"physically", "badge", "personnel"};
    return phrases;
}

/// Excludes policies whose description mentions a deny phrase (case-insensitive).
/// An empty phrase list is rejected with InvalidConfig.
AutomatableSplit filter_automatable(std::span<const MitigationPolicy> policies,
                                    std::span<const std::string> deny_phrases = default_deny_phrases());

/// Skip report lines: {"policy_id":...,"reason":...}
std::string skip_report_jsonl(std::span<const SkipEntry> skipped);

nlohmann::json policies_to_json(std::span<const MitigationPolicy> policies);
std::vector<MitigationPolicy> policies_from_json(const nlohmann::json& doc);

}  // namespace miti
