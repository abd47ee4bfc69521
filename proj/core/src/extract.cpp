#include <string>

#include "miti/error.hpp"
#include "miti/html.hpp"
#include "miti/util.hpp"

namespace miti {

const ExtractionRules& default_extraction_rules() {
    static const ExtractionRules rules{
        {"name", "h1"},
        {"signature", "pre.syntax"},
        {"description", "div.summary p, p.summary"},
        {"parameters", "table.parameters tr"},
        {"parameter_name", "td:nth-child(1)"},
        {"parameter_type", "td:nth-child(2)"},
        {"parameter_description", "td:nth-child(3)"},
        {"returns", "div.returns p"},
        {"constraints", "div.remarks p"},
        {"examples", "pre.example"},
    };
    return rules;
}

ExtractionRules extraction_rules_from_json(std::string_view json_text) {
    const auto doc = parse_json(json_text, "extraction rules");
    if (!doc.is_object()) throw Error(ErrorCode::SchemaViolation, "extraction rules must be a JSON object");
    ExtractionRules rules;
    for (const auto& [field, sel] : doc.items()) {
        if (!sel.is_string()) throw Error(ErrorCode::SchemaViolation, "$." + field + " must be a selector string");
        rules[field] = sel.get<std::string>();
    }
    return rules;
}

namespace {

const std::string* rule(const ExtractionRules& rules, const char* field) {
    auto it = rules.find(field);
    return it == rules.end() || it->second.empty() ? nullptr : &it->second;
}

std::string joined_text(const html::Node& scope, const std::string* selector) {
    if (!selector) return {};
    std::string out;
    for (const auto* n : html::select(scope, *selector)) {
        auto t = collapse_whitespace(html::text_content(*n));
        if (t.empty()) continue;
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

std::string first_text(const html::Node& scope, const std::string* selector) {
    if (!selector) return {};
    const auto* n = html::select_first(scope, *selector);
    return n ? collapse_whitespace(html::text_content(*n)) : std::string{};
}

}  // namespace

ApiSpec extract_spec_from_html(std::string_view html_text, const ExtractionRules& rules) {
    const auto dom = html::parse(html_text);

    const auto* name_rule = rule(rules, "name");
    if (!name_rule) throw Error(ErrorCode::ExtractionFailed, "no selector for 'name'");
    const auto heading = first_text(*dom, name_rule);
    if (heading.empty()) throw Error(ErrorCode::ExtractionFailed, "name element '" + *name_rule + "' not found");

    ApiSpec spec;
    spec.name = heading.substr(0, heading.find(' '));
    spec.id = to_lower(spec.name);

    const auto* desc_rule = rule(rules, "description");
    if (!desc_rule) throw Error(ErrorCode::ExtractionFailed, "no selector for 'description'");
    spec.description = joined_text(*dom, desc_rule);
    if (spec.description.empty()) {
        throw Error(ErrorCode::ExtractionFailed, "description '" + *desc_rule + "' not found for " + spec.name);
    }

    spec.signature = first_text(*dom, rule(rules, "signature"));
    spec.returns = joined_text(*dom, rule(rules, "returns"));
    spec.constraints = joined_text(*dom, rule(rules, "constraints"));

    if (const auto* ex = rule(rules, "examples")) {
        for (const auto* n : html::select(*dom, *ex)) {
            auto t = collapse_whitespace(html::text_content(*n));
            if (!t.empty()) spec.examples.push_back(std::move(t));
        }
    }

    if (const auto* rows = rule(rules, "parameters")) {
        const auto* pname = rule(rules, "parameter_name");
        for (const auto* row : html::select(*dom, *rows)) {
            // rows without a name cell (headers) are not parameters
            auto name = pname ? first_text(*row, pname) : collapse_whitespace(html::text_content(*row));
            if (name.empty()) continue;
            spec.parameters.push_back({std::move(name), first_text(*row, rule(rules, "parameter_type")),
                                       first_text(*row, rule(rules, "parameter_description"))});
        }
    }
    return spec;
}

}  // namespace miti
