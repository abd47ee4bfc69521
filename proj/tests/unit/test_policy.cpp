#include <gtest/gtest.h>

#include <random>

#include "miti/error.hpp"
#include "miti/policy.hpp"
#include "miti/util.hpp"
#include "testing.hpp"

namespace miti {
namespace {

using testing::code_of;

TEST(ParseStixBundle, EmptyBundle) {
    const auto b = parse_stix_bundle(R"({"type":"bundle","id":"bundle--1","objects":[]})");
    EXPECT_EQ(b.bundle_id, "bundle--1");
    EXPECT_TRUE(b.objects.empty());
}

TEST(ParseStixBundle, KeepsOneCourseOfAction) {
    const auto text = R"({"type":"bundle","id":"bundle--2","objects":[
        {"type":"course-of-action","id":"course-of-action--a","spec_version":"2.1",
         "name":"Audit","description":"Audit the thing.","x_custom":{"k":1}}]})";
    const auto b = parse_stix_bundle(text);
    ASSERT_EQ(b.objects.size(), 1u);
    EXPECT_EQ(b.objects[0]["type"], "course-of-action");
    EXPECT_EQ(b.objects[0]["x_custom"]["k"], 1);
    EXPECT_EQ(parse_stix_bundle(serialize_stix_bundle(b)), b);
}

TEST(ParseStixBundle, RejectsNonBundle) {
    EXPECT_EQ(code_of([] { parse_stix_bundle(R"({"type":"report"})"); }), ErrorCode::NotABundle);
    EXPECT_EQ(code_of([] { parse_stix_bundle("[1,2]"); }), ErrorCode::NotABundle);
}

TEST(ParseStixBundle, MalformedJsonNamesOffset) {
    try {
        parse_stix_bundle(R"({"type":"bundle",)");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedJson);
        EXPECT_NE(std::string(e.what()).find("byte offset"), std::string::npos);
    }
}

TEST(ParseStixBundle, MissingFieldNamesObjectIndex) {
    try {
        parse_stix_bundle(R"({"type":"bundle","id":"b","objects":[{"type":"x","id":"x--1"},{"type":"x"}]})");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingField);
        EXPECT_NE(std::string(e.what()).find("object 1"), std::string::npos);
    }
}

TEST(ParseStixBundle, PreservesOrderAndUnknownTypes) {
    const auto b = parse_stix_bundle(R"({"type":"bundle","id":"b","objects":[
        {"type":"x-widget","id":"x-widget--1"},{"type":"course-of-action","id":"course-of-action--1"},
        {"type":"relationship","id":"relationship--1"}]})");
    ASSERT_EQ(b.objects.size(), 3u);
    EXPECT_EQ(b.objects[0]["type"], "x-widget");
    EXPECT_EQ(b.objects[2]["type"], "relationship");
}

TEST(ExtractPolicies, NoCoursesOfAction) {
    const auto b = parse_stix_bundle(R"({"type":"bundle","id":"b","objects":[{"type":"attack-pattern","id":"a--1","description":"x"}]})");
    const auto ex = extract_policies(b);
    EXPECT_TRUE(ex.policies.empty());
    EXPECT_TRUE(ex.skipped.empty());
}

TEST(ExtractPolicies, SkipsMissingDescription) {
    const auto b = parse_stix_bundle(R"({"type":"bundle","id":"b","objects":[
        {"type":"course-of-action","id":"coa--1","name":"A","description":"Do a."},
        {"type":"course-of-action","id":"coa--2","name":"B","description":"   "}]})");
    const auto ex = extract_policies(b, "bundle.json");
    ASSERT_EQ(ex.policies.size(), 1u);
    EXPECT_EQ(ex.policies[0].id, "coa--1");
    EXPECT_EQ(ex.policies[0].source_ref, "bundle.json");
    ASSERT_EQ(ex.skipped.size(), 1u);
    EXPECT_EQ(ex.skipped[0].policy_id, "coa--2");
    EXPECT_EQ(skip_report_jsonl(ex.skipped), "{\"policy_id\":\"coa--2\",\"reason\":\"empty description\"}\n");
}

TEST(ExtractPolicies, RegistryPermissionsFixture) {
    const auto b = parse_stix_bundle(read_file(testing::fixture("stix/registry_bundle.json")));
    const auto ex = extract_policies(b);
    ASSERT_EQ(ex.policies.size(), 1u);
    EXPECT_EQ(ex.policies[0].name, "Restrict Registry Permissions");
    EXPECT_EQ(ex.policies[0].id, b.objects[0]["id"].get<std::string>());
    EXPECT_EQ(ex.policies[0].description, b.objects[0]["description"].get<std::string>());
}

TEST(ExtractPolicies, DuplicateIdsGoToSkipReport) {
    const auto b = parse_stix_bundle(R"({"type":"bundle","id":"b","objects":[
        {"type":"course-of-action","id":"coa--1","description":"one"},
        {"type":"course-of-action","id":"coa--1","description":"two"}]})");
    const auto ex = extract_policies(b);
    ASSERT_EQ(ex.policies.size(), 1u);
    EXPECT_EQ(ex.policies[0].description, "one");
    ASSERT_EQ(ex.skipped.size(), 1u);
    EXPECT_EQ(ex.skipped[0].reason, "duplicate id");
}

TEST(ExtractPolicies, AllowListIsConfigurable) {
    const auto b = parse_stix_bundle(R"({"type":"bundle","id":"b","objects":[
        {"type":"course-of-action","id":"coa--1","description":"one"},
        {"type":"x-mitigation","id":"x--1","description":"two","labels":["l1",3]}]})");
    const std::vector<std::string> types{"x-mitigation"};
    const auto ex = extract_policies(b, "", types);
    ASSERT_EQ(ex.policies.size(), 1u);
    EXPECT_EQ(ex.policies[0].id, "x--1");
    EXPECT_EQ(ex.policies[0].labels, std::vector<std::string>{"l1"});
}

TEST(ExtractPolicies, UnknownVersionStillParses) {
    log::set_level(log::Level::Error);
    const auto b = parse_stix_bundle(R"({"type":"bundle","id":"b","objects":[
        {"type":"course-of-action","id":"coa--9","spec_version":"3.0","description":"future"}]})");
    EXPECT_EQ(extract_policies(b).policies.size(), 1u);
    log::set_level(log::Level::Info);
}

MitigationPolicy policy(std::string id, std::string description) { return {std::move(id), "", std::move(description), "", {}}; }

TEST(FilterAutomatable, PhysicalActionExcluded) {
    const std::vector<MitigationPolicy> ps{policy("p1", "physically remove and lock the asset")};
    const auto split = filter_automatable(ps);
    EXPECT_TRUE(split.kept.empty());
    ASSERT_EQ(split.excluded.size(), 1u);
}

TEST(FilterAutomatable, CaseInsensitive) {
    const std::vector<MitigationPolicy> ps{policy("p1", "Require BADGE access"), policy("p2", "Rotate keys")};
    const auto split = filter_automatable(ps);
    ASSERT_EQ(split.kept.size(), 1u);
    EXPECT_EQ(split.kept[0].id, "p2");
}

TEST(FilterAutomatable, EmptyDenyListRejected) {
    const std::vector<MitigationPolicy> ps{policy("p1", "x")};
    EXPECT_EQ(code_of([&] { filter_automatable(ps, std::vector<std::string>{}); }), ErrorCode::InvalidConfig);
}

TEST(FilterAutomatable, PartitionProperty) {
    std::mt19937_64 rng(7);
    const std::vector<std::string> words{"physically", "badge", "personnel", "audit", "registry", "Firewall", "PERSONNEL"};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<MitigationPolicy> ps;
        const auto n = testing::uniform(rng, 0, 12);
        for (std::size_t i = 0; i < n; ++i) {
            std::string d;
            for (std::size_t w = 0; w < 4; ++w) d += words[testing::uniform(rng, 0, words.size() - 1)] + " ";
            ps.push_back(policy("p" + std::to_string(i), d));
        }
        const auto split = filter_automatable(ps);
        ASSERT_EQ(split.kept.size() + split.excluded.size(), ps.size());
        for (const auto& p : split.excluded) {
            const auto lower = to_lower(p.description);
            EXPECT_TRUE(lower.find("physically") != std::string::npos || lower.find("badge") != std::string::npos ||
                        lower.find("personnel") != std::string::npos);
        }
        for (const auto& p : split.kept) {
            const auto lower = to_lower(p.description);
            EXPECT_EQ(lower.find("personnel"), std::string::npos);
        }
    }
}

TEST(PoliciesJson, RoundTrip) {
    const std::vector<MitigationPolicy> ps{{"a", "Name", "desc", "f.json", {"x"}}, {"b", "", "d2", "", {}}};
    EXPECT_EQ(policies_from_json(policies_to_json(ps)), ps);
}

TEST(PoliciesJson, RejectsDuplicatesAndMissingFields) {
    EXPECT_EQ(code_of([] { policies_from_json(nlohmann::json::parse(R"({"policies":[{"id":"a"}]})")); }),
              ErrorCode::SchemaViolation);
    EXPECT_EQ(code_of([] {
                  policies_from_json(nlohmann::json::parse(
                      R"({"policies":[{"id":"a","description":"x"},{"id":"a","description":"y"}]})"));
              }),
              ErrorCode::DuplicateId);
}

TEST(StixRoundTrip, RandomBundles) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        StixBundle b;
        b.bundle_id = "bundle--" + std::to_string(trial);
        b.spec_version = trial % 2 ? "2.0" : "";
        const auto n = testing::uniform(rng, 0, 6);
        for (std::size_t i = 0; i < n; ++i) {
            nlohmann::json o{{"type", i % 2 ? "course-of-action" : "indicator"}, {"id", "o--" + std::to_string(i)}};
            if (testing::uniform(rng, 0, 1)) o["description"] = testing::random_text(rng, 20, true, true);
            b.objects.push_back(o);
        }
        ASSERT_EQ(parse_stix_bundle(serialize_stix_bundle(b)), b);
    }
}

}  // namespace
}  // namespace miti
