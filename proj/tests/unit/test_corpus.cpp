#include <gtest/gtest.h>

#include <random>

#include "miti/corpus.hpp"
#include "miti/error.hpp"
#include "miti/util.hpp"
#include "testing.hpp"

namespace miti {
namespace {

using testing::code_of;

TEST(LoadCorpus, EmptySpecs) {
    const auto c = load_corpus(R"({"source_label":"test","specs":[]})");
    EXPECT_EQ(c.spec_count(), 0u);
    EXPECT_EQ(c.source_label(), "test");
}

TEST(LoadCorpus, DuplicateIdRejected) {
    const auto text = R"({"source_label":"t","specs":[
        {"id":"regopenkeyex","name":"RegOpenKeyEx","description":"a"},
        {"id":"regopenkeyex","name":"RegOpenKeyExW","description":"b"}]})";
    try {
        load_corpus(text);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DuplicateId);
        EXPECT_NE(std::string(e.what()).find("regopenkeyex"), std::string::npos);
    }
}

TEST(LoadCorpus, RegistryFixture) {
    const auto c = load_corpus(read_file(testing::fixture("registry_corpus.json")));
    ASSERT_EQ(c.spec_count(), 5u);
    std::vector<std::string> names;
    for (const auto& s : c.specs()) names.push_back(s.name);
    EXPECT_EQ(names, (std::vector<std::string>{"RegOpenKeyEx", "RegEnumKeyEx", "RegEnumValue", "RegDeleteValue", "RegCloseKey"}));
    ASSERT_NE(c.find("regclosekey"), nullptr);
    EXPECT_EQ(c.find("regclosekey")->parameters.size(), 1u);
    EXPECT_EQ(c.find("nosuch"), nullptr);
}

TEST(LoadCorpus, SchemaViolationNamesPath) {
    try {
        load_corpus(R"({"specs":[{"id":"a","name":"A","description":"x"},{"id":"b","description":"y"}]})");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SchemaViolation);
        EXPECT_NE(std::string(e.what()).find("$.specs[1].name"), std::string::npos);
    }
    EXPECT_EQ(code_of([] { load_corpus(R"({"specs":{}})"); }), ErrorCode::SchemaViolation);
    EXPECT_EQ(code_of([] { load_corpus(R"({"specs":[{"id":"a","name":"A","description":" "}]})"); }),
              ErrorCode::SchemaViolation);
    EXPECT_EQ(code_of([] { load_corpus(R"({"specs":[{"id":"a","name":"A","description":"d","parameters":[{"type_text":"x"}]}]})"); }),
              ErrorCode::SchemaViolation);
    EXPECT_EQ(code_of([] { load_corpus("{"); }), ErrorCode::MalformedJson);
}

TEST(LoadCorpus, RoundTripIsByteIdentical) {
    const auto text = read_file(testing::fixture("e2e/corpus.json"));
    const auto once = serialize_corpus(load_corpus(text));
    EXPECT_EQ(serialize_corpus(load_corpus(once)), once);
    EXPECT_EQ(load_corpus(once), load_corpus(text));
}

TEST(RenderSpec, MinimalSpecIsNamePlusDescription) {
    const auto s = testing::make_spec("CloseHandle", "Closes a handle.");
    EXPECT_EQ(render_spec_document(s), "CloseHandle\n\nCloses a handle.");
}

TEST(RenderSpec, FixedSectionOrder) {
    ApiSpec s = testing::make_spec("F", "Does f.");
    s.signature = "int F(int a);";
    s.parameters = {{"a", "int", "the input"}, {"b", "", ""}};
    s.returns = "zero";
    s.constraints = "call once";
    s.examples = {"F(1);", "F(2);"};
    EXPECT_EQ(render_spec_document(s),
              "F\nint F(int a);\n\nDoes f.\n\nParameters:\n- a (int): the input\n- b\n\nReturns: zero\n\n"
              "Constraints: call once\n\nExamples:\nF(1);\nF(2);");
}

TEST(RenderSpec, RegistryFirstLineIsName) {
    const auto c = load_corpus(read_file(testing::fixture("registry_corpus.json")));
    for (const auto& s : c.specs()) {
        const auto doc = render_spec_document(s);
        EXPECT_EQ(doc.substr(0, doc.find('\n')), s.name);
        EXPECT_EQ(render_spec_document(ApiSpec(s)), doc);
    }
}

ChunkingConfig config(std::size_t max, std::size_t overlap, std::vector<std::string> seps = {"\n\n", "\n", " "}) {
    ChunkingConfig c;
    c.max_chunk_chars = max;
    c.overlap_chars = overlap;
    c.boundary_preference = std::move(seps);
    return c;
}

TEST(ChunkConfig, Validation) {
    EXPECT_EQ(code_of([] { config(0, 0).validate(); }), ErrorCode::InvalidConfig);
    EXPECT_EQ(code_of([] { config(10, 10).validate(); }), ErrorCode::InvalidConfig);
    EXPECT_EQ(code_of([] { config(10, 2, {""}).validate(); }), ErrorCode::InvalidConfig);
    EXPECT_NO_THROW(config(10, 9).validate());
    const auto c = config(300, 20, {"\n"});
    EXPECT_EQ(chunking_config_from_json(to_json(c)), c);
}

TEST(ChunkText, ShortDocumentIsOneChunk) {
    const std::string doc(50, 'a');
    const auto chunks = chunk_text("f", doc, ChunkingConfig{});
    ASSERT_EQ(chunks.size(), 1u);
    EXPECT_EQ(chunks[0].seq, 0u);
    EXPECT_EQ(chunks[0].chunk_id, "f#0");
    EXPECT_EQ(chunks[0].text, doc);
}

TEST(ChunkText, ExactlyMaxIsOneChunk) {
    const std::string doc(1000, 'q');
    EXPECT_EQ(chunk_text("f", doc, ChunkingConfig{}).size(), 1u);
    EXPECT_EQ(chunk_text("f", doc + "q", ChunkingConfig{}).size(), 2u);
}

TEST(ChunkText, NoSeparatorArithmetic) {
    std::string doc;
    for (int i = 0; i < 2500; ++i) doc += static_cast<char>('a' + i % 26);
    const auto chunks = chunk_text("f", doc, ChunkingConfig{});
    ASSERT_EQ(chunks.size(), 3u);
    const std::size_t lengths[] = {1000, 1000, 700};
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(chunks[k].text.size(), lengths[k]);
        EXPECT_EQ(chunks[k].start_offset, 900 * k);
        EXPECT_EQ(chunks[k].text, doc.substr(900 * k, lengths[k]));
        EXPECT_EQ(chunks[k].chunk_id, "f#" + std::to_string(k));
    }
}

TEST(ChunkText, PrefersParagraphBreak) {
    const std::string para1(600, 'a'), para2(600, 'b');
    const auto doc = para1 + "\n\n" + para2;
    const auto chunks = chunk_text("f", doc, ChunkingConfig{});
    ASSERT_EQ(chunks.size(), 2u);
    EXPECT_EQ(chunks[0].text, para1 + "\n\n");
    EXPECT_EQ(reconstruct_document(chunks), doc);
}

TEST(ChunkText, NeverSplitsUtf8) {
    std::string doc;
    for (int i = 0; i < 800; ++i) doc += "\xE2\x82\xAC";  // 3-byte sequence
    const auto chunks = chunk_text("f", doc, config(100, 10));
    for (const auto& c : chunks) {
        ASSERT_LE(c.text.size(), 100u);
        EXPECT_NE(static_cast<unsigned char>(c.text.front()) & 0xC0, 0x80);
        EXPECT_EQ(c.text.size() % 3, 0u);
    }
    EXPECT_EQ(reconstruct_document(chunks), doc);
}

void check_chunks(const std::string& doc, const ChunkingConfig& cfg) {
    const auto chunks = chunk_text("api", doc, cfg);
    ASSERT_FALSE(chunks.empty());
    if (doc.size() <= cfg.max_chunk_chars) {
        ASSERT_EQ(chunks.size(), 1u);
        EXPECT_EQ(chunks[0].text, doc);
    }
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        const auto& c = chunks[i];
        ASSERT_EQ(c.seq, i);
        ASSERT_LE(c.text.size(), cfg.max_chunk_chars);
        ASSERT_FALSE(c.text.empty());
        ASSERT_EQ(doc.compare(c.start_offset, c.text.size(), c.text), 0);
        if (i > 0) {
            const auto prev_end = chunks[i - 1].start_offset + chunks[i - 1].text.size();
            ASSERT_GT(c.start_offset, chunks[i - 1].start_offset);
            ASSERT_LE(c.start_offset, prev_end);
            ASSERT_LE(prev_end - c.start_offset, cfg.overlap_chars);
        }
    }
    ASSERT_EQ(chunks.back().start_offset + chunks.back().text.size(), doc.size());
    ASSERT_EQ(reconstruct_document(chunks), doc);
}

TEST(ChunkProperty, ReconstructionRandomized) {
    std::mt19937_64 rng(20240501);
    for (int trial = 0; trial < 300; ++trial) {
        const auto max = testing::uniform(rng, 8, 400);
        const auto overlap = testing::uniform(rng, 0, max - 1);
        const auto len = testing::uniform(rng, 1, 2000);
        const auto doc = testing::random_text(rng, len, trial % 3 != 0, trial % 2 == 0);
        SCOPED_TRACE("trial " + std::to_string(trial));
        check_chunks(doc, config(max, overlap));
    }
}

TEST(ChunkProperty, ExactOverlapWithoutSeparators) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const auto max = testing::uniform(rng, 2, 200);
        const auto overlap = testing::uniform(rng, 0, max - 1);
        const auto doc = testing::random_text(rng, testing::uniform(rng, max + 1, 1500), false, false);
        const auto chunks = chunk_text("x", doc, config(max, overlap));
        for (std::size_t i = 1; i < chunks.size(); ++i) {
            ASSERT_EQ(chunks[i].start_offset, i * (max - overlap));
            // Removing the leading overlap from each later chunk and concatenating rebuilds the text.
        }
        std::string rebuilt = chunks[0].text;
        for (std::size_t i = 1; i < chunks.size(); ++i) rebuilt += chunks[i].text.substr(overlap);
        ASSERT_EQ(rebuilt, doc);
    }
}

TEST(ChunkProperty, CountNonIncreasingInMaxWithoutSeparators) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        const auto overlap = testing::uniform(rng, 0, 20);
        const auto doc = testing::random_text(rng, testing::uniform(rng, 100, 1200), false, trial % 2 == 0);
        std::size_t previous = SIZE_MAX;
        for (std::size_t max = overlap + 4; max <= 400; ++max) {
            const auto n = chunk_text("x", doc, config(max, overlap)).size();
            ASSERT_LE(n, previous) << "max " << max;
            previous = n;
        }
    }
}

TEST(ChunkProperty, CountNonIncreasingInMaxWithSeparators) {
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 40; ++trial) {
        const auto overlap = testing::uniform(rng, 0, 20);
        const auto doc = testing::random_text(rng, testing::uniform(rng, 100, 1200), true, trial % 2 == 0);
        std::size_t previous = SIZE_MAX;
        for (std::size_t max = overlap + 4; max <= 400; ++max) {
            const auto n = chunk_text("x", doc, config(max, overlap)).size();
            ASSERT_LE(n, previous) << "max " << max << " trial " << trial;
            previous = n;
        }
    }
}

TEST(ChunkCorpus, OrderedByApiIdThenSeq) {
    const Corpus c("t", {testing::make_spec("Zeta", std::string(2500, 'z')), testing::make_spec("Alpha", "short")});
    const auto chunks = chunk_corpus(c, ChunkingConfig{});
    ASSERT_GE(chunks.size(), 4u);
    EXPECT_EQ(chunks[0].api_id, "alpha");
    for (std::size_t i = 1; i < chunks.size(); ++i) {
        EXPECT_EQ(chunks[i].api_id, "zeta");
        EXPECT_EQ(chunks[i].seq, i - 1);
    }
    std::vector<Chunk> zeta(chunks.begin() + 1, chunks.end());
    EXPECT_EQ(reconstruct_document(zeta), render_spec_document(*c.find("zeta")));
}

}  // namespace
}  // namespace miti
