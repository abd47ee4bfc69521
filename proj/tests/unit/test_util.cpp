#include <regex>

#include "miti/error.hpp"
#include "miti/util.hpp"
#include "testing.hpp"

using namespace miti;
using namespace miti::testing;

TEST(Util, Sha256KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Util, Strings) {
    EXPECT_EQ(trim(" \t a b \n"), "a b");
    EXPECT_EQ(trim("   "), "");
    EXPECT_EQ(to_lower("RegOpenKeyEx"), "regopenkeyex");
    EXPECT_TRUE(contains_icase("Physically remove", "PHYSICALLY"));
    EXPECT_FALSE(contains_icase("abc", "abd"));
    EXPECT_TRUE(contains_icase("abc", ""));
    EXPECT_EQ(collapse_whitespace("  a \n\n b\tc  "), "a b c");
}

TEST(Util, Files) {
    TempDir dir;
    write_file_atomic(dir / "x.txt", "one");
    write_file_atomic(dir / "x.txt", std::string("two\0three", 9));
    EXPECT_EQ(read_file(dir / "x.txt"), std::string("two\0three", 9));
    EXPECT_EQ(code_of([&] { read_file(dir / "nope"); }), ErrorCode::IoError);
    std::size_t entries = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++entries;
    EXPECT_EQ(entries, 1u);  // no temporaries left behind
}

TEST(Util, JsonErrorsCarryOffset) {
    try {
        parse_json("{\"a\": tru}", "sample");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedJson);
        EXPECT_NE(std::string(e.what()).find("sample"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("byte"), std::string::npos);
    }
}

TEST(Util, Timestamp) {
    EXPECT_TRUE(std::regex_match(utc_timestamp_now(), std::regex(R"(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z)")));
}

TEST(Util, LogLevels) {
    log::Level l{};
    EXPECT_TRUE(log::parse_level("warn", l));
    EXPECT_EQ(l, log::Level::Warn);
    EXPECT_FALSE(log::parse_level("loud", l));
}

TEST(Util, ErrorCodeNames) {
    EXPECT_EQ(to_string(ErrorCode::ChecksumMismatch), "ChecksumMismatch");
    EXPECT_TRUE(is_backend_error(ErrorCode::BackendUnreachable));
    EXPECT_TRUE(is_backend_error(ErrorCode::HttpStatus));
    EXPECT_FALSE(is_backend_error(ErrorCode::SchemaViolation));
}
