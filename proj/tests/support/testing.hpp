#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <gtest/gtest.h>
#include <unistd.h>

#include "miti/corpus.hpp"
#include "miti/error.hpp"
#include "miti/retrieval.hpp"

namespace miti::testing {

/// Code of the miti::Error thrown by f; records a failure if none is thrown.
template <class F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no miti::Error thrown";
    return ErrorCode::IoError;
}

inline std::filesystem::path fixture(std::string_view rel) { return std::filesystem::path(MITI_FIXTURE_DIR) / rel; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("miti-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(std::string_view rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

inline std::size_t uniform(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Random text; optionally sprinkled with spaces/newlines/blank lines and
/// multi-byte UTF-8 sequences.
inline std::string random_text(std::mt19937_64& rng, std::size_t len, bool separators, bool utf8) {
    static const std::vector<std::string> wide{"\xC3\xA9", "\xE2\x82\xAC", "\xF0\x9F\x94\x92", "\xD0\x96"};
    std::string out;
    while (out.size() < len) {
        const auto roll = uniform(rng, 0, 99);
        if (separators && roll < 12) {
            out += ' ';
        } else if (separators && roll < 15) {
            out += '\n';
        } else if (separators && roll < 17) {
            out += "\n\n";
        } else if (utf8 && roll < 22) {
            out += wide[uniform(rng, 0, wide.size() - 1)];
        } else {
            out += static_cast<char>('a' + uniform(rng, 0, 25));
        }
    }
    return out;
}

/// Random vector with small-integer coordinates, so exact ties are common.
inline EmbeddingVector random_vector(std::mt19937_64& rng, std::size_t dims, int range = 3) {
    EmbeddingVector v;
    do {
        v.values.assign(dims, 0.0);
        for (auto& x : v.values) x = static_cast<double>(static_cast<int>(uniform(rng, 0, 2 * range)) - range);
    } while (std::all_of(v.values.begin(), v.values.end(), [](double x) { return x == 0.0; }));
    return v;
}

inline ApiSpec make_spec(std::string name, std::string description) {
    ApiSpec s;
    s.id = name;
    for (auto& c : s.id) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    s.name = std::move(name);
    s.description = std::move(description);
    return s;
}

}  // namespace miti::testing
