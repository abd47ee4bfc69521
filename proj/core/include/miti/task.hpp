#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace miti {

/// One executable step of a decomposed policy.
struct Task {
    std::string policy_id;
    std::size_t index = 0;  // position in the decomposition
    std::string text;

    friend bool operator==(const Task&, const Task&) = default;
};

enum class GenerationMode { Rag, Baseline };

std::string_view to_string(GenerationMode mode) noexcept;
GenerationMode parse_generation_mode(std::string_view text);

}  // namespace miti
