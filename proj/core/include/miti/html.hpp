#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "miti/corpus.hpp"

namespace miti::html {

/// Element or text node of a lenient HTML tree. The document root is an
/// element with an empty tag.
struct Node {
    enum class Kind { Element, Text };

    Kind kind = Kind::Element;
    std::string tag;  // lowercase; empty for text nodes and the root
    std::map<std::string, std::string> attrs;
    std::string text;  // text nodes only
    std::vector<std::unique_ptr<Node>> children;
    Node* parent = nullptr;

    bool is_text() const noexcept { return kind == Kind::Text; }
    bool is_root() const noexcept { return kind == Kind::Element && parent == nullptr; }
    bool has_class(std::string_view cls) const;
};

/// Tolerant parser: unclosed elements are closed implicitly, stray end tags
/// are dropped, <script>/<style> content and comments are discarded, and
/// character references are decoded.
std::unique_ptr<Node> parse(std::string_view html);

std::string decode_entities(std::string_view text);

/// Concatenated descendant text with <br> and block ends as newlines.
std::string text_content(const Node& node);

/// Supported selector grammar: comma-separated groups of compound selectors
/// (`tag`, `.class`, `#id`, `[attr]`, `[attr=value]`, `*`, `:first-child`,
/// `:nth-child(n)`) joined by
/// descendant (whitespace) or child (`>`) combinators. Matches are returned
/// in document order.
std::vector<const Node*> select(const Node& root, std::string_view selector);

const Node* select_first(const Node& root, std::string_view selector);

}  // namespace miti::html

namespace miti {

/// Field name -> selector. Recognized fields: name, signature, description,
/// returns, constraints, examples, parameters (row selector) and
/// parameter_name / parameter_type / parameter_description (relative to a row).
using ExtractionRules = std::map<std::string, std::string>;

const ExtractionRules& default_extraction_rules();
ExtractionRules extraction_rules_from_json(std::string_view json_text);

/// Builds an ApiSpec from a stored documentation page. The name is the first
/// whitespace-delimited token of the name element, so headings like
/// "RegCloseKey function (winreg.h)" yield "RegCloseKey". Throws
/// ExtractionFailed when name or description cannot be found.
ApiSpec extract_spec_from_html(std::string_view html_text, const ExtractionRules& rules);

}  // namespace miti
