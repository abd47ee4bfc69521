#include "miti/html.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <functional>
#include <optional>

#include "miti/error.hpp"
#include "miti/util.hpp"

namespace miti::html {

namespace {

constexpr std::array kVoidElements{"area", "base", "br", "col", "embed", "hr", "img", "input",
                                   "link", "meta", "param", "source", "track", "wbr"};
constexpr std::array kBlockElements{"address", "article", "aside", "blockquote", "dd", "div", "dl", "dt",
                                    "fieldset", "figure", "footer", "form", "h1", "h2", "h3", "h4",
                                    "h5", "h6", "header", "hr", "li", "main", "nav", "ol",
                                    "p", "pre", "section", "table", "tr", "ul"};

template <std::size_t N>
bool in(const std::array<const char*, N>& set, std::string_view tag) {
    return std::any_of(set.begin(), set.end(), [&](const char* t) { return tag == t; });
}

bool is_name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == ':';
}

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src) {
        root_ = std::make_unique<Node>();
        stack_.push_back(root_.get());
    }

    std::unique_ptr<Node> run() {
        while (pos_ < src_.size()) {
            if (src_[pos_] == '<') {
                if (!markup()) text_until_tag();
            } else {
                text_until_tag();
            }
        }
        return std::move(root_);
    }

private:
    Node* current() { return stack_.back(); }

    void add_text(std::string_view raw) {
        if (raw.empty()) return;
        auto decoded = decode_entities(raw);
        auto& kids = current()->children;
        if (!kids.empty() && kids.back()->is_text()) {
            kids.back()->text += decoded;
            return;
        }
        auto node = std::make_unique<Node>();
        node->kind = Node::Kind::Text;
        node->text = std::move(decoded);
        node->parent = current();
        kids.push_back(std::move(node));
    }

    void text_until_tag() {
        // a '<' that did not start markup is literal text
        const auto start = pos_;
        auto next = src_.find('<', pos_ + 1);
        if (next == std::string_view::npos) next = src_.size();
        pos_ = next;
        add_text(src_.substr(start, next - start));
    }

    bool skip_past(std::string_view terminator) {
        auto end = src_.find(terminator, pos_);
        pos_ = end == std::string_view::npos ? src_.size() : end + terminator.size();
        return true;
    }

    bool markup() {
        const auto rest = src_.substr(pos_);
        if (rest.starts_with("<!--")) {
            pos_ += 4;
            return skip_past("-->");
        }
        if (rest.starts_with("<!") || rest.starts_with("<?")) return skip_past(">");
        if (rest.starts_with("</")) {
            if (rest.size() < 3 || !std::isalpha(static_cast<unsigned char>(rest[2]))) return false;
            pos_ += 2;
            const auto name = read_name();
            skip_past(">");
            close(name);
            return true;
        }
        if (rest.size() < 2 || !std::isalpha(static_cast<unsigned char>(rest[1]))) return false;
        ++pos_;
        open_tag();
        return true;
    }

    std::string read_name() {
        const auto start = pos_;
        while (pos_ < src_.size() && is_name_char(src_[pos_])) ++pos_;
        return to_lower(src_.substr(start, pos_ - start));
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    void open_tag() {
        auto node = std::make_unique<Node>();
        node->tag = read_name();
        bool self_closing = false;
        while (pos_ < src_.size()) {
            skip_ws();
            if (pos_ >= src_.size()) break;
            const char c = src_[pos_];
            if (c == '>') {
                ++pos_;
                break;
            }
            if (c == '/') {
                self_closing = true;
                ++pos_;
                continue;
            }
            const auto attr_start = pos_;
            while (pos_ < src_.size() && !std::isspace(static_cast<unsigned char>(src_[pos_])) &&
                   src_[pos_] != '=' && src_[pos_] != '>' && src_[pos_] != '/') {
                ++pos_;
            }
            if (pos_ == attr_start) {
                ++pos_;
                continue;
            }
            auto attr = to_lower(src_.substr(attr_start, pos_ - attr_start));
            skip_ws();
            std::string value;
            if (pos_ < src_.size() && src_[pos_] == '=') {
                ++pos_;
                skip_ws();
                if (pos_ < src_.size() && (src_[pos_] == '"' || src_[pos_] == '\'')) {
                    const char q = src_[pos_++];
                    auto end = src_.find(q, pos_);
                    if (end == std::string_view::npos) end = src_.size();
                    value = decode_entities(src_.substr(pos_, end - pos_));
                    pos_ = std::min(end + 1, src_.size());
                } else {
                    const auto vstart = pos_;
                    while (pos_ < src_.size() && !std::isspace(static_cast<unsigned char>(src_[pos_])) &&
                           src_[pos_] != '>') {
                        ++pos_;
                    }
                    value = decode_entities(src_.substr(vstart, pos_ - vstart));
                }
            }
            node->attrs.emplace(std::move(attr), std::move(value));
        }

        implicit_close(node->tag);
        node->parent = current();
        Node* raw = node.get();
        current()->children.push_back(std::move(node));

        if (raw->tag == "script" || raw->tag == "style") {
            const auto close_tag = "</" + raw->tag;
            auto lower = to_lower(src_.substr(pos_));
            auto end = lower.find(close_tag);
            pos_ = end == std::string::npos ? src_.size() : pos_ + end;
            return;
        }
        if (!self_closing && !in(kVoidElements, raw->tag)) stack_.push_back(raw);
    }

    // Index into stack_ of the nearest open `tag`, not looking past any `boundaries`.
    std::optional<std::size_t> find_open(std::string_view tag, std::initializer_list<std::string_view> boundaries) {
        for (std::size_t i = stack_.size(); i-- > 1;) {
            if (stack_[i]->tag == tag) return i;
            for (auto b : boundaries) {
                if (stack_[i]->tag == b) return std::nullopt;
            }
        }
        return std::nullopt;
    }

    void pop_to(std::size_t index) { stack_.resize(index); }

    void implicit_close(std::string_view tag) {
        if (in(kBlockElements, tag)) {
            if (auto i = find_open("p", {"div", "td", "th", "li", "table", "section"})) pop_to(*i);
        }
        if (tag == "li") {
            if (auto i = find_open("li", {"ul", "ol"})) pop_to(*i);
        } else if (tag == "tr") {
            if (auto i = find_open("tr", {"table", "tbody", "thead"})) pop_to(*i);
        } else if (tag == "td" || tag == "th") {
            if (auto i = find_open("td", {"tr", "table"})) pop_to(*i);
            if (auto i = find_open("th", {"tr", "table"})) pop_to(*i);
        } else if (tag == "dt" || tag == "dd") {
            if (auto i = find_open("dt", {"dl"})) pop_to(*i);
            if (auto i = find_open("dd", {"dl"})) pop_to(*i);
        } else if (tag == "tbody" || tag == "thead" || tag == "tfoot") {
            for (auto t : {"tbody", "thead", "tfoot"}) {
                if (auto i = find_open(t, {"table"})) pop_to(*i);
            }
        }
    }

    void close(std::string_view name) {
        for (std::size_t i = stack_.size(); i-- > 1;) {
            if (stack_[i]->tag == name) {
                pop_to(i);
                return;
            }
        }
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::unique_ptr<Node> root_;
    std::vector<Node*> stack_;
};

}  // namespace

bool Node::has_class(std::string_view cls) const {
    auto it = attrs.find("class");
    if (it == attrs.end()) return false;
    std::string_view v = it->second;
    std::size_t i = 0;
    while (i < v.size()) {
        while (i < v.size() && std::isspace(static_cast<unsigned char>(v[i]))) ++i;
        const auto start = i;
        while (i < v.size() && !std::isspace(static_cast<unsigned char>(v[i]))) ++i;
        if (v.substr(start, i - start) == cls) return true;
    }
    return false;
}

std::unique_ptr<Node> parse(std::string_view html) { return Parser(html).run(); }

std::string decode_entities(std::string_view text) {
    static const std::pair<std::string_view, std::string_view> kNamed[] = {
        {"amp", "&"},
        {"lt", "<"},
        {"gt", ">"},
        {"quot", "\""},
        {"apos", "'"},
        {"nbsp", " "},
        {"ndash", "\xe2\x80\x93"},
        {"mdash", "\xe2\x80\x94"},
        {"copy", "\xc2\xa9"},
        {"reg", "\xc2\xae"},
        {"hellip", "\xe2\x80\xa6"},
        {"rsquo", "\xe2\x80\x99"},
        {"lsquo", "\xe2\x80\x98"},
        {"rdquo", "\xe2\x80\x9d"},
        {"ldquo", "\xe2\x80\x9c"},
    };
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '&') {
            out.push_back(text[i]);
            continue;
        }
        const auto semi = text.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 12) {
            out.push_back('&');
            continue;
        }
        const auto ref = text.substr(i + 1, semi - i - 1);
        bool decoded = false;
        if (ref.size() > 1 && ref[0] == '#') {
            std::uint32_t cp = 0;
            const bool hex = ref[1] == 'x' || ref[1] == 'X';
            const auto digits = ref.substr(hex ? 2 : 1);
            auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), cp, hex ? 16 : 10);
            if (ec == std::errc{} && p == digits.data() + digits.size() && !digits.empty()) {
                append_utf8(out, cp);
                decoded = true;
            }
        } else {
            for (const auto& [name, value] : kNamed) {
                if (ref == name) {
                    out += value;
                    decoded = true;
                    break;
                }
            }
        }
        if (decoded) {
            i = semi;
        } else {
            out.push_back('&');
        }
    }
    return out;
}

namespace {

void collect_text(const Node& node, std::string& out) {
    if (node.is_text()) {
        out += node.text;
        return;
    }
    if (node.tag == "br") {
        out.push_back('\n');
        return;
    }
    for (const auto& c : node.children) collect_text(*c, out);
    if (in(kBlockElements, node.tag)) out.push_back('\n');
    if (node.tag == "td" || node.tag == "th") out.push_back(' ');
}

}  // namespace

std::string text_content(const Node& node) {
    std::string out;
    collect_text(node, out);
    return out;
}

// ---- selectors -------------------------------------------------------------

namespace {

struct AttrTest {
    std::string name;
    std::optional<std::string> value;
};

struct Compound {
    std::string tag;  // empty or "*" means any
    std::vector<std::string> classes;
    std::string id;
    std::vector<AttrTest> attrs;
    int nth_child = 0;  // 1-based; 0 = unconstrained
};

enum class Combinator { Descendant, Child };

struct Complex {
    std::vector<Compound> parts;
    std::vector<Combinator> combinators;  // combinators[i] joins parts[i] and parts[i+1]
};

[[noreturn]] void bad_selector(std::string_view sel, std::string_view why) {
    throw Error(ErrorCode::InvalidConfig, "selector '" + std::string(sel) + "': " + std::string(why));
}

class SelectorParser {
public:
    explicit SelectorParser(std::string_view s) : s_(s) {}

    std::vector<Complex> parse() {
        std::vector<Complex> groups;
        groups.push_back(complex());
        while (pos_ < s_.size()) {
            if (s_[pos_] != ',') bad_selector(s_, "unexpected character");
            ++pos_;
            groups.push_back(complex());
        }
        return groups;
    }

private:
    void ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    static bool ident_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
    }

    std::string ident() {
        const auto start = pos_;
        while (pos_ < s_.size() && ident_char(s_[pos_])) ++pos_;
        if (start == pos_) bad_selector(s_, "expected identifier");
        return std::string(s_.substr(start, pos_ - start));
    }

    Complex complex() {
        Complex c;
        ws();
        c.parts.push_back(compound());
        while (true) {
            const auto before = pos_;
            ws();
            if (pos_ >= s_.size() || s_[pos_] == ',') break;
            if (s_[pos_] == '>') {
                ++pos_;
                ws();
                c.combinators.push_back(Combinator::Child);
            } else if (pos_ > before) {
                c.combinators.push_back(Combinator::Descendant);
            } else {
                bad_selector(s_, "unexpected character");
            }
            c.parts.push_back(compound());
        }
        return c;
    }

    Compound compound() {
        Compound c;
        bool any = false;
        if (pos_ < s_.size() && s_[pos_] == '*') {
            ++pos_;
            c.tag = "*";
            any = true;
        } else if (pos_ < s_.size() && ident_char(s_[pos_])) {
            c.tag = to_lower(ident());
            any = true;
        }
        while (pos_ < s_.size()) {
            const char ch = s_[pos_];
            if (ch == '.') {
                ++pos_;
                c.classes.push_back(ident());
            } else if (ch == '#') {
                ++pos_;
                c.id = ident();
            } else if (ch == '[') {
                ++pos_;
                ws();
                AttrTest t{to_lower(ident()), std::nullopt};
                ws();
                if (pos_ < s_.size() && s_[pos_] == '=') {
                    ++pos_;
                    ws();
                    if (pos_ < s_.size() && (s_[pos_] == '"' || s_[pos_] == '\'')) {
                        const char q = s_[pos_++];
                        const auto end = s_.find(q, pos_);
                        if (end == std::string_view::npos) bad_selector(s_, "unterminated string");
                        t.value = std::string(s_.substr(pos_, end - pos_));
                        pos_ = end + 1;
                    } else {
                        t.value = ident();
                    }
                    ws();
                }
                if (pos_ >= s_.size() || s_[pos_] != ']') bad_selector(s_, "expected ']'");
                ++pos_;
                c.attrs.push_back(std::move(t));
            } else if (ch == ':') {
                ++pos_;
                const auto pseudo = to_lower(ident());
                if (pseudo == "first-child") {
                    c.nth_child = 1;
                } else if (pseudo == "nth-child") {
                    if (pos_ >= s_.size() || s_[pos_] != '(') bad_selector(s_, "expected '('");
                    ++pos_;
                    const auto close = s_.find(')', pos_);
                    if (close == std::string_view::npos) bad_selector(s_, "expected ')'");
                    const auto num = trim(s_.substr(pos_, close - pos_));
                    int n = 0;
                    auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), n);
                    if (ec != std::errc{} || p != num.data() + num.size() || n < 1) {
                        bad_selector(s_, "nth-child takes a positive integer");
                    }
                    c.nth_child = n;
                    pos_ = close + 1;
                } else {
                    bad_selector(s_, "unsupported pseudo-class");
                }
            } else {
                break;
            }
            any = true;
        }
        if (!any) bad_selector(s_, "empty compound selector");
        return c;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

int element_index(const Node& n) {
    if (!n.parent) return 0;
    int idx = 0;
    for (const auto& sib : n.parent->children) {
        if (sib->is_text()) continue;
        ++idx;
        if (sib.get() == &n) return idx;
    }
    return 0;
}

bool matches_compound(const Node& n, const Compound& c) {
    if (n.is_text() || n.is_root()) return false;
    if (!c.tag.empty() && c.tag != "*" && c.tag != n.tag) return false;
    if (!c.id.empty()) {
        auto it = n.attrs.find("id");
        if (it == n.attrs.end() || it->second != c.id) return false;
    }
    for (const auto& cls : c.classes) {
        if (!n.has_class(cls)) return false;
    }
    for (const auto& a : c.attrs) {
        auto it = n.attrs.find(a.name);
        if (it == n.attrs.end()) return false;
        if (a.value && it->second != *a.value) return false;
    }
    if (c.nth_child && element_index(n) != c.nth_child) return false;
    return true;
}

// Matches parts[0..=idx] with parts[idx] anchored at n; `scope` bounds ancestor search.
bool matches_complex(const Node& n, const Complex& cx, std::size_t idx, const Node* scope) {
    if (!matches_compound(n, cx.parts[idx])) return false;
    if (idx == 0) return true;
    const auto comb = cx.combinators[idx - 1];
    for (const Node* a = n.parent; a && a != scope; a = a->parent) {
        if (matches_complex(*a, cx, idx - 1, scope)) return true;
        if (comb == Combinator::Child) return false;
    }
    return false;
}

void walk(const Node& node, const std::function<void(const Node&)>& fn) {
    for (const auto& c : node.children) {
        if (c->is_text()) continue;
        fn(*c);
        walk(*c, fn);
    }
}

}  // namespace

std::vector<const Node*> select(const Node& root, std::string_view selector) {
    const auto groups = SelectorParser(selector).parse();
    std::vector<const Node*> out;
    walk(root, [&](const Node& n) {
        for (const auto& g : groups) {
            if (matches_complex(n, g, g.parts.size() - 1, &root)) {
                out.push_back(&n);
                return;
            }
        }
    });
    return out;
}

const Node* select_first(const Node& root, std::string_view selector) {
    auto all = select(root, selector);
    return all.empty() ? nullptr : all.front();
}

}  // namespace miti::html
