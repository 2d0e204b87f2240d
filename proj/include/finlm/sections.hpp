#pragma once

// Item-section extraction from 10-K / 10-Q filing bodies. Bodies are
// HTML-stripped first; item headings are matched case-insensitively at line
// starts; the LAST occurrence of a heading wins (filings front-load a table
// of contents). A section runs from its heading to the next item heading,
// right-trimmed.

#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "finlm/document.hpp"

namespace finlm::corpus {

class NoSectionsFound : public Error {
public:
    explicit NoSectionsFound(const std::string& accession_id)
        : Error("no sections found in filing " + accession_id), accession_id_(accession_id) {}
    const std::string& accession_id() const { return accession_id_; }

private:
    std::string accession_id_;
};

// ------------------------------------------------------------ html strip ---

namespace detail {

inline bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    return true;
}

inline bool is_block_tag(std::string_view name) {
    static constexpr std::string_view kBlock[] = {
        "p",  "div", "br",  "tr",    "table", "li", "ul", "ol",  "dl",      "dt",      "dd",
        "h1", "h2",  "h3",  "h4",    "h5",    "h6", "hr", "pre", "section", "article", "header",
        "footer", "blockquote", "body", "html", "head", "title", "center"};
    for (std::string_view b : kBlock)
        if (iequals(name, b)) return true;
    return false;
}

inline void append_entity(std::string& out, std::string_view entity) {
    if (entity == "amp") out += '&';
    else if (entity == "lt") out += '<';
    else if (entity == "gt") out += '>';
    else if (entity == "quot") out += '"';
    else if (entity == "apos") out += '\'';
    else if (entity == "nbsp") out += ' ';
    else if (!entity.empty() && entity[0] == '#') {
        char32_t cp = 0;
        bool hex = entity.size() > 1 && (entity[1] == 'x' || entity[1] == 'X');
        for (std::size_t i = hex ? 2 : 1; i < entity.size(); ++i) {
            char c = entity[i];
            if (hex)
                cp = cp * 16 + static_cast<char32_t>(
                                   std::isdigit(static_cast<unsigned char>(c))
                                       ? c - '0'
                                       : std::tolower(static_cast<unsigned char>(c)) - 'a' + 10);
            else
                cp = cp * 10 + static_cast<char32_t>(c - '0');
        }
        if (cp > 0 && cp <= 0x10FFFF) utf8_append(out, cp);
    } else {
        out += '&';
        out += entity;
        out += ';';
    }
}

}  // namespace detail

// Tags removed (block-level tags become newlines), scripts/styles/comments
// dropped, common entities decoded. A '<' not opening a tag is kept.
inline std::string strip_html(std::string_view body) {
    std::string out;
    out.reserve(body.size());
    std::size_t i = 0;
    while (i < body.size()) {
        char c = body[i];
        if (c == '<' && i + 1 < body.size()) {
            char n = body[i + 1];
            if (n == '!') {
                if (body.substr(i, 4) == "<!--") {
                    std::size_t end = body.find("-->", i + 4);
                    i = end == std::string_view::npos ? body.size() : end + 3;
                } else {
                    std::size_t end = body.find('>', i);
                    i = end == std::string_view::npos ? body.size() : end + 1;
                }
                continue;
            }
            if (n == '/' || std::isalpha(static_cast<unsigned char>(n))) {
                std::size_t name_start = i + (n == '/' ? 2 : 1);
                std::size_t p = name_start;
                while (p < body.size() && std::isalnum(static_cast<unsigned char>(body[p]))) ++p;
                std::string_view name = body.substr(name_start, p - name_start);
                std::size_t end = body.find('>', i);
                if (end == std::string_view::npos) {
                    i = body.size();
                    continue;
                }
                i = end + 1;
                if (n != '/' && (detail::iequals(name, "script") || detail::iequals(name, "style"))) {
                    // drop content up to the matching close tag
                    std::string close = "</" + std::string(name);
                    std::size_t q = i;
                    for (;;) {
                        q = body.find('<', q);
                        if (q == std::string_view::npos || q + close.size() > body.size()) {
                            q = body.size();
                            break;
                        }
                        if (detail::iequals(body.substr(q, close.size()), close)) break;
                        ++q;
                    }
                    std::size_t close_end = body.find('>', q);
                    i = close_end == std::string_view::npos ? body.size() : close_end + 1;
                    out += '\n';
                    continue;
                }
                if (detail::is_block_tag(name)) out += '\n';
                else if (detail::iequals(name, "td") || detail::iequals(name, "th")) out += ' ';
                continue;
            }
        }
        if (c == '&') {
            std::size_t semi = body.find(';', i + 1);
            if (semi != std::string_view::npos && semi - i <= 10) {
                detail::append_entity(out, body.substr(i + 1, semi - i - 1));
                i = semi + 1;
                continue;
            }
        }
        out += c;
        ++i;
    }
    return out;
}

// --------------------------------------------------------- heading scan ----

struct ItemHeading {
    std::size_t offset = 0;  // byte offset of the 'i' of "item"
    std::string key;         // e.g. "1", "1a", "7"
};

// Case-insensitive `item` + whitespace + item number + optional letter +
// optional punctuation, anchored at line starts.
inline std::vector<ItemHeading> scan_item_headings(std::string_view text) {
    std::vector<ItemHeading> found;
    std::size_t line_start = 0;
    while (line_start <= text.size()) {
        std::size_t eol = text.find('\n', line_start);
        if (eol == std::string_view::npos) eol = text.size();
        std::size_t p = line_start;
        while (p < eol && (text[p] == ' ' || text[p] == '\t')) ++p;
        if (p + 4 <= eol && detail::iequals(text.substr(p, 4), "item")) {
            std::size_t q = p + 4;
            std::size_t ws = q;
            while (q < eol && (text[q] == ' ' || text[q] == '\t')) ++q;
            if (q > ws && q < eol && std::isdigit(static_cast<unsigned char>(text[q]))) {
                std::string key;
                while (q < eol && std::isdigit(static_cast<unsigned char>(text[q])) &&
                       key.size() < 2)
                    key.push_back(text[q++]);
                if (q < eol && std::isalpha(static_cast<unsigned char>(text[q]))) {
                    char letter = static_cast<char>(std::tolower(static_cast<unsigned char>(text[q])));
                    std::size_t after = q + 1;
                    if (after >= eol || !std::isalnum(static_cast<unsigned char>(text[after]))) {
                        key.push_back(letter);
                        ++q;
                    } else {
                        key.clear();  // e.g. "Item 4ever" is not a heading
                    }
                }
                if (!key.empty() &&
                    (q >= eol || !std::isalnum(static_cast<unsigned char>(text[q]))))
                    found.push_back({p, key});
            }
        }
        if (eol == text.size()) break;
        line_start = eol + 1;
    }
    return found;
}

// ------------------------------------------------------- section extract ---

namespace detail {

inline std::string_view rtrim_view(std::string_view s) {
    std::size_t e = s.size();
    while (e > 0 && is_ascii_space(s[e - 1])) --e;
    return s.substr(0, e);
}

}  // namespace detail

// For TenK attempts Item1, Item1A, Item7; for TenQ attempts Item1A. Sections
// that cannot be located are omitted; zero located raises NoSectionsFound.
inline Document extract_sections(const RawFiling& filing) {
    if (filing.body.empty()) throw Error("filing " + filing.accession_id + " has an empty body");
    std::string text = strip_html(filing.body);
    std::vector<ItemHeading> headings = scan_item_headings(text);

    struct Target {
        SectionId id;
        std::string_view key;
    };
    std::vector<Target> targets;
    if (filing.form_type == FormType::TenK)
        targets = {{SectionId::Item1, "1"}, {SectionId::Item1A, "1a"}, {SectionId::Item7, "7"}};
    else
        targets = {{SectionId::Item1A, "1a"}};

    std::vector<Section> sections;
    for (const Target& t : targets) {
        std::optional<std::size_t> start;
        for (const ItemHeading& h : headings)
            if (h.key == t.key) start = h.offset;  // last occurrence wins
        if (!start) continue;
        std::size_t end = text.size();
        for (const ItemHeading& h : headings)
            if (h.offset > *start) {
                end = h.offset;
                break;
            }
        std::string_view span = detail::rtrim_view(
            std::string_view(text).substr(*start, end - *start));
        if (span.empty()) continue;
        sections.push_back({t.id, std::string(span)});
    }
    if (sections.empty()) throw NoSectionsFound(filing.accession_id);
    return make_document(filing.accession_id, Source::CorporateReports, std::move(sections));
}

// Convenience for the configured fallback policy.
inline std::optional<Document> extract_or_fallback(const RawFiling& filing, bool fulltext_fallback) {
    try {
        return extract_sections(filing);
    } catch (const NoSectionsFound&) {
        if (!fulltext_fallback) return std::nullopt;
        std::string text = strip_html(filing.body);
        if (trim(text).empty()) text = filing.body;
        return make_document(filing.accession_id, Source::CorporateReports,
                             {{SectionId::FullText, std::move(text)}});
    }
}

}  // namespace finlm::corpus
