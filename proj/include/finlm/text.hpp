#pragma once

// UTF-8 codepoint utilities and text normalization (casing policy).

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "finlm/unicode_data.hpp"
#include "finlm/util.hpp"

namespace finlm {

enum class Casing { Cased, Uncased };

inline std::string casing_name(Casing c) { return c == Casing::Cased ? "cased" : "uncased"; }

inline Casing casing_from_name(const std::string& s) {
    if (s == "cased") return Casing::Cased;
    if (s == "uncased") return Casing::Uncased;
    throw Error("unknown casing '" + s + "' (expected cased|uncased)");
}

// ------------------------------------------------------------------ utf8 ---

// Decodes one codepoint at byte offset i; advances i. Invalid bytes decode as
// U+FFFD and advance by one so iteration always terminates.
inline char32_t utf8_next(std::string_view s, std::size_t& i) {
    unsigned char b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int len = (b0 >= 0xF0) ? 4 : (b0 >= 0xE0) ? 3 : (b0 >= 0xC0) ? 2 : 0;
    if (len == 0 || i + static_cast<std::size_t>(len) > s.size()) {
        ++i;
        return 0xFFFD;
    }
    char32_t cp = b0 & (0xFF >> (len + 1));
    for (int k = 1; k < len; ++k) {
        unsigned char bk = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
        if ((bk & 0xC0) != 0x80) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | (bk & 0x3F);
    }
    i += static_cast<std::size_t>(len);
    return cp;
}

inline void utf8_append(std::string& out, char32_t cp) {
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

inline std::vector<char32_t> utf8_decode(std::string_view s) {
    std::vector<char32_t> cps;
    cps.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) cps.push_back(utf8_next(s, i));
    return cps;
}

inline std::size_t utf8_length(std::string_view s) {
    std::size_t n = 0, i = 0;
    while (i < s.size()) {
        utf8_next(s, i);
        ++n;
    }
    return n;
}

// --------------------------------------------------------- classification ---

inline bool is_control_cp(char32_t cp) {
    return cp < 0x20 || cp == 0x7F || (cp >= 0x80 && cp <= 0x9F);
}

inline bool is_combining_mark(char32_t cp) { return cp >= 0x0300 && cp <= 0x036F; }

inline bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_punct_cp(char32_t cp) {
    if (cp >= 0x80) return false;
    char c = static_cast<char>(cp);
    return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
           (c >= '{' && c <= '~');
}

// --------------------------------------------------------- normalization ---

namespace detail {

inline const Decomp* find_decomposition(char32_t cp) {
    auto it = std::lower_bound(std::begin(kDecompositions), std::end(kDecompositions), cp,
                               [](const Decomp& d, char32_t c) { return d.cp < c; });
    if (it != std::end(kDecompositions) && it->cp == cp) return &*it;
    return nullptr;
}

inline char32_t to_lower_cp(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 32;
    for (const LowerMap& m : kLowercase)
        if (m.from == cp) return m.to;
    return cp;
}

}  // namespace detail

// Canonical decomposition for the Latin ranges in the table; control
// characters become spaces in both modes. Uncased additionally removes
// combining marks and lowercases.
inline std::string normalize(std::string_view text, Casing casing) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        char32_t cp = utf8_next(text, i);
        char32_t buf[3] = {cp, 0, 0};
        int n = 1;
        if (const detail::Decomp* d = detail::find_decomposition(cp)) {
            n = 0;
            for (char32_t c : d->seq)
                if (c != 0) buf[n++] = c;
        }
        for (int k = 0; k < n; ++k) {
            char32_t c = buf[k];
            if (is_control_cp(c)) {
                out.push_back(' ');
                continue;
            }
            if (casing == Casing::Uncased) {
                if (is_combining_mark(c)) continue;
                c = detail::to_lower_cp(c);
            }
            utf8_append(out, c);
        }
    }
    return out;
}

// ----------------------------------------------------------- small utils ---

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_ascii_space(s[b])) ++b;
    while (e > b && is_ascii_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

inline std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_ws = false;
    for (char c : s) {
        if (is_ascii_space(c)) {
            in_ws = true;
            continue;
        }
        if (in_ws && !out.empty()) out.push_back(' ');
        in_ws = false;
        out.push_back(c);
    }
    return out;
}

// Splits on whitespace; every punctuation character becomes its own word.
// Concatenation preserves non-whitespace characters in order. The vocabulary
// trainer and the encoder both pre-split with this so they always agree.
inline std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t at = i;
        char32_t cp = utf8_next(text, i);
        if (cp < 0x80 && is_ascii_space(static_cast<char>(cp))) {
            if (!cur.empty()) words.push_back(std::exchange(cur, {}));
            continue;
        }
        if (is_punct_cp(cp)) {
            if (!cur.empty()) words.push_back(std::exchange(cur, {}));
            words.emplace_back(text.substr(at, i - at));
            continue;
        }
        cur.append(text.substr(at, i - at));
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

inline std::size_t count_whitespace_tokens(std::string_view s) {
    std::size_t n = 0;
    bool in_tok = false;
    for (char c : s) {
        bool ws = is_ascii_space(c);
        if (!ws && !in_tok) ++n;
        in_tok = !ws;
    }
    return n;
}

}  // namespace finlm
