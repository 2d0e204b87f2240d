#pragma once

// Sentence segmentation for financial prose. Splits at terminal punctuation
// followed by whitespace, guarded by an abbreviation list; blank lines are
// hard boundaries. Lossless modulo whitespace: joining the output with single
// spaces preserves every non-whitespace character in order.

#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "finlm/text.hpp"

namespace finlm::corpus {

namespace detail {

// Words that end with '.' without ending a sentence. Compared lowercase,
// including the trailing period and any internal periods.
inline constexpr std::array<std::string_view, 38> kAbbreviations = {
    "approx.", "inc.",  "corp.", "co.",   "ltd.",  "llc.",  "l.p.",  "u.s.",
    "u.k.",    "e.g.",  "i.e.",  "etc.",  "vs.",   "v.",    "no.",   "nos.",
    "mr.",     "mrs.",  "ms.",   "dr.",   "jr.",   "sr.",   "st.",   "fig.",
    "jan.",    "feb.",  "mar.",  "apr.",  "jun.",  "jul.",  "aug.",  "sep.",
    "sept.",   "oct.",  "nov.",  "dec.",  "al.",   "p.m.",
};

inline bool is_abbreviation(std::string_view word) {
    while (!word.empty() && !std::isalnum(static_cast<unsigned char>(word.front()))) word.remove_prefix(1);
    std::string lower;
    lower.reserve(word.size());
    for (char c : word) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    for (std::string_view a : kAbbreviations)
        if (lower == a) return true;
    // Single-letter initials like "J." or "a."
    if (lower.size() == 2 && std::isalpha(static_cast<unsigned char>(lower[0]))) return true;
    return false;
}

// The whitespace-delimited word ending at position end (exclusive).
inline std::string_view word_ending_at(std::string_view text, std::size_t end) {
    std::size_t b = end;
    while (b > 0 && !is_ascii_space(text[b - 1])) --b;
    return text.substr(b, end - b);
}

}  // namespace detail

inline std::vector<std::string> segment_sentences(std::string_view text) {
    std::vector<std::string> sentences;
    std::size_t start = 0;

    auto flush = [&](std::size_t end) {
        std::string s = collapse_whitespace(text.substr(start, end - start));
        if (!s.empty()) sentences.push_back(std::move(s));
        start = end;
    };

    std::size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (c == '.' || c == '!' || c == '?') {
            std::size_t j = i + 1;
            while (j < text.size() && (text[j] == '.' || text[j] == '!' || text[j] == '?')) ++j;
            // Trailing closers stay with the sentence.
            while (j < text.size() &&
                   (text[j] == '"' || text[j] == '\'' || text[j] == ')' || text[j] == ']')) ++j;
            bool followed_by_ws = j < text.size() && is_ascii_space(text[j]);
            bool guard = c == '.' && (j == i + 1) &&
                         detail::is_abbreviation(detail::word_ending_at(text, j));
            if (followed_by_ws && !guard) {
                flush(j);
                i = j;
                continue;
            }
            i = j;
            continue;
        }
        // Blank line = paragraph boundary.
        if (c == '\n') {
            std::size_t j = i + 1;
            while (j < text.size() && is_ascii_space(text[j]) && text[j] != '\n') ++j;
            if (j < text.size() && text[j] == '\n') {
                flush(i);
                i = j + 1;
                continue;
            }
        }
        ++i;
    }
    flush(text.size());
    return sentences;
}

}  // namespace finlm::corpus
