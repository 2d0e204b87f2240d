#pragma once

// Greedy longest-match-first subword encoding against a SubwordVocab.

#include <string>
#include <string_view>
#include <vector>

#include "finlm/vocab.hpp"

namespace finlm::tok {

using vocab::SubwordVocab;

using finlm::split_words;  // whitespace + one-word-per-punctuation splitter

struct TokenSequence {
    std::vector<std::int32_t> ids;
    std::vector<std::string> pieces;

    void push(std::int32_t id, std::string piece) {
        ids.push_back(id);
        pieces.push_back(std::move(piece));
    }
};

// Repeatedly takes the longest vocabulary prefix (continuation pieces carry
// `##` after the first); a word with no matchable prefix at any step, or
// longer than max_word_length codepoints, encodes as [UNK].
inline std::vector<std::int32_t> wordpiece_encode(std::string_view word, const SubwordVocab& vocab,
                                                  std::size_t max_word_length = 100) {
    if (word.empty()) return {};
    if (utf8_length(word) > max_word_length) return {vocab::kUnkId};

    // Codepoint boundaries so prefixes never split a UTF-8 sequence.
    std::vector<std::size_t> bounds;
    std::size_t i = 0;
    bounds.push_back(0);
    while (i < word.size()) {
        utf8_next(word, i);
        bounds.push_back(i);
    }

    std::vector<std::int32_t> ids;
    std::size_t start = 0;  // index into bounds
    while (start + 1 < bounds.size()) {
        std::int32_t match = -1;
        std::size_t match_end = 0;
        for (std::size_t end = bounds.size() - 1; end > start; --end) {
            std::string candidate(word.substr(bounds[start], bounds[end] - bounds[start]));
            if (start > 0) candidate = "##" + candidate;
            std::int32_t id = vocab.find(candidate);
            if (id >= 0) {
                match = id;
                match_end = end;
                break;
            }
        }
        if (match < 0) return {vocab::kUnkId};
        ids.push_back(match);
        start = match_end;
    }
    return ids;
}

// Normalize per the vocabulary's casing, split into words, encode each.
inline TokenSequence encode(std::string_view text, const SubwordVocab& vocab,
                            std::size_t max_word_length = 100) {
    TokenSequence seq;
    for (const std::string& word : split_words(normalize(text, vocab.casing)))
        for (std::int32_t id : wordpiece_encode(word, vocab, max_word_length))
            seq.push(id, vocab.pieces[static_cast<std::size_t>(id)]);
    return seq;
}

}  // namespace finlm::tok
