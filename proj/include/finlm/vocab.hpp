#pragma once

// WordPiece-style subword vocabularies: training (iterative pair merges
// scored by count(xy)/(count(x)*count(y))), import/export, and overlap
// measurement. Training is deterministic: scores are compared as exact
// rationals and ties break on the merged piece text.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "finlm/document.hpp"
#include "finlm/text.hpp"

namespace finlm::vocab {

class EmptyCorpus : public Error {
public:
    EmptyCorpus() : Error("vocabulary training needs a non-empty corpus") {}
};

inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kUnkId = 1;
inline constexpr std::int32_t kClsId = 2;
inline constexpr std::int32_t kSepId = 3;
inline constexpr std::int32_t kMaskId = 4;
inline constexpr int kNumSpecials = 5;

inline const std::vector<std::string>& special_pieces() {
    static const std::vector<std::string> kSpecials = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
    return kSpecials;
}

struct SubwordVocab {
    std::vector<std::string> pieces;                     // index order
    std::unordered_map<std::string, std::int32_t> id_of;  // inverse of pieces
    Casing casing = Casing::Uncased;

    std::int32_t size() const { return static_cast<std::int32_t>(pieces.size()); }

    std::int32_t find(std::string_view piece) const {
        auto it = id_of.find(std::string(piece));
        return it == id_of.end() ? -1 : it->second;
    }

    bool is_special(std::int32_t id) const { return id >= 0 && id < kNumSpecials; }

    void add(const std::string& piece) {
        if (id_of.count(piece)) throw Error("duplicate piece '" + piece + "'");
        id_of.emplace(piece, size());
        pieces.push_back(piece);
    }

    static SubwordVocab with_specials(Casing casing) {
        SubwordVocab v;
        v.casing = casing;
        for (const std::string& s : special_pieces()) v.add(s);
        return v;
    }
};

struct VocabTrainConfig {
    std::int32_t target_size = 1000;
    Casing casing = Casing::Uncased;
    std::uint64_t min_pair_frequency = 2;
    std::size_t max_word_length = 100;  // codepoints
};

// ----------------------------------------------------------- word counts ---

namespace detail {

using WordCounts = std::map<std::string, std::uint64_t>;

inline void count_words_in(const std::string& text, Casing casing, std::size_t max_word_length,
                           WordCounts& counts) {
    for (std::string& w : split_words(normalize(text, casing)))
        if (utf8_length(w) <= max_word_length) ++counts[std::move(w)];
}

inline WordCounts collect_word_counts(const corpus::DocumentStore& store,
                                      const VocabTrainConfig& config, unsigned jobs) {
    std::vector<std::string> texts;
    store.for_each_document([&](corpus::Document&& d) { texts.push_back(d.full_text()); });
    if (jobs <= 1 || texts.size() < 2) {
        WordCounts counts;
        for (const std::string& t : texts)
            count_words_in(t, config.casing, config.max_word_length, counts);
        return counts;
    }
    unsigned n = std::min<unsigned>(jobs, static_cast<unsigned>(texts.size()));
    std::vector<WordCounts> shards(n);
    std::vector<std::thread> workers;
    for (unsigned k = 0; k < n; ++k)
        workers.emplace_back([&, k] {
            for (std::size_t i = k; i < texts.size(); i += n)
                count_words_in(texts[i], config.casing, config.max_word_length, shards[k]);
        });
    for (std::thread& t : workers) t.join();
    WordCounts counts = std::move(shards[0]);
    for (unsigned k = 1; k < n; ++k)
        for (const auto& [w, c] : shards[k]) counts[w] += c;
    return counts;
}

}  // namespace detail

// ----------------------------------------------------------------- train ---

namespace detail {

struct TrainerState {
    std::vector<std::string> sym_text;              // symbol id -> piece text
    std::map<std::string, std::int32_t> sym_of;     // piece text -> symbol id
    std::vector<std::vector<std::int32_t>> words;   // symbol sequences
    std::vector<std::uint64_t> freq;                // per word
    std::vector<std::uint64_t> sym_count;           // per symbol, corpus-wide
    std::map<std::pair<std::int32_t, std::int32_t>, std::uint64_t> pair_count;
    std::map<std::pair<std::int32_t, std::int32_t>, std::set<std::size_t>> pair_words;

    std::int32_t intern(const std::string& text) {
        auto it = sym_of.find(text);
        if (it != sym_of.end()) return it->second;
        std::int32_t id = static_cast<std::int32_t>(sym_text.size());
        sym_text.push_back(text);
        sym_of.emplace(text, id);
        sym_count.push_back(0);
        return id;
    }

    void add_word_stats(std::size_t wi, std::int64_t sign) {
        const std::vector<std::int32_t>& syms = words[wi];
        std::uint64_t f = freq[wi];
        for (std::int32_t s : syms)
            sym_count[static_cast<std::size_t>(s)] += static_cast<std::uint64_t>(
                sign * static_cast<std::int64_t>(f));
        for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
            auto key = std::make_pair(syms[i], syms[i + 1]);
            if (sign > 0) {
                pair_count[key] += f;
                pair_words[key].insert(wi);
            } else {
                auto it = pair_count.find(key);
                it->second -= f;
                if (it->second == 0) {
                    pair_count.erase(it);
                    pair_words.erase(key);
                }
            }
        }
    }
};

// Tie order for equal scores: merged text with the `##` prefix stripped,
// ascending; a word-initial piece sorts before its continuation twin.
struct MergeCandidate {
    unsigned __int128 lhs = 0;  // cross-multiplied score numerators
    unsigned __int128 rhs = 1;
    std::string stripped;
    bool continuation = true;

    bool better_than(const MergeCandidate& o) const {
        unsigned __int128 a = lhs * o.rhs;
        unsigned __int128 b = o.lhs * rhs;
        if (a != b) return a > b;
        if (stripped != o.stripped) return stripped < o.stripped;
        return !continuation && o.continuation;
    }
};

inline std::string strip_continuation(std::string_view piece) {
    return std::string(piece.substr(piece.rfind("##", 0) == 0 ? 2 : 0));
}

}  // namespace detail

// Deterministic WordPiece training. The result always contains the five
// specials and every observed character in initial and `##` form (coverage
// outranks target_size when the alphabet alone exceeds it); merges are added
// until target_size is reached or no pair clears min_pair_frequency.
inline SubwordVocab train_vocab(const corpus::DocumentStore& store, const VocabTrainConfig& config,
                                unsigned jobs = 1) {
    if (config.target_size <= kNumSpecials)
        throw ConfigError("vocab target_size must exceed " + std::to_string(kNumSpecials));
    if (config.min_pair_frequency < 1) throw ConfigError("min_pair_frequency must be >= 1");

    detail::WordCounts word_counts = detail::collect_word_counts(store, config, jobs);
    if (word_counts.empty()) throw EmptyCorpus();

    // Alphabet: every observed character, as initial and continuation piece.
    std::set<std::string> chars;
    for (const auto& [word, n] : word_counts) {
        std::size_t i = 0;
        while (i < word.size()) {
            std::size_t at = i;
            utf8_next(word, i);
            chars.insert(word.substr(at, i - at));
        }
    }

    SubwordVocab vocab = SubwordVocab::with_specials(config.casing);
    detail::TrainerState st;
    for (const std::string& c : chars) {
        vocab.add(c);
        st.intern(c);
    }
    for (const std::string& c : chars) {
        vocab.add("##" + c);
        st.intern("##" + c);
    }

    st.words.reserve(word_counts.size());
    for (const auto& [word, n] : word_counts) {
        std::vector<std::int32_t> syms;
        std::size_t i = 0;
        bool first = true;
        while (i < word.size()) {
            std::size_t at = i;
            utf8_next(word, i);
            std::string piece = word.substr(at, i - at);
            syms.push_back(st.sym_of.at(first ? piece : "##" + piece));
            first = false;
        }
        st.words.push_back(std::move(syms));
        st.freq.push_back(n);
    }
    for (std::size_t wi = 0; wi < st.words.size(); ++wi) st.add_word_stats(wi, +1);

    while (vocab.size() < config.target_size) {
        detail::MergeCandidate best;
        std::pair<std::int32_t, std::int32_t> best_pair{-1, -1};
        std::string best_text;
        for (const auto& [pr, cnt] : st.pair_count) {
            if (cnt < config.min_pair_frequency) continue;
            detail::MergeCandidate cand;
            cand.lhs = cnt;
            cand.rhs = static_cast<unsigned __int128>(st.sym_count[static_cast<std::size_t>(pr.first)]) *
                       st.sym_count[static_cast<std::size_t>(pr.second)];
            const std::string& x = st.sym_text[static_cast<std::size_t>(pr.first)];
            const std::string& y = st.sym_text[static_cast<std::size_t>(pr.second)];
            std::string merged = x + detail::strip_continuation(y);
            cand.stripped = detail::strip_continuation(merged);
            cand.continuation = merged.rfind("##", 0) == 0;
            if (best_pair.first < 0 || cand.better_than(best)) {
                best = cand;
                best_pair = pr;
                best_text = std::move(merged);
            }
        }
        if (best_pair.first < 0) break;

        bool fresh = !st.sym_of.count(best_text);
        std::int32_t merged_id = st.intern(best_text);
        const std::set<std::size_t> affected = st.pair_words[best_pair];
        for (std::size_t wi : affected) {
            st.add_word_stats(wi, -1);
            std::vector<std::int32_t>& syms = st.words[wi];
            std::vector<std::int32_t> out;
            out.reserve(syms.size());
            for (std::size_t i = 0; i < syms.size();) {
                if (i + 1 < syms.size() && syms[i] == best_pair.first &&
                    syms[i + 1] == best_pair.second) {
                    out.push_back(merged_id);
                    i += 2;
                } else {
                    out.push_back(syms[i]);
                    ++i;
                }
            }
            syms = std::move(out);
            st.add_word_stats(wi, +1);
        }
        if (fresh) vocab.add(best_text);
    }
    return vocab;
}

// ----------------------------------------------------------------- io ------

inline void save_vocab(const SubwordVocab& v, const std::string& path) {
    std::string out;
    for (const std::string& p : v.pieces) {
        out += p;
        out += '\n';
    }
    write_file(path, out);
}

// One piece per line, line order = index order. Files may start with the
// five specials (verified) or omit them (prepended).
inline SubwordVocab import_vocab(const std::string& path, Casing casing = Casing::Uncased) {
    std::string data = read_file(path);
    SubwordVocab v = SubwordVocab::with_specials(casing);
    std::size_t pos = 0, lineno = 0;
    while (pos < data.size()) {
        std::size_t eol = data.find('\n', pos);
        if (eol == std::string::npos) eol = data.size();
        std::string piece = data.substr(pos, eol - pos);
        pos = eol + 1;
        ++lineno;
        if (!piece.empty() && piece.back() == '\r') piece.pop_back();
        if (piece.empty()) continue;
        if (lineno <= static_cast<std::size_t>(kNumSpecials) &&
            piece == special_pieces()[lineno - 1])
            continue;  // declared specials match the reserved slots
        if (v.id_of.count(piece))
            throw FormatError(path + ": duplicate piece '" + piece + "'", lineno);
        v.add(piece);
    }
    if (v.size() <= kNumSpecials) throw FormatError(path + ": vocabulary has no pieces", 1);
    return v;
}

// --------------------------------------------------------------- overlap ---

// Jaccard overlap over non-special pieces.
inline double vocab_overlap(const SubwordVocab& a, const SubwordVocab& b) {
    std::set<std::string> sa(a.pieces.begin() + kNumSpecials, a.pieces.end());
    std::set<std::string> sb(b.pieces.begin() + kNumSpecials, b.pieces.end());
    if (sa.empty() && sb.empty()) return 1.0;
    std::size_t inter = 0;
    for (const std::string& p : sa) inter += sb.count(p);
    std::size_t uni = sa.size() + sb.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace finlm::vocab
