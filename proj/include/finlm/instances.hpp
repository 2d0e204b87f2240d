#pragma once

// Pretraining instance assembly: sentence-pair packing with next-sentence
// sampling and MLM masking. Every random draw comes from a substream derived
// from (seed, document index, pair index), so generation order (or sharding
// by document) cannot change the output.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "finlm/document.hpp"
#include "finlm/wordpiece.hpp"

namespace finlm::tok {

enum class NspLabel : std::uint32_t { IsNext = 0, NotNext = 1 };

struct PretrainInstance {
    std::vector<std::int32_t> token_ids;
    std::vector<std::int32_t> segment_ids;
    std::vector<std::int32_t> mlm_positions;  // strictly increasing
    std::vector<std::int32_t> mlm_labels;     // original ids at those positions
    NspLabel nsp_label = NspLabel::IsNext;

    bool operator==(const PretrainInstance&) const = default;
};

struct MaskPolicy {
    double mask_fraction = 0.15;
    double replace_mask_prob = 0.80;
    double replace_random_prob = 0.10;
    double keep_prob = 0.10;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(mask_fraction > 0.0 && mask_fraction < 1.0))
            throw ConfigError("mask_fraction must be in (0,1)");
        if (std::abs(replace_mask_prob + replace_random_prob + keep_prob - 1.0) > 1e-9)
            throw ConfigError("mask replacement probabilities must sum to 1");
    }
};

struct SegmentedDoc {
    std::string doc_id;
    std::vector<std::string> sentences;
};

inline std::vector<SegmentedDoc> segment_store(const corpus::DocumentStore& store) {
    std::vector<SegmentedDoc> docs;
    store.for_each_document([&](corpus::Document&& d) {
        SegmentedDoc sd;
        sd.doc_id = d.doc_id;
        for (const corpus::Section& s : d.sections)
            for (std::string& sent : corpus::segment_sentences(s.text))
                sd.sentences.push_back(std::move(sent));
        docs.push_back(std::move(sd));
    });
    return docs;
}

// ------------------------------------------------------------- validation ---

// Enforces the structural invariants of a generated instance.
inline void validate_instance(const PretrainInstance& inst, std::int32_t vocab_size,
                              std::size_t max_len) {
    const auto& t = inst.token_ids;
    if (t.empty() || t.size() > max_len) throw Error("instance length out of range");
    if (t.size() != inst.segment_ids.size()) throw Error("segment_ids length mismatch");
    if (t[0] != vocab::kClsId) throw Error("position 0 must hold CLS");
    std::size_t first_sep = 0, sep_count = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < 0 || t[i] >= vocab_size) throw Error("token id out of vocabulary");
        if (t[i] == vocab::kSepId) {
            if (++sep_count == 1) first_sep = i;
        }
    }
    if (sep_count != 2 || t.back() != vocab::kSepId)
        throw Error("instance must contain exactly two SEPs, one terminating each segment");
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::int32_t expect = i <= first_sep ? 0 : 1;
        if (inst.segment_ids[i] != expect) throw Error("segment ids must be 0 then 1");
    }
    std::size_t countable = t.size() - 3;
    std::size_t want = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(0.15 * static_cast<double>(countable))));
    if (inst.mlm_positions.size() != inst.mlm_labels.size())
        throw Error("mlm positions/labels length mismatch");
    if (inst.mlm_positions.size() != want) throw Error("mlm position count violates round rule");
    std::int32_t prev = -1;
    for (std::size_t k = 0; k < inst.mlm_positions.size(); ++k) {
        std::int32_t p = inst.mlm_positions[k];
        if (p <= prev) throw Error("mlm positions must be strictly increasing");
        prev = p;
        if (p <= 0 || static_cast<std::size_t>(p) >= t.size()) throw Error("mlm position out of range");
        if (static_cast<std::size_t>(p) == first_sep || static_cast<std::size_t>(p) + 1 == t.size())
            throw Error("mlm positions must exclude CLS/SEP");
    }
}

// --------------------------------------------------------------- builder ----

namespace detail {

inline void truncate_pair(std::vector<std::int32_t>& a, std::vector<std::int32_t>& b,
                          std::size_t max_len) {
    while (a.size() + b.size() + 3 > max_len) {
        if (a.size() >= b.size()) a.pop_back();
        else b.pop_back();
    }
}

}  // namespace detail

// Packs [CLS] A [SEP] B [SEP]. B is the true next sentence with probability
// 0.5, otherwise a sentence from a different document (NotNext); documents
// with fewer than two sentences contribute only as NotNext donors.
inline std::vector<PretrainInstance> build_instances(const std::vector<SegmentedDoc>& docs,
                                                     const SubwordVocab& vocab,
                                                     std::size_t max_len,
                                                     const MaskPolicy& policy,
                                                     std::uint64_t nsp_seed) {
    if (max_len < 16) throw ConfigError("max_len must be >= 16");
    policy.validate();

    std::vector<std::size_t> donor_docs;  // docs with at least one sentence
    for (std::size_t d = 0; d < docs.size(); ++d)
        if (!docs[d].sentences.empty()) donor_docs.push_back(d);

    std::int32_t n_nonspecial = vocab.size() - vocab::kNumSpecials;
    if (n_nonspecial <= 0) throw ConfigError("vocabulary has no non-special pieces");

    std::vector<PretrainInstance> out;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        const std::vector<std::string>& sents = docs[d].sentences;
        if (sents.size() < 2) continue;
        std::vector<std::vector<std::int32_t>> encoded(sents.size());
        for (std::size_t i = 0; i < sents.size(); ++i) encoded[i] = encode(sents[i], vocab).ids;

        for (std::size_t i = 0; i + 1 < sents.size(); ++i) {
            Rng nsp_rng = Rng::derive(nsp_seed, "nsp", d, i);
            std::vector<std::int32_t> a = encoded[i];
            std::vector<std::int32_t> b;
            NspLabel label = NspLabel::IsNext;

            bool other_doc_exists =
                donor_docs.size() > 1 || (donor_docs.size() == 1 && donor_docs[0] != d);
            if (nsp_rng.next_double() < 0.5 && other_doc_exists) {
                label = NspLabel::NotNext;
                for (;;) {
                    std::size_t dd = donor_docs[nsp_rng.next_below(donor_docs.size())];
                    if (dd == d) continue;
                    b = encode(docs[dd].sentences[nsp_rng.next_below(docs[dd].sentences.size())],
                               vocab)
                            .ids;
                    break;
                }
            } else {
                b = encoded[i + 1];
            }
            if (a.empty() || b.empty()) continue;
            detail::truncate_pair(a, b, max_len);

            PretrainInstance inst;
            inst.nsp_label = label;
            inst.token_ids.push_back(vocab::kClsId);
            inst.segment_ids.push_back(0);
            for (std::int32_t id : a) {
                inst.token_ids.push_back(id);
                inst.segment_ids.push_back(0);
            }
            inst.token_ids.push_back(vocab::kSepId);
            inst.segment_ids.push_back(0);
            std::size_t b_start = inst.token_ids.size();
            for (std::int32_t id : b) {
                inst.token_ids.push_back(id);
                inst.segment_ids.push_back(1);
            }
            inst.token_ids.push_back(vocab::kSepId);
            inst.segment_ids.push_back(1);

            // Maskable: every A/B position (CLS and the SEPs excluded).
            std::vector<std::int32_t> candidates;
            for (std::size_t p = 1; p <= a.size(); ++p)
                candidates.push_back(static_cast<std::int32_t>(p));
            for (std::size_t p = b_start; p < b_start + b.size(); ++p)
                candidates.push_back(static_cast<std::int32_t>(p));

            std::size_t countable = a.size() + b.size();
            std::size_t n_mask = std::max<std::size_t>(
                1, static_cast<std::size_t>(
                       std::llround(policy.mask_fraction * static_cast<double>(countable))));
            n_mask = std::min(n_mask, candidates.size());

            Rng mask_rng = Rng::derive(policy.seed, "mask", d, i);
            for (std::size_t k = 0; k < n_mask; ++k) {
                std::size_t j = k + static_cast<std::size_t>(
                                        mask_rng.next_below(candidates.size() - k));
                std::swap(candidates[k], candidates[j]);
            }
            candidates.resize(n_mask);
            std::sort(candidates.begin(), candidates.end());

            for (std::int32_t pos : candidates) {
                inst.mlm_positions.push_back(pos);
                inst.mlm_labels.push_back(inst.token_ids[static_cast<std::size_t>(pos)]);
                double u = mask_rng.next_double();
                if (u < policy.replace_mask_prob) {
                    inst.token_ids[static_cast<std::size_t>(pos)] = vocab::kMaskId;
                } else if (u < policy.replace_mask_prob + policy.replace_random_prob) {
                    inst.token_ids[static_cast<std::size_t>(pos)] =
                        vocab::kNumSpecials +
                        static_cast<std::int32_t>(
                            mask_rng.next_below(static_cast<std::uint64_t>(n_nonspecial)));
                }  // else keep
            }
            out.push_back(std::move(inst));
        }
    }
    return out;
}

// ------------------------------------------------------------ binary io ----

inline constexpr std::string_view kInstanceMagic = "FLMI1";

inline std::string serialize_instances(const std::vector<PretrainInstance>& instances) {
    std::string out(kInstanceMagic);
    for (const PretrainInstance& inst : instances) {
        std::string rec;
        put_u32(rec, static_cast<std::uint32_t>(inst.token_ids.size()));
        for (std::int32_t v : inst.token_ids) put_u32(rec, static_cast<std::uint32_t>(v));
        for (std::int32_t v : inst.segment_ids) put_u32(rec, static_cast<std::uint32_t>(v));
        put_u32(rec, static_cast<std::uint32_t>(inst.mlm_positions.size()));
        for (std::int32_t v : inst.mlm_positions) put_u32(rec, static_cast<std::uint32_t>(v));
        for (std::int32_t v : inst.mlm_labels) put_u32(rec, static_cast<std::uint32_t>(v));
        put_u32(rec, static_cast<std::uint32_t>(inst.nsp_label));
        put_u32(out, static_cast<std::uint32_t>(rec.size()));
        out += rec;
    }
    return out;
}

inline std::vector<PretrainInstance> parse_instances(std::string_view data) {
    if (data.substr(0, kInstanceMagic.size()) != kInstanceMagic)
        throw IoError("not an instance file (bad magic)");
    ByteReader r(data.substr(kInstanceMagic.size()), "instance");
    std::vector<PretrainInstance> out;
    while (!r.at_end()) {
        std::uint32_t len = r.u32();
        ByteReader rec(r.bytes(len), "instance record");
        PretrainInstance inst;
        std::uint32_t n = rec.u32();
        inst.token_ids.reserve(n);
        for (std::uint32_t k = 0; k < n; ++k)
            inst.token_ids.push_back(static_cast<std::int32_t>(rec.u32()));
        for (std::uint32_t k = 0; k < n; ++k)
            inst.segment_ids.push_back(static_cast<std::int32_t>(rec.u32()));
        std::uint32_t m = rec.u32();
        for (std::uint32_t k = 0; k < m; ++k)
            inst.mlm_positions.push_back(static_cast<std::int32_t>(rec.u32()));
        for (std::uint32_t k = 0; k < m; ++k)
            inst.mlm_labels.push_back(static_cast<std::int32_t>(rec.u32()));
        inst.nsp_label = static_cast<NspLabel>(rec.u32());
        out.push_back(std::move(inst));
    }
    return out;
}

inline void write_instances(const std::vector<PretrainInstance>& instances,
                            const std::string& path) {
    write_file(path, serialize_instances(instances));
}

inline std::vector<PretrainInstance> read_instances(const std::string& path) {
    return parse_instances(read_file(path));
}

}  // namespace finlm::tok
