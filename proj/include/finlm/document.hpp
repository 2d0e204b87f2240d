#pragma once

// Document model and the on-disk document store: a directory of
// line-delimited record files (format `finlm-docs/1`) plus manifest.tsv.

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "finlm/sentence.hpp"
#include "finlm/text.hpp"
#include "finlm/util.hpp"

namespace finlm::corpus {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr std::string_view kDocFormatVersion = "finlm-docs/1";

// ----------------------------------------------------------------- types ---

enum class FormType { TenK, TenQ };

inline std::string form_type_name(FormType f) { return f == FormType::TenK ? "10-K" : "10-Q"; }

inline FormType form_type_from_name(const std::string& s) {
    if (s == "10-K") return FormType::TenK;
    if (s == "10-Q") return FormType::TenQ;
    throw Error("unknown form type '" + s + "'");
}

enum class Source { CorporateReports, EarningsCalls, AnalystReports };

inline constexpr int kSourceCount = 3;

inline std::string source_name(Source s) {
    switch (s) {
        case Source::CorporateReports: return "corporate_reports";
        case Source::EarningsCalls: return "earnings_calls";
        case Source::AnalystReports: return "analyst_reports";
    }
    return "?";
}

inline Source source_from_name(const std::string& s) {
    if (s == "corporate_reports") return Source::CorporateReports;
    if (s == "earnings_calls") return Source::EarningsCalls;
    if (s == "analyst_reports") return Source::AnalystReports;
    throw Error("unknown source '" + s + "'");
}

enum class SectionId { Item1, Item1A, Item7, FullText };

inline std::string section_name(SectionId s) {
    switch (s) {
        case SectionId::Item1: return "item_1";
        case SectionId::Item1A: return "item_1a";
        case SectionId::Item7: return "item_7";
        case SectionId::FullText: return "full_text";
    }
    return "?";
}

inline SectionId section_from_name(const std::string& s) {
    if (s == "item_1") return SectionId::Item1;
    if (s == "item_1a") return SectionId::Item1A;
    if (s == "item_7") return SectionId::Item7;
    if (s == "full_text") return SectionId::FullText;
    throw Error("unknown section id '" + s + "'");
}

struct RawFiling {
    std::string accession_id;
    std::string cik;
    FormType form_type = FormType::TenK;
    std::string period_end;  // ISO-8601 date
    std::string body;
};

struct Section {
    SectionId id = SectionId::FullText;
    std::string text;
};

struct Document {
    std::string doc_id;
    Source source = Source::CorporateReports;
    std::vector<Section> sections;
    std::size_t sentence_count = 0;
    std::size_t token_estimate = 0;

    std::string full_text() const {
        std::string out;
        for (const Section& s : sections) {
            if (!out.empty()) out += "\n\n";
            out += s.text;
        }
        return out;
    }
};

// Computes the derived counts and enforces the type invariants.
inline Document make_document(std::string doc_id, Source source, std::vector<Section> sections) {
    if (doc_id.empty()) throw Error("document id must be non-empty");
    if (sections.empty()) throw Error("document " + doc_id + " has no sections");
    Document d;
    d.doc_id = std::move(doc_id);
    d.source = source;
    d.sections = std::move(sections);
    for (const Section& s : d.sections) {
        if (trim(s.text).empty())
            throw Error("document " + d.doc_id + " has an empty " + section_name(s.id) + " section");
        d.sentence_count += segment_sentences(s.text).size();
        d.token_estimate += count_whitespace_tokens(s.text);
    }
    return d;
}

// -------------------------------------------------------------- manifest ---

struct ManifestEntry {
    Source source = Source::CorporateReports;
    std::size_t document_count = 0;
    std::size_t token_estimate = 0;
};

struct CorpusManifest {
    std::vector<ManifestEntry> entries;  // at most one per source, enum order
    std::size_t total_tokens = 0;

    std::string to_tsv() const {
        std::string out;
        for (const ManifestEntry& e : entries) {
            out += source_name(e.source);
            out += '\t';
            out += std::to_string(e.document_count);
            out += '\t';
            out += std::to_string(e.token_estimate);
            out += '\n';
        }
        return out;
    }

    static CorpusManifest from_tsv(std::string_view tsv) {
        CorpusManifest m;
        std::size_t lineno = 0, pos = 0;
        while (pos < tsv.size()) {
            std::size_t eol = tsv.find('\n', pos);
            if (eol == std::string_view::npos) eol = tsv.size();
            std::string_view line = tsv.substr(pos, eol - pos);
            pos = eol + 1;
            ++lineno;
            if (line.empty()) continue;
            std::size_t t1 = line.find('\t');
            std::size_t t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
            if (t2 == std::string_view::npos)
                throw FormatError("manifest row needs 3 tab-separated fields", lineno);
            ManifestEntry e;
            e.source = source_from_name(std::string(line.substr(0, t1)));
            e.document_count = std::stoull(std::string(line.substr(t1 + 1, t2 - t1 - 1)));
            e.token_estimate = std::stoull(std::string(line.substr(t2 + 1)));
            m.entries.push_back(e);
            m.total_tokens += e.token_estimate;
        }
        return m;
    }
};

// ------------------------------------------------------------ record io ----

inline json document_to_record(const Document& d) {
    json rec;
    rec["doc_id"] = d.doc_id;
    rec["source"] = source_name(d.source);
    rec["text"] = d.full_text();
    if (!(d.sections.size() == 1 && d.sections[0].id == SectionId::FullText)) {
        json secs = json::array();
        for (const Section& s : d.sections)
            secs.push_back({{"id", section_name(s.id)}, {"text", s.text}});
        rec["sections"] = secs;
    }
    return rec;
}

inline Document document_from_record(const json& rec, std::size_t lineno) {
    try {
        std::string doc_id = rec.at("doc_id").get<std::string>();
        Source source = source_from_name(rec.at("source").get<std::string>());
        std::vector<Section> sections;
        if (rec.contains("sections")) {
            for (const json& s : rec.at("sections"))
                sections.push_back({section_from_name(s.at("id").get<std::string>()),
                                    s.at("text").get<std::string>()});
        } else {
            sections.push_back({SectionId::FullText, rec.at("text").get<std::string>()});
        }
        return make_document(std::move(doc_id), source, std::move(sections));
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad document record: ") + e.what(), lineno);
    } catch (const Error& e) {
        throw FormatError(std::string("bad document record: ") + e.what(), lineno);
    }
}

// Reads one `finlm-docs/1` file. In strict mode a malformed record aborts
// with its line number; otherwise it is skipped and counted.
inline std::size_t read_record_file(const std::string& path, bool strict,
                                    const std::function<void(Document&&)>& sink) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    std::size_t lineno = 0, skipped = 0;
    if (!std::getline(in, line)) throw FormatError(path + ": empty record file", 1);
    ++lineno;
    if (trim(line) != kDocFormatVersion)
        throw FormatError(path + ": missing '" + std::string(kDocFormatVersion) + "' header", 1);
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            json rec = json::parse(line, nullptr, true);
            sink(document_from_record(rec, lineno));
        } catch (const json::exception& e) {
            if (strict) throw FormatError(path + ": invalid JSON: " + e.what(), lineno);
            ++skipped;
        } catch (const FormatError&) {
            if (strict) throw;
            ++skipped;
        }
    }
    return skipped;
}

// One Document per record, all sections FullText. The caller names the
// expected source; records tagged otherwise are malformed.
inline std::vector<Document> ingest_plaintext(const std::string& path, Source source,
                                              bool strict = true,
                                              std::size_t* skipped_out = nullptr) {
    std::vector<Document> docs;
    std::size_t skipped = read_record_file(path, strict, [&](Document&& d) {
        if (d.source != source)
            throw FormatError(path + ": record source '" + source_name(d.source) +
                                  "' does not match expected '" + source_name(source) + "'",
                              0);
        docs.push_back(std::move(d));
    });
    if (skipped_out) *skipped_out = skipped;
    return docs;
}

// ----------------------------------------------------------------- store ---

// Layout: <root>/docs/*.docs (record files), <root>/raw/*.json (fetched
// filings), <root>/manifest.tsv. Single writer, any number of readers.
class DocumentStore {
public:
    explicit DocumentStore(fs::path root) : root_(std::move(root)) {
        fs::create_directories(root_ / "docs");
        fs::create_directories(root_ / "raw");
    }

    const fs::path& root() const { return root_; }

    void append(const std::string& file_stem, const Document& d) {
        fs::path path = root_ / "docs" / (file_stem + ".docs");
        bool fresh = !fs::exists(path);
        std::ofstream out(path, std::ios::app);
        if (!out) throw IoError("cannot open " + path.string() + " for append");
        if (fresh) out << kDocFormatVersion << '\n';
        out << document_to_record(d).dump() << '\n';
        if (!out) throw IoError("write failed on " + path.string());
    }

    // Drop one record file so a rebuild starts clean.
    void reset_docs(const std::string& file_stem) {
        fs::remove(root_ / "docs" / (file_stem + ".docs"));
    }

    std::vector<fs::path> record_files() const {
        std::vector<fs::path> files;
        if (fs::exists(root_ / "docs"))
            for (const auto& e : fs::directory_iterator(root_ / "docs"))
                if (e.is_regular_file() && e.path().extension() == ".docs")
                    files.push_back(e.path());
        std::sort(files.begin(), files.end());
        return files;
    }

    // Deterministic order: record files sorted by name, records in file order.
    void for_each_document(const std::function<void(Document&&)>& sink, bool strict = true) const {
        for (const fs::path& f : record_files()) read_record_file(f.string(), strict, sink);
    }

    std::vector<Document> load_all(bool strict = true) const {
        std::vector<Document> docs;
        for_each_document([&](Document&& d) { docs.push_back(std::move(d)); }, strict);
        return docs;
    }

    bool empty() const {
        bool any = false;
        for_each_document([&](Document&&) { any = true; });
        return !any;
    }

    // Raw filings (pre-sectioning), one JSON file per accession.
    void save_raw(const RawFiling& f) {
        if (f.accession_id.empty()) throw Error("filing accession_id must be non-empty");
        if (f.body.empty()) throw Error("filing " + f.accession_id + " has an empty body");
        json j;
        j["accession_id"] = f.accession_id;
        j["cik"] = f.cik;
        j["form_type"] = form_type_name(f.form_type);
        j["period_end"] = f.period_end;
        j["body"] = f.body;
        write_file((root_ / "raw" / (f.accession_id + ".json")).string(), j.dump());
    }

    std::vector<std::string> list_raw() const {
        std::vector<std::string> ids;
        if (fs::exists(root_ / "raw"))
            for (const auto& e : fs::directory_iterator(root_ / "raw"))
                if (e.is_regular_file() && e.path().extension() == ".json")
                    ids.push_back(e.path().stem().string());
        std::sort(ids.begin(), ids.end());
        return ids;
    }

    RawFiling load_raw(const std::string& accession_id) const {
        json j = json::parse(read_file((root_ / "raw" / (accession_id + ".json")).string()));
        RawFiling f;
        f.accession_id = j.at("accession_id").get<std::string>();
        f.cik = j.at("cik").get<std::string>();
        f.form_type = form_type_from_name(j.at("form_type").get<std::string>());
        f.period_end = j.at("period_end").get<std::string>();
        f.body = j.at("body").get<std::string>();
        return f;
    }

    void write_manifest(const CorpusManifest& m) const {
        write_file((root_ / "manifest.tsv").string(), m.to_tsv());
    }

    std::optional<CorpusManifest> read_manifest() const {
        fs::path p = root_ / "manifest.tsv";
        if (!fs::exists(p)) return std::nullopt;
        return CorpusManifest::from_tsv(read_file(p.string()));
    }

private:
    fs::path root_;
};

// Single pass over the store; entries appear in enum order.
inline CorpusManifest build_manifest(const DocumentStore& store) {
    std::size_t docs[kSourceCount] = {0, 0, 0};
    std::size_t toks[kSourceCount] = {0, 0, 0};
    store.for_each_document([&](Document&& d) {
        int i = static_cast<int>(d.source);
        ++docs[i];
        toks[i] += d.token_estimate;
    });
    CorpusManifest m;
    for (int i = 0; i < kSourceCount; ++i) {
        if (docs[i] == 0) continue;
        m.entries.push_back({static_cast<Source>(i), docs[i], toks[i]});
        m.total_tokens += toks[i];
    }
    return m;
}

}  // namespace finlm::corpus
