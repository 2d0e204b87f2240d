#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <set>

#include <json.hpp>

#include "finlm/document.hpp"
#include "finlm/edgar.hpp"
#include "finlm/sections.hpp"
#include "finlm/sentence.hpp"

using namespace finlm;
using namespace finlm::corpus;
namespace fs = std::filesystem;

namespace {

std::string fixtures_dir() {
    const char* env = std::getenv("FINLM_FIXTURES");
    REQUIRE(env != nullptr);
    return env;
}

fs::path temp_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("finlm_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string strip_ws(std::string_view s) {
    std::string out;
    for (char c : s)
        if (!is_ascii_space(c)) out += c;
    return out;
}

}  // namespace

// ------------------------------------------------------------- sentences ---

TEST_CASE("segment_sentences splits at terminal periods") {
    auto s = segment_sentences("Revenue grew. Margins fell.");
    REQUIRE(s == std::vector<std::string>{"Revenue grew.", "Margins fell."});
}

TEST_CASE("segment_sentences guards abbreviations") {
    auto s = segment_sentences("approx. 4.9 billion tokens were used");
    REQUIRE(s.size() == 1);
    REQUIRE(s[0] == "approx. 4.9 billion tokens were used");

    s = segment_sentences("The U.S. market grew. Inc. filings followed.");
    REQUIRE(s.size() == 2);
}

TEST_CASE("segment_sentences handles empty input") {
    REQUIRE(segment_sentences("").empty());
    REQUIRE(segment_sentences("   \n\t ").empty());
}

TEST_CASE("segment_sentences treats blank lines as boundaries") {
    auto s = segment_sentences("PART I\n\nItem 1 follows here");
    REQUIRE(s == std::vector<std::string>{"PART I", "Item 1 follows here"});
}

TEST_CASE("segmentation is lossless modulo whitespace") {
    Rng rng(2024);
    std::vector<std::string> pieces = {"Revenue", "fell.", "Dr.",    "Smith",  "said!",
                                       "Why?",    "4.9",   "approx.", "tokens", "\n\n",
                                       "margins", "grew,", "slowly."};
    for (int trial = 0; trial < 200; ++trial) {
        std::string text;
        int n = 1 + static_cast<int>(rng.next_below(30));
        for (int i = 0; i < n; ++i) {
            text += pieces[rng.next_below(pieces.size())];
            text += rng.next_below(4) == 0 ? "  " : " ";
        }
        std::string joined;
        for (const std::string& s : segment_sentences(text)) {
            REQUIRE(!s.empty());
            if (!joined.empty()) joined += ' ';
            joined += s;
        }
        REQUIRE(strip_ws(joined) == strip_ws(text));
    }
}

// -------------------------------------------------------------- sections ---

TEST_CASE("extract_sections matches hand-annotated gold spans") {
    std::string dir = fixtures_dir();
    auto expected = nlohmann::json::parse(read_file(dir + "/filings/expected.json"));
    for (auto& [name, spec] : expected.items()) {
        INFO("fixture " << name);
        RawFiling filing;
        filing.accession_id = name;
        filing.cik = "0000000001";
        filing.form_type = form_type_from_name(spec["form"].get<std::string>());
        filing.period_end = "2019-12-31";
        filing.body = read_file(dir + "/filings/" + spec["file"].get<std::string>());
        auto want = spec["sections"].get<std::vector<std::string>>();
        if (want.empty()) {
            REQUIRE_THROWS_AS(extract_sections(filing), NoSectionsFound);
            continue;
        }
        Document doc = extract_sections(filing);
        REQUIRE(doc.source == Source::CorporateReports);
        REQUIRE(doc.sections.size() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i) {
            REQUIRE(section_name(doc.sections[i].id) == want[i]);
            std::string gold = read_file(dir + "/gold/" + name + "." + want[i] + ".gold");
            REQUIRE(doc.sections[i].text == gold);
        }
    }
}

TEST_CASE("extracted sections are substrings of the stripped body") {
    std::string dir = fixtures_dir();
    auto expected = nlohmann::json::parse(read_file(dir + "/filings/expected.json"));
    for (auto& [name, spec] : expected.items()) {
        if (spec["sections"].empty()) continue;
        RawFiling filing;
        filing.accession_id = name;
        filing.cik = "1";
        filing.form_type = form_type_from_name(spec["form"].get<std::string>());
        filing.body = read_file(dir + "/filings/" + spec["file"].get<std::string>());
        std::string stripped = strip_html(filing.body);
        for (const Section& s : extract_sections(filing).sections)
            REQUIRE(stripped.find(s.text) != std::string::npos);
    }
}

TEST_CASE("NoSectionsFound carries the accession id") {
    RawFiling filing{"acc-42", "1", FormType::TenK, "2019-12-31", "no headings here"};
    try {
        extract_sections(filing);
        FAIL("expected NoSectionsFound");
    } catch (const NoSectionsFound& e) {
        REQUIRE(e.accession_id() == "acc-42");
    }
}

TEST_CASE("fulltext fallback keeps the filing") {
    RawFiling filing{"acc-7", "1", FormType::TenK, "2019-12-31", "just prose, no items"};
    REQUIRE(!extract_or_fallback(filing, false).has_value());
    auto doc = extract_or_fallback(filing, true);
    REQUIRE(doc.has_value());
    REQUIRE(doc->sections.size() == 1);
    REQUIRE(doc->sections[0].id == SectionId::FullText);
}

TEST_CASE("strip_html decodes entities and keeps literal angles") {
    REQUIRE(strip_html("a &amp; b &lt;= c") == "a & b <= c");
    REQUIRE(strip_html("x < y holds") == "x < y holds");
    std::string s = strip_html("<script>var x = 1;</script>After");
    REQUIRE(s.find("var x") == std::string::npos);
    REQUIRE(s.find("After") != std::string::npos);
}

// ------------------------------------------------------- store + manifest ---

TEST_CASE("document store round-trips documents") {
    DocumentStore store(temp_dir("store_roundtrip"));
    Document d1 = make_document("d1", Source::CorporateReports,
                                {{SectionId::Item1, "We make widgets."},
                                 {SectionId::Item1A, "Demand may fall. Prices too."}});
    Document d2 = make_document("d2", Source::EarningsCalls,
                                {{SectionId::FullText, "Welcome to the call."}});
    store.append("corporate_reports", d1);
    store.append("earnings_calls", d2);

    auto docs = store.load_all();
    REQUIRE(docs.size() == 2);
    REQUIRE(docs[0].doc_id == "d1");
    REQUIRE(docs[0].sections.size() == 2);
    REQUIRE(docs[0].sections[1].text == "Demand may fall. Prices too.");
    REQUIRE(docs[0].sentence_count == 3);
    REQUIRE(docs[1].doc_id == "d2");
    REQUIRE(docs[1].sections[0].id == SectionId::FullText);
}

TEST_CASE("manifest arithmetic on a two-document store") {
    DocumentStore store(temp_dir("store_manifest"));
    // 10 and 15 whitespace tokens
    store.append("corporate_reports",
                 make_document("a", Source::CorporateReports,
                               {{SectionId::FullText, "one two three four five six seven eight nine ten"}}));
    store.append("corporate_reports",
                 make_document("b", Source::CorporateReports,
                               {{SectionId::FullText,
                                 "a b c d e f g h i j k l m n o"}}));
    CorpusManifest m = build_manifest(store);
    REQUIRE(m.entries.size() == 1);
    REQUIRE(m.entries[0].source == Source::CorporateReports);
    REQUIRE(m.entries[0].document_count == 2);
    REQUIRE(m.entries[0].token_estimate == 25);
    REQUIRE(m.total_tokens == 25);
}

TEST_CASE("empty store yields an empty manifest") {
    DocumentStore store(temp_dir("store_empty"));
    CorpusManifest m = build_manifest(store);
    REQUIRE(m.entries.empty());
    REQUIRE(m.total_tokens == 0);
}

TEST_CASE("manifest totals equal a brute-force recount") {
    DocumentStore store(temp_dir("store_recount"));
    Rng rng(7);
    std::size_t expected_total = 0;
    for (int i = 0; i < 20; ++i) {
        std::string text;
        std::size_t words = 1 + rng.next_below(40);
        for (std::size_t w = 0; w < words; ++w) text += "tok" + std::to_string(w) + " ";
        expected_total += words;
        Source src = static_cast<Source>(rng.next_below(3));
        store.append(source_name(src),
                     make_document("doc" + std::to_string(i), src, {{SectionId::FullText, text}}));
    }
    CorpusManifest m = build_manifest(store);
    std::size_t n_docs = 0;
    for (const ManifestEntry& e : m.entries) n_docs += e.document_count;
    REQUIRE(n_docs == 20);
    REQUIRE(m.total_tokens == expected_total);
    // round trip through manifest.tsv
    store.write_manifest(m);
    auto again = store.read_manifest();
    REQUIRE(again.has_value());
    REQUIRE(again->to_tsv() == m.to_tsv());
    REQUIRE(again->total_tokens == m.total_tokens);
}

TEST_CASE("ingest_plaintext reports malformed lines") {
    fs::path dir = temp_dir("ingest");
    fs::path file = dir / "calls.docs";
    write_file(file.string(),
               "finlm-docs/1\n"
               "{\"doc_id\":\"c1\",\"source\":\"earnings_calls\",\"text\":\"Good morning.\"}\n"
               "this is not json\n"
               "{\"doc_id\":\"c2\",\"source\":\"earnings_calls\",\"text\":\"Thanks all.\"}\n");
    // strict: aborts with the line number
    try {
        ingest_plaintext(file.string(), Source::EarningsCalls, true);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        REQUIRE(e.line() == 3);
    }
    // lenient: skips and counts
    std::size_t skipped = 0;
    auto docs = ingest_plaintext(file.string(), Source::EarningsCalls, false, &skipped);
    REQUIRE(docs.size() == 2);
    REQUIRE(skipped == 1);
    REQUIRE(docs[1].doc_id == "c2");
}

TEST_CASE("ingest_plaintext rejects mismatched sources") {
    fs::path dir = temp_dir("ingest_src");
    fs::path file = dir / "x.docs";
    write_file(file.string(),
               "finlm-docs/1\n"
               "{\"doc_id\":\"c1\",\"source\":\"analyst_reports\",\"text\":\"hello there\"}\n");
    REQUIRE_THROWS_AS(ingest_plaintext(file.string(), Source::EarningsCalls, true), FormatError);
}

TEST_CASE("record file requires the format header") {
    fs::path dir = temp_dir("ingest_hdr");
    fs::path file = dir / "x.docs";
    write_file(file.string(), "{\"doc_id\":\"c1\"}\n");
    REQUIRE_THROWS_AS(ingest_plaintext(file.string(), Source::EarningsCalls, true), FormatError);
}

// ----------------------------------------------------------------- edgar ---

namespace {

class FakeClock : public Clock {
public:
    std::uint64_t now_ms() override { return now_; }
    void sleep_ms(std::uint64_t ms) override {
        now_ += ms;
        ++sleeps;
    }
    void tick(std::uint64_t ms) { now_ += ms; }
    int sleeps = 0;

private:
    std::uint64_t now_ = 1000000;
};

struct LoggedRequest {
    std::string url;
    std::uint64_t at_ms;
};

class MockTransport : public Transport {
public:
    explicit MockTransport(FakeClock& clock) : clock_(clock) {}

    HttpResponse get(const std::string& url,
                     const std::vector<std::pair<std::string, std::string>>& headers) override {
        log.push_back({url, clock_.now_ms()});
        last_headers = headers;
        auto it = responses.find(url);
        if (it == responses.end()) return {404, "not found"};
        if (!it->second.empty() && it->second.front().status != 0) {
            HttpResponse r = it->second.front();
            if (it->second.size() > 1) it->second.erase(it->second.begin());
            return r;
        }
        return {404, "not found"};
    }

    void respond(const std::string& url, HttpResponse r) { responses[url] = {std::move(r)}; }
    void respond_sequence(const std::string& url, std::vector<HttpResponse> rs) {
        responses[url] = std::move(rs);
    }

    std::vector<LoggedRequest> log;
    std::vector<std::pair<std::string, std::string>> last_headers;

private:
    FakeClock& clock_;
    std::map<std::string, std::vector<HttpResponse>> responses;
};

std::string submissions_json() {
    nlohmann::json j;
    j["cik"] = "320193";
    j["filings"]["recent"]["form"] = {"10-K", "8-K", "10-Q", "10-K"};
    j["filings"]["recent"]["accessionNumber"] = {"0001-19-000001", "0001-19-000002",
                                                 "0001-19-000003", "0001-20-000004"};
    j["filings"]["recent"]["reportDate"] = {"2019-09-28", "2019-10-30", "2019-12-28",
                                            "2020-09-26"};
    return j.dump();
}

}  // namespace

TEST_CASE("edgar client filters forms and dates, persists before yielding") {
    FakeClock clock;
    MockTransport transport(clock);
    transport.respond("https://data.sec.gov/submissions/CIK0000320193.json",
                      {200, submissions_json()});
    transport.respond("https://www.sec.gov/Archives/edgar/data/320193/000119000001.txt",
                      {200, "FORM 10-K BODY"});
    transport.respond("https://www.sec.gov/Archives/edgar/data/320193/000119000003.txt",
                      {200, "FORM 10-Q BODY"});

    EdgarConfig cfg;
    cfg.agent = "test-suite test@example.com";
    EdgarClient client(cfg, transport, clock);
    DocumentStore store(temp_dir("edgar_fetch"));

    std::vector<std::string> seen;
    std::size_t n = client.fetch({"320193"}, {FormType::TenK, FormType::TenQ},
                                 {"2019-01-01", "2019-12-31"}, store,
                                 [&](const RawFiling& f) {
                                     // persisted before the callback sees it
                                     REQUIRE(store.load_raw(f.accession_id).body == f.body);
                                     seen.push_back(f.accession_id);
                                 });
    REQUIRE(n == 2);
    REQUIRE(seen == std::vector<std::string>{"0001-19-000001", "0001-19-000003"});
    REQUIRE(store.list_raw().size() == 2);
    // agent header sent
    bool agent_seen = false;
    for (const auto& [k, v] : transport.last_headers)
        if (k == "User-Agent" && v == cfg.agent) agent_seen = true;
    REQUIRE(agent_seen);
}

TEST_CASE("empty cik list yields an empty stream") {
    FakeClock clock;
    MockTransport transport(clock);
    EdgarConfig cfg;
    cfg.agent = "t";
    EdgarClient client(cfg, transport, clock);
    DocumentStore store(temp_dir("edgar_empty"));
    REQUIRE(client.fetch({}, {FormType::TenK}, {"2019-01-01", "2019-12-31"}, store, nullptr) == 0);
    REQUIRE(transport.log.empty());
}

TEST_CASE("fetch failure retries with backoff then names the accession") {
    FakeClock clock;
    MockTransport transport(clock);
    transport.respond("https://data.sec.gov/submissions/CIK0000320193.json",
                      {200, submissions_json()});
    // filing body permanently 500
    transport.respond("https://www.sec.gov/Archives/edgar/data/320193/000119000001.txt",
                      {500, "server error"});

    EdgarConfig cfg;
    cfg.agent = "t";
    cfg.max_retries = 2;
    cfg.backoff_base_ms = 100;
    EdgarClient client(cfg, transport, clock);
    DocumentStore store(temp_dir("edgar_retry"));
    try {
        client.fetch({"320193"}, {FormType::TenK}, {"2019-01-01", "2019-12-31"}, store, nullptr);
        FAIL("expected FetchError");
    } catch (const FetchError& e) {
        REQUIRE(e.accession_id() == "0001-19-000001");
    }
    // 1 index GET + 3 attempts (initial + 2 retries)
    REQUIRE(transport.log.size() == 4);
    REQUIRE(clock.sleeps >= 2);  // exponential backoff slept between attempts
}

TEST_CASE("transient failures recover within the retry budget") {
    FakeClock clock;
    MockTransport transport(clock);
    transport.respond("https://data.sec.gov/submissions/CIK0000320193.json",
                      {200, submissions_json()});
    transport.respond_sequence("https://www.sec.gov/Archives/edgar/data/320193/000119000001.txt",
                               {{503, "busy"}, {200, "BODY OK"}});
    EdgarConfig cfg;
    cfg.agent = "t";
    EdgarClient client(cfg, transport, clock);
    DocumentStore store(temp_dir("edgar_transient"));
    std::size_t n = client.fetch({"320193"}, {FormType::TenK}, {"2019-01-01", "2019-12-31"},
                                 store, nullptr);
    REQUIRE(n == 1);
    REQUIRE(store.load_raw("0001-19-000001").body == "BODY OK");
}

TEST_CASE("malformed index raises a parse error naming the url") {
    FakeClock clock;
    MockTransport transport(clock);
    transport.respond("https://data.sec.gov/submissions/CIK0000000007.json", {200, "<html>oops"});
    EdgarConfig cfg;
    cfg.agent = "t";
    EdgarClient client(cfg, transport, clock);
    DocumentStore store(temp_dir("edgar_badindex"));
    try {
        client.fetch({"7"}, {FormType::TenK}, {"2019-01-01", "2019-12-31"}, store, nullptr);
        FAIL("expected IndexParseError");
    } catch (const IndexParseError& e) {
        REQUIRE(e.url() == "https://data.sec.gov/submissions/CIK0000000007.json");
    }
}

TEST_CASE("client requires an agent string") {
    FakeClock clock;
    MockTransport transport(clock);
    EdgarConfig cfg;  // empty agent
    REQUIRE_THROWS_AS(EdgarClient(cfg, transport, clock), ConfigError);
}

TEST_CASE("rate limiter stays under the ceiling in every 1s window") {
    FakeClock clock;
    RateLimiter limiter(10, clock);
    std::vector<std::uint64_t> stamps;
    for (int i = 0; i < 57; ++i) {
        limiter.acquire();
        stamps.push_back(clock.now_ms());
        if (i % 7 == 0) clock.tick(3);  // jitter
    }
    for (std::size_t i = 0; i < stamps.size(); ++i) {
        std::size_t in_window = 0;
        for (std::size_t j = 0; j < stamps.size(); ++j)
            if (stamps[j] >= stamps[i] && stamps[j] < stamps[i] + 1000) ++in_window;
        REQUIRE(in_window <= 10);
    }
}
