#pragma once

// EDGAR client: fetches filing indexes and full-submission text from the
// SEC's public archive. Requests go through one rate-limited queue; the
// transport and clock are injectable so the client is testable offline.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "finlm/document.hpp"

namespace finlm::corpus {

class FetchError : public Error {
public:
    FetchError(const std::string& what, const std::string& accession_id)
        : Error("fetch failed for " + accession_id + ": " + what), accession_id_(accession_id) {}
    const std::string& accession_id() const { return accession_id_; }

private:
    std::string accession_id_;
};

class IndexParseError : public Error {
public:
    IndexParseError(const std::string& what, const std::string& url)
        : Error("malformed index at " + url + ": " + what), url_(url) {}
    const std::string& url() const { return url_; }

private:
    std::string url_;
};

// ------------------------------------------------------------- transport ---

struct HttpResponse {
    int status = 0;  // <= 0 means transport-level failure
    std::string body;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse get(const std::string& url,
                             const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

class Clock {
public:
    virtual ~Clock() = default;
    virtual std::uint64_t now_ms() = 0;
    virtual void sleep_ms(std::uint64_t ms) = 0;
};

class SystemClock : public Clock {
public:
    std::uint64_t now_ms() override {
        using namespace std::chrono;
        return static_cast<std::uint64_t>(
            duration_cast<milliseconds>(steady_clock::now().time_since_epoch()).count());
    }
    void sleep_ms(std::uint64_t ms) override {
        std::this_thread::sleep_for(std::chrono::milliseconds(ms));
    }
};

// At most max_per_second request starts in any 1-second sliding window.
class RateLimiter {
public:
    RateLimiter(unsigned max_per_second, Clock& clock)
        : max_(std::max(1u, max_per_second)), clock_(clock) {}

    void acquire() {
        std::uint64_t now = clock_.now_ms();
        prune(now);
        if (window_.size() >= max_) {
            std::uint64_t wake = window_.front() + 1000;
            if (wake > now) {
                clock_.sleep_ms(wake - now);
                now = clock_.now_ms();
            }
            prune(now);
        }
        window_.push_back(now);
    }

private:
    void prune(std::uint64_t now) {
        while (!window_.empty() && window_.front() + 1000 <= now) window_.pop_front();
    }

    unsigned max_;
    Clock& clock_;
    std::deque<std::uint64_t> window_;
};

// ---------------------------------------------------------------- client ---

struct EdgarConfig {
    std::string agent;            // mandatory caller identification
    unsigned requests_per_second = 10;
    unsigned max_retries = 3;
    std::uint64_t backoff_base_ms = 500;
    std::string index_base = "https://data.sec.gov/submissions/";
    std::string archive_base = "https://www.sec.gov/Archives/edgar/data/";
};

struct DateRange {
    std::string start;  // ISO-8601, inclusive
    std::string end;

    bool valid() const { return !start.empty() && !end.empty() && start <= end; }
    bool contains(const std::string& date) const { return date >= start && date <= end; }
};

class EdgarClient {
public:
    EdgarClient(EdgarConfig config, Transport& transport, Clock& clock)
        : config_(std::move(config)),
          transport_(transport),
          clock_(clock),
          limiter_(config_.requests_per_second, clock) {
        if (config_.agent.empty())
            throw ConfigError("EDGAR client requires a caller-identifying agent string");
    }

    // Yields filings matching the filters; each is persisted to the store
    // before the callback sees it.
    std::size_t fetch(const std::vector<std::string>& cik_list,
                      const std::set<FormType>& form_types, const DateRange& range,
                      DocumentStore& store, const std::function<void(const RawFiling&)>& sink) {
        if (!range.valid()) throw ConfigError("invalid date range");
        std::size_t count = 0;
        for (const std::string& cik : cik_list) {
            for (const FilingRef& ref : list_filings(cik, form_types, range)) {
                RawFiling filing = fetch_filing(ref);
                store.save_raw(filing);
                if (sink) sink(filing);
                ++count;
            }
        }
        return count;
    }

    struct FilingRef {
        std::string cik;
        std::string accession_id;
        FormType form_type = FormType::TenK;
        std::string period_end;
    };

    std::vector<FilingRef> list_filings(const std::string& cik,
                                        const std::set<FormType>& form_types,
                                        const DateRange& range) {
        std::string url = config_.index_base + "CIK" + pad_cik(cik) + ".json";
        std::string body = get_with_retry(url, "index for CIK " + cik);
        std::vector<FilingRef> refs;
        try {
            json j = json::parse(body);
            const json& recent = j.at("filings").at("recent");
            const json& forms = recent.at("form");
            const json& accessions = recent.at("accessionNumber");
            const json& report_dates = recent.at("reportDate");
            for (std::size_t i = 0; i < forms.size(); ++i) {
                std::string form = forms[i].get<std::string>();
                FormType ft;
                if (form == "10-K") ft = FormType::TenK;
                else if (form == "10-Q") ft = FormType::TenQ;
                else continue;
                if (!form_types.empty() && !form_types.count(ft)) continue;
                std::string date = report_dates[i].get<std::string>();
                if (!range.contains(date)) continue;
                refs.push_back({cik, accessions[i].get<std::string>(), ft, date});
            }
        } catch (const json::exception& e) {
            throw IndexParseError(e.what(), url);
        }
        return refs;
    }

    RawFiling fetch_filing(const FilingRef& ref) {
        std::string nodash = ref.accession_id;
        nodash.erase(std::remove(nodash.begin(), nodash.end(), '-'), nodash.end());
        std::string url =
            config_.archive_base + strip_leading_zeros(ref.cik) + "/" + nodash + ".txt";
        std::string body;
        try {
            body = get_with_retry(url, ref.accession_id);
        } catch (const Error& e) {
            throw FetchError(e.what(), ref.accession_id);
        }
        if (body.empty()) throw FetchError("empty body", ref.accession_id);
        return {ref.accession_id, ref.cik, ref.form_type, ref.period_end, std::move(body)};
    }

private:
    std::string get_with_retry(const std::string& url, const std::string& what) {
        std::vector<std::pair<std::string, std::string>> headers = {
            {"User-Agent", config_.agent}, {"Accept-Encoding", "identity"}};
        for (unsigned attempt = 0;; ++attempt) {
            limiter_.acquire();
            HttpResponse r = transport_.get(url, headers);
            if (r.status == 200) return std::move(r.body);
            if (attempt >= config_.max_retries)
                throw Error("GET " + url + " failed for " + what + " (status " +
                            std::to_string(r.status) + ") after " +
                            std::to_string(attempt + 1) + " attempts");
            clock_.sleep_ms(config_.backoff_base_ms << attempt);
        }
    }

    static std::string pad_cik(const std::string& cik) {
        std::string digits = strip_leading_zeros(cik);
        return std::string(digits.size() < 10 ? 10 - digits.size() : 0, '0') + digits;
    }

    static std::string strip_leading_zeros(const std::string& s) {
        std::size_t i = 0;
        while (i + 1 < s.size() && s[i] == '0') ++i;
        return s.substr(i);
    }

    EdgarConfig config_;
    Transport& transport_;
    Clock& clock_;
    RateLimiter limiter_;
};

}  // namespace finlm::corpus
