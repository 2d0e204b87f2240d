#pragma once

// Real HTTPS transport for the EDGAR client (cpp-httplib + OpenSSL).
// Kept out of edgar.hpp so tests with mock transports build without it.

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <string>

#include "finlm/edgar.hpp"

namespace finlm::corpus {

class HttplibTransport : public Transport {
public:
    HttpResponse get(const std::string& url,
                     const std::vector<std::pair<std::string, std::string>>& headers) override {
        std::size_t scheme_end = url.find("://");
        if (scheme_end == std::string::npos) return {-1, "bad url: " + url};
        std::size_t host_start = scheme_end + 3;
        std::size_t path_start = url.find('/', host_start);
        std::string origin = url.substr(0, path_start == std::string::npos ? url.size() : path_start);
        std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

        httplib::Client client(origin);
        client.set_follow_location(true);
        client.set_connection_timeout(30);
        client.set_read_timeout(60);
        httplib::Headers h;
        for (const auto& [k, v] : headers) h.emplace(k, v);
        httplib::Result res = client.Get(path, h);
        if (!res) return {-1, httplib::to_string(res.error())};
        return {res->status, res->body};
    }
};

}  // namespace finlm::corpus
