#pragma once

// Plain key=value configuration files ('#' comments, insertion order
// preserved). Used for benchmark plan files.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "finlm/util.hpp"
#include "finlm/text.hpp"

namespace finlm {

class KeyValueConfig {
public:
    static KeyValueConfig from_string(std::string_view data, const std::string& origin = "config") {
        KeyValueConfig cfg;
        std::size_t pos = 0, lineno = 0;
        while (pos < data.size()) {
            std::size_t eol = data.find('\n', pos);
            if (eol == std::string_view::npos) eol = data.size();
            std::string line = trim(data.substr(pos, eol - pos));
            pos = eol + 1;
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            std::size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw FormatError(origin + ": expected key=value", lineno);
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (key.empty()) throw FormatError(origin + ": empty key", lineno);
            cfg.set(key, value);
        }
        return cfg;
    }

    static KeyValueConfig from_file(const std::string& path) {
        return from_string(read_file(path), path);
    }

    void set(const std::string& key, std::string value) {
        for (auto& [k, v] : entries_)
            if (k == key) {
                v = std::move(value);
                return;
            }
        entries_.emplace_back(key, std::move(value));
    }

    bool has(const std::string& key) const { return find(key) != nullptr; }

    std::optional<std::string> get(const std::string& key) const {
        const std::string* v = find(key);
        return v ? std::optional<std::string>(*v) : std::nullopt;
    }

    std::string get_or(const std::string& key, const std::string& fallback) const {
        const std::string* v = find(key);
        return v ? *v : fallback;
    }

    std::string require(const std::string& key) const {
        const std::string* v = find(key);
        if (!v) throw ConfigError("missing required config field '" + key + "'");
        return *v;
    }

    double get_double(const std::string& key, double fallback) const {
        const std::string* v = find(key);
        return v ? std::stod(*v) : fallback;
    }

    std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
        const std::string* v = find(key);
        return v ? std::stoll(*v) : fallback;
    }

    // Keys of the form "<prefix>.<name>" (no further dots), insertion order.
    std::vector<std::string> names_under(const std::string& prefix) const {
        std::vector<std::string> names;
        for (const auto& [k, v] : entries_) {
            if (k.rfind(prefix + ".", 0) != 0) continue;
            std::string rest = k.substr(prefix.size() + 1);
            if (rest.find('.') == std::string::npos) names.push_back(rest);
        }
        return names;
    }

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

private:
    const std::string* find(const std::string& key) const {
        for (const auto& [k, v] : entries_)
            if (k == key) return &v;
        return nullptr;
    }

    std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace finlm
