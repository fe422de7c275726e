// Copyright 2026 The ccnn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ccnn/errors.hpp"

namespace ccnn {

/// Ordered key=value store backing the plain-text config files. Insertion
/// order is preserved so an echoed config is stable and diffable.
class KvConfig {
public:
    KvConfig() = default;

    static KvConfig parse_text(const std::string& text, const std::string& origin) {
        KvConfig cfg;
        std::size_t line_start = 0;
        while (line_start <= text.size()) {
            std::size_t nl = text.find('\n', line_start);
            if (nl == std::string::npos) nl = text.size();
            std::string line = text.substr(line_start, nl - line_start);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            const std::string stripped = strip(line);
            if (!stripped.empty() && stripped[0] != '#') {
                const std::size_t eq = stripped.find('=');
                if (eq == std::string::npos)
                    throw ParseError(origin + ": expected key=value, got '" + stripped + "'",
                                     line_start);
                const std::string key = strip(stripped.substr(0, eq));
                if (key.empty())
                    throw ParseError(origin + ": empty key", line_start);
                cfg.set(key, strip(stripped.substr(eq + 1)));
            }
            line_start = nl + 1;
        }
        return cfg;
    }

    static KvConfig load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw IoError("cannot open config '" + path + "'");
        std::ostringstream ss;
        ss << f.rdbuf();
        return parse_text(ss.str(), path);
    }

    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::trunc);
        if (!f) throw IoError("cannot open '" + path + "' for writing");
        for (const auto& [k, v] : entries_) f << k << "=" << v << "\n";
        if (!f) throw IoError("write failed for '" + path + "'");
    }

    bool has(const std::string& key) const { return find(key) != nullptr; }

    /// Sets or replaces, keeping the key's original position when replacing.
    void set(const std::string& key, const std::string& value) {
        for (auto& [k, v] : entries_)
            if (k == key) {
                v = value;
                return;
            }
        entries_.emplace_back(key, value);
    }

    void set_long(const std::string& key, long v) { set(key, std::to_string(v)); }
    void set_double(const std::string& key, double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        set(key, buf);
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const std::string* v = find(key);
        return v ? *v : fallback;
    }

    long get_long(const std::string& key, long fallback) const {
        const std::string* v = find(key);
        if (!v) return fallback;
        char* end = nullptr;
        const long r = std::strtol(v->c_str(), &end, 10);
        if (end == v->c_str() || *end != '\0')
            throw ParseError("config key '" + key + "': '" + *v + "' is not an integer", 0);
        return r;
    }

    double get_double(const std::string& key, double fallback) const {
        const std::string* v = find(key);
        if (!v) return fallback;
        char* end = nullptr;
        const double r = std::strtod(v->c_str(), &end);
        if (end == v->c_str() || *end != '\0')
            throw ParseError("config key '" + key + "': '" + *v + "' is not a number", 0);
        return r;
    }

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

private:
    static std::string strip(const std::string& s) {
        std::size_t a = 0, b = s.size();
        while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
        while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t')) --b;
        return s.substr(a, b - a);
    }

    const std::string* find(const std::string& key) const {
        for (const auto& [k, v] : entries_)
            if (k == key) return &v;
        return nullptr;
    }

    std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace ccnn
