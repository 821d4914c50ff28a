#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "srulab/csv.hpp"
#include "srulab/errors.hpp"

namespace srulab {

/// Ordered key=value settings. Text form: one `key=value` per line, `#` starts
/// a comment, surrounding whitespace is ignored.
class KeyValues {
public:
    void set(const std::string& key, std::string value) {
        auto it = index_.find(key);
        if (it == index_.end()) {
            index_[key] = entries_.size();
            entries_.emplace_back(key, std::move(value));
        } else {
            entries_[it->second].second = std::move(value);
        }
    }
    void set(const std::string& key, double v) { set(key, format_double(v)); }
    void set(const std::string& key, std::uint64_t v) { set(key, std::to_string(v)); }
    void set(const std::string& key, bool v) { set(key, std::string(v ? "true" : "false")); }
    void set(const std::string& key, const char* v) { set(key, std::string(v)); }

    bool has(const std::string& key) const { return index_.count(key) != 0; }
    const std::string& get(const std::string& key) const {
        auto it = index_.find(key);
        if (it == index_.end()) throw ConfigError("missing key '" + key + "'");
        return entries_[it->second].second;
    }
    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

    double get_double(const std::string& key) const {
        try {
            return parse_double(get(key));
        } catch (const FormatError&) {
            throw ConfigError("key '" + key + "' is not a number: " + get(key));
        }
    }
    std::uint64_t get_u64(const std::string& key) const {
        const auto& s = get(key);
        std::uint64_t v = 0;
        auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
            throw ConfigError("key '" + key + "' is not a non-negative integer: " + s);
        return v;
    }
    bool get_bool(const std::string& key) const {
        const auto& s = get(key);
        if (s == "true" || s == "1") return true;
        if (s == "false" || s == "0") return false;
        throw ConfigError("key '" + key + "' is not a boolean: " + s);
    }

    std::string to_string() const {
        std::ostringstream os;
        for (const auto& [k, v] : entries_) os << k << '=' << v << '\n';
        return os.str();
    }

    static KeyValues parse(const std::string& text, const std::string& source = "config") {
        KeyValues kv;
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const auto trim = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r");
                if (b == std::string::npos) return std::string{};
                const auto e = s.find_last_not_of(" \t\r");
                return s.substr(b, e - b + 1);
            };
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos || eq == 0)
                throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key=value");
            kv.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
        return kv;
    }

    static KeyValues load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str(), path);
    }

    void save(const std::string& path) const { write_text_file(path, to_string()); }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
    std::map<std::string, std::size_t> index_;
};

}  // namespace srulab
